#include "coldsim/trace.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>
#include <random>
#include <string_view>

#include "coldsim/error.hpp"
#include "coldsim/sampling.hpp"

namespace coldsim {

namespace {

constexpr std::string_view kTraceHeader = "timestamp_ms,function_id";
constexpr std::string_view kProfileHeader =
    "function_id,runtime,code_size_kb,exec_duration_ms,dependencies";

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

template <typename Int>
bool parse_int(std::string_view text, Int& out) {
    if (text.empty()) return false;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc{} && ptr == text.data() + text.size();
}

// Reads the next line with any trailing '\r' removed. Returns false at EOF.
bool next_line(std::istream& in, std::string& line) {
    if (!std::getline(in, line)) return false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
}

std::string padded_id(std::string_view prefix, std::uint64_t index, std::uint64_t count) {
    std::size_t width = 4;
    std::uint64_t largest = count == 0 ? 0 : count - 1;
    std::size_t digits = 1;
    while (largest >= 10) {
        largest /= 10;
        ++digits;
    }
    width = std::max(width, digits);
    std::string number = std::to_string(index);
    std::string id(prefix);
    id.append(width - std::min(width, number.size()), '0');
    id += number;
    return id;
}

}  // namespace

Trace parse_trace(std::istream& in, std::string label) {
    Trace trace;
    trace.source_label = std::move(label);
    std::string line;
    std::size_t line_no = 1;
    if (!next_line(in, line)) return trace;
    if (line != kTraceHeader) {
        throw ParseError(line_no, "expected header '" + std::string(kTraceHeader) + "'");
    }
    while (next_line(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split(line, ',');
        if (fields.size() != 2) {
            throw ParseError(line_no, "expected 2 columns, got " + std::to_string(fields.size()));
        }
        RequestRecord record;
        if (!parse_int(fields[0], record.timestamp_ms) || record.timestamp_ms < 0) {
            throw ParseError(line_no, "timestamp_ms must be a non-negative integer");
        }
        if (fields[1].empty()) throw ParseError(line_no, "empty function_id");
        record.function_id = std::string(fields[1]);
        trace.records.push_back(std::move(record));
    }
    std::stable_sort(trace.records.begin(), trace.records.end(),
                     [](const RequestRecord& a, const RequestRecord& b) {
                         return a.timestamp_ms < b.timestamp_ms;
                     });
    return trace;
}

void write_trace(std::ostream& out, const Trace& trace) {
    out << kTraceHeader << '\n';
    for (const auto& r : trace.records) out << r.timestamp_ms << ',' << r.function_id << '\n';
}

std::string synthetic_function_id(std::uint64_t rank, std::uint64_t num_functions) {
    return padded_id("f", rank, num_functions);
}

Trace generate_synthetic(const SyntheticTraceSpec& spec) {
    if (spec.num_functions < 1) throw InputError("num_functions must be >= 1");
    if (spec.num_requests < 1) throw InputError("num_requests must be >= 1");
    if (spec.duration_ms < 1) throw InputError("duration_ms must be >= 1");

    const ZipfTable zipf(spec.num_functions, spec.zipf_exponent);
    std::vector<std::string> ids;
    ids.reserve(spec.num_functions);
    for (std::uint64_t r = 0; r < spec.num_functions; ++r) {
        ids.push_back(synthetic_function_id(r, spec.num_functions));
    }

    std::mt19937_64 engine(spec.seed);
    Trace trace;
    trace.source_label = "synthetic";
    trace.records.reserve(spec.num_requests);
    const double duration = static_cast<double>(spec.duration_ms);
    for (std::uint64_t i = 0; i < spec.num_requests; ++i) {
        const std::uint64_t rank = zipf.sample(engine);
        auto ts = static_cast<std::int64_t>(unit_uniform(engine) * duration);
        ts = std::min(ts, spec.duration_ms - 1);
        trace.records.push_back({ts, ids[rank]});
    }
    std::stable_sort(trace.records.begin(), trace.records.end(),
                     [](const RequestRecord& a, const RequestRecord& b) {
                         return a.timestamp_ms < b.timestamp_ms;
                     });
    return trace;
}

std::map<std::string, std::uint64_t> request_counts(const Trace& trace) {
    std::map<std::string, std::uint64_t> counts;
    for (const auto& r : trace.records) ++counts[r.function_id];
    return counts;
}

SkewSummary popularity_cdf(const Trace& trace, const std::vector<double>& targets) {
    if (trace.empty()) throw InputError("empty trace");
    for (double t : targets) {
        if (!(t > 0.0 && t <= 1.0)) throw InputError("skew targets must lie in (0, 1]");
    }

    const auto counts = request_counts(trace);
    std::vector<std::pair<std::string, std::uint64_t>> ranked(counts.begin(), counts.end());
    // Map order already gives function_id ascending; stable sort keeps it for ties.
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });

    const auto n = static_cast<double>(ranked.size());
    const auto total = static_cast<double>(trace.size());
    SkewSummary summary;
    summary.cdf_points.reserve(ranked.size());
    std::uint64_t cumulative = 0;
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        cumulative += ranked[i].second;
        summary.cdf_points.emplace_back(static_cast<double>(i + 1) / n,
                                        static_cast<double>(cumulative) / total);
    }
    summary.cdf_points.back() = {1.0, 1.0};

    for (double target : targets) {
        // Compare on counts: cumulative >= target * total, with a relative slack
        // so that e.g. 0.8 * 5 is treated as exactly 4.
        const double needed = target * total * (1.0 - 1e-12);
        cumulative = 0;
        for (std::size_t i = 0; i < ranked.size(); ++i) {
            cumulative += ranked[i].second;
            if (static_cast<double>(cumulative) >= needed) {
                summary.thresholds[target] = summary.cdf_points[i].first;
                break;
            }
        }
    }
    return summary;
}

ProfileCatalog synthesize_profiles(const Trace& trace, const ProfileSynthesisSpec& spec) {
    if (trace.empty()) throw InputError("empty trace");
    if (spec.catalog_size < 1) throw InputError("catalog_size must be >= 1");
    if (spec.deps_min > spec.deps_max) throw InputError("deps_min exceeds deps_max");
    if (spec.deps_max > spec.catalog_size) {
        throw InputError("deps_max exceeds catalog_size");
    }

    const ZipfTable zipf(spec.catalog_size, spec.package_zipf_exponent);
    std::vector<double> base_weights(spec.catalog_size);
    std::vector<std::string> packages(spec.catalog_size);
    for (std::uint64_t p = 0; p < spec.catalog_size; ++p) {
        base_weights[p] = zipf.probability(p);
        packages[p] = padded_id("pkg", p, spec.catalog_size);
    }

    std::mt19937_64 engine(spec.seed);
    const std::uint64_t span = spec.deps_max - spec.deps_min + 1;
    ProfileCatalog catalog;
    for (const auto& [function_id, count] : request_counts(trace)) {
        FunctionProfile profile;
        profile.function_id = function_id;
        profile.runtime = spec.runtime;
        profile.code_size_kb = spec.code_size_kb;
        profile.exec_duration_ms = spec.exec_duration_ms;

        auto offset = static_cast<std::uint64_t>(unit_uniform(engine) * static_cast<double>(span));
        const std::uint64_t num_deps = spec.deps_min + std::min(offset, span - 1);

        // Weighted draws without replacement: zero out each chosen package.
        std::vector<double> weights = base_weights;
        for (std::uint64_t k = 0; k < num_deps; ++k) {
            double remaining = 0.0;
            for (double w : weights) remaining += w;
            const double target = unit_uniform(engine) * remaining;
            double acc = 0.0;
            std::size_t chosen = weights.size();
            std::size_t last_positive = 0;
            for (std::size_t p = 0; p < weights.size(); ++p) {
                if (weights[p] <= 0.0) continue;
                last_positive = p;
                acc += weights[p];
                if (target < acc) {
                    chosen = p;
                    break;
                }
            }
            if (chosen == weights.size()) chosen = last_positive;
            weights[chosen] = 0.0;
            profile.dependencies.insert(packages[chosen]);
        }
        catalog.emplace(function_id, std::move(profile));
    }
    return catalog;
}

ProfileCatalog parse_profiles(std::istream& in) {
    ProfileCatalog catalog;
    std::string line;
    std::size_t line_no = 1;
    if (!next_line(in, line)) return catalog;
    if (line != kProfileHeader) {
        throw ParseError(line_no, "expected header '" + std::string(kProfileHeader) + "'");
    }
    while (next_line(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split(line, ',');
        if (fields.size() != 5) {
            throw ParseError(line_no, "expected 5 columns, got " + std::to_string(fields.size()));
        }
        FunctionProfile profile;
        if (fields[0].empty()) throw ParseError(line_no, "empty function_id");
        if (fields[1].empty()) throw ParseError(line_no, "empty runtime");
        profile.function_id = std::string(fields[0]);
        profile.runtime = std::string(fields[1]);
        if (!parse_int(fields[2], profile.code_size_kb)) {
            throw ParseError(line_no, "code_size_kb must be a non-negative integer");
        }
        if (!parse_int(fields[3], profile.exec_duration_ms)) {
            throw ParseError(line_no, "exec_duration_ms must be a non-negative integer");
        }
        if (!fields[4].empty()) {
            for (auto dep : split(fields[4], ';')) {
                if (dep.empty()) throw ParseError(line_no, "empty dependency name");
                if (!profile.dependencies.emplace(dep).second) {
                    throw ParseError(line_no, "duplicate dependency '" + std::string(dep) + "'");
                }
            }
        }
        const std::string id = profile.function_id;
        if (!catalog.emplace(id, std::move(profile)).second) {
            throw ParseError(line_no, "duplicate function_id '" + id + "'");
        }
    }
    return catalog;
}

void write_profiles(std::ostream& out, const ProfileCatalog& catalog) {
    out << kProfileHeader << '\n';
    for (const auto& [id, p] : catalog) {
        out << id << ',' << p.runtime << ',' << p.code_size_kb << ',' << p.exec_duration_ms << ',';
        bool first = true;
        for (const auto& dep : p.dependencies) {
            if (!first) out << ';';
            out << dep;
            first = false;
        }
        out << '\n';
    }
}

}  // namespace coldsim
