#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace coldsim {

struct RequestRecord {
    std::int64_t timestamp_ms = 0;
    std::string function_id;

    friend bool operator==(const RequestRecord&, const RequestRecord&) = default;
};

// Records are sorted by timestamp_ms; ties keep their input order.
struct Trace {
    std::vector<RequestRecord> records;
    std::string source_label;

    bool empty() const noexcept { return records.empty(); }
    std::size_t size() const noexcept { return records.size(); }
};

using RuntimeTag = std::string;

struct FunctionProfile {
    std::string function_id;
    RuntimeTag runtime = "python";
    std::set<std::string> dependencies;
    std::uint64_t code_size_kb = 0;
    std::uint64_t exec_duration_ms = 0;
    // Instance memory held by the handler cache; 0 means the simulation default.
    std::uint64_t footprint_bytes = 0;

    friend bool operator==(const FunctionProfile&, const FunctionProfile&) = default;
};

// Keyed by function_id, which makes ids unique by construction.
using ProfileCatalog = std::map<std::string, FunctionProfile>;

struct SyntheticTraceSpec {
    std::uint64_t num_functions = 1;
    std::uint64_t num_requests = 1;
    double zipf_exponent = 1.0;
    std::int64_t duration_ms = 86'400'000;
    std::uint64_t seed = 0;
};

struct ProfileSynthesisSpec {
    std::uint64_t catalog_size = 100;
    std::uint64_t deps_min = 1;
    std::uint64_t deps_max = 5;
    double package_zipf_exponent = 1.0;
    std::uint64_t seed = 0;
    RuntimeTag runtime = "python";
    std::uint64_t code_size_kb = 64;
    std::uint64_t exec_duration_ms = 63;
};

struct SkewSummary {
    // (fraction_of_functions, fraction_of_requests), one point per popularity rank.
    std::vector<std::pair<double, double>> cdf_points;
    // target request fraction -> smallest function fraction reaching it.
    std::map<double, double> thresholds;
};

inline const std::vector<double> kDefaultSkewTargets{0.5, 0.8};

// Normalized CSV: header `timestamp_ms,function_id`. Rows need not be sorted.
Trace parse_trace(std::istream& in, std::string label = {});
void write_trace(std::ostream& out, const Trace& trace);

Trace generate_synthetic(const SyntheticTraceSpec& spec);

// Synthetic function ids are zero-padded to at least four digits.
std::string synthetic_function_id(std::uint64_t rank, std::uint64_t num_functions);

SkewSummary popularity_cdf(const Trace& trace,
                           const std::vector<double>& targets = kDefaultSkewTargets);

// Request count per function id.
std::map<std::string, std::uint64_t> request_counts(const Trace& trace);

ProfileCatalog synthesize_profiles(const Trace& trace, const ProfileSynthesisSpec& spec);

// Profile CSV: `function_id,runtime,code_size_kb,exec_duration_ms,dependencies`,
// dependencies joined with ';'.
ProfileCatalog parse_profiles(std::istream& in);
void write_profiles(std::ostream& out, const ProfileCatalog& catalog);

}  // namespace coldsim
