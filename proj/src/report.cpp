#include "coldsim/report.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <openssl/evp.h>

#include "coldsim/error.hpp"
#include "coldsim/units.hpp"

namespace coldsim {

std::string format_rate(std::uint64_t hits, std::uint64_t total) {
    if (total == 0) throw InputError("hit rate over zero requests");
    constexpr std::uint64_t kScale = 1'000'000;
    const auto scaled = static_cast<unsigned __int128>(hits) * kScale;
    auto q = static_cast<std::uint64_t>(scaled / total);
    const auto r = static_cast<std::uint64_t>(scaled % total);
    const unsigned __int128 twice = static_cast<unsigned __int128>(r) * 2;
    if (twice > total || (twice == total && (q % 2 == 1))) ++q;
    std::ostringstream os;
    os << q / kScale << '.' << std::setw(6) << std::setfill('0') << q % kScale;
    return os.str();
}

namespace {

std::string target_key(double target) {
    // Shortest round-trip form, so 0.5 prints as "0.5".
    return nlohmann::json(target).dump();
}

std::uint64_t size_field(const nlohmann::json& value, const char* key) {
    if (value.is_number_unsigned()) return value.get<std::uint64_t>();
    if (value.is_string()) return parse_size(value.get<std::string>());
    throw InputError(std::string("config: ") + key + " must be a byte count or size string");
}

}  // namespace

nlohmann::ordered_json skew_summary_json(const SkewSummary& summary) {
    nlohmann::ordered_json doc;
    doc["cdf"] = nlohmann::ordered_json::array();
    for (const auto& [f, r] : summary.cdf_points) doc["cdf"].push_back({f, r});
    doc["thresholds"] = nlohmann::ordered_json::object();
    for (const auto& [target, fraction] : summary.thresholds) {
        doc["thresholds"][target_key(target)] = fraction;
    }
    return doc;
}

nlohmann::ordered_json partition_json(const Partition& partition) {
    nlohmann::ordered_json doc;
    doc["groups"] = nlohmann::ordered_json::array();
    for (const auto& g : partition.groups) {
        nlohmann::ordered_json group;
        group["id"] = g.group_id;
        group["runtime"] = g.runtime;
        group["functions"] = g.function_ids;
        group["workers"] = g.worker_count;
        doc["groups"].push_back(std::move(group));
    }
    return doc;
}

Partition parse_partition(std::istream& in) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError(std::string("partition: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("groups") || !doc["groups"].is_array()) {
        throw InputError("partition: expected {\"groups\": [...]}");
    }
    Partition partition;
    try {
        for (const auto& g : doc["groups"]) {
            LocalityGroup group;
            group.group_id = g.at("id").get<int>();
            group.runtime = g.at("runtime").get<std::string>();
            group.function_ids = g.at("functions").get<std::vector<std::string>>();
            group.worker_count = g.at("workers").get<std::uint64_t>();
            std::sort(group.function_ids.begin(), group.function_ids.end());
            partition.total_workers += group.worker_count;
            partition.groups.push_back(std::move(group));
        }
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("partition: ") + e.what());
    }
    return partition;
}

SimConfig parse_sim_config(std::istream& in, const std::string& base_dir) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError(std::string("config: ") + e.what());
    }
    if (!doc.is_object()) throw InputError("config: expected a JSON object");

    SimConfig config;
    for (const auto& [key, value] : doc.items()) {
        if (key == "handler_capacity") {
            config.handler_capacity_bytes = size_field(value, "handler_capacity");
        } else if (key == "install_capacity") {
            config.install_capacity_bytes = size_field(value, "install_capacity");
        } else if (key == "default_footprint") {
            config.default_footprint_bytes = size_field(value, "default_footprint");
        } else if (key == "package_size") {
            config.package_size_bytes = size_field(value, "package_size");
        } else if (key == "import_max_nodes") {
            if (!value.is_number_unsigned() || value.get<std::uint64_t>() < 1) {
                throw InputError("config: import_max_nodes must be a positive integer");
            }
            config.import_max_nodes = value.get<std::size_t>();
        } else if (key == "keep_alive_ms") {
            if (value.is_string() && value.get<std::string>() == "forever") {
                config.keep_alive_ms = kKeepAliveForever;
            } else if (value.is_number_unsigned()) {
                config.keep_alive_ms = value.get<std::int64_t>();
            } else {
                throw InputError("config: keep_alive_ms must be a non-negative integer or \"forever\"");
            }
        } else if (key == "routing") {
            const auto name = value.is_string() ? value.get<std::string>() : std::string();
            if (name == "HandlerAffinity") {
                config.routing_policy = RoutingPolicy::HandlerAffinity;
            } else if (name == "LeastLoaded") {
                config.routing_policy = RoutingPolicy::LeastLoaded;
            } else {
                throw InputError("config: routing must be HandlerAffinity or LeastLoaded");
            }
        } else if (key == "seed") {
            if (!value.is_number_unsigned()) throw InputError("config: seed must be an unsigned integer");
            config.seed = value.get<std::uint64_t>();
        } else if (key == "latency_model") {
            if (value.is_object()) {
                std::istringstream model(value.dump());
                config.latency_model = load_latency_model(model);
            } else if (value.is_string()) {
                const auto name = value.get<std::string>();
                if (name == "fig1_calibration") {
                    config.latency_model = LatencyModel::fig1_calibration();
                } else {
                    const std::string path = name.starts_with('/') ? name : base_dir + "/" + name;
                    std::ifstream file(path);
                    if (!file) throw InputError("cannot open latency model " + path);
                    config.latency_model = load_latency_model(file);
                }
            } else {
                throw InputError("config: latency_model must be an object or a preset path");
            }
        } else {
            throw InputError("config: unknown key " + key);
        }
    }
    config.latency_model.validate();
    return config;
}

nlohmann::ordered_json sim_config_json(const SimConfig& config) {
    nlohmann::ordered_json doc;
    doc["handler_capacity"] = config.handler_capacity_bytes;
    doc["install_capacity"] = config.install_capacity_bytes;
    doc["default_footprint"] = config.default_footprint_bytes;
    doc["package_size"] = config.package_size_bytes;
    doc["import_max_nodes"] = config.import_max_nodes;
    if (config.keep_alive_ms == kKeepAliveForever) {
        doc["keep_alive_ms"] = "forever";
    } else {
        doc["keep_alive_ms"] = config.keep_alive_ms;
    }
    doc["routing"] = routing_policy_name(config.routing_policy);
    doc["seed"] = config.seed;
    std::ostringstream model;
    write_latency_model(model, config.latency_model);
    doc["latency_model"] = nlohmann::ordered_json::parse(model.str());
    doc["partition"] = partition_json(config.partition);
    return doc;
}

nlohmann::ordered_json sim_aggregates_json(const SimAggregates& aggregates) {
    nlohmann::ordered_json doc;
    doc["requests"] = aggregates.requests;
    doc["hit_rate_by_tier"] = nlohmann::ordered_json::object();
    for (const auto& [tier, rate] : aggregates.hit_rate_by_tier) {
        doc["hit_rate_by_tier"][tier_name(tier)] = rate;
    }
    auto optional = [](const auto& v) -> nlohmann::ordered_json {
        if (v) return *v;
        return nullptr;
    };
    doc["mean_init_ms"] = optional(aggregates.mean_init_ms);
    doc["median_init_ms"] = optional(aggregates.median_init_ms);
    doc["p99_init_ms"] = optional(aggregates.p99_init_ms);
    doc["cold_start_fraction"] = optional(aggregates.cold_start_fraction);
    return doc;
}

void write_per_request_csv(std::ostream& out, const std::vector<RequestOutcome>& outcomes) {
    out << "timestamp_ms,function_id,worker_id,tier,load_ms,download_ms,install_ms,import_ms,"
           "create_ms,exec_ms,shutdown_ms,total_ms\n";
    for (const auto& o : outcomes) {
        out << o.timestamp_ms << ',' << o.function_id << ',' << o.worker_id << ','
            << tier_name(o.tier) << ',' << o.init.load_ms << ',' << o.init.download_ms << ','
            << o.init.install_ms << ',' << o.init.import_ms << ',' << o.init.create_ms << ','
            << o.exec_ms << ',' << o.shutdown_ms << ',' << o.total_ms << '\n';
    }
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepPoint>& points) {
    out << "cache_bytes,hit_rate\n";
    for (const auto& p : points) out << p.cache_bytes << ',' << format_rate(p.hits, p.requests) << '\n';
}

std::string config_digest(const nlohmann::ordered_json& resolved_config) {
    const std::string text = resolved_config.dump();
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(text.data(), text.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("sha256 failed");
    }
    std::ostringstream hex;
    for (unsigned int i = 0; i < length; ++i) {
        hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    }
    return hex.str();
}

nlohmann::ordered_json manifest_json(const RunManifest& manifest) {
    nlohmann::ordered_json doc;
    doc["command"] = manifest.command;
    doc["config_digest"] = manifest.config_digest;
    doc["input_paths"] = manifest.input_paths;
    doc["output_paths"] = manifest.output_paths;
    doc["seed"] = manifest.seed;
    doc["tool_version"] = manifest.tool_version;
    return doc;
}

}  // namespace coldsim
