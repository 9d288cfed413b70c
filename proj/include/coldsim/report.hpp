#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "coldsim/locality.hpp"
#include "coldsim/simulator.hpp"
#include "coldsim/trace.hpp"

namespace coldsim {

// hits / total rounded half-even to six decimals, e.g. "0.666667".
std::string format_rate(std::uint64_t hits, std::uint64_t total);

nlohmann::ordered_json skew_summary_json(const SkewSummary& summary);

nlohmann::ordered_json partition_json(const Partition& partition);
Partition parse_partition(std::istream& in);

// Keys: handler_capacity, install_capacity, default_footprint, package_size
// (bytes or IEC strings), import_max_nodes, keep_alive_ms (integer or
// "forever"), routing, seed, latency_model (object; a string names a preset
// file resolved relative to `base_dir`, or the built-in "fig1_calibration").
// The partition is supplied separately.
SimConfig parse_sim_config(std::istream& in, const std::string& base_dir = ".");
nlohmann::ordered_json sim_config_json(const SimConfig& config);

nlohmann::ordered_json sim_aggregates_json(const SimAggregates& aggregates);
void write_per_request_csv(std::ostream& out, const std::vector<RequestOutcome>& outcomes);
void write_sweep_csv(std::ostream& out, const std::vector<SweepPoint>& points);

struct RunManifest {
    std::string command;
    std::string config_digest;
    std::vector<std::string> input_paths;
    std::vector<std::string> output_paths;
    std::uint64_t seed = 0;
    std::string tool_version;
};

// Lowercase hex SHA-256 of the compact dump of `resolved_config`.
std::string config_digest(const nlohmann::ordered_json& resolved_config);
nlohmann::ordered_json manifest_json(const RunManifest& manifest);

}  // namespace coldsim
