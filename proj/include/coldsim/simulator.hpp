#pragma once

#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "coldsim/cache.hpp"
#include "coldsim/locality.hpp"
#include "coldsim/trace.hpp"

namespace coldsim {

// Handler entries never expire.
inline constexpr std::int64_t kKeepAliveForever = std::numeric_limits<std::int64_t>::max();
inline constexpr std::int64_t kDefaultKeepAliveMs = 600'000;

enum class RoutingPolicy { LeastLoaded, HandlerAffinity };

const char* routing_policy_name(RoutingPolicy policy);

struct SimConfig {
    Partition partition;
    std::uint64_t handler_capacity_bytes = 1 * kGiB;
    std::uint64_t install_capacity_bytes = 1 * kGiB;
    std::size_t import_max_nodes = 64;
    std::int64_t keep_alive_ms = kDefaultKeepAliveMs;
    LatencyModel latency_model = LatencyModel::fig1_calibration();
    RoutingPolicy routing_policy = RoutingPolicy::HandlerAffinity;
    std::uint64_t seed = 0;
    std::uint64_t default_footprint_bytes = kDefaultFootprintBytes;
    std::uint64_t package_size_bytes = kDefaultPackageBytes;
};

struct Worker {
    std::uint64_t worker_id = 0;
    std::size_t group_index = 0;
    TierCaches caches;
    std::int64_t busy_until_ms = 0;
    // Start times of routed requests; entries after the current clock are queued.
    std::deque<std::int64_t> pending_starts;

    Worker(std::uint64_t id, std::size_t group, const SimConfig& config);

    std::size_t queue_length(std::int64_t now_ms);
};

struct RequestOutcome {
    std::int64_t timestamp_ms = 0;
    std::string function_id;
    std::uint64_t worker_id = 0;
    Tier tier = Tier::Miss;
    LatencyBreakdown init;
    std::uint64_t exec_ms = 0;
    std::uint64_t shutdown_ms = 0;
    std::uint64_t total_ms = 0;  // init + exec + shutdown
    std::int64_t start_ms = 0;   // service start on the worker
    std::int64_t end_ms = 0;     // start + init + exec; the worker is free again

    friend bool operator==(const RequestOutcome&, const RequestOutcome&) = default;
};

struct SimAggregates {
    std::uint64_t requests = 0;
    std::map<Tier, double> hit_rate_by_tier;
    std::optional<double> mean_init_ms;
    std::optional<std::uint64_t> median_init_ms;
    std::optional<std::uint64_t> p99_init_ms;
    // Requests that needed a new instance (anything but a handler hit).
    std::optional<double> cold_start_fraction;

    friend bool operator==(const SimAggregates&, const SimAggregates&) = default;
};

struct SimResult {
    std::vector<RequestOutcome> per_request;
    SimAggregates aggregates;
};

SimAggregates aggregate(const std::vector<RequestOutcome>& outcomes);

// Picks the worker in the function's group. Throws InputError for
// "unpartitioned function".
std::uint64_t route(const std::string& function_id, std::int64_t now_ms,
                    const Partition& partition, std::vector<Worker>& workers,
                    RoutingPolicy policy, std::int64_t keep_alive_ms);

SimResult run(const Trace& trace, const ProfileCatalog& profiles, const SimConfig& config);

// One global LRU keyed by function id, `capacity_entries` slots.
std::uint64_t simple_lru_hits(const Trace& trace, std::uint64_t capacity_entries);
double simple_lru_hit_rate(const Trace& trace, std::uint64_t capacity_entries);

struct SweepPoint {
    std::uint64_t cache_bytes = 0;
    std::uint64_t hits = 0;
    std::uint64_t requests = 0;
    double hit_rate = 0.0;
};

// threads == 0 uses hardware concurrency.
std::vector<SweepPoint> sweep_cache_sizes(const Trace& trace, std::vector<std::uint64_t> sizes_bytes,
                                          std::uint64_t footprint_bytes = kDefaultFootprintBytes,
                                          unsigned threads = 1);

}  // namespace coldsim
