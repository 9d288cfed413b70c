#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "coldsim/trace.hpp"

namespace coldsim {

// Request count (or any non-negative load) per function id.
using Popularity = std::map<std::string, std::uint64_t>;

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b);

// Undirected similarity graph over functions. Only positive weights are stored;
// each edge appears once with a < b (indices into the sorted node list).
class DependencyGraph {
public:
    struct Edge {
        std::uint32_t a = 0;
        std::uint32_t b = 0;
        double weight = 0.0;
    };

    DependencyGraph() = default;
    DependencyGraph(std::vector<std::string> nodes, std::vector<Edge> edges);

    const std::vector<std::string>& nodes() const noexcept { return nodes_; }
    const std::vector<Edge>& edges() const noexcept { return edges_; }
    std::optional<std::uint32_t> index_of(const std::string& function_id) const;

    // 0 for absent pairs, unknown ids and f == g.
    double weight(const std::string& f, const std::string& g) const;

private:
    std::vector<std::string> nodes_;
    std::vector<Edge> edges_;
};

DependencyGraph build_dependency_graph(const ProfileCatalog& profiles);

struct LocalityGroup {
    int group_id = 0;
    RuntimeTag runtime;
    std::vector<std::string> function_ids;  // sorted ascending
    std::uint64_t worker_count = 1;

    friend bool operator==(const LocalityGroup&, const LocalityGroup&) = default;
};

struct Partition {
    std::vector<LocalityGroup> groups;
    std::uint64_t total_workers = 0;

    // Index into `groups` owning the function, if any.
    std::optional<std::size_t> group_index_of(const std::string& function_id) const;

    friend bool operator==(const Partition&, const Partition&) = default;
};

enum class LoadWeighting {
    Requests,
    // request count x exec_duration_ms, falling back to Requests when any
    // profile in the catalog lacks a duration.
    RequestsTimesDuration,
};

struct PartitionOptions {
    bool retain_empty_groups = false;
    LoadWeighting weighting = LoadWeighting::RequestsTimesDuration;
};

enum class PartitionStrategy { RoundRobin, Clustered };

// Largest-remainder apportionment of total_workers over the groups' summed
// popularity, with at least one worker per group. Zero total load splits equally.
std::vector<std::uint64_t> allocate_workers(const std::vector<std::vector<std::string>>& groups,
                                            std::uint64_t total_workers,
                                            const Popularity& popularity);

// Same rule on precomputed group loads.
std::vector<std::uint64_t> apportion(const std::vector<std::uint64_t>& loads,
                                     std::uint64_t total_workers);

Partition partition_round_robin(const ProfileCatalog& profiles, std::uint64_t groups_per_runtime,
                                std::uint64_t total_workers, const Popularity& popularity,
                                const PartitionOptions& options = {});

// Greedy average-linkage agglomeration within each runtime class.
Partition partition_clustered(const DependencyGraph& graph, const ProfileCatalog& profiles,
                              std::uint64_t groups_per_runtime, std::uint64_t total_workers,
                              const Popularity& popularity, const PartitionOptions& options = {});

// Popularity as used for worker allocation under the given weighting.
Popularity weighted_load(const ProfileCatalog& profiles, const Popularity& popularity,
                         LoadWeighting weighting);

struct RebalanceConfig {
    double drift_threshold = 0.1;
    PartitionStrategy strategy = PartitionStrategy::Clustered;
    PartitionOptions options;
};

// Fraction of window requests that hit groups whose load rank changed between
// the baseline and the window popularity.
double partition_drift(const Partition& partition, const Popularity& baseline,
                       const Popularity& window, const ProfileCatalog& profiles,
                       LoadWeighting weighting);

Partition rebalance(const Partition& partition, const Popularity& baseline,
                    const Popularity& window, const DependencyGraph& graph,
                    const ProfileCatalog& profiles, const RebalanceConfig& config = {});

// Empty when the partition is a valid disjoint, covering, runtime-pure
// assignment of the catalog with a consistent worker sum.
std::vector<std::string> partition_violations(const Partition& partition,
                                              const ProfileCatalog& profiles);

// Mean Jaccard over all unordered same-group function pairs; 0 if there are none.
double mean_intra_group_similarity(const Partition& partition, const DependencyGraph& graph);

}  // namespace coldsim
