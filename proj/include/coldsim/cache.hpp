#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <list>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "coldsim/trace.hpp"
#include "coldsim/units.hpp"

namespace coldsim {

inline constexpr std::uint64_t kDefaultFootprintBytes = 256 * kMiB;
inline constexpr std::uint64_t kDefaultPackageBytes = 10 * kMiB;

using PackageSet = std::set<std::string>;

// Per-phase initialization costs in milliseconds.
struct LatencyModel {
    std::uint64_t code_load_ms = 0;
    std::uint64_t download_ms_per_package = 0;
    std::uint64_t install_ms_per_package = 0;
    std::uint64_t import_ms_per_package = 0;
    std::uint64_t sandbox_create_ms = 0;
    std::uint64_t fork_ms = 0;
    std::uint64_t unpause_ms = 0;
    std::uint64_t shutdown_ms = 0;

    // Throws InputError unless unpause <= fork <= sandbox_create.
    void validate() const;

    // Single-dependency cold start totals 3472 ms; 6 ms shutdown.
    static LatencyModel fig1_calibration();

    friend bool operator==(const LatencyModel&, const LatencyModel&) = default;
};

LatencyModel load_latency_model(std::istream& json);
void write_latency_model(std::ostream& out, const LatencyModel& model);

// LRU over paused function instances, bounded by total footprint bytes.
class HandlerCache {
public:
    explicit HandlerCache(std::uint64_t capacity_bytes);
    HandlerCache(const HandlerCache& other);
    HandlerCache& operator=(const HandlerCache& other);
    HandlerCache(HandlerCache&&) noexcept = default;
    HandlerCache& operator=(HandlerCache&&) noexcept = default;

    // Hit moves the entry to most-recent.
    bool lookup(const std::string& function_id);
    // No recency update.
    bool contains(const std::string& function_id) const;

    // Inserts or refreshes at most-recent; returns evicted ids oldest first.
    // `idle_since_ms` records when the instance went idle (for keep-alive).
    std::vector<std::string> insert(const std::string& function_id, std::uint64_t footprint_bytes,
                                    std::int64_t idle_since_ms = 0);

    // Drops entries idle for longer than keep_alive_ms at time now_ms.
    std::vector<std::string> expire(std::int64_t now_ms, std::int64_t keep_alive_ms);
    bool alive(const std::string& function_id, std::int64_t now_ms,
               std::int64_t keep_alive_ms) const;

    std::uint64_t capacity_bytes() const noexcept { return capacity_; }
    std::uint64_t used_bytes() const noexcept { return used_; }
    std::size_t size() const noexcept { return index_.size(); }
    // Most-recent first.
    std::vector<std::string> recency_order() const;

private:
    void reindex();

    struct Entry {
        std::string function_id;
        std::uint64_t footprint = 0;
        std::int64_t idle_since_ms = 0;
    };
    std::uint64_t capacity_;
    std::uint64_t used_ = 0;
    std::list<Entry> order_;  // front = most recent
    std::unordered_map<std::string, std::list<Entry>::iterator> index_;
};

// LRU over on-disk packages, bounded by total package bytes.
class InstallCache {
public:
    explicit InstallCache(std::uint64_t capacity_bytes);
    InstallCache(const InstallCache& other);
    InstallCache& operator=(const InstallCache& other);
    InstallCache(InstallCache&&) noexcept = default;
    InstallCache& operator=(InstallCache&&) noexcept = default;

    // Splits `packages` into (present, absent); present ones become most-recent.
    std::pair<PackageSet, PackageSet> lookup(const PackageSet& packages);
    bool contains(const std::string& package) const;
    std::vector<std::string> insert(const std::string& package, std::uint64_t size_bytes);

    std::uint64_t capacity_bytes() const noexcept { return capacity_; }
    std::uint64_t used_bytes() const noexcept { return used_; }
    std::size_t size() const noexcept { return index_.size(); }

private:
    void reindex();

    std::uint64_t capacity_;
    std::uint64_t used_ = 0;
    std::list<std::pair<std::string, std::uint64_t>> order_;
    std::unordered_map<std::string,
                       std::list<std::pair<std::string, std::uint64_t>>::iterator> index_;
};

// Tree of sleeping processes. The root (id 0) has imported nothing; every child
// has imported a strict superset of its parent's packages.
class ImportCacheTree {
public:
    using NodeId = std::uint64_t;
    static constexpr NodeId kRoot = 0;

    struct Node {
        NodeId id = kRoot;
        std::optional<NodeId> parent;
        PackageSet packages;
        std::vector<NodeId> children;
        std::int64_t last_fork_ms = 0;
        std::size_t depth = 0;
    };

    explicit ImportCacheTree(std::size_t max_nodes);

    // Largest node whose packages are all in `required`; ties by depth, then id.
    std::pair<NodeId, PackageSet> best_node(const PackageSet& required) const;
    void touch(NodeId id, std::int64_t now_ms);

    // Adds a leaf under `parent`, then evicts leaves (oldest fork, ties highest
    // id) while over max_nodes. The returned node may itself have been evicted
    // when max_nodes is 1.
    NodeId insert(NodeId parent, PackageSet packages, std::int64_t now_ms);

    bool contains(NodeId id) const { return nodes_.contains(id); }
    const Node& node(NodeId id) const;
    std::size_t size() const noexcept { return nodes_.size(); }
    std::size_t max_nodes() const noexcept { return max_nodes_; }
    std::vector<NodeId> node_ids() const;

private:
    void evict_one();

    std::size_t max_nodes_;
    NodeId next_id_ = 1;
    std::unordered_map<NodeId, Node> nodes_;
};

struct TierCaches {
    HandlerCache handler;
    InstallCache install;
    ImportCacheTree imports;

    TierCaches(std::uint64_t handler_bytes, std::uint64_t install_bytes, std::size_t import_nodes)
        : handler(handler_bytes), install(install_bytes), imports(import_nodes) {}
};

enum class Tier { HandlerHit, ImportHit, InstallHit, Miss };

const char* tier_name(Tier tier);

struct CacheLookupResult {
    Tier tier = Tier::Miss;
    PackageSet preimported;
    PackageSet preinstalled;
    PackageSet cold;
    // Node a new instance forks from; unset on a handler hit.
    std::optional<ImportCacheTree::NodeId> import_node;
};

// Consults handler, then import tree, then install cache. Handler and install
// hits update recency; the import tree is left for the caller to touch.
CacheLookupResult classify_request(TierCaches& caches, const FunctionProfile& profile);

struct LatencyBreakdown {
    std::uint64_t load_ms = 0;
    std::uint64_t download_ms = 0;
    std::uint64_t install_ms = 0;
    std::uint64_t import_ms = 0;
    std::uint64_t create_ms = 0;
    std::uint64_t total_ms = 0;

    friend bool operator==(const LatencyBreakdown&, const LatencyBreakdown&) = default;
};

LatencyBreakdown init_latency(const CacheLookupResult& result, const LatencyModel& model);

}  // namespace coldsim
