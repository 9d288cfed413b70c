#include "coldsim/cache.hpp"

#include <algorithm>
#include <istream>
#include <iterator>
#include <ostream>
#include <tuple>

#include <json.hpp>

#include "coldsim/error.hpp"

namespace coldsim {

void LatencyModel::validate() const {
    if (fork_ms > sandbox_create_ms) {
        throw InputError("latency model: fork_ms must not exceed sandbox_create_ms");
    }
    if (unpause_ms > fork_ms) {
        throw InputError("latency model: unpause_ms must not exceed fork_ms");
    }
}

LatencyModel LatencyModel::fig1_calibration() {
    LatencyModel m;
    m.code_load_ms = 200;
    m.download_ms_per_package = 1200;
    m.install_ms_per_package = 1500;
    m.import_ms_per_package = 400;
    m.sandbox_create_ms = 172;
    m.fork_ms = 15;
    m.unpause_ms = 2;
    m.shutdown_ms = 6;
    return m;
}

namespace {

struct Field {
    const char* key;
    std::uint64_t LatencyModel::*member;
};

constexpr Field kLatencyFields[] = {
    {"code_load_ms", &LatencyModel::code_load_ms},
    {"download_ms_per_package", &LatencyModel::download_ms_per_package},
    {"install_ms_per_package", &LatencyModel::install_ms_per_package},
    {"import_ms_per_package", &LatencyModel::import_ms_per_package},
    {"sandbox_create_ms", &LatencyModel::sandbox_create_ms},
    {"fork_ms", &LatencyModel::fork_ms},
    {"unpause_ms", &LatencyModel::unpause_ms},
    {"shutdown_ms", &LatencyModel::shutdown_ms},
};

}  // namespace

LatencyModel load_latency_model(std::istream& in) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError(std::string("latency model: ") + e.what());
    }
    if (!doc.is_object()) throw InputError("latency model: expected a JSON object");
    LatencyModel model;
    for (const auto& field : kLatencyFields) {
        auto it = doc.find(field.key);
        if (it == doc.end()) throw InputError(std::string("latency model: missing ") + field.key);
        if (!it->is_number_unsigned()) {
            throw InputError(std::string("latency model: ") + field.key +
                             " must be a non-negative integer");
        }
        model.*field.member = it->get<std::uint64_t>();
    }
    for (const auto& [key, value] : doc.items()) {
        const bool known = std::any_of(std::begin(kLatencyFields), std::end(kLatencyFields),
                                       [&](const Field& f) { return key == f.key; });
        if (!known) throw InputError("latency model: unknown key " + key);
    }
    model.validate();
    return model;
}

void write_latency_model(std::ostream& out, const LatencyModel& model) {
    nlohmann::ordered_json doc;
    for (const auto& field : kLatencyFields) doc[field.key] = model.*field.member;
    out << doc.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// HandlerCache

HandlerCache::HandlerCache(std::uint64_t capacity_bytes) : capacity_(capacity_bytes) {}

// The index holds iterators into order_, so copies rebuild it.
HandlerCache::HandlerCache(const HandlerCache& other)
    : capacity_(other.capacity_), used_(other.used_), order_(other.order_) {
    reindex();
}

HandlerCache& HandlerCache::operator=(const HandlerCache& other) {
    if (this != &other) {
        capacity_ = other.capacity_;
        used_ = other.used_;
        order_ = other.order_;
        reindex();
    }
    return *this;
}

void HandlerCache::reindex() {
    index_.clear();
    for (auto it = order_.begin(); it != order_.end(); ++it) index_[it->function_id] = it;
}

bool HandlerCache::lookup(const std::string& function_id) {
    auto it = index_.find(function_id);
    if (it == index_.end()) return false;
    order_.splice(order_.begin(), order_, it->second);
    return true;
}

bool HandlerCache::contains(const std::string& function_id) const {
    return index_.contains(function_id);
}

std::vector<std::string> HandlerCache::insert(const std::string& function_id,
                                              std::uint64_t footprint_bytes,
                                              std::int64_t idle_since_ms) {
    if (footprint_bytes > capacity_) throw InputError("entry larger than cache");
    if (auto it = index_.find(function_id); it != index_.end()) {
        used_ -= it->second->footprint;
        order_.erase(it->second);
        index_.erase(it);
    }
    std::vector<std::string> evicted;
    while (used_ + footprint_bytes > capacity_) {
        Entry& victim = order_.back();
        used_ -= victim.footprint;
        evicted.push_back(victim.function_id);
        index_.erase(victim.function_id);
        order_.pop_back();
    }
    order_.push_front({function_id, footprint_bytes, idle_since_ms});
    index_[function_id] = order_.begin();
    used_ += footprint_bytes;
    return evicted;
}

bool HandlerCache::alive(const std::string& function_id, std::int64_t now_ms,
                         std::int64_t keep_alive_ms) const {
    auto it = index_.find(function_id);
    return it != index_.end() && now_ms - it->second->idle_since_ms <= keep_alive_ms;
}

std::vector<std::string> HandlerCache::expire(std::int64_t now_ms, std::int64_t keep_alive_ms) {
    std::vector<std::string> expired;
    for (auto it = order_.begin(); it != order_.end();) {
        if (now_ms - it->idle_since_ms > keep_alive_ms) {
            expired.push_back(it->function_id);
            used_ -= it->footprint;
            index_.erase(it->function_id);
            it = order_.erase(it);
        } else {
            ++it;
        }
    }
    return expired;
}

std::vector<std::string> HandlerCache::recency_order() const {
    std::vector<std::string> ids;
    ids.reserve(order_.size());
    for (const auto& e : order_) ids.push_back(e.function_id);
    return ids;
}

// ---------------------------------------------------------------------------
// InstallCache

InstallCache::InstallCache(std::uint64_t capacity_bytes) : capacity_(capacity_bytes) {}

InstallCache::InstallCache(const InstallCache& other)
    : capacity_(other.capacity_), used_(other.used_), order_(other.order_) {
    reindex();
}

InstallCache& InstallCache::operator=(const InstallCache& other) {
    if (this != &other) {
        capacity_ = other.capacity_;
        used_ = other.used_;
        order_ = other.order_;
        reindex();
    }
    return *this;
}

void InstallCache::reindex() {
    index_.clear();
    for (auto it = order_.begin(); it != order_.end(); ++it) index_[it->first] = it;
}

std::pair<PackageSet, PackageSet> InstallCache::lookup(const PackageSet& packages) {
    PackageSet hits;
    PackageSet misses;
    for (const auto& p : packages) {
        auto it = index_.find(p);
        if (it == index_.end()) {
            misses.insert(p);
        } else {
            order_.splice(order_.begin(), order_, it->second);
            hits.insert(p);
        }
    }
    return {std::move(hits), std::move(misses)};
}

bool InstallCache::contains(const std::string& package) const { return index_.contains(package); }

std::vector<std::string> InstallCache::insert(const std::string& package, std::uint64_t size_bytes) {
    if (size_bytes > capacity_) throw InputError("entry larger than cache");
    if (auto it = index_.find(package); it != index_.end()) {
        used_ -= it->second->second;
        order_.erase(it->second);
        index_.erase(it);
    }
    std::vector<std::string> evicted;
    while (used_ + size_bytes > capacity_) {
        auto& victim = order_.back();
        used_ -= victim.second;
        evicted.push_back(victim.first);
        index_.erase(victim.first);
        order_.pop_back();
    }
    order_.emplace_front(package, size_bytes);
    index_[package] = order_.begin();
    used_ += size_bytes;
    return evicted;
}

// ---------------------------------------------------------------------------
// ImportCacheTree

ImportCacheTree::ImportCacheTree(std::size_t max_nodes) : max_nodes_(max_nodes) {
    if (max_nodes_ < 1) throw InputError("import tree needs room for the root");
    nodes_.emplace(kRoot, Node{});
}

const ImportCacheTree::Node& ImportCacheTree::node(NodeId id) const {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) throw InputError("unknown import node " + std::to_string(id));
    return it->second;
}

std::vector<ImportCacheTree::NodeId> ImportCacheTree::node_ids() const {
    std::vector<NodeId> ids;
    ids.reserve(nodes_.size());
    for (const auto& [id, n] : nodes_) ids.push_back(id);
    std::sort(ids.begin(), ids.end());
    return ids;
}

std::pair<ImportCacheTree::NodeId, PackageSet> ImportCacheTree::best_node(
    const PackageSet& required) const {
    const Node* best = &nodes_.at(kRoot);
    for (const auto& [id, n] : nodes_) {
        if (n.packages.size() > required.size()) continue;
        if (!std::includes(required.begin(), required.end(), n.packages.begin(), n.packages.end())) {
            continue;
        }
        const auto key = [](const Node* x) {
            return std::tuple(x->packages.size(), x->depth);
        };
        if (key(&n) > key(best) || (key(&n) == key(best) && n.id < best->id)) best = &n;
    }
    PackageSet remaining;
    std::set_difference(required.begin(), required.end(), best->packages.begin(),
                        best->packages.end(), std::inserter(remaining, remaining.end()));
    return {best->id, std::move(remaining)};
}

void ImportCacheTree::touch(NodeId id, std::int64_t now_ms) {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) throw InputError("unknown import node " + std::to_string(id));
    it->second.last_fork_ms = std::max(it->second.last_fork_ms, now_ms);
}

ImportCacheTree::NodeId ImportCacheTree::insert(NodeId parent, PackageSet packages,
                                                std::int64_t now_ms) {
    auto pit = nodes_.find(parent);
    if (pit == nodes_.end()) throw InputError("unknown import node " + std::to_string(parent));
    const PackageSet& base = pit->second.packages;
    if (packages.size() <= base.size() ||
        !std::includes(packages.begin(), packages.end(), base.begin(), base.end())) {
        throw InputError("import tree hierarchy violated");
    }
    const NodeId id = next_id_++;
    Node n;
    n.id = id;
    n.parent = parent;
    n.packages = std::move(packages);
    n.last_fork_ms = now_ms;
    n.depth = pit->second.depth + 1;
    pit->second.children.push_back(id);
    nodes_.emplace(id, std::move(n));
    while (nodes_.size() > max_nodes_) evict_one();
    return id;
}

void ImportCacheTree::evict_one() {
    const Node* victim = nullptr;
    for (const auto& [id, n] : nodes_) {
        if (id == kRoot || !n.children.empty()) continue;
        if (!victim || n.last_fork_ms < victim->last_fork_ms ||
            (n.last_fork_ms == victim->last_fork_ms && n.id > victim->id)) {
            victim = &n;
        }
    }
    const NodeId id = victim->id;
    auto& siblings = nodes_.at(*victim->parent).children;
    siblings.erase(std::find(siblings.begin(), siblings.end(), id));
    nodes_.erase(id);
}

// ---------------------------------------------------------------------------

const char* tier_name(Tier tier) {
    switch (tier) {
        case Tier::HandlerHit: return "HandlerHit";
        case Tier::ImportHit: return "ImportHit";
        case Tier::InstallHit: return "InstallHit";
        case Tier::Miss: return "Miss";
    }
    return "Miss";
}

CacheLookupResult classify_request(TierCaches& caches, const FunctionProfile& profile) {
    CacheLookupResult result;
    if (caches.handler.lookup(profile.function_id)) {
        result.tier = Tier::HandlerHit;
        return result;
    }
    auto [node, remaining] = caches.imports.best_node(profile.dependencies);
    result.import_node = node;
    result.preimported = caches.imports.node(node).packages;
    auto [installed, cold] = caches.install.lookup(remaining);
    result.preinstalled = std::move(installed);
    result.cold = std::move(cold);
    if (!result.preimported.empty()) {
        result.tier = Tier::ImportHit;
    } else if (!result.preinstalled.empty()) {
        result.tier = Tier::InstallHit;
    } else {
        result.tier = Tier::Miss;
    }
    return result;
}

LatencyBreakdown init_latency(const CacheLookupResult& result, const LatencyModel& model) {
    LatencyBreakdown b;
    if (result.tier == Tier::HandlerHit) {
        b.total_ms = model.unpause_ms;
        return b;
    }
    const std::uint64_t cold = result.cold.size();
    const std::uint64_t installed = result.preinstalled.size();
    b.load_ms = model.code_load_ms;
    b.download_ms = cold * model.download_ms_per_package;
    b.install_ms = cold * model.install_ms_per_package;
    b.import_ms = (cold + installed) * model.import_ms_per_package;
    b.create_ms = result.tier == Tier::ImportHit ? model.fork_ms : model.sandbox_create_ms;
    b.total_ms = b.load_ms + b.download_ms + b.install_ms + b.import_ms + b.create_ms;
    return b;
}

}  // namespace coldsim
