#include "coldsim/locality.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_map>

#include "coldsim/error.hpp"

namespace coldsim {

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
    if (a.empty() && b.empty()) return 0.0;
    std::size_t shared = 0;
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        if (*ia < *ib) {
            ++ia;
        } else if (*ib < *ia) {
            ++ib;
        } else {
            ++shared;
            ++ia;
            ++ib;
        }
    }
    return static_cast<double>(shared) / static_cast<double>(a.size() + b.size() - shared);
}

DependencyGraph::DependencyGraph(std::vector<std::string> nodes, std::vector<Edge> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {
    std::sort(edges_.begin(), edges_.end(), [](const Edge& x, const Edge& y) {
        return x.a != y.a ? x.a < y.a : x.b < y.b;
    });
}

std::optional<std::uint32_t> DependencyGraph::index_of(const std::string& function_id) const {
    auto it = std::lower_bound(nodes_.begin(), nodes_.end(), function_id);
    if (it == nodes_.end() || *it != function_id) return std::nullopt;
    return static_cast<std::uint32_t>(it - nodes_.begin());
}

double DependencyGraph::weight(const std::string& f, const std::string& g) const {
    auto fi = index_of(f);
    auto gi = index_of(g);
    if (!fi || !gi || *fi == *gi) return 0.0;
    const std::uint32_t a = std::min(*fi, *gi);
    const std::uint32_t b = std::max(*fi, *gi);
    auto it = std::lower_bound(edges_.begin(), edges_.end(), std::pair{a, b},
                               [](const Edge& e, const std::pair<std::uint32_t, std::uint32_t>& key) {
                                   return e.a != key.first ? e.a < key.first : e.b < key.second;
                               });
    if (it == edges_.end() || it->a != a || it->b != b) return 0.0;
    return it->weight;
}

DependencyGraph build_dependency_graph(const ProfileCatalog& profiles) {
    if (profiles.empty()) throw InputError("empty profile catalog");

    std::vector<std::string> nodes;
    nodes.reserve(profiles.size());
    std::unordered_map<std::string, std::uint32_t> package_index;
    std::vector<std::vector<std::uint32_t>> postings;  // package -> functions holding it
    std::vector<std::size_t> dep_count;
    for (const auto& [id, profile] : profiles) {
        const auto f = static_cast<std::uint32_t>(nodes.size());
        nodes.push_back(id);
        dep_count.push_back(profile.dependencies.size());
        for (const auto& dep : profile.dependencies) {
            auto [it, inserted] =
                package_index.try_emplace(dep, static_cast<std::uint32_t>(postings.size()));
            if (inserted) postings.emplace_back();
            postings[it->second].push_back(f);
        }
    }

    // For each function, count shared packages with every later function via
    // the posting lists it belongs to.
    std::vector<std::vector<std::uint32_t>> packages_of(nodes.size());
    for (std::uint32_t p = 0; p < postings.size(); ++p) {
        for (std::uint32_t f : postings[p]) packages_of[f].push_back(p);
    }
    std::vector<std::uint32_t> shared(nodes.size(), 0);
    std::vector<std::uint32_t> touched;
    std::vector<DependencyGraph::Edge> edges;
    for (std::uint32_t f = 0; f < nodes.size(); ++f) {
        touched.clear();
        for (std::uint32_t p : packages_of[f]) {
            const auto& list = postings[p];
            // Posting lists are ascending; only pairs with g > f.
            for (auto it = std::upper_bound(list.begin(), list.end(), f); it != list.end(); ++it) {
                if (shared[*it]++ == 0) touched.push_back(*it);
            }
        }
        std::sort(touched.begin(), touched.end());
        for (std::uint32_t g : touched) {
            const std::size_t inter = shared[g];
            const double w = static_cast<double>(inter) /
                             static_cast<double>(dep_count[f] + dep_count[g] - inter);
            edges.push_back({f, g, w});
            shared[g] = 0;
        }
    }
    return DependencyGraph(std::move(nodes), std::move(edges));
}

std::optional<std::size_t> Partition::group_index_of(const std::string& function_id) const {
    for (std::size_t i = 0; i < groups.size(); ++i) {
        const auto& ids = groups[i].function_ids;
        if (std::binary_search(ids.begin(), ids.end(), function_id)) return i;
    }
    return std::nullopt;
}

std::vector<std::uint64_t> apportion(const std::vector<std::uint64_t>& loads,
                                     std::uint64_t total_workers) {
    const std::size_t n = loads.size();
    if (n == 0) return {};
    if (total_workers < n) throw InputError("insufficient workers");

    std::vector<std::uint64_t> effective = loads;
    unsigned __int128 total = 0;
    for (auto l : effective) total += l;
    if (total == 0) {
        std::fill(effective.begin(), effective.end(), 1);
        total = n;
    }

    // quota_i = load_i * W / total, kept as the exact rational numerator / total.
    std::vector<unsigned __int128> numerator(n);
    std::vector<std::uint64_t> alloc(n);
    std::uint64_t assigned = 0;
    for (std::size_t i = 0; i < n; ++i) {
        numerator[i] = static_cast<unsigned __int128>(effective[i]) * total_workers;
        alloc[i] = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(numerator[i] / total));
        assigned += alloc[i];
    }
    // Signed excess of quota over allocation, scaled by total.
    auto excess = [&](std::size_t i) {
        return static_cast<__int128>(numerator[i]) -
               static_cast<__int128>(alloc[i]) * static_cast<__int128>(total);
    };

    while (assigned < total_workers) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < n; ++i) {
            if (excess(i) > excess(best)) best = i;
        }
        ++alloc[best];
        ++assigned;
    }
    // The minimum-one floor can overshoot; take back from the most over-served.
    while (assigned > total_workers) {
        std::optional<std::size_t> worst;
        for (std::size_t i = 0; i < n; ++i) {
            if (alloc[i] <= 1) continue;
            if (!worst || excess(i) < excess(*worst)) worst = i;
        }
        --alloc[*worst];
        --assigned;
    }
    return alloc;
}

std::vector<std::uint64_t> allocate_workers(const std::vector<std::vector<std::string>>& groups,
                                            std::uint64_t total_workers,
                                            const Popularity& popularity) {
    std::vector<std::uint64_t> loads;
    loads.reserve(groups.size());
    for (const auto& group : groups) {
        std::uint64_t load = 0;
        for (const auto& f : group) {
            if (auto it = popularity.find(f); it != popularity.end()) load += it->second;
        }
        loads.push_back(load);
    }
    return apportion(loads, total_workers);
}

Popularity weighted_load(const ProfileCatalog& profiles, const Popularity& popularity,
                         LoadWeighting weighting) {
    const bool use_duration =
        weighting == LoadWeighting::RequestsTimesDuration && !profiles.empty() &&
        std::all_of(profiles.begin(), profiles.end(),
                    [](const auto& kv) { return kv.second.exec_duration_ms > 0; });
    if (!use_duration) return popularity;
    Popularity weighted;
    for (const auto& [id, count] : popularity) {
        auto it = profiles.find(id);
        weighted[id] = it == profiles.end() ? count : count * it->second.exec_duration_ms;
    }
    return weighted;
}

namespace {

// Functions per runtime, each list sorted by id (catalog order).
std::map<RuntimeTag, std::vector<std::string>> split_by_runtime(const ProfileCatalog& profiles) {
    std::map<RuntimeTag, std::vector<std::string>> by_runtime;
    for (const auto& [id, profile] : profiles) by_runtime[profile.runtime].push_back(id);
    return by_runtime;
}

struct DraftGroup {
    RuntimeTag runtime;
    std::vector<std::string> function_ids;
};

Partition finalize(std::vector<DraftGroup> drafts, std::uint64_t total_workers,
                   const ProfileCatalog& profiles, const Popularity& popularity,
                   const PartitionOptions& options) {
    if (total_workers < drafts.size()) throw InputError("insufficient workers");
    const Popularity load = weighted_load(profiles, popularity, options.weighting);
    std::vector<std::vector<std::string>> sets;
    sets.reserve(drafts.size());
    for (auto& d : drafts) {
        std::sort(d.function_ids.begin(), d.function_ids.end());
        sets.push_back(d.function_ids);
    }
    const auto workers = allocate_workers(sets, total_workers, load);
    Partition partition;
    partition.total_workers = total_workers;
    for (std::size_t i = 0; i < drafts.size(); ++i) {
        partition.groups.push_back({static_cast<int>(i), std::move(drafts[i].runtime),
                                    std::move(drafts[i].function_ids), workers[i]});
    }
    return partition;
}

// Greedy average-linkage clustering of `members` (sorted ids) down to `target`
// clusters. Returns clusters ordered by their lowest member.
std::vector<std::vector<std::string>> agglomerate(const std::vector<std::string>& members,
                                                  const DependencyGraph& graph,
                                                  std::size_t target) {
    const std::size_t n = members.size();
    target = std::min(target, n);
    if (n == 0) return {};

    // Summed inter-cluster weight, dense n x n. Cluster i is named by its lowest
    // member index; since members are sorted that index orders clusters by id.
    std::vector<double> sum(n * n, 0.0);
    {
        std::vector<std::optional<std::uint32_t>> node(n);
        std::unordered_map<std::uint32_t, std::size_t> local;
        for (std::size_t i = 0; i < n; ++i) {
            node[i] = graph.index_of(members[i]);
            if (node[i]) local.emplace(*node[i], i);
        }
        for (const auto& e : graph.edges()) {
            auto ia = local.find(e.a);
            auto ib = local.find(e.b);
            if (ia == local.end() || ib == local.end()) continue;
            sum[ia->second * n + ib->second] = e.weight;
            sum[ib->second * n + ia->second] = e.weight;
        }
    }

    std::vector<std::size_t> size(n, 1);
    std::vector<bool> active(n, true);
    std::vector<std::vector<std::size_t>> cluster(n);
    for (std::size_t i = 0; i < n; ++i) cluster[i] = {i};
    std::size_t count = n;

    auto average = [&](std::size_t i, std::size_t j) {
        return sum[i * n + j] / static_cast<double>(size[i] * size[j]);
    };
    // Pair key (lower name, higher name); cluster names are their indices.
    auto better = [&](std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
        const double x = average(i, j);
        const double y = average(k, l);
        if (x != y) return x > y;
        const auto p = std::minmax(i, j);
        const auto q = std::minmax(k, l);
        return p < q;
    };

    constexpr std::size_t kNone = static_cast<std::size_t>(-1);
    std::vector<std::size_t> best(n, kNone);
    auto rescan = [&](std::size_t i) {
        best[i] = kNone;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i || !active[j] || sum[i * n + j] <= 0.0) continue;
            if (best[i] == kNone || better(i, j, i, best[i])) best[i] = j;
        }
    };
    for (std::size_t i = 0; i < n; ++i) rescan(i);

    while (count > target) {
        std::size_t bi = kNone;
        for (std::size_t i = 0; i < n; ++i) {
            if (!active[i] || best[i] == kNone) continue;
            if (bi == kNone || better(i, best[i], bi, best[bi])) bi = i;
        }
        if (bi == kNone) break;  // no positive-weight pair left
        const std::size_t keep = std::min(bi, best[bi]);
        const std::size_t gone = std::max(bi, best[bi]);

        for (std::size_t x = 0; x < n; ++x) {
            sum[keep * n + x] += sum[gone * n + x];
            sum[x * n + keep] = sum[keep * n + x];
        }
        sum[keep * n + keep] = 0.0;
        active[gone] = false;
        size[keep] += size[gone];
        cluster[keep].insert(cluster[keep].end(), cluster[gone].begin(), cluster[gone].end());
        cluster[gone].clear();
        --count;

        for (std::size_t x = 0; x < n; ++x) {
            if (!active[x] || x == keep) continue;
            if (best[x] == keep || best[x] == gone) {
                rescan(x);
            } else if (sum[x * n + keep] > 0.0 &&
                       (best[x] == kNone || better(x, keep, x, best[x]))) {
                best[x] = keep;
            }
        }
        rescan(keep);
    }

    // Remaining clusters share no weight: merge the two smallest (size, then id).
    while (count > target) {
        std::vector<std::size_t> order;
        for (std::size_t i = 0; i < n; ++i) {
            if (active[i]) order.push_back(i);
        }
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return size[a] != size[b] ? size[a] < size[b] : a < b;
        });
        const std::size_t keep = std::min(order[0], order[1]);
        const std::size_t gone = std::max(order[0], order[1]);
        active[gone] = false;
        size[keep] += size[gone];
        cluster[keep].insert(cluster[keep].end(), cluster[gone].begin(), cluster[gone].end());
        cluster[gone].clear();
        --count;
    }

    std::vector<std::vector<std::string>> out;
    for (std::size_t i = 0; i < n; ++i) {
        if (!active[i]) continue;
        std::vector<std::string> ids;
        for (std::size_t m : cluster[i]) ids.push_back(members[m]);
        std::sort(ids.begin(), ids.end());
        out.push_back(std::move(ids));
    }
    return out;
}

std::vector<DraftGroup> cluster_drafts(const DependencyGraph& graph,
                                       const ProfileCatalog& profiles,
                                       const std::map<RuntimeTag, std::size_t>& targets) {
    std::vector<DraftGroup> drafts;
    for (const auto& [runtime, members] : split_by_runtime(profiles)) {
        auto it = targets.find(runtime);
        const std::size_t target = it == targets.end() ? 1 : std::max<std::size_t>(1, it->second);
        for (auto& ids : agglomerate(members, graph, target)) {
            drafts.push_back({runtime, std::move(ids)});
        }
    }
    return drafts;
}

}  // namespace

Partition partition_round_robin(const ProfileCatalog& profiles, std::uint64_t groups_per_runtime,
                                std::uint64_t total_workers, const Popularity& popularity,
                                const PartitionOptions& options) {
    if (groups_per_runtime < 1) throw InputError("groups_per_runtime must be >= 1");
    if (total_workers < 1) throw InputError("total_workers must be >= 1");
    std::vector<DraftGroup> drafts;
    for (const auto& [runtime, members] : split_by_runtime(profiles)) {
        std::vector<DraftGroup> dealt(groups_per_runtime, DraftGroup{runtime, {}});
        for (std::size_t i = 0; i < members.size(); ++i) {
            dealt[i % groups_per_runtime].function_ids.push_back(members[i]);
        }
        for (auto& g : dealt) {
            if (!g.function_ids.empty() || options.retain_empty_groups) {
                drafts.push_back(std::move(g));
            }
        }
    }
    return finalize(std::move(drafts), total_workers, profiles, popularity, options);
}

Partition partition_clustered(const DependencyGraph& graph, const ProfileCatalog& profiles,
                              std::uint64_t groups_per_runtime, std::uint64_t total_workers,
                              const Popularity& popularity, const PartitionOptions& options) {
    if (groups_per_runtime < 1) throw InputError("groups_per_runtime must be >= 1");
    if (total_workers < 1) throw InputError("total_workers must be >= 1");
    std::map<RuntimeTag, std::size_t> targets;
    for (const auto& [id, profile] : profiles) targets[profile.runtime] = groups_per_runtime;
    return finalize(cluster_drafts(graph, profiles, targets), total_workers, profiles, popularity,
                    options);
}

namespace {

std::vector<std::uint64_t> group_loads(const Partition& partition, const Popularity& load) {
    std::vector<std::uint64_t> loads;
    for (const auto& g : partition.groups) {
        std::uint64_t total = 0;
        for (const auto& f : g.function_ids) {
            if (auto it = load.find(f); it != load.end()) total += it->second;
        }
        loads.push_back(total);
    }
    return loads;
}

// Position of each group when ranked by load descending, ties by group order.
std::vector<std::size_t> load_rank(const std::vector<std::uint64_t>& loads) {
    std::vector<std::size_t> order(loads.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return loads[a] > loads[b]; });
    std::vector<std::size_t> rank(loads.size());
    for (std::size_t pos = 0; pos < order.size(); ++pos) rank[order[pos]] = pos;
    return rank;
}

}  // namespace

double partition_drift(const Partition& partition, const Popularity& baseline,
                       const Popularity& window, const ProfileCatalog& profiles,
                       LoadWeighting weighting) {
    const auto before = load_rank(group_loads(partition, weighted_load(profiles, baseline, weighting)));
    const auto after = load_rank(group_loads(partition, weighted_load(profiles, window, weighting)));
    const auto requests = group_loads(partition, window);
    std::uint64_t total = 0;
    std::uint64_t moved = 0;
    for (std::size_t i = 0; i < requests.size(); ++i) {
        total += requests[i];
        if (before[i] != after[i]) moved += requests[i];
    }
    return total == 0 ? 0.0 : static_cast<double>(moved) / static_cast<double>(total);
}

Partition rebalance(const Partition& partition, const Popularity& baseline,
                    const Popularity& window, const DependencyGraph& graph,
                    const ProfileCatalog& profiles, const RebalanceConfig& config) {
    const double drift =
        partition_drift(partition, baseline, window, profiles, config.options.weighting);
    if (drift > config.drift_threshold) {
        std::map<RuntimeTag, std::size_t> per_runtime;
        for (const auto& g : partition.groups) ++per_runtime[g.runtime];
        if (config.strategy == PartitionStrategy::Clustered) {
            return finalize(cluster_drafts(graph, profiles, per_runtime), partition.total_workers,
                            profiles, window, config.options);
        }
        const std::uint64_t gpr =
            std::max_element(per_runtime.begin(), per_runtime.end(),
                             [](const auto& a, const auto& b) { return a.second < b.second; })
                ->second;
        return partition_round_robin(profiles, gpr, partition.total_workers, window, config.options);
    }

    Partition out = partition;
    const auto workers = apportion(
        group_loads(partition, weighted_load(profiles, window, config.options.weighting)),
        partition.total_workers);
    for (std::size_t i = 0; i < out.groups.size(); ++i) out.groups[i].worker_count = workers[i];
    return out;
}

std::vector<std::string> partition_violations(const Partition& partition,
                                              const ProfileCatalog& profiles) {
    std::vector<std::string> problems;
    std::map<std::string, int> owner;
    std::uint64_t worker_sum = 0;
    for (const auto& g : partition.groups) {
        worker_sum += g.worker_count;
        if (g.worker_count < 1) {
            problems.push_back("group " + std::to_string(g.group_id) + " has no workers");
        }
        for (const auto& f : g.function_ids) {
            if (!owner.emplace(f, g.group_id).second) {
                problems.push_back("function " + f + " appears in more than one group");
            }
            auto it = profiles.find(f);
            if (it == profiles.end()) {
                problems.push_back("function " + f + " has no profile");
            } else if (it->second.runtime != g.runtime) {
                problems.push_back("function " + f + " (" + it->second.runtime +
                                   ") placed in a " + g.runtime + " group");
            }
        }
    }
    for (const auto& [id, profile] : profiles) {
        if (!owner.contains(id)) problems.push_back("function " + id + " is unpartitioned");
    }
    if (worker_sum != partition.total_workers) {
        problems.push_back("worker counts sum to " + std::to_string(worker_sum) + ", expected " +
                           std::to_string(partition.total_workers));
    }
    return problems;
}

double mean_intra_group_similarity(const Partition& partition, const DependencyGraph& graph) {
    double total = 0.0;
    std::uint64_t pairs = 0;
    for (const auto& g : partition.groups) {
        const auto& ids = g.function_ids;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            for (std::size_t j = i + 1; j < ids.size(); ++j) {
                total += graph.weight(ids[i], ids[j]);
                ++pairs;
            }
        }
    }
    return pairs == 0 ? 0.0 : total / static_cast<double>(pairs);
}

}  // namespace coldsim
