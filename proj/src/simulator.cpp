#include "coldsim/simulator.hpp"

#include <algorithm>
#include <list>
#include <thread>
#include <unordered_map>

#include "coldsim/error.hpp"

namespace coldsim {

const char* routing_policy_name(RoutingPolicy policy) {
    return policy == RoutingPolicy::LeastLoaded ? "LeastLoaded" : "HandlerAffinity";
}

Worker::Worker(std::uint64_t id, std::size_t group, const SimConfig& config)
    : worker_id(id),
      group_index(group),
      caches(config.handler_capacity_bytes, config.install_capacity_bytes,
             config.import_max_nodes) {}

std::size_t Worker::queue_length(std::int64_t now_ms) {
    while (!pending_starts.empty() && pending_starts.front() <= now_ms) pending_starts.pop_front();
    return pending_starts.size();
}

namespace {

std::uint64_t pick_worker(const std::string& function_id, std::int64_t now_ms,
                          const std::vector<std::size_t>& candidates,
                          std::vector<Worker>& workers, RoutingPolicy policy,
                          std::int64_t keep_alive_ms) {
    if (policy == RoutingPolicy::HandlerAffinity) {
        // Candidates are in ascending worker id order.
        for (std::size_t w : candidates) {
            if (workers[w].caches.handler.alive(function_id, now_ms, keep_alive_ms)) return w;
        }
    }
    std::size_t best = candidates.front();
    std::size_t best_queue = workers[best].queue_length(now_ms);
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        const std::size_t w = candidates[i];
        const std::size_t q = workers[w].queue_length(now_ms);
        if (q < best_queue ||
            (q == best_queue && workers[w].busy_until_ms < workers[best].busy_until_ms)) {
            best = w;
            best_queue = q;
        }
    }
    return best;
}

std::vector<std::vector<std::size_t>> workers_by_group(const std::vector<Worker>& workers,
                                                       std::size_t groups) {
    std::vector<std::vector<std::size_t>> out(groups);
    for (std::size_t i = 0; i < workers.size(); ++i) out[workers[i].group_index].push_back(i);
    return out;
}

std::vector<std::uint32_t> intern_functions(const Trace& trace, std::size_t& distinct) {
    std::unordered_map<std::string, std::uint32_t> ids;
    std::vector<std::uint32_t> seq;
    seq.reserve(trace.size());
    for (const auto& r : trace.records) {
        auto [it, inserted] = ids.try_emplace(r.function_id, static_cast<std::uint32_t>(ids.size()));
        seq.push_back(it->second);
    }
    distinct = ids.size();
    return seq;
}

std::uint64_t lru_hits(const std::vector<std::uint32_t>& seq, std::size_t distinct,
                       std::uint64_t capacity) {
    std::list<std::uint32_t> order;  // front = most recent
    std::vector<std::list<std::uint32_t>::iterator> where(distinct);
    std::vector<bool> cached(distinct, false);
    std::uint64_t hits = 0;
    for (std::uint32_t f : seq) {
        if (cached[f]) {
            ++hits;
            order.splice(order.begin(), order, where[f]);
            continue;
        }
        if (order.size() >= capacity) {
            cached[order.back()] = false;
            order.pop_back();
        }
        order.push_front(f);
        where[f] = order.begin();
        cached[f] = true;
    }
    return hits;
}

}  // namespace

std::uint64_t route(const std::string& function_id, std::int64_t now_ms,
                    const Partition& partition, std::vector<Worker>& workers,
                    RoutingPolicy policy, std::int64_t keep_alive_ms) {
    const auto group = partition.group_index_of(function_id);
    if (!group) throw InputError("unpartitioned function: " + function_id);
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < workers.size(); ++i) {
        if (workers[i].group_index == *group) candidates.push_back(i);
    }
    if (candidates.empty()) {
        throw InputError("locality group " + std::to_string(partition.groups[*group].group_id) +
                         " has no workers");
    }
    return workers[pick_worker(function_id, now_ms, candidates, workers, policy, keep_alive_ms)]
        .worker_id;
}

SimResult run(const Trace& trace, const ProfileCatalog& profiles, const SimConfig& config) {
    config.latency_model.validate();
    if (config.keep_alive_ms < 0) throw InputError("keep_alive_ms must be >= 0");

    std::unordered_map<std::string, std::size_t> group_of;
    for (std::size_t g = 0; g < config.partition.groups.size(); ++g) {
        for (const auto& f : config.partition.groups[g].function_ids) group_of.emplace(f, g);
    }
    std::unordered_map<std::string, const FunctionProfile*> profile_of;
    for (const auto& r : trace.records) {
        if (profile_of.contains(r.function_id)) continue;
        auto it = profiles.find(r.function_id);
        if (it == profiles.end()) throw InputError("missing profile for function: " + r.function_id);
        if (!group_of.contains(r.function_id)) {
            throw InputError("unpartitioned function: " + r.function_id);
        }
        profile_of.emplace(r.function_id, &it->second);
    }

    std::vector<Worker> workers;
    for (std::size_t g = 0; g < config.partition.groups.size(); ++g) {
        const auto& group = config.partition.groups[g];
        if (group.worker_count < 1) {
            throw InputError("locality group " + std::to_string(group.group_id) + " has no workers");
        }
        for (std::uint64_t k = 0; k < group.worker_count; ++k) {
            workers.emplace_back(workers.size(), g, config);
        }
    }
    const auto candidates = workers_by_group(workers, config.partition.groups.size());
    const LatencyModel& model = config.latency_model;

    SimResult result;
    result.per_request.reserve(trace.size());
    for (const auto& record : trace.records) {
        const FunctionProfile& profile = *profile_of.at(record.function_id);
        const std::size_t w = pick_worker(record.function_id, record.timestamp_ms,
                                          candidates[group_of.at(record.function_id)], workers,
                                          config.routing_policy, config.keep_alive_ms);
        Worker& worker = workers[w];
        const std::int64_t start = std::max(record.timestamp_ms, worker.busy_until_ms);

        worker.caches.handler.expire(start, config.keep_alive_ms);
        const CacheLookupResult lookup = classify_request(worker.caches, profile);
        if (lookup.tier != Tier::HandlerHit) {
            auto& tree = worker.caches.imports;
            tree.touch(*lookup.import_node, start);
            if (profile.dependencies.size() > lookup.preimported.size()) {
                tree.insert(*lookup.import_node, profile.dependencies, start);
            }
            if (config.package_size_bytes <= worker.caches.install.capacity_bytes()) {
                for (const auto& p : lookup.cold) {
                    worker.caches.install.insert(p, config.package_size_bytes);
                }
            }
        }

        RequestOutcome out;
        out.timestamp_ms = record.timestamp_ms;
        out.function_id = record.function_id;
        out.worker_id = worker.worker_id;
        out.tier = lookup.tier;
        out.init = init_latency(lookup, model);
        out.exec_ms = profile.exec_duration_ms;
        out.shutdown_ms = model.shutdown_ms;
        out.total_ms = out.init.total_ms + out.exec_ms + out.shutdown_ms;
        out.start_ms = start;
        out.end_ms = start + static_cast<std::int64_t>(out.init.total_ms + out.exec_ms);

        worker.busy_until_ms = out.end_ms;
        worker.pending_starts.push_back(start);

        const std::uint64_t footprint =
            profile.footprint_bytes > 0 ? profile.footprint_bytes : config.default_footprint_bytes;
        if (footprint <= worker.caches.handler.capacity_bytes()) {
            worker.caches.handler.insert(profile.function_id, footprint, out.end_ms);
        }
        result.per_request.push_back(std::move(out));
    }
    result.aggregates = aggregate(result.per_request);
    return result;
}

SimAggregates aggregate(const std::vector<RequestOutcome>& outcomes) {
    SimAggregates agg;
    agg.requests = outcomes.size();
    for (Tier t : {Tier::HandlerHit, Tier::ImportHit, Tier::InstallHit, Tier::Miss}) {
        agg.hit_rate_by_tier[t] = 0.0;
    }
    if (outcomes.empty()) return agg;

    std::map<Tier, std::uint64_t> counts;
    std::vector<std::uint64_t> init;
    init.reserve(outcomes.size());
    double sum = 0.0;
    for (const auto& o : outcomes) {
        ++counts[o.tier];
        init.push_back(o.init.total_ms);
        sum += static_cast<double>(o.init.total_ms);
    }
    const auto n = static_cast<double>(outcomes.size());
    for (const auto& [tier, c] : counts) agg.hit_rate_by_tier[tier] = static_cast<double>(c) / n;

    std::sort(init.begin(), init.end());
    // Nearest-rank percentile: value at ceil(p * n) - 1.
    auto nearest_rank = [&](std::uint64_t percent) {
        const std::uint64_t rank = (percent * init.size() + 99) / 100;
        return init[std::max<std::uint64_t>(rank, 1) - 1];
    };
    agg.mean_init_ms = sum / n;
    agg.median_init_ms = nearest_rank(50);
    agg.p99_init_ms = nearest_rank(99);
    agg.cold_start_fraction =
        static_cast<double>(outcomes.size() - counts[Tier::HandlerHit]) / n;
    return agg;
}

std::uint64_t simple_lru_hits(const Trace& trace, std::uint64_t capacity_entries) {
    if (trace.empty()) throw InputError("empty trace");
    if (capacity_entries < 1) throw InputError("capacity_entries must be >= 1");
    std::size_t distinct = 0;
    const auto seq = intern_functions(trace, distinct);
    return lru_hits(seq, distinct, capacity_entries);
}

double simple_lru_hit_rate(const Trace& trace, std::uint64_t capacity_entries) {
    return static_cast<double>(simple_lru_hits(trace, capacity_entries)) /
           static_cast<double>(trace.size());
}

std::vector<SweepPoint> sweep_cache_sizes(const Trace& trace, std::vector<std::uint64_t> sizes_bytes,
                                          std::uint64_t footprint_bytes, unsigned threads) {
    if (trace.empty()) throw InputError("empty trace");
    if (footprint_bytes == 0) throw InputError("footprint must be positive");
    std::sort(sizes_bytes.begin(), sizes_bytes.end());
    for (auto s : sizes_bytes) {
        if (s < footprint_bytes) {
            throw InputError("cache size " + std::to_string(s) + " is smaller than the footprint " +
                             std::to_string(footprint_bytes));
        }
    }

    std::size_t distinct = 0;
    const auto seq = intern_functions(trace, distinct);
    std::vector<SweepPoint> points(sizes_bytes.size());
    auto evaluate = [&](std::size_t i) {
        SweepPoint& p = points[i];
        p.cache_bytes = sizes_bytes[i];
        p.requests = seq.size();
        p.hits = lru_hits(seq, distinct, sizes_bytes[i] / footprint_bytes);
        p.hit_rate = static_cast<double>(p.hits) / static_cast<double>(p.requests);
    };

    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, points.size()));
    if (threads <= 1) {
        for (std::size_t i = 0; i < points.size(); ++i) evaluate(i);
        return points;
    }
    // Each point is written by exactly one thread; output order is by size.
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            for (std::size_t i = t; i < points.size(); i += threads) evaluate(i);
        });
    }
    pool.clear();
    return points;
}

}  // namespace coldsim
