#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "coldsim/cache.hpp"
#include "coldsim/error.hpp"
#include "oracles.hpp"

using namespace coldsim;

namespace {

FunctionProfile profile(const std::string& id, PackageSet deps) {
    FunctionProfile p;
    p.function_id = id;
    p.dependencies = std::move(deps);
    return p;
}

PackageSet random_packages(std::mt19937_64& rng, int universe, int max_count) {
    PackageSet s;
    const int k = static_cast<int>(rng() % (max_count + 1));
    for (int i = 0; i < k; ++i) s.insert("p" + std::to_string(rng() % universe));
    return s;
}

// Every structural invariant the tree promises.
void check_tree(const ImportCacheTree& tree) {
    REQUIRE(tree.contains(ImportCacheTree::kRoot));
    CHECK(tree.size() <= tree.max_nodes());
    CHECK(tree.node(ImportCacheTree::kRoot).packages.empty());
    CHECK(!tree.node(ImportCacheTree::kRoot).parent);
    for (auto id : tree.node_ids()) {
        const auto& n = tree.node(id);
        CHECK(n.id == id);
        for (auto c : n.children) {
            REQUIRE(tree.contains(c));
            const auto& child = tree.node(c);
            CHECK(child.parent == id);
            CHECK(child.depth == n.depth + 1);
            CHECK(child.packages.size() > n.packages.size());
            CHECK(std::includes(child.packages.begin(), child.packages.end(), n.packages.begin(),
                                n.packages.end()));
        }
        if (n.parent) {
            REQUIRE(tree.contains(*n.parent));
            const auto& siblings = tree.node(*n.parent).children;
            CHECK(std::count(siblings.begin(), siblings.end(), id) == 1);
        }
    }
}

// Brute-force best node: enumerate all nodes, pick by (size, depth, -id).
ImportCacheTree::NodeId best_by_scan(const ImportCacheTree& tree, const PackageSet& required) {
    ImportCacheTree::NodeId best = ImportCacheTree::kRoot;
    for (auto id : tree.node_ids()) {
        const auto& n = tree.node(id);
        bool subset = true;
        for (const auto& p : n.packages) subset = subset && required.contains(p);
        if (!subset) continue;
        const auto& b = tree.node(best);
        if (n.packages.size() > b.packages.size() ||
            (n.packages.size() == b.packages.size() && n.depth > b.depth)) {
            best = id;
        }
    }
    return best;
}

}  // namespace

TEST_CASE("handler cache evicts least recent by bytes") {
    HandlerCache cache(kGiB);
    for (const char* id : {"A", "B", "C", "D"}) CHECK(cache.insert(id, 256 * kMiB).empty());
    CHECK(cache.used_bytes() == kGiB);
    CHECK(cache.insert("E", 256 * kMiB) == std::vector<std::string>{"A"});
    CHECK(!cache.contains("A"));
    CHECK(cache.lookup("B"));
    CHECK(cache.insert("F", 256 * kMiB) == std::vector<std::string>{"C"});
    CHECK(cache.recency_order() == std::vector<std::string>{"F", "B", "E", "D"});
    CHECK(cache.insert("G", 512 * kMiB) == std::vector<std::string>{"D", "E"});
    CHECK(cache.used_bytes() == kGiB);
    CHECK_THROWS_WITH_AS(cache.insert("H", kGiB + 1), "entry larger than cache", InputError);
}

TEST_CASE("handler cache refresh and keep-alive") {
    HandlerCache cache(kGiB);
    cache.insert("A", 100, 1000);
    cache.insert("B", 100, 2000);
    CHECK(cache.insert("A", 300, 3000).empty());
    CHECK(cache.used_bytes() == 400);
    CHECK(cache.size() == 2);
    CHECK(cache.recency_order() == std::vector<std::string>{"A", "B"});

    CHECK(cache.alive("B", 2000 + 500, 500));
    CHECK(!cache.alive("B", 2000 + 501, 500));
    CHECK(cache.expire(2501, 500) == std::vector<std::string>{"B"});
    CHECK(cache.contains("A"));
    CHECK(cache.expire(3500, 500).empty());
    CHECK(cache.expire(3501, 500) == std::vector<std::string>{"A"});
    CHECK(cache.used_bytes() == 0);
}

TEST_CASE("copies of a handler cache are independent") {
    HandlerCache a(1000);
    a.insert("x", 400);
    a.insert("y", 400);
    HandlerCache b = a;
    CHECK(b.insert("z", 400) == std::vector<std::string>{"x"});
    CHECK(a.contains("x"));
    CHECK(a.recency_order() == std::vector<std::string>{"y", "x"});
    a = b;
    CHECK(a.recency_order() == std::vector<std::string>{"z", "y"});
    CHECK(a.lookup("y"));
    CHECK(b.recency_order() == std::vector<std::string>{"z", "y"});
}

TEST_CASE("handler cache agrees with the byte LRU oracle") {
    std::mt19937_64 rng(99);
    HandlerCache cache(10'000);
    oracle::ByteLru ref(10'000);
    for (int i = 0; i < 10'000; ++i) {
        const std::string id = "f" + std::to_string(rng() % 60);
        if (rng() % 2 == 0) {
            CHECK(cache.lookup(id) == ref.lookup(id));
        } else {
            const std::uint64_t bytes = 1 + rng() % 2500;
            CHECK(cache.insert(id, bytes) == ref.insert(id, bytes));
        }
        CHECK(cache.used_bytes() == ref.used());
        CHECK(cache.used_bytes() <= cache.capacity_bytes());
    }
    CHECK(cache.recency_order() == ref.order());
}

TEST_CASE("install cache splits hits and misses") {
    InstallCache cache(30 * kMiB);
    cache.insert("numpy", 10 * kMiB);
    cache.insert("pandas", 10 * kMiB);
    auto [hit, miss] = cache.lookup({"numpy", "scipy"});
    CHECK(hit == PackageSet{"numpy"});
    CHECK(miss == PackageSet{"scipy"});
    cache.insert("scipy", 10 * kMiB);
    // numpy was refreshed by the lookup, so pandas is the oldest.
    CHECK(cache.insert("torch", 10 * kMiB) == std::vector<std::string>{"pandas"});
    CHECK(cache.contains("numpy"));
    CHECK(cache.size() == 3);
    CHECK_THROWS_AS(cache.insert("huge", 31 * kMiB), InputError);

    InstallCache copy = cache;
    copy.insert("more", 10 * kMiB);
    CHECK(cache.contains("scipy"));
    CHECK(cache.used_bytes() == 30 * kMiB);
}

TEST_CASE("import tree selection") {
    ImportCacheTree tree(8);
    const auto a = tree.insert(ImportCacheTree::kRoot, {"numpy"}, 0);
    const auto ab = tree.insert(a, {"numpy", "pandas"}, 0);
    const auto c = tree.insert(ImportCacheTree::kRoot, {"flask"}, 0);
    check_tree(tree);

    CHECK(tree.best_node({"numpy", "pandas", "scipy"}) ==
          std::pair<ImportCacheTree::NodeId, PackageSet>{ab, {"scipy"}});
    CHECK(tree.best_node({"numpy"}).first == a);
    CHECK(tree.best_node({"flask", "numpy"}).first == a);  // equal size, equal depth, lower id
    CHECK(tree.best_node({"flask"}).first == c);
    CHECK(tree.best_node({"django"}) ==
          std::pair<ImportCacheTree::NodeId, PackageSet>{ImportCacheTree::kRoot, {"django"}});
    CHECK(tree.best_node({}).first == ImportCacheTree::kRoot);

    // Same-size sets, deeper node wins.
    const auto deep = tree.insert(c, {"flask", "jinja"}, 0);
    const auto shallow = tree.insert(ImportCacheTree::kRoot, {"jinja", "numpy"}, 0);
    CHECK(shallow > deep);
    CHECK(tree.best_node({"flask", "jinja", "numpy"}).first == deep);

    CHECK_THROWS_WITH_AS(tree.insert(a, {"pandas"}, 0), "import tree hierarchy violated", InputError);
    CHECK_THROWS_AS(tree.insert(a, {"numpy"}, 0), InputError);
    CHECK_THROWS_AS(tree.insert(999, {"x"}, 0), InputError);
    CHECK_THROWS_AS(ImportCacheTree(0), InputError);
}

TEST_CASE("import tree eviction keeps the root and interior nodes") {
    ImportCacheTree tree(3);
    const auto a = tree.insert(ImportCacheTree::kRoot, {"a"}, 10);
    const auto ab = tree.insert(a, {"a", "b"}, 20);
    // a is interior, ab is the only leaf: it goes even though it is newer.
    const auto c = tree.insert(ImportCacheTree::kRoot, {"c"}, 30);
    check_tree(tree);
    CHECK(!tree.contains(ab));
    CHECK(tree.contains(a));
    CHECK(tree.contains(c));

    tree.touch(a, 40);
    const auto d = tree.insert(ImportCacheTree::kRoot, {"d"}, 50);
    CHECK(!tree.contains(c));
    CHECK(tree.contains(d));

    // Equal fork times: the highest id goes.
    ImportCacheTree ties(3);
    const auto x = ties.insert(ImportCacheTree::kRoot, {"x"}, 5);
    const auto y = ties.insert(ImportCacheTree::kRoot, {"y"}, 5);
    const auto z = ties.insert(ImportCacheTree::kRoot, {"z"}, 5);
    CHECK(ties.contains(x));
    CHECK(!ties.contains(y) != !ties.contains(z));
    CHECK(!ties.contains(z));

    ImportCacheTree root_only(1);
    const auto gone = root_only.insert(ImportCacheTree::kRoot, {"a"}, 0);
    CHECK(!root_only.contains(gone));
    CHECK(root_only.size() == 1);
}

TEST_CASE("randomized import tree operations keep invariants") {
    std::mt19937_64 rng(2024);
    ImportCacheTree tree(12);
    for (int step = 0; step < 3000; ++step) {
        const PackageSet required = random_packages(rng, 10, 5);
        const auto [best, remaining] = tree.best_node(required);
        CHECK(best == best_by_scan(tree, required));
        if (!remaining.empty() && rng() % 2 == 0) {
            tree.insert(best, required, step);
        } else {
            tree.touch(best, step);
        }
        if (step % 50 == 0) check_tree(tree);
    }
    check_tree(tree);
}

TEST_CASE("classification tiers") {
    TierCaches caches(kGiB, kGiB, 8);
    const auto f = profile("f", {"numpy"});

    auto r = classify_request(caches, f);
    CHECK(r.tier == Tier::Miss);
    CHECK(r.cold == PackageSet{"numpy"});
    CHECK(r.import_node == ImportCacheTree::kRoot);

    caches.install.insert("numpy", kDefaultPackageBytes);
    r = classify_request(caches, f);
    CHECK(r.tier == Tier::InstallHit);
    CHECK(r.preinstalled == PackageSet{"numpy"});
    CHECK(r.cold.empty());

    const auto node = caches.imports.insert(ImportCacheTree::kRoot, {"numpy"}, 0);
    r = classify_request(caches, f);
    CHECK(r.tier == Tier::ImportHit);
    CHECK(r.preimported == PackageSet{"numpy"});
    CHECK(r.import_node == node);

    caches.handler.insert("f", kDefaultFootprintBytes);
    r = classify_request(caches, f);
    CHECK(r.tier == Tier::HandlerHit);
    CHECK(!r.import_node);

    // No dependencies and nothing cached: a plain miss.
    r = classify_request(caches, profile("bare", {}));
    CHECK(r.tier == Tier::Miss);
    CHECK(r.cold.empty());
}

TEST_CASE("init latency under the calibration preset") {
    const auto model = LatencyModel::fig1_calibration();
    CacheLookupResult miss;
    miss.tier = Tier::Miss;
    miss.cold = {"numpy"};
    const auto m = init_latency(miss, model);
    CHECK(m == LatencyBreakdown{200, 1200, 1500, 400, 172, 3472});

    CacheLookupResult handler;
    handler.tier = Tier::HandlerHit;
    CHECK(init_latency(handler, model).total_ms == 2);

    CacheLookupResult imported;
    imported.tier = Tier::ImportHit;
    imported.preimported = {"numpy"};
    CHECK(init_latency(imported, model) == LatencyBreakdown{200, 0, 0, 0, 15, 215});

    CacheLookupResult installed;
    installed.tier = Tier::InstallHit;
    installed.preinstalled = {"numpy"};
    CHECK(init_latency(installed, model).total_ms == 200 + 400 + 172);

    CHECK(model.shutdown_ms == 6);
}

TEST_CASE("latency model json") {
    std::ifstream preset(std::string(COLDSIM_SOURCE_DIR) + "/presets/fig1_calibration.json");
    REQUIRE(preset);
    CHECK(load_latency_model(preset) == LatencyModel::fig1_calibration());

    std::ostringstream out;
    write_latency_model(out, LatencyModel::fig1_calibration());
    std::istringstream back(out.str());
    CHECK(load_latency_model(back) == LatencyModel::fig1_calibration());

    std::istringstream missing(R"({"code_load_ms": 1})");
    CHECK_THROWS_AS(load_latency_model(missing), InputError);

    auto text = out.str();
    text.insert(text.find('{') + 1, "\"bogus\": 1,");
    std::istringstream unknown(text);
    CHECK_THROWS_AS(load_latency_model(unknown), InputError);

    LatencyModel bad = LatencyModel::fig1_calibration();
    bad.fork_ms = bad.sandbox_create_ms + 1;
    CHECK_THROWS_AS(bad.validate(), InputError);
    bad = LatencyModel::fig1_calibration();
    bad.unpause_ms = bad.fork_ms + 1;
    CHECK_THROWS_AS(bad.validate(), InputError);
}

TEST_CASE("latency is monotone in work to do") {
    std::mt19937_64 rng(8);
    for (int i = 0; i < 500; ++i) {
        LatencyModel model;
        model.code_load_ms = rng() % 500;
        model.download_ms_per_package = rng() % 2000;
        model.install_ms_per_package = rng() % 2000;
        model.import_ms_per_package = rng() % 1000;
        model.sandbox_create_ms = rng() % 300;
        model.fork_ms = rng() % (model.sandbox_create_ms + 1);
        model.unpause_ms = rng() % (model.fork_ms + 1);

        CacheLookupResult r;
        r.tier = Tier::Miss;
        r.cold = random_packages(rng, 20, 6);
        const auto base = init_latency(r, model).total_ms;
        auto more = r;
        more.cold.insert("extra");
        CHECK(init_latency(more, model).total_ms >= base);

        // Moving a package from cold to installed never costs more.
        if (!r.cold.empty()) {
            auto warmer = r;
            const auto pkg = *warmer.cold.begin();
            warmer.cold.erase(pkg);
            warmer.preinstalled.insert(pkg);
            warmer.tier = Tier::InstallHit;
            CHECK(init_latency(warmer, model).total_ms <= base);
        }
        CacheLookupResult handler;
        handler.tier = Tier::HandlerHit;
        CHECK(init_latency(handler, model).total_ms <= base);
    }
}
