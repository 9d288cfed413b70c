#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <sstream>

#include <sys/wait.h>

#include <json.hpp>

#include "coldsim/cli.hpp"
#include "coldsim/report.hpp"
#include "oracles.hpp"

using namespace coldsim;
namespace fs = std::filesystem;

namespace {

struct Invocation {
    int code = 0;
    std::string out;
    std::string err;
};

Invocation cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

const std::string kProfiles =
    "function_id,runtime,code_size_kb,exec_duration_ms,dependencies\n"
    "f1,python,64,63,numpy\n"
    "f2,python,64,63,numpy;pandas\n"
    "f3,python,64,63,flask\n"
    "f4,python,64,63,flask;jinja\n";

}  // namespace

TEST_CASE("analyze prints the skew summary") {
    const auto dir = oracle::fresh_dir("analyze");
    oracle::write_text(dir / "t.csv", "timestamp_ms,function_id\n0,A\n1,A\n2,A\n3,B\n");
    const auto r = cli({"analyze", (dir / "t.csv").string()});
    REQUIRE(r.code == 0);
    const auto doc = nlohmann::json::parse(r.out);
    CHECK(doc["thresholds"]["0.5"].get<double>() == 0.5);
    CHECK(doc["thresholds"]["0.8"].get<double>() == 1.0);
    CHECK(doc["cdf"].size() == 2);

    const auto custom = cli({"analyze", (dir / "t.csv").string(), "--targets", "0.75"});
    CHECK(nlohmann::json::parse(custom.out)["thresholds"]["0.75"].get<double>() == 0.5);

    const auto missing = cli({"analyze", (dir / "nope.csv").string()});
    CHECK(missing.code == 2);
    CHECK(missing.err.find("cannot open") != std::string::npos);

    oracle::write_text(dir / "bad.csv", "timestamp_ms,function_id\n0,A\nx,B\n");
    const auto bad = cli({"analyze", (dir / "bad.csv").string()});
    CHECK(bad.code == 2);
    CHECK(bad.err.find("line 3") != std::string::npos);

    oracle::write_text(dir / "empty.csv", "timestamp_ms,function_id\n");
    CHECK(cli({"analyze", (dir / "empty.csv").string()}).code == 2);
    fs::remove_all(dir);
}

TEST_CASE("argument errors exit with 2") {
    CHECK(cli({}).code == 2);
    CHECK(cli({"bogus"}).code == 2);
    CHECK(cli({"partition"}).code == 2);
    CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("sweep output") {
    const auto dir = oracle::fresh_dir("sweep");
    oracle::write_text(dir / "t.csv", "timestamp_ms,function_id\n0,A\n1,A\n2,A\n");
    const auto r = cli({"sweep", (dir / "t.csv").string(), "--sizes", "1GiB"});
    REQUIRE(r.code == 0);
    CHECK(r.out == "cache_bytes,hit_rate\n1073741824,0.666667\n");

    const auto sorted = cli({"sweep", (dir / "t.csv").string(), "--sizes", "2GiB,256MiB"});
    CHECK(sorted.out == "cache_bytes,hit_rate\n268435456,0.666667\n2147483648,0.666667\n");

    CHECK(cli({"sweep", (dir / "t.csv").string(), "--sizes", "1GiB", "--footprint", "2GiB"}).code == 2);
    CHECK(cli({"sweep", (dir / "t.csv").string(), "--sizes", "1XB"}).code == 2);

    const auto to_file = cli({"--out", (dir / "s.csv").string(), "--quiet", "sweep", (dir / "t.csv").string(),
                              "--sizes", "1GiB"});
    CHECK(to_file.code == 0);
    CHECK(to_file.out.empty());
    CHECK(to_file.err.empty());
    CHECK(oracle::read_file(dir / "s.csv") == r.out);
    const auto manifest = nlohmann::json::parse(oracle::read_file(dir / "s.csv.manifest.json"));
    CHECK(manifest["command"] == "sweep");
    CHECK(manifest["tool_version"] == kToolVersion);
    CHECK(manifest["input_paths"][0] == (dir / "t.csv").string());
    CHECK(manifest["output_paths"][0] == (dir / "s.csv").string());
    CHECK(manifest["config_digest"].get<std::string>().size() == 64);
    fs::remove_all(dir);
}

TEST_CASE("generate is deterministic per seed") {
    const auto dir = oracle::fresh_dir("generate");
    auto gen = [&](const std::string& name, const std::string& seed) {
        return cli({"--seed", seed, "--out", (dir / name).string(), "--quiet", "generate", "--functions", "50",
                    "--requests", "2000", "--zipf", "1.1", "--duration", "60000"});
    };
    REQUIRE(gen("a", "7").code == 0);
    REQUIRE(gen("b", "7").code == 0);
    REQUIRE(gen("c", "8").code == 0);
    for (const char* f : {"trace.csv", "profiles.csv"}) {
        CHECK(oracle::read_file(dir / "a" / f) == oracle::read_file(dir / "b" / f));
    }
    const auto ma = nlohmann::json::parse(oracle::read_file(dir / "a" / "manifest.json"));
    const auto mb = nlohmann::json::parse(oracle::read_file(dir / "b" / "manifest.json"));
    const auto mc = nlohmann::json::parse(oracle::read_file(dir / "c" / "manifest.json"));
    CHECK(ma["config_digest"] == mb["config_digest"]);
    CHECK(ma["config_digest"] != mc["config_digest"]);
    CHECK(ma["seed"] == 7);
    CHECK(oracle::read_file(dir / "a" / "trace.csv") != oracle::read_file(dir / "c" / "trace.csv"));
    const auto trace = oracle::read_file(dir / "a" / "trace.csv");
    CHECK(trace.starts_with("timestamp_ms,function_id\n"));
    CHECK(std::count(trace.begin(), trace.end(), '\n') == 2001);

    CHECK(cli({"--out", (dir / "z").string(), "generate", "--requests", "0"}).code == 2);
    CHECK(cli({"generate"}).code == 2);
    fs::remove_all(dir);
}

TEST_CASE("partition command") {
    const auto dir = oracle::fresh_dir("partition");
    oracle::write_text(dir / "p.csv", kProfiles);
    oracle::write_text(dir / "t.csv", "timestamp_ms,function_id\n0,f1\n1,f1\n2,f1\n3,f3\n");
    const auto r = cli({"partition", "--profiles", (dir / "p.csv").string(), "--trace", (dir / "t.csv").string(),
                        "--groups-per-runtime", "2", "--workers", "4"});
    REQUIRE(r.code == 0);
    const auto doc = nlohmann::json::parse(r.out);
    REQUIRE(doc["groups"].size() == 2);
    CHECK(doc["groups"][0]["functions"] == nlohmann::json{"f1", "f2"});
    CHECK(doc["groups"][1]["functions"] == nlohmann::json{"f3", "f4"});
    CHECK(doc["groups"][0]["workers"] == 3);
    CHECK(doc["groups"][1]["workers"] == 1);

    const auto rr = cli({"partition", "--profiles", (dir / "p.csv").string(), "--groups-per-runtime", "2",
                         "--workers", "2", "--strategy", "round_robin"});
    REQUIRE(rr.code == 0);
    CHECK(nlohmann::json::parse(rr.out)["groups"][0]["functions"] == nlohmann::json{"f1", "f3"});

    CHECK(cli({"partition", "--profiles", (dir / "p.csv").string(), "--groups-per-runtime", "2", "--workers",
               "1"}).code == 2);
    CHECK(cli({"partition", "--profiles", (dir / "p.csv").string(), "--strategy", "random"}).code == 2);
    fs::remove_all(dir);
}

TEST_CASE("simulate command") {
    const auto dir = oracle::fresh_dir("simulate");
    oracle::write_text(dir / "p.csv", kProfiles);
    oracle::write_text(dir / "t.csv", "timestamp_ms,function_id\n0,f1\n10000,f1\n");
    oracle::write_text(dir / "part.json",
                       R"({"groups":[{"id":0,"runtime":"python","functions":["f1","f2","f3","f4"],"workers":1}]})");
    const auto per_request = (dir / "out.csv").string();
    const auto r = cli({"simulate", "--trace", (dir / "t.csv").string(), "--profiles", (dir / "p.csv").string(),
                        "--partition", (dir / "part.json").string(), "--per-request", per_request});
    REQUIRE(r.code == 0);
    const auto agg = nlohmann::json::parse(r.out);
    CHECK(agg["requests"] == 2);
    CHECK(agg["hit_rate_by_tier"]["HandlerHit"].get<double>() == 0.5);
    CHECK(agg["cold_start_fraction"].get<double>() == 0.5);
    CHECK(oracle::read_file(per_request) ==
          "timestamp_ms,function_id,worker_id,tier,load_ms,download_ms,install_ms,import_ms,create_ms,exec_ms,"
          "shutdown_ms,total_ms\n"
          "0,f1,0,Miss,200,1200,1500,400,172,63,6,3541\n"
          "10000,f1,0,HandlerHit,0,0,0,0,0,63,6,71\n");

    SUBCASE("config file") {
        oracle::write_text(dir / "cfg.json", R"({"keep_alive_ms": 1000, "latency_model": "fig1_calibration"})");
        const auto c = cli({"simulate", "--trace", (dir / "t.csv").string(), "--profiles",
                            (dir / "p.csv").string(), "--partition", (dir / "part.json").string(), "--config",
                            (dir / "cfg.json").string()});
        REQUIRE(c.code == 0);
        CHECK(nlohmann::json::parse(c.out)["hit_rate_by_tier"]["ImportHit"].get<double>() == 0.5);

        oracle::write_text(dir / "bad.json", R"({"keep_alive": 1000})");
        CHECK(cli({"simulate", "--trace", (dir / "t.csv").string(), "--profiles", (dir / "p.csv").string(),
                   "--partition", (dir / "part.json").string(), "--config", (dir / "bad.json").string()})
                  .code == 2);
    }
    SUBCASE("missing profile") {
        oracle::write_text(dir / "t2.csv", "timestamp_ms,function_id\n0,f9\n");
        const auto m = cli({"simulate", "--trace", (dir / "t2.csv").string(), "--profiles",
                            (dir / "p.csv").string(), "--partition", (dir / "part.json").string()});
        CHECK(m.code == 2);
        CHECK(m.err.find("missing profile for function: f9") != std::string::npos);
    }
    fs::remove_all(dir);
}

TEST_CASE("installed binary exit codes") {
    const std::string bin = COLDSIM_BIN;
    CHECK(std::system((bin + " --help > /dev/null").c_str()) == 0);
    const int status = std::system((bin + " analyze /nonexistent/trace.csv 2> /dev/null").c_str());
    REQUIRE(WIFEXITED(status));
    CHECK(WEXITSTATUS(status) == 2);
}
