#include "coldsim/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "coldsim/error.hpp"
#include "coldsim/locality.hpp"
#include "coldsim/report.hpp"
#include "coldsim/simulator.hpp"
#include "coldsim/trace.hpp"
#include "coldsim/units.hpp"

namespace coldsim {

namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

struct GlobalOptions {
    std::string out;
    std::string manifest;
    std::uint64_t seed = 0;
    bool quiet = false;
};

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path);
    return in;
}

Trace load_trace(const std::string& path) {
    auto in = open_input(path);
    try {
        return parse_trace(in, path);
    } catch (const ParseError& e) {
        throw InputError(path + ": " + e.what());
    }
}

ProfileCatalog load_profiles(const std::string& path) {
    auto in = open_input(path);
    try {
        return parse_profiles(in);
    } catch (const ParseError& e) {
        throw InputError(path + ": " + e.what());
    }
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw InputError("cannot write " + path);
    file << content;
    if (!file) throw InputError("cannot write " + path);
}

// Sends `content` to --out when given, otherwise to `out`.
void emit(const GlobalOptions& g, std::ostream& out, const std::string& content) {
    if (g.out.empty()) {
        out << content;
    } else {
        write_file(g.out, content);
    }
}

void write_manifest(const GlobalOptions& g, const std::string& default_path,
                    const std::string& command, const ordered_json& resolved,
                    std::vector<std::string> inputs, std::vector<std::string> outputs) {
    const std::string path = !g.manifest.empty() ? g.manifest : default_path;
    if (path.empty()) return;
    RunManifest m;
    m.command = command;
    m.config_digest = config_digest(resolved);
    m.input_paths = std::move(inputs);
    m.output_paths = std::move(outputs);
    m.seed = g.seed;
    m.tool_version = kToolVersion;
    write_file(path, manifest_json(m).dump(2) + "\n");
}

std::string default_manifest_for(const GlobalOptions& g) {
    return g.out.empty() ? std::string() : g.out + ".manifest.json";
}

std::vector<std::string> outputs_of(const GlobalOptions& g) {
    return g.out.empty() ? std::vector<std::string>{} : std::vector<std::string>{g.out};
}

unsigned thread_budget() {
    const char* env = std::getenv("COLDSIM_THREADS");
    if (env == nullptr || *env == '\0') return 0;
    try {
        return static_cast<unsigned>(std::stoul(env));
    } catch (const std::exception&) {
        throw InputError(std::string("COLDSIM_THREADS must be a non-negative integer, got '") +
                         env + "'");
    }
}

std::vector<double> parse_targets(const std::string& text) {
    std::vector<double> targets;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            targets.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw InputError("invalid target '" + item + "'");
        }
    }
    if (targets.empty()) throw InputError("no targets given");
    return targets;
}

std::vector<std::uint64_t> parse_sizes(const std::string& text) {
    std::vector<std::uint64_t> sizes;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) sizes.push_back(parse_size(item));
    if (sizes.empty()) throw InputError("no cache sizes given");
    return sizes;
}

// ---------------------------------------------------------------------------

struct AnalyzeArgs {
    std::string trace;
    std::string targets = "0.5,0.8";
};

void cmd_analyze(const GlobalOptions& g, const AnalyzeArgs& a, std::ostream& out) {
    const Trace trace = load_trace(a.trace);
    const auto summary = popularity_cdf(trace, parse_targets(a.targets));
    emit(g, out, skew_summary_json(summary).dump() + "\n");
    ordered_json resolved{{"command", "analyze"}, {"targets", a.targets}};
    write_manifest(g, default_manifest_for(g), "analyze", resolved, {a.trace}, outputs_of(g));
}

struct GenerateArgs {
    std::int64_t functions = 5266;
    std::int64_t requests = 798075;
    double zipf = 1.0;
    std::int64_t duration = 86'400'000;
    std::int64_t catalog_size = 100;
    std::int64_t deps_min = 1;
    std::int64_t deps_max = 5;
    double package_zipf = 1.0;
    std::string runtime = "python";
    std::int64_t exec_ms = 63;
    std::int64_t code_kb = 64;
};

void cmd_generate(const GlobalOptions& g, const GenerateArgs& a) {
    if (g.out.empty()) throw InputError("generate needs --out <directory>");
    if (a.functions < 1) throw InputError("--functions must be >= 1");
    if (a.requests < 1) throw InputError("--requests must be >= 1");
    if (a.duration < 1) throw InputError("--duration must be >= 1");
    if (a.zipf < 0 || a.package_zipf < 0) throw InputError("zipf exponents must be >= 0");
    if (a.catalog_size < 1 || a.deps_min < 0 || a.deps_max < a.deps_min || a.exec_ms < 0 ||
        a.code_kb < 0) {
        throw InputError("invalid profile flags");
    }

    SyntheticTraceSpec spec;
    spec.num_functions = static_cast<std::uint64_t>(a.functions);
    spec.num_requests = static_cast<std::uint64_t>(a.requests);
    spec.zipf_exponent = a.zipf;
    spec.duration_ms = a.duration;
    spec.seed = g.seed;
    const Trace trace = generate_synthetic(spec);

    ProfileSynthesisSpec ps;
    ps.catalog_size = static_cast<std::uint64_t>(a.catalog_size);
    ps.deps_min = static_cast<std::uint64_t>(a.deps_min);
    ps.deps_max = static_cast<std::uint64_t>(a.deps_max);
    ps.package_zipf_exponent = a.package_zipf;
    ps.seed = g.seed + 1;
    ps.runtime = a.runtime;
    ps.exec_duration_ms = static_cast<std::uint64_t>(a.exec_ms);
    ps.code_size_kb = static_cast<std::uint64_t>(a.code_kb);
    const ProfileCatalog profiles = synthesize_profiles(trace, ps);

    std::error_code ec;
    fs::create_directories(g.out, ec);
    if (ec) throw InputError("cannot create " + g.out + ": " + ec.message());
    const std::string trace_path = (fs::path(g.out) / "trace.csv").string();
    const std::string profiles_path = (fs::path(g.out) / "profiles.csv").string();
    std::ostringstream trace_csv;
    write_trace(trace_csv, trace);
    write_file(trace_path, trace_csv.str());
    std::ostringstream profiles_csv;
    write_profiles(profiles_csv, profiles);
    write_file(profiles_path, profiles_csv.str());

    ordered_json resolved{{"command", "generate"},
                          {"functions", a.functions},
                          {"requests", a.requests},
                          {"zipf", a.zipf},
                          {"duration", a.duration},
                          {"seed", g.seed},
                          {"catalog_size", a.catalog_size},
                          {"deps_min", a.deps_min},
                          {"deps_max", a.deps_max},
                          {"package_zipf", a.package_zipf},
                          {"runtime", a.runtime},
                          {"exec_ms", a.exec_ms},
                          {"code_kb", a.code_kb}};
    write_manifest(g, (fs::path(g.out) / "manifest.json").string(), "generate", resolved, {},
                   {trace_path, profiles_path});
}

struct PartitionArgs {
    std::string profiles;
    std::string trace;
    std::int64_t groups_per_runtime = 1;
    std::int64_t workers = 1;
    std::string strategy = "clustered";
    std::string weighting = "requests_x_duration";
    bool retain_empty = false;
};

void cmd_partition(const GlobalOptions& g, const PartitionArgs& a, std::ostream& out) {
    if (a.groups_per_runtime < 1) throw InputError("--groups-per-runtime must be >= 1");
    if (a.workers < 1) throw InputError("--workers must be >= 1");
    const ProfileCatalog profiles = load_profiles(a.profiles);
    if (profiles.empty()) throw InputError(a.profiles + ": no profiles");
    Popularity popularity;
    std::vector<std::string> inputs{a.profiles};
    if (!a.trace.empty()) {
        popularity = request_counts(load_trace(a.trace));
        inputs.push_back(a.trace);
    }
    PartitionOptions options;
    options.retain_empty_groups = a.retain_empty;
    options.weighting =
        a.weighting == "requests" ? LoadWeighting::Requests : LoadWeighting::RequestsTimesDuration;

    const auto gpr = static_cast<std::uint64_t>(a.groups_per_runtime);
    const auto workers = static_cast<std::uint64_t>(a.workers);
    Partition partition;
    if (a.strategy == "round_robin") {
        partition = partition_round_robin(profiles, gpr, workers, popularity, options);
    } else {
        partition = partition_clustered(build_dependency_graph(profiles), profiles, gpr, workers,
                                        popularity, options);
    }
    emit(g, out, partition_json(partition).dump(2) + "\n");
    ordered_json resolved{{"command", "partition"},       {"groups_per_runtime", a.groups_per_runtime},
                          {"workers", a.workers},         {"strategy", a.strategy},
                          {"weighting", a.weighting},     {"retain_empty", a.retain_empty}};
    write_manifest(g, default_manifest_for(g), "partition", resolved, inputs, outputs_of(g));
}

struct SimulateArgs {
    std::string trace;
    std::string profiles;
    std::string partition;
    std::string config;
    std::string per_request;
};

void cmd_simulate(const GlobalOptions& g, const SimulateArgs& a, std::ostream& out) {
    const Trace trace = load_trace(a.trace);
    const ProfileCatalog profiles = load_profiles(a.profiles);
    SimConfig config;
    std::vector<std::string> inputs{a.trace, a.profiles, a.partition};
    if (!a.config.empty()) {
        auto in = open_input(a.config);
        config = parse_sim_config(in, fs::path(a.config).parent_path().string().empty()
                                          ? "."
                                          : fs::path(a.config).parent_path().string());
        inputs.push_back(a.config);
    }
    {
        auto in = open_input(a.partition);
        config.partition = parse_partition(in);
    }
    const SimResult result = run(trace, profiles, config);

    emit(g, out, sim_aggregates_json(result.aggregates).dump(2) + "\n");
    std::vector<std::string> outputs = outputs_of(g);
    if (!a.per_request.empty()) {
        std::ostringstream csv;
        write_per_request_csv(csv, result.per_request);
        write_file(a.per_request, csv.str());
        outputs.push_back(a.per_request);
    }
    ordered_json resolved = sim_config_json(config);
    resolved["command"] = "simulate";
    write_manifest(g, default_manifest_for(g), "simulate", resolved, inputs, outputs);
}

struct SweepArgs {
    std::string trace;
    std::string sizes = "1GiB,2GiB,4GiB,8GiB,16GiB,32GiB,64GiB,128GiB,256GiB";
    std::string footprint = "256MiB";
};

void cmd_sweep(const GlobalOptions& g, const SweepArgs& a, std::ostream& out) {
    const auto sizes = parse_sizes(a.sizes);
    const std::uint64_t footprint = parse_size(a.footprint);
    const Trace trace = load_trace(a.trace);
    const auto points = sweep_cache_sizes(trace, sizes, footprint, thread_budget());
    std::ostringstream csv;
    write_sweep_csv(csv, points);
    emit(g, out, csv.str());
    ordered_json resolved{{"command", "sweep"}, {"sizes", a.sizes}, {"footprint", footprint}};
    write_manifest(g, default_manifest_for(g), "sweep", resolved, {a.trace}, outputs_of(g));
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Trace-driven serverless cold-start simulator", "coldsim"};
    app.require_subcommand(1);
    GlobalOptions g;
    app.add_option("--out", g.out, "Output file (directory for generate)");
    app.add_option("--manifest", g.manifest, "Run manifest path (default: next to --out)");
    app.add_option("--seed", g.seed, "Random seed");
    app.add_flag("--quiet", g.quiet, "Suppress progress messages");

    AnalyzeArgs analyze;
    auto* analyze_cmd = app.add_subcommand("analyze", "Popularity CDF and skew thresholds");
    analyze_cmd->add_option("trace", analyze.trace, "Normalized trace CSV")->required();
    analyze_cmd->add_option("--targets", analyze.targets, "Comma-separated request fractions");

    GenerateArgs generate;
    auto* generate_cmd = app.add_subcommand("generate", "Synthetic Zipf trace and profiles");
    generate_cmd->add_option("--functions", generate.functions);
    generate_cmd->add_option("--requests", generate.requests);
    generate_cmd->add_option("--zipf", generate.zipf);
    generate_cmd->add_option("--duration", generate.duration, "Arrival window in ms");
    generate_cmd->add_option("--catalog-size", generate.catalog_size, "Distinct packages");
    generate_cmd->add_option("--deps-min", generate.deps_min);
    generate_cmd->add_option("--deps-max", generate.deps_max);
    generate_cmd->add_option("--package-zipf", generate.package_zipf);
    generate_cmd->add_option("--runtime", generate.runtime);
    generate_cmd->add_option("--exec-ms", generate.exec_ms);
    generate_cmd->add_option("--code-kb", generate.code_kb);

    PartitionArgs partition;
    auto* partition_cmd = app.add_subcommand("partition", "Build locality groups");
    partition_cmd->add_option("--profiles", partition.profiles)->required();
    partition_cmd->add_option("--trace", partition.trace, "Trace supplying popularity");
    partition_cmd->add_option("--groups-per-runtime", partition.groups_per_runtime);
    partition_cmd->add_option("--workers", partition.workers);
    partition_cmd->add_option("--strategy", partition.strategy)
        ->check(CLI::IsMember({"round_robin", "clustered"}));
    partition_cmd->add_option("--weighting", partition.weighting)
        ->check(CLI::IsMember({"requests", "requests_x_duration"}));
    partition_cmd->add_flag("--retain-empty", partition.retain_empty);

    SimulateArgs simulate;
    auto* simulate_cmd = app.add_subcommand("simulate", "Worker-level simulation");
    simulate_cmd->add_option("--trace", simulate.trace)->required();
    simulate_cmd->add_option("--profiles", simulate.profiles)->required();
    simulate_cmd->add_option("--partition", simulate.partition)->required();
    simulate_cmd->add_option("--config", simulate.config, "SimConfig JSON");
    simulate_cmd->add_option("--per-request", simulate.per_request, "Per-request CSV path");

    SweepArgs sweep;
    auto* sweep_cmd = app.add_subcommand("sweep", "Global LRU hit rate by cache size");
    sweep_cmd->add_option("trace", sweep.trace)->required();
    sweep_cmd->add_option("--sizes", sweep.sizes, "Comma-separated sizes (IEC suffixes)");
    sweep_cmd->add_option("--footprint", sweep.footprint, "Per-function footprint");

    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    std::vector<const char*> argv{"coldsim"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*analyze_cmd) {
            cmd_analyze(g, analyze, out);
        } else if (*generate_cmd) {
            cmd_generate(g, generate);
        } else if (*partition_cmd) {
            cmd_partition(g, partition, out);
        } else if (*simulate_cmd) {
            cmd_simulate(g, simulate, out);
        } else if (*sweep_cmd) {
            cmd_sweep(g, sweep, out);
        }
    } catch (const InputError& e) {
        err << "coldsim: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "coldsim: internal error: " << e.what() << '\n';
        return 1;
    }
    if (!g.quiet && !g.out.empty()) err << "coldsim: wrote " << g.out << '\n';
    return 0;
}

}  // namespace coldsim
