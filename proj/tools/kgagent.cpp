// kgagent: run training rounds and inspect their artifacts.
//
//   kgagent run --world combo-heavy --seed 7 --rounds 4 --out runs/a
//   kgagent export-graph runs/a/round_3.snapshot.json --format dot
//   kgagent top-skills runs/a/round_3.snapshot.json -k 10
//   kgagent replay runs/a/round_0.trace.jsonl
//   kgagent stats runs/a

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kgagent/kgagent.hpp"

namespace fs = std::filesystem;
using namespace kgagent;

namespace {

enum Exit { Ok = 0, Failure = 1, BadConfig = 2, Protocol = 3, BadSnapshot = 4 };

nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw NotFound("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    auto j = nlohmann::json::parse(ss.str(), nullptr, false);
    if (j.is_discarded()) throw ContractViolation(path + " is not valid JSON");
    return j;
}

std::vector<std::string> split_commas(const std::vector<std::string>& in) {
    std::vector<std::string> out;
    for (const auto& s : in) {
        std::stringstream ss(s);
        for (std::string part; std::getline(ss, part, ',');)
            if (!part.empty()) out.push_back(part);
    }
    return out;
}

struct RunFlags {
    std::string config;
    std::uint64_t seed = 0;
    std::uint64_t world_seed = 0;
    int rounds = 0;
    std::int64_t steps = 0;
    std::vector<std::string> ablate;
    std::string oracle;
    std::string world;
    std::string out;
    std::string resume;
    bool csv = false;
};

int cmd_run(const RunFlags& f, const CLI::App& app) {
    // defaults < config file < flags
    RunManifest m;
    if (!f.config.empty()) m = manifest_from_json(read_json_file(f.config), m);
    const auto given = [&](const char* name) { return app.count(name) > 0; };
    if (given("--seed")) m.seed = f.seed;
    if (given("--world-seed")) m.world_seed = f.world_seed;
    if (given("--rounds")) m.rounds = f.rounds;
    if (given("--steps")) m.steps = f.steps;
    if (given("--oracle")) m.oracle = f.oracle;
    if (given("--world")) m.world = f.world;
    if (given("--out")) m.out = f.out;
    if (given("--resume")) m.resume = fs::path(f.resume);
    if (given("--ablate")) {
        m.engine.ablation = {};
        for (const auto& s : split_commas(f.ablate)) apply_ablation(m.engine.ablation, s);
    }
    Runner runner(m);
    const auto result = runner.run();
    std::cout << (f.csv ? stats_csv(result.stats()) : stats_text(result.stats()));
    return Ok;
}

int cmd_export_graph(const std::string& snapshot, const std::string& format, const std::string& out) {
    if (format != "json" && format != "dot") throw ContractViolation("unknown export format '" + format + "' (json or dot)");
    const Snapshot snap = load_snapshot(snapshot);
    const std::string text = format == "json" ? graph_to_json(snap.stores.graph).dump(1) + "\n"
                                              : to_dot(snap.stores.graph, &snap.stores.memory);
    if (out.empty() || out == "-") {
        std::cout << text;
    } else {
        std::ofstream f(out, std::ios::binary | std::ios::trunc);
        if (!f || !(f << text)) throw IoError("cannot write " + out);
    }
    return Ok;
}

int cmd_top_skills(const std::string& snapshot, std::size_t k) {
    const Snapshot snap = load_snapshot(snapshot);
    write_top_skills(std::cout, top_skills(snap.stores, k));
    return Ok;
}

int cmd_replay(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw NotFound("cannot open trace " + path);
    const auto trace = read_trace(in);
    write_replay(std::cout, trace.records);
    return Ok;
}

/// A run directory or stats.csv prints the per-round table; a snapshot prints
/// its store totals.
int cmd_stats(const std::string& path, bool csv) {
    fs::path p(path);
    if (fs::is_directory(p)) p /= "stats.csv";
    if (p.extension() == ".csv") {
        std::ifstream in(p);
        if (!in) throw NotFound("cannot open " + p.string());
        const auto rows = parse_stats_csv(in);
        std::cout << (csv ? stats_csv(rows) : stats_text(rows));
        return Ok;
    }
    const Snapshot snap = load_snapshot(p);
    const auto g = snap.stores.graph.stats();
    std::cout << "created_step      " << snap.created_step << "\n"
              << "nodes             " << g.nodes << "\n"
              << "skill_edges       " << g.skill_edges << "\n"
              << "similarity_edges  " << g.similarity_edges << "\n"
              << "library_size      " << snap.stores.memory.library_size() << "\n"
              << "skills_total      " << snap.stores.memory.skills().size() << "\n"
              << "skills_pruned     " << snap.stores.memory.pruned_total() << "\n"
              << "clusters          " << snap.stores.memory.clusters().size() << "\n";
    return Ok;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Experience-driven GUI agent: training runs and artifact inspection"};
    app.require_subcommand(1);

    RunFlags rf;
    auto* run = app.add_subcommand("run", "Run training rounds, snapshotting after each");
    run->add_option("--config", rf.config, "JSON run config (flags override it)")->check(CLI::ExistingFile);
    run->add_option("--seed", rf.seed, "Run seed (default 7)");
    run->add_option("--world-seed", rf.world_seed, "World generator seed (default: --seed)");
    run->add_option("--rounds", rf.rounds, "Rounds to run (default 1)")->check(CLI::PositiveNumber);
    run->add_option("--steps", rf.steps, "Steps per round (default 100)")->check(CLI::PositiveNumber);
    run->add_option("--ablate", rf.ablate, "Disable components: similarity_edges,reward_state,reward_novel");
    run->add_option("--oracle", rf.oracle, "perfect | noisy | adversarial | http(s)://endpoint");
    run->add_option("--world", rf.world, "linear | branching | combo-heavy | world JSON file");
    run->add_option("--out", rf.out, "Output directory for snapshots, traces and stats");
    run->add_option("--resume", rf.resume, "Continue from a snapshot")->check(CLI::ExistingFile);
    run->add_flag("--csv", rf.csv, "Print the stats table as CSV");

    std::string snapshot, format = "json", out;
    auto* exp = app.add_subcommand("export-graph", "Export the graph of a snapshot as JSON or DOT");
    exp->add_option("snapshot", snapshot, "Snapshot file")->required();
    exp->add_option("--format", format, "json | dot");
    exp->add_option("--out", out, "Output file (default stdout)");

    std::size_t k = 10;
    auto* top = app.add_subcommand("top-skills", "List skills by their strongest edge weight");
    top->add_option("snapshot", snapshot, "Snapshot file")->required();
    top->add_option("-k", k, "How many skills");

    std::string trace;
    auto* rep = app.add_subcommand("replay", "Narrate an episode trace");
    rep->add_option("trace", trace, "Trace file (.jsonl)")->required();

    std::string stats_path;
    bool stats_csv_flag = false;
    auto* st = app.add_subcommand("stats", "Print the stats table of a run directory, or totals of a snapshot");
    st->add_option("path", stats_path, "Run directory, stats.csv or snapshot")->required();
    st->add_flag("--csv", stats_csv_flag, "CSV instead of aligned text");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // Help and version requests exit 0; every usage error is a config error.
        const int code = app.exit(e);
        return code == 0 ? Ok : BadConfig;
    }

    try {
        if (*run) return cmd_run(rf, *run);
        if (*exp) return cmd_export_graph(snapshot, format, out);
        if (*top) return cmd_top_skills(snapshot, k);
        if (*rep) return cmd_replay(trace);
        if (*st) return cmd_stats(stats_path, stats_csv_flag);
    } catch (const ContractViolation& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return BadConfig;
    } catch (const ProtocolError& e) {
        std::cerr << "protocol error: " << e.what() << "\n";
        return Protocol;
    } catch (const CorruptSnapshot& e) {
        std::cerr << e.what() << "\n";
        return BadSnapshot;
    } catch (const VersionMismatch& e) {
        std::cerr << "version mismatch: " << e.what() << "\n";
        return BadSnapshot;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return Failure;
    }
    return Failure;
}
