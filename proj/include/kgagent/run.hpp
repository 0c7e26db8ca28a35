#pragma once

// Multi-round training runs: build the world and oracle a manifest names, run
// one episode per round on persistent stores, snapshot after every round and
// tabulate per-round stats.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "engine.hpp"
#include "persistence.hpp"
#include "remote_oracle.hpp"
#include "scripted_oracle.hpp"
#include "trace.hpp"
#include "world_io.hpp"
#include "worldgen.hpp"

namespace kgagent {

inline const std::vector<std::string>& ablation_switches() {
    static const std::vector<std::string> names{"similarity_edges", "reward_state", "reward_novel"};
    return names;
}

/// Turns off the named component. Throws ContractViolation for unknown names.
inline void apply_ablation(Ablation& a, const std::string& name) {
    if (name == "similarity_edges") a.similarity_edges = false;
    else if (name == "reward_state") a.reward_state = false;
    else if (name == "reward_novel") a.reward_novel = false;
    else throw ContractViolation("unknown ablation switch '" + name + "'");
}

inline std::vector<std::string> ablation_names(const Ablation& a) {
    std::vector<std::string> out;
    if (!a.similarity_edges) out.push_back("similarity_edges");
    if (!a.reward_state) out.push_back("reward_state");
    if (!a.reward_novel) out.push_back("reward_novel");
    return out;
}

inline nlohmann::json engine_config_to_json(const EngineConfig& c) {
    return {{"max_attempts", c.max_attempts},
            {"success_threshold", c.success_threshold},
            {"removal_threshold", c.removal_threshold},
            {"refine_trigger_count", c.refine_trigger_count},
            {"c1", c.c1},
            {"tau", c.tau},
            {"k_max", c.k_max},
            {"step_cap", c.step_cap},
            {"ablate", ablation_names(c.ablation)}};
}

/// Missing keys keep their values from `base`.
inline EngineConfig engine_config_from_json(const nlohmann::json& j, EngineConfig base = {}) {
    try {
        base.max_attempts = j.value("max_attempts", base.max_attempts);
        base.success_threshold = j.value("success_threshold", base.success_threshold);
        base.removal_threshold = j.value("removal_threshold", base.removal_threshold);
        base.refine_trigger_count = j.value("refine_trigger_count", base.refine_trigger_count);
        base.c1 = j.value("c1", base.c1);
        base.tau = j.value("tau", base.tau);
        base.k_max = j.value("k_max", base.k_max);
        base.step_cap = j.value("step_cap", base.step_cap);
        if (j.contains("ablate")) {
            base.ablation = {};
            for (const auto& s : j.at("ablate")) apply_ablation(base.ablation, s.get<std::string>());
        }
    } catch (const nlohmann::json::exception& e) {
        throw ContractViolation(std::string("bad engine config: ") + e.what());
    }
    base.validate();
    return base;
}

struct RunManifest {
    /// Built-in profile name or path to a world JSON file.
    std::string world = "combo-heavy";
    /// Seeds the world generator; defaults to `seed`.
    std::optional<std::uint64_t> world_seed;
    /// Persona name or http(s) URL.
    std::string oracle = "perfect";
    EngineConfig engine;
    std::uint64_t seed = 7;
    int rounds = 1;
    std::int64_t steps = 100;
    std::filesystem::path out;
    /// Snapshot to continue from. Rounds are numbered after the ones it holds.
    std::optional<std::filesystem::path> resume;
    /// Embedding dimension and similarity thresholds of a fresh graph.
    GraphConfig graph;

    std::uint64_t effective_world_seed() const { return world_seed.value_or(seed); }

    void validate() const {
        engine.validate();
        graph.validate();
        if (rounds < 1) throw ContractViolation("rounds must be positive");
        if (steps < 1) throw ContractViolation("steps must be positive");
        const bool is_url = oracle.rfind("http://", 0) == 0 || oracle.rfind("https://", 0) == 0;
        if (!is_url && !persona_from_string(oracle))
            throw ContractViolation("oracle must be perfect, noisy, adversarial or an http(s) URL, got '" + oracle + "'");
    }
};

inline nlohmann::json manifest_to_json(const RunManifest& m) {
    nlohmann::json j{{"world", m.world},
                     {"world_seed", m.effective_world_seed()},
                     {"oracle", m.oracle},
                     {"engine", engine_config_to_json(m.engine)},
                     {"seed", m.seed},
                     {"rounds", m.rounds},
                     {"steps", m.steps},
                     {"dimension", m.graph.dimension},
                     {"theta_merge", m.graph.thresholds.merge()},
                     {"theta_simi", m.graph.thresholds.simi()}};
    if (!m.out.empty()) j["out"] = m.out.string();
    if (m.resume) j["resume"] = m.resume->string();
    return j;
}

/// Fields present in `j` override `base`. Unknown keys are rejected so that
/// typos in config files do not pass silently.
inline RunManifest manifest_from_json(const nlohmann::json& j, RunManifest base = {}) {
    static const std::set<std::string> known{"world", "world_seed", "oracle", "engine", "seed", "rounds", "steps",
                                             "out",   "resume",     "ablate", "dimension", "theta_merge", "theta_simi"};
    if (!j.is_object()) throw ContractViolation("run config must be a JSON object");
    for (const auto& [k, v] : j.items())
        if (!known.contains(k)) throw ContractViolation("unknown run config key '" + k + "'");
    try {
        base.world = j.value("world", base.world);
        if (j.contains("world_seed")) base.world_seed = j.at("world_seed").get<std::uint64_t>();
        base.oracle = j.value("oracle", base.oracle);
        if (j.contains("engine")) base.engine = engine_config_from_json(j.at("engine"), base.engine);
        if (j.contains("ablate")) {
            base.engine.ablation = {};
            for (const auto& s : j.at("ablate")) apply_ablation(base.engine.ablation, s.get<std::string>());
        }
        base.seed = j.value("seed", base.seed);
        base.rounds = j.value("rounds", base.rounds);
        base.steps = j.value("steps", base.steps);
        if (j.contains("out")) base.out = j.at("out").get<std::string>();
        if (j.contains("resume")) base.resume = std::filesystem::path(j.at("resume").get<std::string>());
        base.graph.dimension = j.value("dimension", base.graph.dimension);
        if (j.contains("theta_merge") || j.contains("theta_simi"))
            base.graph.thresholds = SimilarityThresholds(j.value("theta_merge", base.graph.thresholds.merge()),
                                                         j.value("theta_simi", base.graph.thresholds.simi()));
    } catch (const nlohmann::json::exception& e) {
        throw ContractViolation(std::string("bad run config: ") + e.what());
    }
    return base;
}

/// Seed of an independent stream for one purpose and round.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose, std::uint64_t round = 0) {
    return Rng(seed).fork(purpose).fork(round).next_u64();
}

inline sim::WorldSpec resolve_world(const std::string& world, std::uint64_t seed, std::size_t dimension) {
    for (const char* p : {"linear", "branching", "combo-heavy"}) {
        if (world == p) {
            sim::GeneratorOptions opt;
            opt.dimension = dimension;
            return sim::generate_world(world, seed, opt);
        }
    }
    if (!std::filesystem::exists(world))
        throw ContractViolation("--world must be linear, branching, combo-heavy or an existing file, got '" + world + "'");
    return sim::load_world_file(world);
}

inline std::unique_ptr<Oracle> make_oracle(const std::string& target, const sim::World& world, std::uint64_t seed) {
    if (auto p = persona_from_string(target)) return std::make_unique<ScriptedOracle>(*p, &world, seed);
    RemoteOracleConfig cfg;
    cfg.url = target;
    return std::make_unique<RemoteOracle>(cfg.with_environment());
}

struct RoundStats {
    int round = 0;
    std::size_t library_size = 0;
    std::uint64_t skills_augmented = 0;
    std::uint64_t skills_pruned = 0;
    std::size_t nodes = 0;
    std::size_t skill_edges = 0;
    std::size_t similarity_edges = 0;
    int progression = 0;
    double responsive_rate = 0.0;
    std::uint64_t oracle_cost = 0;

    friend bool operator==(const RoundStats&, const RoundStats&) = default;
};

inline RoundStats round_stats(int round, const AgentStores& stores, const EpisodeSummary& s) {
    const auto g = stores.graph.stats();
    return {round, stores.memory.library_size(), s.skills_augmented, s.skills_pruned, g.nodes, g.skill_edges,
            g.similarity_edges, s.progression, s.responsive_rate(), s.oracle_cost};
}

inline const std::vector<std::string>& stats_columns() {
    static const std::vector<std::string> cols{"round",       "library_size", "skills_augmented", "skills_pruned",
                                               "nodes",       "skill_edges",  "similarity_edges", "progression",
                                               "responsive_rate", "oracle_cost"};
    return cols;
}

namespace detail {
inline std::vector<std::string> stats_cells(const RoundStats& r) {
    std::ostringstream rate;
    rate << std::fixed << std::setprecision(4) << r.responsive_rate;
    return {std::to_string(r.round),       std::to_string(r.library_size), std::to_string(r.skills_augmented),
            std::to_string(r.skills_pruned), std::to_string(r.nodes),      std::to_string(r.skill_edges),
            std::to_string(r.similarity_edges), std::to_string(r.progression), rate.str(),
            std::to_string(r.oracle_cost)};
}
} // namespace detail

inline std::string stats_csv(const std::vector<RoundStats>& rows) {
    std::string out;
    const auto& cols = stats_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
    out += "\n";
    for (const auto& r : rows) {
        const auto cells = detail::stats_cells(r);
        for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + cells[i];
        out += "\n";
    }
    return out;
}

/// Right-aligned columns, two spaces apart.
inline std::string stats_text(const std::vector<RoundStats>& rows) {
    const auto& cols = stats_columns();
    std::vector<std::vector<std::string>> table{cols};
    for (const auto& r : rows) table.push_back(detail::stats_cells(r));
    std::vector<std::size_t> width(cols.size(), 0);
    for (const auto& row : table)
        for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
    std::string out;
    for (const auto& row : table) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += "  ";
            out += std::string(width[i] - row[i].size(), ' ') + row[i];
        }
        out += "\n";
    }
    return out;
}

/// Reads back a CSV written by stats_csv.
inline std::vector<RoundStats> parse_stats_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ContractViolation("stats file is empty");
    std::vector<RoundStats> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
        if (cells.size() != stats_columns().size()) throw ContractViolation("stats row has the wrong number of columns");
        RoundStats r;
        try {
            r.round = std::stoi(cells[0]);
            r.library_size = std::stoull(cells[1]);
            r.skills_augmented = std::stoull(cells[2]);
            r.skills_pruned = std::stoull(cells[3]);
            r.nodes = std::stoull(cells[4]);
            r.skill_edges = std::stoull(cells[5]);
            r.similarity_edges = std::stoull(cells[6]);
            r.progression = std::stoi(cells[7]);
            r.responsive_rate = std::stod(cells[8]);
            r.oracle_cost = std::stoull(cells[9]);
        } catch (const std::exception&) {
            throw ContractViolation("stats row is not numeric: " + line);
        }
        rows.push_back(r);
    }
    return rows;
}

struct RoundArtifacts {
    RoundStats stats;
    std::filesystem::path snapshot;
    std::filesystem::path trace;
};

struct RunResult {
    std::vector<RoundArtifacts> rounds;
    std::vector<RoundStats> stats() const {
        std::vector<RoundStats> out;
        for (const auto& r : rounds) out.push_back(r.stats);
        return out;
    }
};

/// Drives a manifest end to end. Files written under `out`:
///   manifest.json, round_<n>.snapshot.json, round_<n>.trace.jsonl,
///   stats.txt, stats.csv
class Runner {
public:
    explicit Runner(RunManifest m) : manifest_(std::move(m)) {
        manifest_.validate();
        GraphConfig gc = manifest_.graph;
        gc.similarity_edges = manifest_.engine.ablation.similarity_edges;
        if (manifest_.resume) {
            Snapshot snap = load_snapshot(*manifest_.resume);
            if (snap.stores.graph.config().similarity_edges != gc.similarity_edges)
                throw ContractViolation("snapshot and run disagree on the similarity_edges ablation");
            first_round_ = snap.config.value("rounds_completed", 0);
            stores_ = std::make_unique<AgentStores>(std::move(snap.stores));
        } else {
            stores_ = std::make_unique<AgentStores>(gc);
        }
        sim::WorldSpec spec = resolve_world(manifest_.world, manifest_.effective_world_seed(), stores_->graph.config().dimension);
        world_ = std::make_unique<sim::World>(std::move(spec));
        oracle_ = make_oracle(manifest_.oracle, *world_, derive_seed(manifest_.seed, "oracle"));
    }

    const RunManifest& manifest() const { return manifest_; }
    const AgentStores& stores() const { return *stores_; }
    const sim::World& world() const { return *world_; }
    int first_round() const { return first_round_; }

    /// Runs every round. With an empty `out`, nothing is written to disk.
    RunResult run() {
        const auto& out = manifest_.out;
        if (!out.empty()) {
            std::filesystem::create_directories(out);
            write_file(out / "manifest.json", manifest_to_json(manifest_).dump(2) + "\n");
        }
        RunResult result;
        for (int i = 0; i < manifest_.rounds; ++i) {
            const int round = first_round_ + i;
            auto trace = run_round(round);
            RoundArtifacts art{round_stats(round, *stores_, trace.summary), {}, {}};
            if (!out.empty()) {
                const std::string stem = "round_" + std::to_string(round);
                art.snapshot = out / (stem + ".snapshot.json");
                art.trace = out / (stem + ".trace.jsonl");
                nlohmann::json echo = manifest_to_json(manifest_);
                echo["rounds_completed"] = round + 1;
                save_snapshot(art.snapshot, *stores_, (round + 1) * manifest_.steps, echo);
                std::ofstream t(art.trace);
                if (!t) throw IoError("cannot write " + art.trace.string());
                nlohmann::json meta{{"round", round}, {"seed", manifest_.seed}, {"world", manifest_.world}};
                write_trace(t, trace, meta);
            }
            result.rounds.push_back(std::move(art));
        }
        if (!out.empty()) {
            write_file(out / "stats.txt", stats_text(result.stats()));
            write_file(out / "stats.csv", stats_csv(result.stats()));
        }
        return result;
    }

    /// One episode on the persistent stores. Seeds depend only on the run
    /// seed and the round number, so a resumed run replays exactly.
    EpisodeTrace run_round(int round) {
        Engine engine(*world_, *oracle_, *stores_, manifest_.engine, derive_seed(manifest_.seed, "engine", round));
        return engine.run_episode(manifest_.steps, derive_seed(manifest_.seed, "episode", round),
                                  static_cast<std::int64_t>(round) * manifest_.steps);
    }

private:
    static void write_file(const std::filesystem::path& p, const std::string& text) {
        std::ofstream f(p, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot write " + p.string());
        f << text;
        if (!f) throw IoError("write failed for " + p.string());
    }

    RunManifest manifest_;
    std::unique_ptr<AgentStores> stores_;
    std::unique_ptr<sim::World> world_;
    std::unique_ptr<Oracle> oracle_;
    int first_round_ = 0;
};

} // namespace kgagent
