#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "kgagent/persistence.hpp"
#include "kgagent/report.hpp"
#include "kgagent/run.hpp"
#include "support.hpp"

using namespace kgagent;
using testing_support::TempDir;

namespace {

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RunManifest small_run(const std::filesystem::path& out, int rounds = 2) {
    RunManifest m;
    m.world = "branching";
    m.seed = 9;
    m.rounds = rounds;
    m.steps = 40;
    m.out = out;
    return m;
}

} // namespace

TEST(Manifest, FieldsOverrideBaseAndUnknownKeysFail) {
    RunManifest base;
    base.seed = 1;
    base.steps = 50;
    auto m = manifest_from_json(nlohmann::json{{"seed", 3}, {"ablate", {"reward_state"}}, {"theta_simi", 0.9}}, base);
    EXPECT_EQ(m.seed, 3u);
    EXPECT_EQ(m.steps, 50);
    EXPECT_FALSE(m.engine.ablation.reward_state);
    EXPECT_TRUE(m.engine.ablation.reward_novel);
    EXPECT_DOUBLE_EQ(m.graph.thresholds.simi(), 0.9);
    EXPECT_DOUBLE_EQ(m.graph.thresholds.merge(), 0.95);
    EXPECT_THROW(manifest_from_json(nlohmann::json{{"sede", 3}}), ContractViolation);
    EXPECT_THROW(manifest_from_json(nlohmann::json{{"seed", "x"}}), ContractViolation);
    EXPECT_THROW(manifest_from_json(nlohmann::json{{"ablate", {"everything"}}}), ContractViolation);
}

TEST(Manifest, JsonRoundTrip) {
    RunManifest m;
    m.world = "linear";
    m.seed = 4;
    m.world_seed = 8;
    apply_ablation(m.engine.ablation, "reward_novel");
    const auto back = manifest_from_json(manifest_to_json(m));
    EXPECT_EQ(manifest_to_json(back), manifest_to_json(m));
    EXPECT_EQ(ablation_names(back.engine.ablation), std::vector<std::string>{"reward_novel"});
}

TEST(Manifest, ValidationRejectsBadValues) {
    RunManifest m;
    m.rounds = 0;
    EXPECT_THROW(m.validate(), ContractViolation);
    m = {};
    m.oracle = "friendly";
    EXPECT_THROW(m.validate(), ContractViolation);
    m = {};
    m.world = "no-such-world";
    EXPECT_THROW(Runner{m}, ContractViolation);
}

TEST(DeriveSeed, IndependentPerPurposeAndRound) {
    EXPECT_EQ(derive_seed(7, "engine", 1), derive_seed(7, "engine", 1));
    EXPECT_NE(derive_seed(7, "engine", 1), derive_seed(7, "engine", 2));
    EXPECT_NE(derive_seed(7, "engine", 1), derive_seed(7, "episode", 1));
    EXPECT_NE(derive_seed(7, "engine", 1), derive_seed(8, "engine", 1));
}

TEST(Runner, WritesArtifactsAndIsReproducible) {
    TempDir a("run_a"), b("run_b");
    Runner(small_run(a.path, 4)).run();
    Runner(small_run(b.path, 4)).run();
    for (const char* f : {"manifest.json", "stats.txt", "stats.csv"}) EXPECT_TRUE(std::filesystem::exists(a.path / f)) << f;
    for (int r = 0; r < 4; ++r) {
        const auto stem = "round_" + std::to_string(r);
        EXPECT_TRUE(std::filesystem::exists(a.path / (stem + ".snapshot.json")));
        EXPECT_EQ(read_file(a.path / (stem + ".trace.jsonl")), read_file(b.path / (stem + ".trace.jsonl")));
    }
    EXPECT_EQ(read_file(a.path / "stats.csv"), read_file(b.path / "stats.csv"));
    EXPECT_EQ(read_file(a.path / "stats.txt"), read_file(b.path / "stats.txt"));
    // Snapshots echo the output directory, so compare the stores only.
    const auto sa = load_snapshot(a.path / "round_3.snapshot.json");
    const auto sb = load_snapshot(b.path / "round_3.snapshot.json");
    EXPECT_EQ(snapshot_to_json(sa.stores, sa.created_step), snapshot_to_json(sb.stores, sb.created_step));
}

TEST(Runner, LibraryShrinksOnlyThroughPrunes) {
    auto m = small_run({}, 5);
    auto stats = Runner(m).run().stats();
    for (std::size_t i = 1; i < stats.size(); ++i)
        EXPECT_GE(stats[i].library_size + stats[i].skills_pruned, stats[i - 1].library_size) << "round " << i;
}

TEST(Runner, SimilarityAblationLeavesNoSimilarityEdges) {
    auto m = small_run({}, 2);
    apply_ablation(m.engine.ablation, "similarity_edges");
    Runner runner(m);
    for (const auto& s : runner.run().stats()) EXPECT_EQ(s.similarity_edges, 0u);
    EXPECT_FALSE(runner.stores().graph.config().similarity_edges);
}

TEST(Runner, ResumeContinuesExactly) {
    TempDir full("resume_full"), part("resume_part"), rest("resume_rest");
    Runner(small_run(full.path, 2)).run();
    Runner(small_run(part.path, 1)).run();
    auto m = small_run(rest.path, 1);
    m.resume = part.path / "round_0.snapshot.json";
    Runner resumed(m);
    EXPECT_EQ(resumed.first_round(), 1);
    const auto result = resumed.run();
    ASSERT_EQ(result.rounds.size(), 1u);
    EXPECT_EQ(result.rounds[0].stats.round, 1);
    EXPECT_EQ(read_file(full.path / "round_1.trace.jsonl"), read_file(rest.path / "round_1.trace.jsonl"));
    const auto a = load_snapshot(full.path / "round_1.snapshot.json");
    const auto b = load_snapshot(rest.path / "round_1.snapshot.json");
    EXPECT_EQ(snapshot_to_json(a.stores, a.created_step), snapshot_to_json(b.stores, b.created_step));
}

TEST(Runner, ResumeRejectsMismatchedAblation) {
    TempDir dir("resume_ablate");
    Runner(small_run(dir.path, 1)).run();
    auto m = small_run({}, 1);
    m.resume = dir.path / "round_0.snapshot.json";
    apply_ablation(m.engine.ablation, "similarity_edges");
    EXPECT_THROW(Runner{m}, ContractViolation);
}

TEST(Stats, CsvRoundTripAndTextLayout) {
    std::vector<RoundStats> rows{{0, 3, 4, 1, 10, 12, 5, 2, 0.5, 99}, {1, 4, 2, 0, 11, 15, 6, 3, 0.25, 140}};
    std::stringstream ss(stats_csv(rows));
    EXPECT_EQ(parse_stats_csv(ss), rows);
    const auto text = stats_text(rows);
    std::istringstream lines(text);
    std::string header, first;
    std::getline(lines, header);
    std::getline(lines, first);
    EXPECT_EQ(header.size(), first.size());
    EXPECT_NE(text.find("0.5000"), std::string::npos);
    std::stringstream bad("round\n1,2\n");
    EXPECT_THROW(parse_stats_csv(bad), ContractViolation);
}

TEST(Replay, NarrativeShowsRewardsAndBreaks) {
    TempDir dir("replay");
    Runner(small_run(dir.path, 3)).run();
    std::ifstream in(dir.path / "round_2.trace.jsonl");
    const auto trace = read_trace(in);
    std::ostringstream os;
    write_replay(os, trace.records);
    const auto text = os.str();
    EXPECT_NE(text.find("break on success"), std::string::npos);
    EXPECT_NE(text.find("oracle candidates:"), std::string::npos);
    for (const auto& r : trace.records) {
        if (r.kind == RecordKind::Invoke) continue;
        EXPECT_NEAR(r.reward.progress + r.reward.semantics + r.reward.state + r.reward.novel, r.reward.total, 1e-12);
    }
}
