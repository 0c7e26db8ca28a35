#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "kgagent/engine.hpp"
#include "kgagent/persistence.hpp"
#include "kgagent/scripted_oracle.hpp"
#include "kgagent/worldgen.hpp"
#include "support.hpp"

using namespace kgagent;
using testing_support::TempDir;

namespace {

/// Stores after a short training run, so every section is populated.
AgentStores trained(std::uint64_t seed = 3, bool similarity = true) {
    sim::World world(sim::generate_world(sim::Profile::Branching, seed));
    ScriptedOracle oracle(Persona::Perfect, &world, 1);
    GraphConfig g;
    g.similarity_edges = similarity;
    EngineConfig cfg;
    cfg.ablation.similarity_edges = similarity;
    AgentStores stores(g);
    Engine engine(world, oracle, stores, cfg, seed);
    engine.run_episode(80, seed);
    return stores;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << s;
}

std::string invariant_of(const nlohmann::json& j) {
    try {
        snapshot_from_json(j);
    } catch (const CorruptSnapshot& e) {
        return e.invariant();
    }
    return "";
}

} // namespace

TEST(Snapshot, SaveLoadRoundTripIsIdentity) {
    TempDir dir("persist");
    const auto stores = trained();
    ASSERT_GT(stores.graph.stats().skill_edges, 0u);
    ASSERT_GT(stores.memory.trees().size(), 0u);
    const auto path = dir.path / "s.json";
    save_snapshot(path, stores, 80, {{"note", "x"}});
    const auto snap = load_snapshot(path);
    EXPECT_EQ(snap.created_step, 80);
    EXPECT_EQ(snap.config["note"], "x");
    EXPECT_EQ(snap.stores.graph.stats(), stores.graph.stats());
    EXPECT_EQ(snap.stores.memory.trees(), stores.memory.trees());
    EXPECT_EQ(snap.stores.memory.objects(), stores.memory.objects());
    ASSERT_EQ(snap.stores.memory.skills().size(), stores.memory.skills().size());
    for (std::size_t i = 0; i < stores.memory.skills().size(); ++i) {
        const auto& a = stores.memory.skills()[i];
        const auto& b = snap.stores.memory.skills()[i];
        EXPECT_EQ(a.name, b.name);
        EXPECT_EQ(a.actions, b.actions);
        EXPECT_EQ(a.fitness, b.fitness);
        EXPECT_EQ(a.status, b.status);
        EXPECT_EQ(a.cluster, b.cluster);
        EXPECT_EQ(a.last_reward, b.last_reward);
    }
    // Bit-exact embeddings and byte-identical re-save.
    for (std::size_t i = 0; i < stores.graph.nodes().size(); ++i)
        EXPECT_EQ(stores.graph.nodes()[i].embedding, snap.stores.graph.nodes()[i].embedding);
    const auto again = dir.path / "t.json";
    save_snapshot(again, snap.stores, 80, {{"note", "x"}});
    EXPECT_EQ(read_file(path), read_file(again));
}

TEST(Snapshot, AblatedGraphRoundTrips) {
    TempDir dir("persist_ablated");
    const auto stores = trained(4, false);
    save_snapshot(dir.path / "s.json", stores, 1);
    const auto snap = load_snapshot(dir.path / "s.json");
    EXPECT_FALSE(snap.stores.graph.config().similarity_edges);
    EXPECT_EQ(snap.stores.graph.stats(), stores.graph.stats());
}

TEST(Snapshot, MissingFileIsNotFound) { EXPECT_THROW(load_snapshot("/nonexistent/dir/s.json"), NotFound); }

TEST(Snapshot, NewerVersionFailsLoudly) {
    auto j = snapshot_to_json(trained(), 0);
    j["format_version"] = kSnapshotFormatVersion + 1;
    EXPECT_THROW(snapshot_from_json(j), VersionMismatch);
    j["format_version"] = 0;
    EXPECT_THROW(snapshot_from_json(j), VersionMismatch);
}

TEST(Snapshot, InterruptedSaveKeepsPriorSnapshot) {
    TempDir dir("persist_fault");
    const auto path = dir.path / "s.json";
    const auto stores = trained();
    save_snapshot(path, stores, 10);
    const auto before = read_file(path);
    AgentStores other(GraphConfig{});
    EXPECT_THROW(save_snapshot(path, other, 99, {}, [](const std::filesystem::path&) { throw IoError("simulated crash"); }),
                 IoError);
    EXPECT_EQ(read_file(path), before);
    EXPECT_FALSE(std::filesystem::exists(dir.path / "s.json.tmp"));
    EXPECT_EQ(load_snapshot(path).created_step, 10);
}

TEST(Snapshot, UnwritableDestinationNamesPath) {
    try {
        save_snapshot("/nonexistent/dir/s.json", AgentStores{}, 0);
        FAIL();
    } catch (const IoError& e) {
        EXPECT_NE(std::string(e.what()).find("/nonexistent/dir/s.json"), std::string::npos);
    }
}

TEST(Tamper, DuplicateNodePairAboveMergeThreshold) {
    auto j = snapshot_to_json(trained(), 0);
    auto& nodes = j["graph"]["nodes"];
    ASSERT_GE(nodes.size(), 2u);
    nodes[1]["embedding"] = nodes[0]["embedding"];
    EXPECT_EQ(invariant_of(j), "no-merge-pair");
}

TEST(Tamper, EachInvariantIsNamed) {
    const auto base = snapshot_to_json(trained(), 0);
    {
        auto j = base;
        j["memory"]["skills"][0]["fitness"] = -1.0;
        EXPECT_EQ(invariant_of(j), "fitness-nonnegative");
    }
    {
        auto j = base;
        j["graph"]["skill_edges"][0]["dst"] = 100000;
        EXPECT_EQ(invariant_of(j), "dangling-skill-edge");
    }
    {
        auto j = base;
        j["graph"]["skill_edges"].push_back(j["graph"]["skill_edges"][0]);
        EXPECT_EQ(invariant_of(j), "unique-skill-edge");
    }
    {
        auto j = base;
        j["graph"]["nodes"][0]["visit_count"] = 0;
        EXPECT_EQ(invariant_of(j), "visit-count-positive");
    }
    {
        auto j = base;
        j["graph"]["nodes"][0]["id"] = 5;
        EXPECT_EQ(invariant_of(j), "dense-node-ids");
    }
    {
        auto j = base;
        j["memory"]["tree_stats"][0]["total_selections"] = 100000;
        EXPECT_EQ(invariant_of(j), "tree-stats-total");
    }
    {
        // An edge labelled with a pruned skill breaks the prune cascade.
        auto j = base;
        const auto sid = j["graph"]["skill_edges"][0]["skill_id"].get<std::size_t>();
        j["memory"]["skills"][sid]["status"] = "pruned";
        j["memory"]["skills"][sid]["cluster"] = nullptr;
        for (auto& c : j["memory"]["clusters"]) {
            auto ids = c["skill_ids"].get<std::vector<std::size_t>>();
            ids.erase(std::remove(ids.begin(), ids.end(), sid), ids.end());
            c["skill_ids"] = ids;
        }
        EXPECT_EQ(invariant_of(j), "skill-edge-live-skill");
    }
    {
        auto j = base;
        j["graph"].erase("nodes");
        EXPECT_EQ(invariant_of(j), "graph-schema");
    }
    {
        auto j = base;
        j["memory"]["skills"][0]["status"] = "zombie";
        EXPECT_EQ(invariant_of(j), "skill-status");
    }
}

TEST(Tamper, GarbageFileIsCorrupt) {
    TempDir dir("persist_garbage");
    write_file(dir.path / "s.json", "{not json");
    try {
        load_snapshot(dir.path / "s.json");
        FAIL();
    } catch (const CorruptSnapshot& e) {
        EXPECT_EQ(e.invariant(), "json-syntax");
    }
}

TEST(SnapshotProperty, RoundTripAcrossSeeds) {
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        const auto stores = trained(seed, seed % 2 == 0);
        const auto j = snapshot_to_json(stores, static_cast<std::int64_t>(seed));
        const auto back = snapshot_from_json(nlohmann::json::parse(j.dump()));
        EXPECT_EQ(snapshot_to_json(back.stores, back.created_step), j);
    }
}
