#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "kgagent/sakg.hpp"
#include "support.hpp"

using namespace kgagent;
using testing_support::at_cosine;
using testing_support::axis;
using testing_support::random_embedding;

namespace {

GraphConfig small(std::size_t dim = 8) {
    GraphConfig c;
    c.dimension = dim;
    return c;
}

double reference_weight(double delta, double fitness, double alpha = 0.7, double c0 = 5.0) {
    const double z = alpha * delta + (1.0 - alpha) * (fitness / (fitness + c0));
    return 1.0 / (1.0 + std::exp(-z));
}

} // namespace

TEST(Ingest, FirstObservationCreatesNode) {
    KnowledgeGraph g(small());
    auto r = g.ingest_observation(Embedding(axis(8, 0)), 3);
    EXPECT_TRUE(r.is_new);
    EXPECT_EQ(r.node, NodeId{0});
    EXPECT_EQ(g.node(r.node).first_seen_step, 3);
    EXPECT_EQ(g.node(r.node).visit_count, 1u);
}

TEST(Ingest, MergeLinkIsolate) {
    KnowledgeGraph g(small());
    g.ingest_observation(at_cosine(1.0), 0);
    auto linked = g.ingest_observation(at_cosine(0.90, 8, 1), 1);
    EXPECT_TRUE(linked.is_new);
    ASSERT_EQ(g.similarity_edges().size(), 1u);
    EXPECT_NEAR(g.similarity_edges()[0].weight, 0.90, 1e-12);

    auto merged = g.ingest_observation(at_cosine(0.97, 8, 2), 2);
    EXPECT_FALSE(merged.is_new);
    EXPECT_EQ(merged.node, NodeId{0});
    EXPECT_EQ(g.node(NodeId{0}).visit_count, 2u);

    auto isolated = g.ingest_observation(at_cosine(0.50, 8, 3), 3);
    EXPECT_TRUE(isolated.is_new);
    EXPECT_EQ(g.similarity_edges().size(), 1u);
    EXPECT_EQ(g.neighborhood_of_experience(isolated.node), std::vector<NodeId>{isolated.node});
}

TEST(Ingest, ExactlyAtMergeThresholdLinksInsteadOfMerging) {
    KnowledgeGraph g(small());
    g.ingest_observation(at_cosine(1.0), 0);
    auto r = g.ingest_observation(at_cosine(0.95), 1);
    // at_cosine may land one ulp either side of 0.95; check the rule against the stored value.
    const double c = cosine(at_cosine(1.0), at_cosine(0.95));
    EXPECT_EQ(r.is_new, c <= 0.95);
    EXPECT_EQ(g.similarity_edges().size(), c <= 0.95 ? 1u : 0u);
}

TEST(Ingest, MergeTieGoesToLowestId) {
    KnowledgeGraph g(small(3));
    g.ingest_observation(Embedding({1.0, 0.2, 0.0}), 0);
    g.ingest_observation(Embedding({1.0, -0.2, 0.0}), 0);  // cos 0.923: linked, not merged
    ASSERT_EQ(g.stats().nodes, 2u);
    // The probe is equally similar (0.98) to both.
    auto target = g.find_merge_target(Embedding({1.0, 0.0, 0.0}));
    ASSERT_TRUE(target.has_value());
    EXPECT_EQ(*target, NodeId{0});
    EXPECT_EQ(g.ingest_observation(Embedding({1.0, 0.0, 0.0}), 1).node, NodeId{0});
}

TEST(Ingest, MergesIntoMostSimilarNode) {
    KnowledgeGraph g(small(3));
    g.ingest_observation(Embedding({1.0, 0.3, 0.0}), 0);
    g.ingest_observation(Embedding({1.0, -0.1, 0.0}), 0);
    ASSERT_EQ(g.stats().nodes, 2u);
    auto r = g.ingest_observation(Embedding({1.0, -0.05, 0.0}), 1);
    EXPECT_EQ(r.node, NodeId{1});
}

TEST(Ingest, DimensionMismatchRejected) {
    KnowledgeGraph g(small());
    EXPECT_THROW(g.ingest_observation(Embedding({1, 0}), 0), ContractViolation);
}

TEST(Ingest, AblationKeepsEveryObservation) {
    GraphConfig c = small();
    c.similarity_edges = false;
    KnowledgeGraph g(c);
    for (int i = 0; i < 5; ++i) g.ingest_observation(at_cosine(1.0), i);
    EXPECT_EQ(g.stats().nodes, 5u);
    EXPECT_EQ(g.stats().similarity_edges, 0u);
    EXPECT_FALSE(g.find_merge_target(at_cosine(1.0)).has_value());
}

TEST(IngestProperty, NoMergePairAndEdgeWeightsInBand) {
    GraphConfig c = small(6);
    KnowledgeGraph g(c);
    Rng rng(17);
    const auto base = random_embedding(rng, 6);
    for (int i = 0; i < 1500; ++i) {
        // Perturbations of a common base produce many near-threshold pairs.
        std::vector<double> v(base.values().begin(), base.values().end());
        const double s = rng.uniform(0.0, 0.8);
        for (auto& x : v) x += s * rng.normal();
        g.ingest_observation(Embedding(v), i);
    }
    EXPECT_NO_THROW(g.validate());
    for (const auto& e : g.similarity_edges()) {
        EXPECT_GT(e.weight, 0.88);
        EXPECT_LE(e.weight, 0.95);
        EXPECT_NEAR(e.weight, cosine(g.node(e.a).embedding, g.node(e.b).embedding), 1e-12);
        EXPECT_LT(e.a, e.b);
    }
    const auto& nodes = g.nodes();
    for (std::size_t i = 0; i < nodes.size(); ++i)
        for (std::size_t j = i + 1; j < nodes.size(); ++j) ASSERT_LE(cosine(nodes[i].embedding, nodes[j].embedding), 0.95);
}

TEST(SkillEdgeWeight, MatchesReferenceFormula) {
    GraphConfig c;
    for (double d : {0.0, 0.023, 0.25, 0.5, 1.0})
        for (double f : {0.0, 1.0, 5.0, 40.0}) EXPECT_NEAR(skill_edge_weight(d, f, c), reference_weight(d, f), 1e-12);
    EXPECT_NEAR(skill_edge_weight(0.0, 0.0, c), 0.5, 1e-12);
    EXPECT_THROW(skill_edge_weight(1.5, 0.0, c), ContractViolation);
    EXPECT_THROW(skill_edge_weight(0.5, -1.0, c), ContractViolation);
}

TEST(SkillEdgeWeightProperty, MonotoneAndBounded) {
    GraphConfig c;
    Rng rng(4);
    for (int i = 0; i < 2000; ++i) {
        const double d = rng.uniform(), f = rng.uniform(0.0, 50.0);
        const double w = skill_edge_weight(d, f, c);
        EXPECT_GE(w, 0.5);
        EXPECT_LT(w, 1.0 / (1.0 + std::exp(-1.0)) + 1e-12);
        EXPECT_GE(skill_edge_weight(std::min(1.0, d + 0.1), f, c), w);
        EXPECT_GE(skill_edge_weight(d, f + 1.0, c), w);
    }
}

TEST(RecordTransition, CreatesThenRefreshes) {
    KnowledgeGraph g(small());
    auto a = g.ingest_observation(at_cosine(1.0), 0).node;
    auto b = g.ingest_observation(at_cosine(0.2, 8, 1), 0).node;
    g.record_transition(a, b, SkillId{3}, 0.4, 0.0);
    auto& e = g.record_transition(a, b, SkillId{3}, 0.1, 2.0);
    EXPECT_EQ(e.traversal_count, 2u);
    EXPECT_NEAR(e.weight, reference_weight(0.1, 2.0), 1e-12);
    EXPECT_EQ(g.stats().skill_edges, 1u);
    EXPECT_THROW(g.record_transition(a, NodeId{9}, SkillId{0}, 0.1, 0.0), NotFound);
}

TEST(StatePotential, SumsOutgoingIncludingSelfLoops) {
    KnowledgeGraph g(small());
    auto a = g.ingest_observation(at_cosine(1.0), 0).node;
    auto b = g.ingest_observation(at_cosine(0.2, 8, 1), 0).node;
    g.record_transition(a, b, SkillId{0}, 0.5, 1.0);
    g.record_transition(a, a, SkillId{1}, 0.0, 0.0);
    g.record_transition(b, a, SkillId{2}, 1.0, 3.0);
    const double va = reference_weight(0.5, 1.0) + reference_weight(0.0, 0.0);
    const double vb = reference_weight(1.0, 3.0);
    EXPECT_NEAR(g.state_potential(a), va, 1e-12);
    EXPECT_NEAR(g.state_potential(b), vb, 1e-12);
    EXPECT_NEAR(g.reward_state(a, b), vb - va, 1e-12);
    EXPECT_NEAR(g.reward_state(a, a), 0.0, 1e-15);
}

TEST(HighQualitySkills, CollectsNeighbourhoodWithMaxWeight) {
    KnowledgeGraph g(small());
    auto a = g.ingest_observation(at_cosine(1.0), 0).node;
    auto b = g.ingest_observation(at_cosine(0.90, 8, 1), 0).node;  // linked to a
    auto c = g.ingest_observation(at_cosine(0.10, 8, 2), 0).node;  // unrelated
    g.record_transition(a, c, SkillId{5}, 0.1, 0.0);
    g.record_transition(b, c, SkillId{5}, 0.9, 0.0);
    g.record_transition(b, a, SkillId{2}, 0.3, 0.0);
    g.record_transition(c, a, SkillId{7}, 0.3, 0.0);
    auto hq = g.high_quality_skills(a);
    ASSERT_EQ(hq.size(), 2u);
    EXPECT_EQ(hq[0].skill, SkillId{2});
    EXPECT_EQ(hq[1].skill, SkillId{5});
    EXPECT_NEAR(hq[1].weight, reference_weight(0.9, 0.0), 1e-12);
    auto from_c = g.high_quality_skills(c);
    ASSERT_EQ(from_c.size(), 1u);
    EXPECT_EQ(from_c[0].skill, SkillId{7});
}

TEST(RemoveSkillEdges, RemovesOnlyThatSkill) {
    KnowledgeGraph g(small());
    auto a = g.ingest_observation(at_cosine(1.0), 0).node;
    auto b = g.ingest_observation(at_cosine(0.2, 8, 1), 0).node;
    g.record_transition(a, b, SkillId{1}, 0.5, 0.0);
    g.record_transition(b, a, SkillId{1}, 0.5, 0.0);
    g.record_transition(a, b, SkillId{2}, 0.5, 0.0);
    EXPECT_EQ(g.remove_skill_edges(SkillId{1}), 2u);
    EXPECT_EQ(g.stats().skill_edges, 1u);
    EXPECT_EQ(g.find_skill_edge(a, b, SkillId{1}), nullptr);
    EXPECT_NE(g.find_skill_edge(a, b, SkillId{2}), nullptr);
}

TEST(SampleSkill, EmptyAndBadWeightsRejected) {
    Rng rng(1);
    std::vector<SkillCandidate> none;
    EXPECT_THROW(sample_skill(none, rng), EmptyCandidates);
    std::vector<SkillCandidate> bad{{SkillId{0}, 0.0}};
    EXPECT_THROW(sample_skill(bad, rng), ContractViolation);
}

TEST(SampleSkill, FrequenciesFollowWeights) {
    Rng rng(9);
    std::vector<SkillCandidate> c{{SkillId{0}, 0.6}, {SkillId{1}, 0.3}, {SkillId{2}, 0.1}};
    std::map<SkillId, int> counts;
    const int n = 30000;
    for (int i = 0; i < n; ++i) ++counts[sample_skill(c, rng)];
    EXPECT_NEAR(counts[SkillId{0}] / double(n), 0.6, 0.015);
    EXPECT_NEAR(counts[SkillId{1}] / double(n), 0.3, 0.015);
    EXPECT_NEAR(counts[SkillId{2}] / double(n), 0.1, 0.01);
}

TEST(Validate, DetectsTamperedParts) {
    GraphConfig c = small();
    auto e0 = at_cosine(1.0), e1 = at_cosine(0.99, 8, 1);
    try {
        KnowledgeGraph::restore(c, {StateNode{NodeId{0}, e0, 1, 0}, StateNode{NodeId{1}, e1, 1, 0}}, {}, {});
        FAIL() << "expected CorruptSnapshot";
    } catch (const CorruptSnapshot& e) {
        EXPECT_EQ(e.invariant(), "no-merge-pair");
    }
    try {
        KnowledgeGraph::restore(c, {StateNode{NodeId{0}, e0, 0, 0}}, {}, {});
        FAIL();
    } catch (const CorruptSnapshot& e) {
        EXPECT_EQ(e.invariant(), "visit-count-positive");
    }
    try {
        KnowledgeGraph::restore(c, {StateNode{NodeId{0}, e0, 1, 0}}, {}, {SkillEdge{NodeId{0}, NodeId{4}, SkillId{0}, 0.6, 1, 0.1}});
        FAIL();
    } catch (const CorruptSnapshot& e) {
        EXPECT_EQ(e.invariant(), "dangling-skill-edge");
    }
}
