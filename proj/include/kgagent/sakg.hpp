#pragma once

// State-action knowledge graph: perceptual state nodes joined by undirected
// similarity edges and directed, weighted skill edges.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "embedding.hpp"
#include "errors.hpp"
#include "ids.hpp"
#include "rng.hpp"

namespace kgagent {

struct GraphConfig {
    SimilarityThresholds thresholds{};
    double alpha = 0.7;
    double c0 = 5.0;
    std::size_t dimension = kDefaultEmbeddingDim;
    /// Ablation: when false every observation becomes its own isolated node
    /// (no merging, no similarity edges).
    bool similarity_edges = true;

    void validate() const {
        if (!(alpha >= 0.0 && alpha <= 1.0)) throw ContractViolation("alpha must lie in [0, 1]");
        if (!(c0 > 0.0)) throw ContractViolation("c0 must be positive");
        if (dimension == 0) throw ContractViolation("embedding dimension must be positive");
    }

    friend bool operator==(const GraphConfig&, const GraphConfig&) = default;
};

struct StateNode {
    NodeId id;
    Embedding embedding;
    std::uint64_t visit_count = 1;
    std::int64_t first_seen_step = 0;
};

/// Undirected; stored with a < b.
struct SimilarityEdge {
    NodeId a;
    NodeId b;
    double weight = 0.0;

    friend bool operator==(const SimilarityEdge&, const SimilarityEdge&) = default;
};

struct SkillEdge {
    NodeId source;
    NodeId target;
    SkillId skill;
    double weight = 0.5;
    std::uint64_t traversal_count = 0;
    double last_delta = 0.0;

    friend bool operator==(const SkillEdge&, const SkillEdge&) = default;
};

struct SkillCandidate {
    SkillId skill;
    double weight = 0.0;

    friend bool operator==(const SkillCandidate&, const SkillCandidate&) = default;
};

struct GraphStats {
    std::size_t nodes = 0;
    std::size_t skill_edges = 0;
    std::size_t similarity_edges = 0;

    friend bool operator==(const GraphStats&, const GraphStats&) = default;
};

struct IngestResult {
    NodeId node;
    bool is_new = false;
};

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

/// Skill-edge weight: sigmoid(alpha * delta + (1 - alpha) * fitness / (fitness + c0)).
/// Blends the immediate visual change of a transition with the skill's
/// saturating historical fitness.
inline double skill_edge_weight(double delta, double fitness, const GraphConfig& cfg) {
    if (!(delta >= 0.0 && delta <= 1.0)) throw ContractViolation("skill_edge_weight: delta outside [0, 1]");
    if (!(fitness >= 0.0)) throw ContractViolation("skill_edge_weight: negative fitness");
    const double saturation = fitness / (fitness + cfg.c0);
    return sigmoid(cfg.alpha * delta + (1.0 - cfg.alpha) * saturation);
}

inline constexpr double kNovelStateReward = 1.000;
inline constexpr double kKnownStateReward = 0.015;

/// Binary novelty incentive for the destination of a transition.
inline double reward_novel(bool is_new_node) { return is_new_node ? kNovelStateReward : kKnownStateReward; }

/// Draws one skill with probability proportional to its weight.
inline SkillId sample_skill(std::span<const SkillCandidate> candidates, Rng& rng) {
    if (candidates.empty()) throw EmptyCandidates("sample_skill: no candidates");
    double total = 0.0;
    for (const auto& c : candidates) {
        if (!(c.weight > 0.0) || !std::isfinite(c.weight))
            throw ContractViolation("sample_skill: weights must be positive and finite");
        total += c.weight;
    }
    const double target = rng.uniform() * total;
    double acc = 0.0;
    for (const auto& c : candidates) {
        acc += c.weight;
        if (target < acc) return c.skill;
    }
    return candidates.back().skill;
}

class KnowledgeGraph {
public:
    explicit KnowledgeGraph(GraphConfig cfg = {}) : cfg_(std::move(cfg)) { cfg_.validate(); }

    const GraphConfig& config() const { return cfg_; }

    /// Merges the observation into the most similar node above theta_merge
    /// (ties -> lowest id) or creates a new node linked by similarity edges to
    /// every node in (theta_simi, theta_merge].
    IngestResult ingest_observation(const Embedding& embedding, std::int64_t step) {
        check_dimension(embedding);
        const NodeId id{static_cast<std::uint32_t>(nodes_.size())};
        std::vector<SimilarityEdge> links;
        if (cfg_.similarity_edges) {
            std::optional<NodeId> best;
            double best_sim = -2.0;
            for (const auto& n : nodes_) {
                const double c = cosine(n.embedding, embedding);
                switch (classify(c, cfg_.thresholds)) {
                case SimilarityClass::Merge:
                    if (c > best_sim) {
                        best_sim = c;
                        best = n.id;
                    }
                    break;
                case SimilarityClass::SimilarEdge: links.push_back({n.id, id, c}); break;
                case SimilarityClass::Unrelated: break;
                }
            }
            if (best) {
                ++nodes_[best->value].visit_count;
                return {*best, false};
            }
        }
        nodes_.push_back(StateNode{id, embedding, 1, step});
        adjacency_.emplace_back();
        for (const auto& e : links) {
            similarity_edges_.push_back(e);
            adjacency_[e.a.value].push_back(id);
            adjacency_[id.value].push_back(e.a);
        }
        return {id, true};
    }

    /// Node an observation would merge into, without mutating the graph.
    std::optional<NodeId> find_merge_target(const Embedding& embedding) const {
        check_dimension(embedding);
        if (!cfg_.similarity_edges) return std::nullopt;
        std::optional<NodeId> best;
        double best_sim = -2.0;
        for (const auto& n : nodes_) {
            const double c = cosine(n.embedding, embedding);
            if (classify(c, cfg_.thresholds) == SimilarityClass::Merge && c > best_sim) {
                best_sim = c;
                best = n.id;
            }
        }
        return best;
    }

    /// Creates or refreshes the (src, dst, skill) edge. The weight is
    /// recomputed from the latest delta and fitness.
    const SkillEdge& record_transition(NodeId src, NodeId dst, SkillId skill, double delta, double fitness) {
        require_node(src);
        require_node(dst);
        const double w = skill_edge_weight(delta, fitness, cfg_);
        auto [it, inserted] = skill_edges_.try_emplace(EdgeKey{src, dst, skill}, SkillEdge{src, dst, skill, w, 0, delta});
        it->second.weight = w;
        it->second.last_delta = delta;
        ++it->second.traversal_count;
        return it->second;
    }

    /// Similarity-linked neighbours of `id`, plus `id` itself, ascending.
    std::vector<NodeId> neighborhood_of_experience(NodeId id) const {
        require_node(id);
        std::vector<NodeId> out = adjacency_[id.value];
        out.push_back(id);
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    /// Skills on outgoing skill edges anywhere in the neighbourhood. A skill
    /// reachable via several edges carries its maximum edge weight. Ordered by
    /// skill id.
    std::vector<SkillCandidate> high_quality_skills(NodeId id) const {
        std::map<SkillId, double> best;
        for (NodeId n : neighborhood_of_experience(id)) {
            for (auto it = first_out(n); it != skill_edges_.end() && it->first.source == n; ++it) {
                auto [slot, inserted] = best.try_emplace(it->second.skill, it->second.weight);
                if (!inserted) slot->second = std::max(slot->second, it->second.weight);
            }
        }
        std::vector<SkillCandidate> out;
        out.reserve(best.size());
        for (const auto& [skill, w] : best) out.push_back({skill, w});
        return out;
    }

    /// Sum of outgoing skill-edge weights (self-loops counted once).
    double state_potential(NodeId id) const {
        require_node(id);
        double sum = 0.0;
        for (auto it = first_out(id); it != skill_edges_.end() && it->first.source == id; ++it) sum += it->second.weight;
        return sum;
    }

    /// Potential difference V(dst) - V(src) on the current graph.
    double reward_state(NodeId src, NodeId dst) const { return state_potential(dst) - state_potential(src); }

    std::vector<const SkillEdge*> outgoing(NodeId id) const {
        require_node(id);
        std::vector<const SkillEdge*> out;
        for (auto it = first_out(id); it != skill_edges_.end() && it->first.source == id; ++it) out.push_back(&it->second);
        return out;
    }

    /// Removes every skill edge labelled with `skill`; returns how many were removed.
    std::size_t remove_skill_edges(SkillId skill) {
        return std::erase_if(skill_edges_, [skill](const auto& kv) { return kv.first.skill == skill; });
    }

    /// Maintenance: recompute every edge weight from its last delta and the
    /// skill's current fitness.
    template <class FitnessLookup>
    void refresh_weights(FitnessLookup&& fitness_of) {
        for (auto& [key, e] : skill_edges_) e.weight = skill_edge_weight(e.last_delta, fitness_of(e.skill), cfg_);
    }

    GraphStats stats() const { return {nodes_.size(), skill_edges_.size(), similarity_edges_.size()}; }

    bool contains(NodeId id) const { return id.value < nodes_.size(); }
    const StateNode& node(NodeId id) const {
        require_node(id);
        return nodes_[id.value];
    }
    const std::vector<StateNode>& nodes() const { return nodes_; }
    const std::vector<SimilarityEdge>& similarity_edges() const { return similarity_edges_; }

    /// Skill edges ordered by (source, target, skill).
    std::vector<SkillEdge> skill_edges() const {
        std::vector<SkillEdge> out;
        out.reserve(skill_edges_.size());
        for (const auto& [k, e] : skill_edges_) out.push_back(e);
        return out;
    }

    const SkillEdge* find_skill_edge(NodeId src, NodeId dst, SkillId skill) const {
        auto it = skill_edges_.find(EdgeKey{src, dst, skill});
        return it == skill_edges_.end() ? nullptr : &it->second;
    }

    /// Rebuilds a graph from persisted parts and re-validates every invariant.
    static KnowledgeGraph restore(GraphConfig cfg, std::vector<StateNode> nodes, std::vector<SimilarityEdge> sim_edges,
                                  std::vector<SkillEdge> skill_edges) {
        KnowledgeGraph g(std::move(cfg));
        g.nodes_ = std::move(nodes);
        g.adjacency_.assign(g.nodes_.size(), {});
        for (auto e : sim_edges) {
            if (e.b < e.a) std::swap(e.a, e.b);
            g.similarity_edges_.push_back(e);
            if (e.a.value < g.nodes_.size() && e.b.value < g.nodes_.size()) {
                g.adjacency_[e.a.value].push_back(e.b);
                g.adjacency_[e.b.value].push_back(e.a);
            }
        }
        for (const auto& e : skill_edges) {
            if (!g.skill_edges_.try_emplace(EdgeKey{e.source, e.target, e.skill}, e).second)
                throw CorruptSnapshot("unique-skill-edge", "duplicate (source, target, skill) triple");
        }
        g.validate();
        return g;
    }

    /// Throws CorruptSnapshot naming the first violated invariant.
    void validate() const {
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            const auto& n = nodes_[i];
            if (n.id.value != i) throw CorruptSnapshot("dense-node-ids", "node at index " + std::to_string(i));
            if (n.visit_count < 1) throw CorruptSnapshot("visit-count-positive", "node " + std::to_string(i));
            if (n.embedding.dimension() != cfg_.dimension)
                throw CorruptSnapshot("embedding-dimension", "node " + std::to_string(i));
        }
        if (cfg_.similarity_edges) {
            for (std::size_t i = 0; i < nodes_.size(); ++i)
                for (std::size_t j = i + 1; j < nodes_.size(); ++j)
                    if (cosine(nodes_[i].embedding, nodes_[j].embedding) > cfg_.thresholds.merge())
                        throw CorruptSnapshot("no-merge-pair",
                                              "nodes " + std::to_string(i) + " and " + std::to_string(j));
        } else if (!similarity_edges_.empty()) {
            throw CorruptSnapshot("similarity-edges-disabled", "similarity edges present while ablated");
        }
        std::map<std::pair<NodeId, NodeId>, int> seen;
        for (const auto& e : similarity_edges_) {
            if (!contains(e.a) || !contains(e.b)) throw CorruptSnapshot("dangling-similarity-edge", "");
            if (e.a == e.b) throw CorruptSnapshot("no-similarity-self-loop", "node " + std::to_string(e.a.value));
            if (++seen[{e.a, e.b}] > 1) throw CorruptSnapshot("unique-similarity-edge", "");
            if (!(e.weight > cfg_.thresholds.simi() && e.weight <= cfg_.thresholds.merge()))
                throw CorruptSnapshot("similarity-edge-weight", "weight " + std::to_string(e.weight));
        }
        for (const auto& [k, e] : skill_edges_) {
            if (!contains(e.source) || !contains(e.target)) throw CorruptSnapshot("dangling-skill-edge", "");
            if (!(e.weight > 0.0 && e.weight < 1.0)) throw CorruptSnapshot("skill-edge-weight", "");
            if (e.traversal_count < 1) throw CorruptSnapshot("skill-edge-traversal-count", "");
            if (!(e.last_delta >= 0.0 && e.last_delta <= 1.0)) throw CorruptSnapshot("skill-edge-delta", "");
        }
    }

private:
    struct EdgeKey {
        NodeId source;
        NodeId target;
        SkillId skill;
        friend auto operator<=>(const EdgeKey&, const EdgeKey&) = default;
    };
    using EdgeMap = std::map<EdgeKey, SkillEdge>;

    EdgeMap::const_iterator first_out(NodeId id) const { return skill_edges_.lower_bound(EdgeKey{id, NodeId{0}, SkillId{0}}); }

    void require_node(NodeId id) const {
        if (!contains(id)) throw NotFound("no state node with id " + std::to_string(id.value));
    }

    void check_dimension(const Embedding& e) const {
        if (e.dimension() != cfg_.dimension)
            throw ContractViolation("embedding dimension " + std::to_string(e.dimension()) + " != configured " +
                                    std::to_string(cfg_.dimension));
    }

    GraphConfig cfg_;
    std::vector<StateNode> nodes_;
    std::vector<std::vector<NodeId>> adjacency_;
    std::vector<SimilarityEdge> similarity_edges_;
    EdgeMap skill_edges_;
};

} // namespace kgagent
