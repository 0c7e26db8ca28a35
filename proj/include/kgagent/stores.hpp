#pragma once

#include "memory.hpp"
#include "sakg.hpp"

namespace kgagent {

/// The two persistent stores an agent carries across episodes. Operations
/// that must keep them consistent with each other live here.
struct AgentStores {
    KnowledgeGraph graph;
    ProceduralMemory memory;

    explicit AgentStores(GraphConfig cfg = {}) : graph(cfg), memory(cfg.thresholds) {}
    AgentStores(KnowledgeGraph g, ProceduralMemory m) : graph(std::move(g)), memory(std::move(m)) {}

    /// Records a skill edge using the skill's current fitness.
    const SkillEdge& record_transition(NodeId src, NodeId dst, SkillId skill, double delta) {
        const Skill& s = memory.skill(skill);
        if (!s.active()) throw StateError("record_transition: skill " + std::to_string(skill.value) + " is pruned");
        return graph.record_transition(src, dst, skill, delta, s.fitness);
    }

    /// Prunes the skill and cascades: its skill edges leave the graph.
    /// Returns the number of removed edges.
    std::size_t prune_skill(SkillId skill) {
        memory.prune_skill(skill);
        return graph.remove_skill_edges(skill);
    }

    /// Swaps a skill for its refined variant: the variant inherits fitness
    /// and cluster, the original is pruned. Returns the variant's id.
    SkillId replace_skill(SkillId original, std::string name, std::string descriptor,
                          std::vector<AtomicAction> actions, std::int64_t step) {
        if (!memory.skill(original).active()) throw StateError("replace_skill: original is pruned");
        const SkillId variant = memory.add_skill(std::move(name), std::move(descriptor), std::move(actions), step);
        if (variant == original) return original;
        memory.inherit(original, variant);
        prune_skill(original);
        return variant;
    }

    /// Every skill edge must name a live skill.
    void validate() const {
        graph.validate();
        memory.validate();
        for (const auto& e : graph.skill_edges()) {
            if (!memory.contains(e.skill) || !memory.skill(e.skill).active())
                throw CorruptSnapshot("skill-edge-live-skill", "edge references skill " + std::to_string(e.skill.value));
        }
    }
};

} // namespace kgagent
