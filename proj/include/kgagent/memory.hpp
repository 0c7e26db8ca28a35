#pragma once

// Procedural memory: skill library, action clusters, objects table and the
// per-state selection statistics used by the bandit fallback.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "embedding.hpp"
#include "errors.hpp"
#include "ids.hpp"

namespace kgagent {

enum class Operate { Click, Drag, Scroll, Type };

inline const char* to_string(Operate op) {
    switch (op) {
    case Operate::Click: return "Click";
    case Operate::Drag: return "Drag";
    case Operate::Scroll: return "Scroll";
    case Operate::Type: return "Type";
    }
    return "?";
}

inline Operate operate_from_string(const std::string& s) {
    if (s == "Click") return Operate::Click;
    if (s == "Drag") return Operate::Drag;
    if (s == "Scroll") return Operate::Scroll;
    if (s == "Type") return Operate::Type;
    throw ContractViolation("unknown operation '" + s + "'");
}

struct AtomicAction {
    Operate operate = Operate::Click;
    ObjectId object_id = 0;
    std::string object_name;
    std::optional<std::string> payload;

    friend bool operator==(const AtomicAction&, const AtomicAction&) = default;
};

/// Dedup key: the executable part of an action (name is display only).
inline bool same_behaviour(const std::vector<AtomicAction>& a, const std::vector<AtomicAction>& b) {
    return std::equal(a.begin(), a.end(), b.begin(), b.end(), [](const AtomicAction& x, const AtomicAction& y) {
        return x.operate == y.operate && x.object_id == y.object_id && x.payload == y.payload;
    });
}

enum class SkillStatus { Active, Pruned };

struct Skill {
    SkillId id;
    std::string name;
    std::string descriptor;
    std::vector<AtomicAction> actions;
    double fitness = 0.0;
    std::uint64_t exec_count = 0;
    std::int64_t created_step = 0;
    SkillStatus status = SkillStatus::Active;
    std::optional<ClusterId> cluster;
    /// R_total of the most recent execution, used to judge refinements.
    std::optional<double> last_reward;

    bool active() const { return status == SkillStatus::Active; }
};

struct UIObject {
    ObjectId id = 0;
    std::string name;
    std::string reference_descriptor;

    friend bool operator==(const UIObject&, const UIObject&) = default;
};

struct ActionCluster {
    ClusterId id;
    Embedding centroid;
    std::set<SkillId> skill_ids;
};

struct SkillSelection {
    std::uint64_t visits = 0;
    double value_sum = 0.0;

    friend bool operator==(const SkillSelection&, const SkillSelection&) = default;
};

/// Depth-1 search tree cached for one state: selection counts per skill.
struct SearchTreeStats {
    NodeId state;
    std::map<SkillId, SkillSelection> per_skill;
    std::uint64_t total_selections = 0;

    std::uint64_t visits(SkillId s) const {
        auto it = per_skill.find(s);
        return it == per_skill.end() ? 0 : it->second.visits;
    }

    friend bool operator==(const SearchTreeStats&, const SearchTreeStats&) = default;
};

class ProceduralMemory {
public:
    explicit ProceduralMemory(SimilarityThresholds thresholds = {}) : thresholds_(thresholds) {}

    const SimilarityThresholds& thresholds() const { return thresholds_; }

    /// Registers a skill, or returns the id of the Active skill with the same
    /// action sequence.
    SkillId add_skill(std::string name, std::string descriptor, std::vector<AtomicAction> actions,
                      std::int64_t step = 0) {
        if (actions.empty()) throw ContractViolation("add_skill: a skill needs at least one action");
        for (const auto& s : skills_)
            if (s.active() && same_behaviour(s.actions, actions)) return s.id;
        Skill s;
        s.id = SkillId{static_cast<std::uint32_t>(skills_.size())};
        s.name = std::move(name);
        s.descriptor = std::move(descriptor);
        s.actions = std::move(actions);
        s.created_step = step;
        skills_.push_back(std::move(s));
        return skills_.back().id;
    }

    bool contains(SkillId id) const { return id.value < skills_.size(); }

    const Skill& skill(SkillId id) const { return skills_.at(require(id)); }

    /// fitness += max(0, reward); exec_count += 1.
    double update_fitness(SkillId id, double total_reward) {
        Skill& s = skills_[require(id)];
        if (!s.active()) throw StateError("update_fitness: skill " + std::to_string(id.value) + " is pruned");
        s.fitness += std::max(0.0, total_reward);
        ++s.exec_count;
        s.last_reward = total_reward;
        return s.fitness;
    }

    void set_last_reward(SkillId id, double reward) { skills_[require(id)].last_reward = reward; }

    /// Gives `to` the fitness, execution count and cluster of `from`, for a
    /// refined variant taking over from its original.
    void inherit(SkillId from, SkillId to) {
        const Skill& src = skills_[require(from)];
        Skill& dst = skills_[require(to)];
        if (!dst.active()) throw StateError("inherit: target skill is pruned");
        dst.fitness = std::max(dst.fitness, src.fitness);
        dst.exec_count = std::max(dst.exec_count, src.exec_count);
        if (!dst.cluster && src.cluster) {
            clusters_[src.cluster->value].skill_ids.insert(to);
            dst.cluster = src.cluster;
        }
    }

    /// Marks the skill Pruned and drops its cluster membership. Returns false
    /// if it was already pruned.
    bool prune_skill(SkillId id) {
        Skill& s = skills_[require(id)];
        if (!s.active()) return false;
        s.status = SkillStatus::Pruned;
        if (s.cluster) {
            clusters_[s.cluster->value].skill_ids.erase(id);
            s.cluster.reset();
        }
        ++pruned_total_;
        return true;
    }

    /// Cluster whose centroid is most similar to `state`, if that similarity
    /// clears theta_simi.
    const ActionCluster* cluster_for_state(const Embedding& state) const {
        const ActionCluster* best = nullptr;
        double best_sim = thresholds_.simi();
        for (const auto& c : clusters_) {
            if (c.centroid.dimension() != state.dimension()) continue;
            const double sim = cosine(c.centroid, state);
            if (sim > best_sim) {
                best_sim = sim;
                best = &c;
            }
        }
        return best;
    }

    /// Puts the skill into the best-matching cluster for `state`, founding a
    /// new cluster centred on `state` when none qualifies.
    ClusterId assign_to_cluster(SkillId id, const Embedding& state) {
        Skill& s = skills_[require(id)];
        if (!s.active()) throw StateError("assign_to_cluster: skill is pruned");
        if (s.cluster) return *s.cluster;
        ClusterId cid;
        if (const ActionCluster* c = cluster_for_state(state)) {
            cid = c->id;
        } else {
            cid = ClusterId{static_cast<std::uint32_t>(clusters_.size())};
            clusters_.push_back(ActionCluster{cid, state, {}});
        }
        clusters_[cid.value].skill_ids.insert(id);
        s.cluster = cid;
        return cid;
    }

    /// Fetch-or-create.
    SearchTreeStats& tree_stats(NodeId state) {
        auto [it, inserted] = trees_.try_emplace(state);
        if (inserted) it->second.state = state;
        return it->second;
    }

    const SearchTreeStats* find_tree_stats(NodeId state) const {
        auto it = trees_.find(state);
        return it == trees_.end() ? nullptr : &it->second;
    }

    void record_selection(NodeId state, SkillId skill, double reward) {
        auto& t = tree_stats(state);
        auto& rec = t.per_skill[skill];
        ++rec.visits;
        rec.value_sum += reward;
        ++t.total_selections;
    }

    void upsert_object(UIObject obj) { objects_[obj.id] = std::move(obj); }
    const std::map<ObjectId, UIObject>& objects() const { return objects_; }

    const std::vector<Skill>& skills() const { return skills_; }
    const std::vector<ActionCluster>& clusters() const { return clusters_; }
    const std::map<NodeId, SearchTreeStats>& trees() const { return trees_; }

    std::vector<SkillId> active_skill_ids() const {
        std::vector<SkillId> out;
        for (const auto& s : skills_)
            if (s.active()) out.push_back(s.id);
        return out;
    }

    std::size_t library_size() const {
        return static_cast<std::size_t>(std::count_if(skills_.begin(), skills_.end(), [](const Skill& s) { return s.active(); }));
    }

    std::uint64_t pruned_total() const { return pruned_total_; }

    static ProceduralMemory restore(SimilarityThresholds thresholds, std::vector<Skill> skills,
                                    std::vector<ActionCluster> clusters, std::vector<UIObject> objects,
                                    std::vector<SearchTreeStats> trees, std::uint64_t pruned_total) {
        ProceduralMemory m(thresholds);
        m.skills_ = std::move(skills);
        m.clusters_ = std::move(clusters);
        for (auto& o : objects) {
            if (!m.objects_.try_emplace(o.id, o).second)
                throw CorruptSnapshot("unique-object-ids", "object " + std::to_string(o.id));
        }
        for (auto& t : trees) {
            if (!m.trees_.try_emplace(t.state, t).second)
                throw CorruptSnapshot("unique-tree-stats", "state " + std::to_string(t.state.value));
        }
        m.pruned_total_ = pruned_total;
        m.validate();
        return m;
    }

    void validate() const {
        for (std::size_t i = 0; i < skills_.size(); ++i) {
            const auto& s = skills_[i];
            const std::string where = "skill " + std::to_string(i);
            if (s.id.value != i) throw CorruptSnapshot("dense-skill-ids", where);
            if (s.actions.empty()) throw CorruptSnapshot("skill-actions-nonempty", where);
            if (!(s.fitness >= 0.0)) throw CorruptSnapshot("fitness-nonnegative", where);
            if (!s.active() && s.cluster) throw CorruptSnapshot("pruned-skill-clustered", where);
            if (s.cluster && (s.cluster->value >= clusters_.size() || !clusters_[s.cluster->value].skill_ids.contains(s.id)))
                throw CorruptSnapshot("cluster-membership", where);
        }
        std::set<SkillId> seen;
        for (std::size_t i = 0; i < clusters_.size(); ++i) {
            const auto& c = clusters_[i];
            if (c.id.value != i) throw CorruptSnapshot("dense-cluster-ids", "cluster " + std::to_string(i));
            for (SkillId s : c.skill_ids) {
                if (!contains(s) || !skills_[s.value].active())
                    throw CorruptSnapshot("cluster-members-active", "cluster " + std::to_string(i));
                if (!seen.insert(s).second) throw CorruptSnapshot("cluster-disjointness", "skill " + std::to_string(s.value));
                if (skills_[s.value].cluster != c.id) throw CorruptSnapshot("cluster-membership", "skill " + std::to_string(s.value));
            }
        }
        for (const auto& [state, t] : trees_) {
            std::uint64_t sum = 0;
            for (const auto& [skill, rec] : t.per_skill) {
                if (!contains(skill)) throw CorruptSnapshot("tree-stats-skill", "unknown skill " + std::to_string(skill.value));
                sum += rec.visits;
            }
            if (sum != t.total_selections)
                throw CorruptSnapshot("tree-stats-total", "state " + std::to_string(state.value));
        }
    }

private:
    std::size_t require(SkillId id) const {
        if (!contains(id)) throw NotFound("no skill with id " + std::to_string(id.value));
        return id.value;
    }

    SimilarityThresholds thresholds_;
    std::vector<Skill> skills_;
    std::vector<ActionCluster> clusters_;
    std::map<ObjectId, UIObject> objects_;
    std::map<NodeId, SearchTreeStats> trees_;
    std::uint64_t pruned_total_ = 0;
};

} // namespace kgagent
