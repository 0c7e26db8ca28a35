#pragma once

// Read-only views over stores and traces for operators: strongest skills and
// a step-by-step narrative of an episode.

#include <algorithm>
#include <cstdio>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "stores.hpp"
#include "trace.hpp"

namespace kgagent {

struct SkillRank {
    SkillId skill;
    std::string name;
    double max_weight = 0.0;
    std::size_t edges = 0;
};

/// Skills ordered by their strongest skill edge, descending; ties by skill id.
/// Returns at most `k` entries.
inline std::vector<SkillRank> top_skills(const AgentStores& stores, std::size_t k) {
    std::map<SkillId, SkillRank> best;
    for (const auto& e : stores.graph.skill_edges()) {
        auto [it, inserted] = best.try_emplace(e.skill);
        auto& r = it->second;
        if (inserted) {
            r.skill = e.skill;
            r.name = stores.memory.contains(e.skill) ? stores.memory.skill(e.skill).name : std::to_string(e.skill.value);
            r.max_weight = e.weight;
        }
        r.max_weight = std::max(r.max_weight, e.weight);
        ++r.edges;
    }
    std::vector<SkillRank> out;
    for (auto& [id, r] : best) out.push_back(std::move(r));
    std::stable_sort(out.begin(), out.end(), [](const SkillRank& a, const SkillRank& b) {
        if (a.max_weight != b.max_weight) return a.max_weight > b.max_weight;
        return a.skill < b.skill;
    });
    if (out.size() > k) out.resize(k);
    return out;
}

inline void write_top_skills(std::ostream& os, const std::vector<SkillRank>& ranks) {
    std::size_t width = 5;
    for (const auto& r : ranks) width = std::max(width, r.name.size());
    char buf[64];
    os << "rank  " << std::string(width - 5, ' ') << "skill  max_weight  edges\n";
    for (std::size_t i = 0; i < ranks.size(); ++i) {
        const auto& r = ranks[i];
        std::snprintf(buf, sizeof buf, "%4zu  ", i + 1);
        os << buf << std::string(width - r.name.size(), ' ') << r.name;
        std::snprintf(buf, sizeof buf, "  %10.6f  %5zu\n", r.max_weight, r.edges);
        os << buf;
    }
}

namespace detail {
inline std::string actions_text(const std::vector<AtomicAction>& acts) {
    std::string s;
    for (const auto& a : acts) {
        if (!s.empty()) s += " > ";
        s += std::string(to_string(a.operate)) + " " + (a.object_name.empty() ? std::to_string(a.object_id) : a.object_name);
    }
    return s.empty() ? "-" : s;
}
} // namespace detail

/// Human-readable narrative, one line per record. Reward columns are printed
/// with six decimals and add up to the total.
inline void write_replay(std::ostream& os, const std::vector<TraceRecord>& records) {
    os << "step  att  stage         kind     skill  progress  semantics     state     novel     total  outcome\n";
    char buf[256];
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        const std::string skill = r.skill ? std::to_string(r.skill->value) : "-";
        if (r.kind == RecordKind::Invoke) {
            std::string ids;
            for (SkillId s : r.candidates) ids += (ids.empty() ? "" : ",") + std::to_string(s.value);
            std::snprintf(buf, sizeof buf, "%4lld  %3d  %-12s  %-7s  %5s", static_cast<long long>(r.step), r.attempt,
                          to_string(r.stage), to_string(r.kind), skill.c_str());
            os << buf << "  oracle candidates: " << (ids.empty() ? "none" : ids) << "\n";
            continue;
        }
        std::snprintf(buf, sizeof buf, "%4lld  %3d  %-12s  %-7s  %5s  %8.6f  %9.6f  %8.6f  %8.6f  %8.6f",
                      static_cast<long long>(r.step), r.attempt, to_string(r.stage), to_string(r.kind), skill.c_str(),
                      r.reward.progress, r.reward.semantics, r.reward.state, r.reward.novel, r.reward.total);
        os << buf << "  " << detail::actions_text(r.actions) << ": ";
        if (r.grounding_failed) {
            os << "grounding failed";
        } else {
            os << "node " << r.node.value << " -> " << r.next_node.value << (r.new_node ? " (new)" : "");
            if (r.milestone) os << ", milestone " << *r.milestone;
        }
        if (r.skill_added) os << ", added skill " << r.skill_added->value;
        for (SkillId s : r.skills_pruned) os << ", pruned skill " << s.value;
        if (r.replaced_by) os << ", replaced by skill " << r.replaced_by->value;
        if (r.stage == Stage::KgSample && r.success) os << "; break on success";
        os << "\n";
    }
}

} // namespace kgagent
