#pragma once

#include "errors.hpp"
#include "sakg.hpp"

namespace kgagent {

/// Scores the oracle assigns to one transition, each in [0, 1].
struct OracleScores {
    double progress = 0.0;
    double semantics = 0.0;

    friend bool operator==(const OracleScores&, const OracleScores&) = default;
};

struct RewardSwitches {
    bool state = true;
    bool novel = true;

    friend bool operator==(const RewardSwitches&, const RewardSwitches&) = default;
};

struct RewardBreakdown {
    double progress = 0.0;
    double semantics = 0.0;
    double state = 0.0;
    double novel = 0.0;
    double total = 0.0;

    friend bool operator==(const RewardBreakdown&, const RewardBreakdown&) = default;
};

inline void check_scores(const OracleScores& s) {
    if (!(s.progress >= 0.0 && s.progress <= 1.0) || !(s.semantics >= 0.0 && s.semantics <= 1.0))
        throw ContractViolation("oracle scores must lie in [0, 1]");
}

/// R_total = progress + semantics + state + novel. Must be called before the
/// edge for this very transition is recorded, so the state term reflects
/// prior knowledge only.
inline RewardBreakdown evaluate_transition(const KnowledgeGraph& graph, NodeId src, NodeId dst, bool is_new_dst,
                                           OracleScores scores, RewardSwitches switches = {}) {
    check_scores(scores);
    RewardBreakdown r;
    r.progress = scores.progress;
    r.semantics = scores.semantics;
    r.state = switches.state ? graph.reward_state(src, dst) : 0.0;
    r.novel = switches.novel ? reward_novel(is_new_dst) : 0.0;
    r.total = r.progress + r.semantics + r.state + r.novel;
    return r;
}

} // namespace kgagent
