#pragma once

// Trace conformance checks for the decision loop, computed from the records
// alone. Each check returns a list of human-readable violations.

#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "kgagent/trace.hpp"

namespace conformance {

using kgagent::RecordKind;
using kgagent::SkillId;
using kgagent::Stage;
using kgagent::TraceRecord;

struct Options {
    int max_attempts = 5;
    double success_threshold = 1.0;
    double removal_threshold = 0.1;
};

inline int stage_rank(const TraceRecord& r) {
    switch (r.stage) {
    case Stage::KgSample: return 0;
    case Stage::UctFallback: return 1;
    case Stage::Augment: return 2;
    case Stage::Refine: return 3;
    }
    return 4;
}

struct Report {
    std::vector<std::string> stage_order;
    std::vector<std::string> attempt_bound;
    std::vector<std::string> break_on_success;
    std::vector<std::string> prune_safety;
    std::vector<std::string> fallback;
    std::vector<std::string> additivity;
    /// Steps where stage 2 ran after stage 1 exhausted its attempts.
    int fallbacks_after_exhaustion = 0;

    bool ok() const {
        return stage_order.empty() && attempt_bound.empty() && break_on_success.empty() && prune_safety.empty() &&
               fallback.empty() && additivity.empty();
    }
};

/// `episode_complete` tells whether the episode ended on a completed world;
/// only then may the final step stop stage 1 early without a success.
inline Report check(const std::vector<TraceRecord>& records, const Options& opt = {}) {
    Report rep;
    std::map<std::int64_t, std::vector<const TraceRecord*>> steps;
    for (const auto& r : records) steps[r.step].push_back(&r);
    const std::int64_t last_step = steps.empty() ? -1 : steps.rbegin()->first;

    std::set<SkillId> pruned;
    for (const auto& [step, recs] : steps) {
        const std::string at = "step " + std::to_string(step) + ": ";
        int prev_rank = -1;
        int kg = 0;
        bool kg_success = false, invoked = false, acted_after_kg = false;
        for (const TraceRecord* r : recs) {
            const int rank = stage_rank(*r);
            if (rank < prev_rank) rep.stage_order.push_back(at + "stage " + kgagent::to_string(r->stage) + " out of order");
            prev_rank = rank;

            // Pruned skills must never be executed, offered or selected again.
            const auto uses_pruned = [&](SkillId s) { return pruned.contains(s); };
            if (r->kind == RecordKind::Execute && r->skill && uses_pruned(*r->skill) && !r->skill_added)
                rep.prune_safety.push_back(at + "executes pruned skill " + std::to_string(r->skill->value));
            for (SkillId c : r->candidates)
                if (uses_pruned(c)) rep.prune_safety.push_back(at + "offers pruned skill " + std::to_string(c.value));

            if (r->kind != RecordKind::Invoke) {
                const auto& w = r->reward;
                if (std::fabs(w.progress + w.semantics + w.state + w.novel - w.total) > 1e-9)
                    rep.additivity.push_back(at + "reward parts do not sum to total");
            }

            if (r->stage == Stage::KgSample) {
                ++kg;
                if (r->attempt != kg) rep.attempt_bound.push_back(at + "attempt numbers not consecutive");
                if (kg > opt.max_attempts) rep.attempt_bound.push_back(at + "more than M stage-1 attempts");
                if (kg_success) rep.break_on_success.push_back(at + "stage 1 continued after a success");
                const bool success = r->reward.total > opt.success_threshold;
                if (success != r->success) rep.break_on_success.push_back(at + "success flag disagrees with reward");
                kg_success = kg_success || success;
            } else if (r->stage == Stage::UctFallback || r->stage == Stage::Augment) {
                if (r->kind == RecordKind::Invoke) invoked = true;
                acted_after_kg = true;
                if (kg_success) rep.break_on_success.push_back(at + "fallback ran after a stage-1 success");
            }

            if (r->stage == Stage::UctFallback && r->kind == RecordKind::Execute) {
                if (!invoked) rep.stage_order.push_back(at + "UCT selection without an oracle invocation");
                if (r->skill && std::find(r->candidates.begin(), r->candidates.end(), *r->skill) == r->candidates.end())
                    rep.prune_safety.push_back(at + "UCT chose a skill outside the candidate set");
                double sum = 0.0;
                for (double p : r->probabilities) sum += p;
                if (!r->probabilities.empty() && std::fabs(sum - 1.0) > 1e-9)
                    rep.stage_order.push_back(at + "selection probabilities do not sum to 1");
                const bool should_prune = !r->grounding_failed && r->reward.total < opt.removal_threshold;
                const bool did_prune = !r->skills_pruned.empty();
                if (should_prune != did_prune)
                    rep.prune_safety.push_back(at + (did_prune ? "pruned a skill above the removal threshold"
                                                               : "kept a skill below the removal threshold"));
            }
            if (r->stage != Stage::UctFallback && r->stage != Stage::Refine && !r->skills_pruned.empty())
                rep.prune_safety.push_back(at + "pruning outside stage 2 or refinement");
            if (r->stage == Stage::Refine && !r->skills_pruned.empty() && !r->replaced_by)
                rep.prune_safety.push_back(at + "refinement pruned without a replacement");
            for (SkillId s : r->skills_pruned) pruned.insert(s);
        }
        if (acted_after_kg && !kg_success) {
            if (kg != 0 && kg != opt.max_attempts)
                rep.fallback.push_back(at + "fallback after " + std::to_string(kg) + " stage-1 attempts");
            if (kg == opt.max_attempts) ++rep.fallbacks_after_exhaustion;
        }
        if (!acted_after_kg && !kg_success && kg > 0 && kg < opt.max_attempts && step != last_step)
            rep.fallback.push_back(at + "stage 1 stopped early without success or fallback");
    }
    return rep;
}

inline std::string summary(const Report& r) {
    std::string s;
    for (const auto* v : {&r.stage_order, &r.attempt_bound, &r.break_on_success, &r.prune_safety, &r.fallback, &r.additivity})
        for (const auto& m : *v) s += m + "\n";
    return s;
}

} // namespace conformance
