#pragma once

// Deterministic stand-in oracles. Every response is a pure function of the
// request, the persona seed and (for ground-truth personas) the world.
//
//   perfect      reads the simulator's ground truth
//   noisy        perfect, with seeded +-0.2 jitter on evaluation scores
//   adversarial  random responses that still satisfy the closed-world contract

#include <algorithm>
#include <string>
#include <vector>

#include "envsim.hpp"
#include "oracle.hpp"
#include "rng.hpp"

namespace kgagent {

enum class Persona { Perfect, Noisy, Adversarial };

inline const char* to_string(Persona p) {
    switch (p) {
    case Persona::Perfect: return "perfect";
    case Persona::Noisy: return "noisy";
    case Persona::Adversarial: return "adversarial";
    }
    return "?";
}

inline std::optional<Persona> persona_from_string(const std::string& s) {
    if (s == "perfect") return Persona::Perfect;
    if (s == "noisy") return Persona::Noisy;
    if (s == "adversarial") return Persona::Adversarial;
    return std::nullopt;
}

/// How the ground-truth personas pick invocation candidates.
enum class InvokeRule {
    Visible,  // first target object on screen
    Helpful,  // visible and shortens the path to the next milestone
};

/// Semantic-consistency scores the ground-truth evaluator assigns.
struct EvaluatorScale {
    double screen_change = 0.5;
    double cosmetic_change = 0.25;
    double jitter = 0.2;
};

class ScriptedOracle : public Oracle {
public:
    ScriptedOracle(Persona persona, const sim::World* world, std::uint64_t seed, EvaluatorScale scale = {},
                   InvokeRule rule = InvokeRule::Helpful)
        : persona_(persona), world_(world), seed_(seed), scale_(scale), rule_(rule) {
        if (persona != Persona::Adversarial && world == nullptr)
            throw ContractViolation(std::string("the ") + to_string(persona) + " persona needs a world for ground truth");
    }

    Persona persona() const { return persona_; }
    std::uint64_t cost_total() const override { return cost_; }

    InvokeResponse invoke(const InvokeRequest& req) override {
        ++cost_;
        InvokeResponse r;
        if (persona_ == Persona::Adversarial) {
            Rng rng = rng_for(OracleKind::Invoke, wire::payload(req));
            for (const auto& s : req.library)
                if (rng.bernoulli(0.5)) r.skills.push_back(s.id);
            return r;
        }
        // Skills whose first target is on screen, not yet tried this step,
        // and (with ground truth) that bring the next milestone closer.
        for (const auto& s : req.library) {
            const bool tried = std::find(req.attempted.begin(), req.attempted.end(), s.id) != req.attempted.end();
            if (tried || !req.observation.has_object(s.actions.front().object_id)) continue;
            if (rule_ == InvokeRule::Helpful && !helpful(req.observation, s.actions)) continue;
            r.skills.push_back(s.id);
        }
        return r;
    }

    AugmentResponse augment(const AugmentRequest& req) override {
        if (req.objects.empty()) throw ContractViolation("augment: no objects offered");
        if (req.operations.empty()) throw ContractViolation("augment: no operations offered");
        ++cost_;
        Rng rng = rng_for(OracleKind::Augment, wire::payload(req));
        if (persona_ == Persona::Adversarial) {
            const auto& o = req.objects[rng.below(req.objects.size())];
            const Operate op = req.operations[rng.below(req.operations.size())];
            return {{op, o.id, o.name, std::nullopt}, std::string(to_string(op)) + " " + o.name};
        }
        const Operate op = std::find(req.operations.begin(), req.operations.end(), Operate::Click) != req.operations.end()
                               ? Operate::Click
                               : req.operations.front();
        // Objects the screen responds to most, untried ones first.
        const auto known = [&](ObjectId id) {
            return std::find(req.known.begin(), req.known.end(), id) != req.known.end() ||
                   std::any_of(req.prefix.begin(), req.prefix.end(), [&](const AtomicAction& a) { return a.object_id == id; });
        };
        int best_rank = 1 << 30;
        std::vector<const UIObject*> best;
        for (const auto& o : req.objects) {
            const int rank = 2 * response_tier(req.observation, o.id) + (known(o.id) ? 1 : 0);
            if (rank < best_rank) {
                best_rank = rank;
                best.clear();
            }
            if (rank == best_rank) best.push_back(&o);
        }
        const UIObject* pick = best[rng.below(best.size())];
        return {{op, pick->id, pick->name, std::nullopt}, std::string(to_string(op)) + " " + pick->name};
    }

    RefineResponse refine(const RefineRequest& req) override {
        ++cost_;
        const auto& acts = req.skill.actions;
        if (persona_ == Persona::Adversarial) {
            Rng rng = rng_for(OracleKind::Refine, wire::payload(req));
            std::vector<AtomicAction> out;
            for (const auto& a : acts)
                if (rng.bernoulli(0.5)) out.push_back(a);
            if (out.empty()) out.push_back(acts[rng.below(acts.size())]);
            return {req.skill.name, describe(out), out};
        }
        // Drop actions the recorded trajectory shows had no visible effect,
        // keeping at least the last one.
        std::vector<AtomicAction> out;
        for (std::size_t i = 0; i < acts.size(); ++i) {
            const bool observed = i < req.trajectory.size();
            const bool inert = observed && req.trajectory[i].grounded && req.trajectory[i].cells_changed == 0;
            if (!inert) out.push_back(acts[i]);
        }
        if (out.empty()) out.push_back(acts.back());
        if (out.size() == acts.size()) return {req.skill.name, req.skill.descriptor.empty() ? describe(acts) : req.skill.descriptor, acts};
        return {req.skill.name + "_refined", describe(out), out};
    }

    EvaluateResponse evaluate(const EvaluateRequest& req) override {
        ++cost_;
        Rng rng = rng_for(OracleKind::Evaluate, wire::payload(req));
        if (persona_ == Persona::Adversarial) return {{rng.uniform(), rng.uniform()}, "arbitrary"};
        auto r = ground_truth(req);
        if (persona_ == Persona::Noisy) {
            const auto jitter = [&](double x) { return std::clamp(x + rng.uniform(-scale_.jitter, scale_.jitter), 0.0, 1.0); };
            r.scores.progress = jitter(r.scores.progress);
            r.scores.semantics = jitter(r.scores.semantics);
        }
        return r;
    }

private:
    Rng rng_for(OracleKind kind, const nlohmann::json& payload) const {
        const std::string text = std::string(to_string(kind)) + payload.dump();
        return Rng(seed_ ^ hash_tag(text));
    }

    static std::string describe(const std::vector<AtomicAction>& acts) {
        std::string d;
        for (const auto& a : acts) {
            if (!d.empty()) d += ", then ";
            d += std::string(to_string(a.operate)) + " " + (a.object_name.empty() ? std::to_string(a.object_id) : a.object_name);
        }
        return d;
    }

    /// 0: changes the screen, 1: cosmetic response, 2: nothing happens.
    int response_tier(const ObservationView& obs, ObjectId id) const {
        const auto snap = parse_handle(obs.handle);
        if (!snap) return 2;
        auto state = world_->state_at(*snap);
        const auto out = world_->execute(state, {{Operate::Click, id, {}, std::nullopt}}, false);
        if (out.grounding_failed) return 2;
        if (out.latent_changed) return 0;
        return out.delta > 0.0 ? 1 : 2;
    }

    bool helpful(const ObservationView& obs, const std::vector<AtomicAction>& actions) const {
        const auto snap = parse_handle(obs.handle);
        if (!snap) return false;
        const auto& milestones = world_->spec().milestones;
        if (snap->progress >= static_cast<int>(milestones.size())) return false;
        auto state = world_->state_at(*snap);
        const auto out = world_->execute(state, actions, false);
        if (out.milestone_reached) return true;
        const int before = world_->distance_to_milestone(snap->screen, snap->progress);
        const int after = world_->distance_to_milestone(state.screen, snap->progress);
        return after >= 0 && (before < 0 || after < before);
    }

    EvaluateResponse ground_truth(const EvaluateRequest& req) const {
        const auto before = parse_handle(req.before.handle);
        const auto after = parse_handle(req.after.handle);
        if (!before || !after) return {{0.0, 0.0}, "unreadable observation"};
        if (after->progress > before->progress) return {{1.0, 1.0}, "milestone reached"};
        if (after->screen != before->screen) return {{0.0, scale_.screen_change}, "screen changed"};
        const bool visible_change = std::any_of(req.trajectory.begin(), req.trajectory.end(),
                                                [](const TrajectoryStep& t) { return t.cells_changed > 0; });
        if (visible_change) return {{0.0, scale_.cosmetic_change}, "cosmetic response"};
        return {{0.0, 0.0}, "nothing changed"};
    }

    Persona persona_;
    const sim::World* world_;
    std::uint64_t seed_;
    EvaluatorScale scale_;
    InvokeRule rule_;
    std::uint64_t cost_ = 0;
};

} // namespace kgagent
