#pragma once

// The skill-evolution loop. Each step:
//   1. sample up to M skills from the graph neighbourhood of the current
//      state, stopping at the first success;
//   2. otherwise ask the oracle for candidates from the matching action
//      cluster and pick one by softmax over UCT scores;
//   3. if the oracle has no candidates, grow a new skill one atomic action
//      at a time until the screen responds;
// then refine a weak skill when few skills are practicable here.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "envsim.hpp"
#include "oracle.hpp"
#include "rewards.hpp"
#include "rng.hpp"
#include "stores.hpp"
#include "trace.hpp"

namespace kgagent {

struct Ablation {
    bool similarity_edges = true;
    bool reward_state = true;
    bool reward_novel = true;

    friend bool operator==(const Ablation&, const Ablation&) = default;
};

struct EngineConfig {
    int max_attempts = 5;
    double success_threshold = 1.0;
    double removal_threshold = 0.1;
    int refine_trigger_count = 3;
    double c1 = 5.0;
    double tau = 1.0;
    int k_max = 3;
    std::int64_t step_cap = 500;
    Ablation ablation;

    void validate() const {
        if (max_attempts < 1) throw ContractViolation("max_attempts must be positive");
        if (refine_trigger_count < 1) throw ContractViolation("refine_trigger_count must be positive");
        if (!(c1 > 0.0)) throw ContractViolation("c1 must be positive");
        if (!(tau > 0.0)) throw ContractViolation("tau must be positive");
        if (k_max < 1) throw ContractViolation("k_max must be positive");
        if (step_cap < 1) throw ContractViolation("step_cap must be positive");
    }

    RewardSwitches switches() const { return {ablation.reward_state, ablation.reward_novel}; }

    friend bool operator==(const EngineConfig&, const EngineConfig&) = default;
};

/// fitness + c1 * sqrt(ln(N) / n) - penalty; +infinity for an unvisited skill.
inline double uct_score(double fitness, std::uint64_t total_visits, std::uint64_t visits, double penalty, double c1) {
    if (visits == 0) return std::numeric_limits<double>::infinity();
    if (total_visits < 1) throw ContractViolation("uct_score: total visits must be at least 1");
    return fitness + c1 * std::sqrt(std::log(static_cast<double>(total_visits)) / static_cast<double>(visits)) - penalty;
}

/// Temperature-scaled softmax over finite scores.
inline std::vector<double> softmax(std::span<const double> scores, double tau) {
    if (scores.empty()) throw EmptyCandidates("softmax: no scores");
    if (!(tau > 0.0)) throw ContractViolation("softmax: tau must be positive");
    const double top = *std::max_element(scores.begin(), scores.end());
    if (!std::isfinite(top)) throw ContractViolation("softmax: scores must be finite");
    std::vector<double> p(scores.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        p[i] = std::exp((scores[i] - top) / tau);
        sum += p[i];
    }
    for (auto& x : p) x /= sum;
    return p;
}

inline std::size_t sample_index(std::span<const double> probabilities, Rng& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < probabilities.size(); ++i) {
        acc += probabilities[i];
        if (u < acc) return i;
    }
    return probabilities.size() - 1;
}

/// One unit of penalty per distinct object the skill needs that is not on screen.
inline double missing_object_penalty(const Skill& s, const sim::Observation& obs) {
    std::set<ObjectId> missing;
    for (const auto& a : s.actions)
        if (!obs.is_visible(a.object_id)) missing.insert(a.object_id);
    return static_cast<double>(missing.size());
}

struct SelectionResult {
    SkillId skill;
    std::vector<SkillId> candidates;
    std::vector<double> probabilities;
};

/// Unvisited candidates go first (lowest id); otherwise softmax over UCT scores.
inline SelectionResult select_uct(const ProceduralMemory& memory, const SearchTreeStats* tree,
                                  std::vector<SkillId> candidates, const sim::Observation& obs, const EngineConfig& cfg,
                                  Rng& rng) {
    if (candidates.empty()) throw EmptyCandidates("select_uct: no candidates");
    std::sort(candidates.begin(), candidates.end());
    SelectionResult out;
    out.candidates = candidates;
    const auto visits = [&](SkillId s) { return tree ? tree->visits(s) : 0; };
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (visits(candidates[i]) == 0) {
            out.skill = candidates[i];
            out.probabilities.assign(candidates.size(), 0.0);
            out.probabilities[i] = 1.0;
            return out;
        }
    }
    std::vector<double> eta;
    for (SkillId s : candidates) {
        const Skill& sk = memory.skill(s);
        eta.push_back(uct_score(sk.fitness, tree->total_selections, visits(s), missing_object_penalty(sk, obs), cfg.c1));
    }
    out.probabilities = softmax(eta, cfg.tau);
    out.skill = candidates[sample_index(out.probabilities, rng)];
    return out;
}

class Engine {
public:
    Engine(const sim::World& world, Oracle& oracle, AgentStores& stores, EngineConfig cfg, std::uint64_t seed)
        : world_(world), oracle_(oracle), stores_(stores), cfg_(cfg), rng_(Rng(seed).fork("engine")) {
        cfg_.validate();
        if (stores_.graph.config().similarity_edges != cfg_.ablation.similarity_edges)
            throw ContractViolation("engine and graph disagree on the similarity-edge ablation");
    }

    const EngineConfig& config() const { return cfg_; }

    /// Runs one episode from the world's start screen. `step_offset` places
    /// this episode's steps on the stores' global clock.
    EpisodeTrace run_episode(std::int64_t steps, std::uint64_t episode_seed, std::int64_t step_offset = 0) {
        begin_episode(episode_seed, step_offset);
        const std::int64_t limit = std::min(steps, cfg_.step_cap);
        while (step_ < limit && !episode_done()) step();
        return finish_episode();
    }

    void begin_episode(std::uint64_t episode_seed, std::int64_t step_offset = 0) {
        trace_ = {};
        state_ = world_.initial_state(episode_seed);
        cost_at_start_ = oracle_.cost_total();
        step_offset_ = step_offset;
        step_ = 0;
        obs_ = world_.observe(state_);
        node_ = stores_.graph.ingest_observation(obs_.embedding, clock()).node;
    }

    bool episode_done() const {
        return state_.terminal || state_.milestones_reached.size() >= world_.spec().milestones.size();
    }

    EpisodeTrace finish_episode() {
        trace_.summary = metrics(trace_.records, oracle_.cost_total() - cost_at_start_);
        trace_.summary.steps = step_;
        int reached = static_cast<int>(state_.milestones_reached.size());
        if (world_.milestone_index(world_.spec().start)) --reached;
        trace_.summary.progression = reached;
        trace_.summary.completed = episode_done();
        return std::move(trace_);
    }

    /// One iteration of the loop.
    void step() {
        std::vector<SkillId> attempted;
        if (!stage_kg(attempted)) {
            const auto candidates = stage_oracle_candidates(attempted);
            if (!candidates.empty()) {
                stage_uct(candidates);
            } else {
                stage_augment();
            }
        }
        maybe_refine();
        ++step_;
    }

    const sim::WorldState& world_state() const { return state_; }
    const sim::Observation& observation() const { return obs_; }
    NodeId current_node() const { return node_; }
    const std::vector<TraceRecord>& records() const { return trace_.records; }

private:
    struct Execution {
        sim::StepOutcome outcome;
        IngestResult dst;
        RewardBreakdown reward;
    };

    std::int64_t clock() const { return step_offset_ + step_; }

    /// Executes `actions` from the current state and scores the transition.
    /// Rewards are computed before any edge for this transition exists.
    Execution execute_and_score(const std::vector<AtomicAction>& actions, const SkillView& view) {
        Execution ex;
        const sim::Observation before = obs_;
        ex.outcome = world_.execute(state_, actions);
        ex.dst = stores_.graph.ingest_observation(ex.outcome.next_observation.embedding, clock());
        OracleScores scores{};
        if (!ex.outcome.grounding_failed) {
            EvaluateRequest req{view_of(before), view_of(ex.outcome.next_observation), view, trajectory_of(ex.outcome)};
            if (auto r = call([&] { return oracle_.evaluate(req); }, req)) scores = r->scores;
        }
        ex.reward = evaluate_transition(stores_.graph, node_, ex.dst.node, ex.dst.is_new, scores, cfg_.switches());
        return ex;
    }

    /// Fitness first, then the skill edge, then move to the new state.
    void commit(TraceRecord& rec, SkillId skill, const Execution& ex) {
        rec.skill = skill;
        fill_outcome(rec, ex);
        stores_.memory.update_fitness(skill, ex.reward.total);
        if (!ex.outcome.grounding_failed) {
            stores_.record_transition(node_, ex.dst.node, skill, ex.outcome.delta);
            rec.edge_recorded = true;
        }
        advance(ex);
    }

    void fill_outcome(TraceRecord& rec, const Execution& ex) const {
        rec.node = node_;
        rec.next_node = ex.dst.node;
        rec.new_node = ex.dst.is_new;
        rec.latent_changed = ex.outcome.latent_changed;
        rec.delta = ex.outcome.delta;
        rec.grounding_failed = ex.outcome.grounding_failed;
        rec.milestone = ex.outcome.milestone_reached;
        rec.screen_before = obs_.snapshot.screen;
        rec.screen_after = ex.outcome.next_observation.snapshot.screen;
        rec.reward = ex.reward;
        rec.success = ex.reward.total > cfg_.success_threshold;
    }

    void advance(const Execution& ex) {
        obs_ = ex.outcome.next_observation;
        node_ = ex.dst.node;
        for (const auto& o : obs_.visible_elements) stores_.memory.upsert_object(o);
    }

    TraceRecord record(Stage stage, int attempt, RecordKind kind = RecordKind::Execute) const {
        TraceRecord r;
        r.step = step_;
        r.attempt = attempt;
        r.kind = kind;
        r.stage = stage;
        r.node = node_;
        return r;
    }

    /// Stage 1. Returns true when an execution cleared the success threshold.
    bool stage_kg(std::vector<SkillId>& attempted) {
        const auto pool = stores_.graph.high_quality_skills(node_);
        if (pool.empty()) return false;
        for (int attempt = 1; attempt <= cfg_.max_attempts; ++attempt) {
            const SkillId sid = sample_skill(pool, rng_);
            const Skill& s = stores_.memory.skill(sid);
            auto rec = record(Stage::KgSample, attempt);
            rec.actions = s.actions;
            const auto ex = execute_and_score(s.actions, view_of(s));
            commit(rec, sid, ex);
            trace_.records.push_back(std::move(rec));
            if (std::find(attempted.begin(), attempted.end(), sid) == attempted.end()) attempted.push_back(sid);
            if (ex.reward.total > cfg_.success_threshold) return true;
            if (episode_done()) return true;
        }
        return false;
    }

    std::vector<SkillId> cluster_library() const {
        std::vector<SkillId> out;
        if (const ActionCluster* c = stores_.memory.cluster_for_state(obs_.embedding))
            out.assign(c->skill_ids.begin(), c->skill_ids.end());
        return out;
    }

    /// Stage 2 retrieval: the oracle's candidate set from the matching cluster.
    std::vector<SkillId> stage_oracle_candidates(const std::vector<SkillId>& attempted) {
        const auto library = cluster_library();
        auto rec = record(Stage::UctFallback, 0, RecordKind::Invoke);
        if (library.empty()) {
            trace_.records.push_back(std::move(rec));
            return {};
        }
        InvokeRequest req{view_of(obs_), {}, attempted};
        for (SkillId s : library) req.library.push_back(view_of(stores_.memory.skill(s)));
        std::vector<SkillId> chosen;
        if (auto r = call([&] { return oracle_.invoke(req); }, req)) chosen = r->skills;
        rec.candidates = chosen;
        trace_.records.push_back(std::move(rec));
        return chosen;
    }

    void stage_uct(const std::vector<SkillId>& candidates) {
        const SearchTreeStats* tree = stores_.memory.find_tree_stats(node_);
        auto sel = select_uct(stores_.memory, tree, candidates, obs_, cfg_, rng_);
        const Skill& s = stores_.memory.skill(sel.skill);
        auto rec = record(Stage::UctFallback, 1);
        rec.actions = s.actions;
        rec.candidates = std::move(sel.candidates);
        rec.probabilities = std::move(sel.probabilities);
        const NodeId src = node_;
        const auto ex = execute_and_score(s.actions, view_of(s));
        commit(rec, sel.skill, ex);
        stores_.memory.record_selection(src, sel.skill, ex.reward.total);
        if (!ex.outcome.grounding_failed && ex.reward.total < cfg_.removal_threshold) {
            stores_.prune_skill(sel.skill);
            rec.skills_pruned.push_back(sel.skill);
        }
        trace_.records.push_back(std::move(rec));
    }

    /// Grows a skill one action at a time. Each new action runs from where
    /// the previous one left the screen; the candidate sequence is scored
    /// from the state the augmentation started in.
    void stage_augment() {
        const sim::Observation start_obs = obs_;
        const NodeId start_node = node_;
        const int start_screen = obs_.snapshot.screen;
        const auto start_grid = world_.grid_of(start_obs.snapshot);
        std::vector<ObjectId> known;
        for (const auto& s : stores_.memory.skills())
            if (s.active()) known.push_back(s.actions.front().object_id);

        std::vector<AtomicAction> seq;
        std::vector<sim::ActionEffect> effects;
        for (int k = 1; k <= cfg_.k_max; ++k) {
            if (obs_.visible_elements.empty()) return;
            AugmentRequest req{view_of(obs_), {Operate::Click}, obs_.visible_elements, seq, known};
            auto proposal = call([&] { return oracle_.augment(req); }, req);
            if (!proposal) return;
            seq.push_back(proposal->action);
            auto rec = record(Stage::Augment, k);
            rec.node = start_node;
            rec.actions = seq;

            const auto out = world_.execute(state_, {proposal->action});
            effects.insert(effects.end(), out.trajectory.begin(), out.trajectory.end());
            sim::StepOutcome whole = out;
            whole.trajectory = effects;
            whole.latent_changed = out.next_observation.snapshot.screen != start_screen;
            whole.delta = static_cast<double>(sim::World::diff_cells(start_grid, world_.grid_of(out.next_observation.snapshot))) /
                          sim::kGridCells;

            Execution ex;
            ex.outcome = whole;
            ex.dst = stores_.graph.ingest_observation(out.next_observation.embedding, clock());
            OracleScores scores{};
            const SkillView view{SkillId{}, "candidate", proposal->descriptor, seq, 0.0};
            if (!out.grounding_failed) {
                EvaluateRequest ereq{view_of(start_obs), view_of(out.next_observation), view, trajectory_of(whole)};
                if (auto r = call([&] { return oracle_.evaluate(ereq); }, ereq)) scores = r->scores;
            }
            ex.reward = evaluate_transition(stores_.graph, start_node, ex.dst.node, ex.dst.is_new, scores, cfg_.switches());
            const NodeId saved = node_;
            node_ = start_node;
            fill_outcome(rec, ex);
            node_ = saved;
            rec.screen_before = start_screen;

            const bool recognizable = !out.grounding_failed &&
                                      (whole.latent_changed || ex.reward.total > cfg_.success_threshold);
            if (recognizable) {
                const auto before = stores_.memory.skills().size();
                const SkillId sid = stores_.memory.add_skill(skill_name(seq), proposal->descriptor, seq, clock());
                if (stores_.memory.skills().size() > before) rec.skill_added = sid;
                rec.skill = sid;
                stores_.memory.assign_to_cluster(sid, start_obs.embedding);
                stores_.memory.update_fitness(sid, ex.reward.total);
                stores_.record_transition(start_node, ex.dst.node, sid, whole.delta);
                rec.edge_recorded = true;
            }
            advance(ex);
            trace_.records.push_back(std::move(rec));
            if (recognizable || out.grounding_failed || episode_done()) return;
        }
    }

    static std::string skill_name(const std::vector<AtomicAction>& seq) {
        std::string n;
        for (const auto& a : seq) {
            if (!n.empty()) n += "+";
            n += a.object_name.empty() ? std::to_string(a.object_id) : a.object_name;
        }
        return n;
    }

    std::size_t practicable_here() const {
        std::size_t n = 0;
        for (SkillId s : cluster_library())
            if (obs_.is_visible(stores_.memory.skill(s).actions.front().object_id)) ++n;
        return n;
    }

    /// Refines the weakest skill of the current cluster when few skills are
    /// practicable here. The variant is tried on a copy of the world and
    /// replaces the original only if it scores strictly higher.
    void maybe_refine() {
        if (episode_done()) return;
        if (practicable_here() >= static_cast<std::size_t>(cfg_.refine_trigger_count)) return;
        const auto library = cluster_library();
        if (library.empty()) return;
        SkillId weakest = library.front();
        for (SkillId s : library)
            if (stores_.memory.skill(s).fitness < stores_.memory.skill(weakest).fitness) weakest = s;
        const Skill& original = stores_.memory.skill(weakest);
        if (!original.last_reward) return;

        RefineRequest req{view_of(obs_), view_of(original), {}};
        auto draft = call([&] { return oracle_.refine(req); }, req);
        if (!draft || same_behaviour(draft->actions, original.actions)) return;

        sim::WorldState sandbox = state_;
        const auto out = world_.execute(sandbox, draft->actions);
        const SkillView view{SkillId{}, draft->name, draft->descriptor, draft->actions, original.fitness};
        OracleScores scores{};
        if (!out.grounding_failed) {
            EvaluateRequest ereq{view_of(obs_), view_of(out.next_observation), view, trajectory_of(out)};
            if (auto r = call([&] { return oracle_.evaluate(ereq); }, ereq)) scores = r->scores;
        }
        const auto target = stores_.graph.find_merge_target(out.next_observation.embedding);
        const bool is_new = !target.has_value();
        RewardBreakdown reward;
        reward.progress = scores.progress;
        reward.semantics = scores.semantics;
        reward.state = cfg_.ablation.reward_state && target ? stores_.graph.reward_state(node_, *target) : 0.0;
        if (cfg_.ablation.reward_state && !target) reward.state = -stores_.graph.state_potential(node_);
        reward.novel = cfg_.ablation.reward_novel ? reward_novel(is_new) : 0.0;
        reward.total = reward.progress + reward.semantics + reward.state + reward.novel;

        auto rec = record(Stage::Refine, 1, RecordKind::Trial);
        rec.skill = weakest;
        rec.actions = draft->actions;
        rec.next_node = target.value_or(node_);
        rec.new_node = is_new;
        rec.latent_changed = out.latent_changed;
        rec.delta = out.delta;
        rec.grounding_failed = out.grounding_failed;
        rec.milestone = out.milestone_reached;
        rec.screen_before = obs_.snapshot.screen;
        rec.screen_after = out.next_observation.snapshot.screen;
        rec.reward = reward;
        rec.success = reward.total > cfg_.success_threshold;
        if (!out.grounding_failed && reward.total > *original.last_reward) {
            const SkillId variant = stores_.replace_skill(weakest, draft->name, draft->descriptor, draft->actions, clock());
            if (variant != weakest) {
                rec.replaced_by = variant;
                rec.skills_pruned.push_back(weakest);
                stores_.memory.set_last_reward(variant, reward.total);
            }
        }
        trace_.records.push_back(std::move(rec));
    }

    /// Runs an oracle call; transport failures that survive the client's
    /// retries become an empty response. Protocol errors propagate.
    template <class Fn, class Request>
    auto call(Fn&& fn, const Request& req) -> std::optional<decltype(fn())> {
        try {
            auto resp = fn();
            check_response(req, resp);
            return resp;
        } catch (const OracleUnavailable&) {
            return std::nullopt;
        }
    }

    const sim::World& world_;
    Oracle& oracle_;
    AgentStores& stores_;
    EngineConfig cfg_;
    Rng rng_;

    sim::WorldState state_;
    sim::Observation obs_;
    NodeId node_;
    std::int64_t step_ = 0;
    std::int64_t step_offset_ = 0;
    std::uint64_t cost_at_start_ = 0;
    EpisodeTrace trace_;
};

} // namespace kgagent
