#pragma once

// Deterministic synthetic GUI world.
//
// A world is a set of latent screens with interactable elements and a
// transition table (screen, element) -> screen; absent entries are no-ops.
// Screens belong to functional families: screens in one family, and one
// screen under different skins, produce embeddings that are similar but not
// identical. Each observation is rendered to a 16x16 abstract grid, and the
// visual change of a step is the fraction of grid cells that differ.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "embedding.hpp"
#include "errors.hpp"
#include "ids.hpp"
#include "memory.hpp"
#include "rng.hpp"

namespace kgagent::sim {

inline constexpr int kGridSide = 16;
inline constexpr int kGridCells = kGridSide * kGridSide;
/// Cells rewritten by a skin; a re-skin alone changes at most this many cells.
inline constexpr int kSkinPatchCells = 24;

struct Element {
    ObjectId id = 0;
    std::string name;
    Operate operate = Operate::Click;
};

struct Screen {
    int id = 0;
    std::string name;
    int family = 0;
    std::vector<Element> elements;
    /// Visual derivation: when `base` >= 0 the grid is the base screen's grid
    /// with `diff_cells` cells rewritten.
    int base = -1;
    int diff_cells = 0;

    bool has_element(ObjectId e) const {
        return std::any_of(elements.begin(), elements.end(), [e](const Element& x) { return x.id == e; });
    }
};

/// `target == screen` with `cosmetic_cells > 0` is a purely cosmetic response
/// (highlight, toggle) that leaves the latent screen unchanged.
struct Transition {
    int screen = 0;
    ObjectId element = 0;
    int target = 0;
    int cosmetic_cells = 0;
};

struct ComboStep {
    int screen = 0;
    ObjectId element = 0;

    friend bool operator==(const ComboStep&, const ComboStep&) = default;
};

/// Consecutive grounded actions matching `steps` jump to `target`.
struct Combo {
    std::vector<ComboStep> steps;
    int target = 0;
};

struct WorldSpec {
    std::string profile = "custom";
    std::uint64_t seed = 0;
    int start = 0;
    int skins = 3;
    double grounding_failure_rate = 0.05;
    std::size_t dimension = kDefaultEmbeddingDim;
    std::vector<Screen> screens;
    std::vector<Transition> transitions;
    std::vector<int> milestones;
    std::vector<Combo> combos;
    std::vector<int> terminal;
};

/// Embedding geometry. Observations are
///   unit(family) + screen_scale * unit(screen) + skin_scale * unit(skin) + noise_scale * noise
/// with the family, skin and per-screen directions mutually orthogonal.
struct EmbeddingGeometry {
    double screen_scale = std::sqrt(0.10);
    double skin_scale = std::sqrt(0.09);
    double noise_scale = std::sqrt(0.006);
};

struct ScreenSnapshot {
    int screen = 0;
    int skin = 0;
    ObjectId cosmetic_element = 0;  // 0: no cosmetic overlay
    /// On-screen progress counter (milestones reached so far).
    int progress = 0;
    std::uint64_t serial = 0;

    std::string handle() const {
        return "screen:" + std::to_string(screen) + "/skin:" + std::to_string(skin) +
               "/progress:" + std::to_string(progress) + "/obs:" + std::to_string(serial);
    }
};

struct Observation {
    ScreenSnapshot snapshot;
    Embedding embedding{std::vector<double>{1.0}};
    std::vector<UIObject> visible_elements;
    std::int64_t step_index = 0;

    bool is_visible(ObjectId id) const {
        return std::any_of(visible_elements.begin(), visible_elements.end(), [id](const UIObject& o) { return o.id == id; });
    }
};

struct ActionEffect {
    ObjectId object_id = 0;
    bool grounded = true;
    int screen_before = 0;
    int screen_after = 0;
    int cells_changed = 0;
};

struct StepOutcome {
    Observation next_observation;
    bool latent_changed = false;
    double delta = 0.0;
    bool grounding_failed = false;
    std::optional<int> milestone_reached;  // index into World::milestones
    bool terminal = false;
    std::vector<ActionEffect> trajectory;
};

/// Mutable per-episode state. Copyable, so trial executions can run on a copy.
struct WorldState {
    int screen = 0;
    int skin = 0;
    ObjectId cosmetic_element = 0;
    std::vector<std::size_t> combo_progress;
    std::set<int> milestones_reached;
    std::int64_t step = 0;
    std::uint64_t serial = 0;
    bool terminal = false;
    Rng rng;
};

class World {
public:
    explicit World(WorldSpec spec, EmbeddingGeometry geometry = {}) : spec_(std::move(spec)), geometry_(geometry) {
        validate();
        index();
        render_grids();
        build_basis();
        verify_embedding_calibration();
        compute_distances();
    }

    const WorldSpec& spec() const { return spec_; }
    const EmbeddingGeometry& geometry() const { return geometry_; }

    const Screen& screen(int id) const {
        if (id < 0 || static_cast<std::size_t>(id) >= spec_.screens.size())
            throw NotFound("no screen with id " + std::to_string(id));
        return spec_.screens[static_cast<std::size_t>(id)];
    }

    const Transition* transition(int screen, ObjectId element) const {
        auto it = transitions_.find({screen, element});
        return it == transitions_.end() ? nullptr : &spec_.transitions[it->second];
    }

    std::optional<int> milestone_index(int screen) const {
        auto it = std::find(spec_.milestones.begin(), spec_.milestones.end(), screen);
        if (it == spec_.milestones.end()) return std::nullopt;
        return static_cast<int>(it - spec_.milestones.begin());
    }

    bool is_terminal(int screen) const {
        return std::find(spec_.terminal.begin(), spec_.terminal.end(), screen) != spec_.terminal.end();
    }

    const std::string& object_name(ObjectId id) const {
        static const std::string unknown = "unknown";
        auto it = object_names_.find(id);
        return it == object_names_.end() ? unknown : it->second;
    }

    /// Fewest clicks from `screen` to milestone `index`; -1 when unreachable.
    int distance_to_milestone(int screen_id, int index) const {
        return distances_.at(static_cast<std::size_t>(index)).at(static_cast<std::size_t>(screen_id));
    }

    /// Fresh episode state at the start screen.
    WorldState initial_state(std::uint64_t episode_seed) const {
        WorldState s;
        s.rng = Rng(episode_seed ^ (spec_.seed * 0x9E3779B97F4A7C15ULL));
        s.screen = spec_.start;
        s.skin = static_cast<int>(s.rng.below(static_cast<std::uint64_t>(spec_.skins)));
        s.combo_progress.assign(spec_.combos.size(), 0);
        if (auto m = milestone_index(s.screen)) s.milestones_reached.insert(*m);
        return s;
    }

    Observation observe(WorldState& s) const {
        Observation o{snapshot_of(s), embed(s), visible_objects(s.screen), s.step};
        ++s.serial;
        return o;
    }

    /// State matching a snapshot, for look-ahead probes. Combo progress and
    /// milestone history are not part of a snapshot and start empty.
    WorldState state_at(const ScreenSnapshot& snap) const {
        WorldState s;
        s.screen = screen(snap.screen).id;
        s.skin = std::clamp(snap.skin, 0, spec_.skins - 1);
        s.cosmetic_element = snap.cosmetic_element;
        s.combo_progress.assign(spec_.combos.size(), 0);
        s.rng = Rng(spec_.seed).fork("probe");
        return s;
    }

    /// Applies the actions in order, stopping at the first grounding failure.
    /// With `slips` false only absent objects fail to ground.
    StepOutcome execute(WorldState& s, const std::vector<AtomicAction>& actions, bool slips = true) const {
        StepOutcome out;
        const int start_screen = s.screen;
        const auto before = grid_of(snapshot_of(s));
        for (const auto& a : actions) {
            if (s.terminal) break;
            ActionEffect fx;
            fx.object_id = a.object_id;
            fx.screen_before = s.screen;
            const auto cell_before = grid_of(snapshot_of(s));
            const bool present = screen(s.screen).has_element(a.object_id);
            const bool slipped = present && slips && s.rng.bernoulli(spec_.grounding_failure_rate);
            if (!present || slipped) {
                fx.grounded = false;
                fx.screen_after = s.screen;
                out.trajectory.push_back(fx);
                out.grounding_failed = true;
                break;
            }
            apply(s, a.object_id, out);
            fx.screen_after = s.screen;
            fx.cells_changed = diff_cells(cell_before, grid_of(snapshot_of(s)));
            out.trajectory.push_back(fx);
        }
        ++s.step;
        out.latent_changed = s.screen != start_screen;
        out.delta = static_cast<double>(diff_cells(before, grid_of(snapshot_of(s)))) / kGridCells;
        out.terminal = s.terminal;
        out.next_observation = observe(s);
        return out;
    }

    std::vector<UIObject> visible_objects(int screen_id) const {
        std::vector<UIObject> out;
        for (const auto& e : screen(screen_id).elements)
            out.push_back({e.id, e.name, "ref:" + std::to_string(spec_.seed) + ":" + std::to_string(e.id)});
        return out;
    }

    std::vector<std::uint8_t> grid_of(const ScreenSnapshot& snap) const {
        auto g = grids_.at(static_cast<std::size_t>(snap.screen));
        const auto& patch = skin_patches_.at(static_cast<std::size_t>(snap.skin));
        for (std::size_t i = 0; i < patch.size(); ++i) g[skin_cells_[i]] = patch[i];
        if (snap.cosmetic_element != 0) {
            if (const Transition* t = transition(snap.screen, snap.cosmetic_element)) {
                for (int c : cosmetic_cells(snap.screen, snap.cosmetic_element, t->cosmetic_cells))
                    g[static_cast<std::size_t>(c)] = static_cast<std::uint8_t>((g[static_cast<std::size_t>(c)] + 4) % 8);
            }
        }
        return g;
    }

    static int diff_cells(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
        int n = 0;
        for (std::size_t i = 0; i < a.size(); ++i) n += a[i] != b[i];
        return n;
    }

    /// Noise-free embedding of a screen under a skin.
    std::vector<double> clean_embedding(int screen_id, int skin) const {
        const auto& sc = screen(screen_id);
        std::vector<double> v(spec_.dimension, 0.0);
        axpy(1.0, family_dirs_.at(sc.family), v);
        axpy(geometry_.screen_scale, screen_dirs_.at(static_cast<std::size_t>(screen_id)), v);
        axpy(geometry_.skin_scale, skin_dirs_.at(static_cast<std::size_t>(skin)), v);
        return v;
    }

private:
    void validate() const {
        const auto n = spec_.screens.size();
        if (n == 0) throw ContractViolation("world has no screens");
        if (spec_.skins < 1) throw ContractViolation("world needs at least one skin");
        if (!(spec_.grounding_failure_rate >= 0.0 && spec_.grounding_failure_rate < 1.0))
            throw ContractViolation("grounding failure rate must lie in [0, 1)");
        auto valid = [n](int s) { return s >= 0 && static_cast<std::size_t>(s) < n; };
        std::set<ObjectId> ids;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& s = spec_.screens[i];
            if (s.id != static_cast<int>(i)) throw ContractViolation("screen ids must be dense and ordered");
            if (s.base >= 0 && !valid(s.base)) throw ContractViolation("screen base out of range");
            if (s.base >= static_cast<int>(i)) throw ContractViolation("screen base must precede the screen");
            if (s.family < 0) throw ContractViolation("negative family");
            std::set<ObjectId> local;
            for (const auto& e : s.elements) {
                if (e.id <= 0) throw ContractViolation("element ids must be positive");
                if (!local.insert(e.id).second) throw ContractViolation("duplicate element on screen " + s.name);
            }
        }
        if (!valid(spec_.start)) throw ContractViolation("start screen out of range");
        for (const auto& t : spec_.transitions) {
            if (!valid(t.screen) || !valid(t.target)) throw ContractViolation("transition references an unknown screen");
            if (!spec_.screens[static_cast<std::size_t>(t.screen)].has_element(t.element))
                throw ContractViolation("transition element not on its screen");
            if (t.cosmetic_cells < 0 || t.cosmetic_cells > kGridCells) throw ContractViolation("bad cosmetic cell count");
        }
        if (spec_.milestones.empty()) throw ContractViolation("world needs at least one milestone");
        for (int m : spec_.milestones)
            if (!valid(m)) throw ContractViolation("milestone references an unknown screen");
        for (const auto& c : spec_.combos) {
            if (c.steps.empty() || !valid(c.target)) throw ContractViolation("malformed combo");
            for (const auto& st : c.steps)
                if (!valid(st.screen) || !spec_.screens[static_cast<std::size_t>(st.screen)].has_element(st.element))
                    throw ContractViolation("combo element not on its screen");
        }
        for (int t : spec_.terminal)
            if (!valid(t)) throw ContractViolation("terminal screen out of range");
    }

    void index() {
        for (std::size_t i = 0; i < spec_.transitions.size(); ++i) {
            const auto& t = spec_.transitions[i];
            if (!transitions_.try_emplace({t.screen, t.element}, i).second)
                throw ContractViolation("duplicate transition for one (screen, element)");
        }
        for (const auto& s : spec_.screens)
            for (const auto& e : s.elements) object_names_.try_emplace(e.id, e.name);
    }

    void render_grids() {
        Rng rng = Rng(spec_.seed).fork("grids");
        grids_.resize(spec_.screens.size());
        for (const auto& s : spec_.screens) {
            auto& g = grids_[static_cast<std::size_t>(s.id)];
            Rng local = rng.fork(static_cast<std::uint64_t>(s.id) + 1);
            if (s.base >= 0) {
                g = grids_[static_cast<std::size_t>(s.base)];
                auto cells = pick_cells(local, s.diff_cells, true);
                for (int c : cells) g[static_cast<std::size_t>(c)] = static_cast<std::uint8_t>((g[static_cast<std::size_t>(c)] + 1 + local.below(7)) % 8);
            } else {
                g.resize(kGridCells);
                for (auto& v : g) v = static_cast<std::uint8_t>(local.below(8));
            }
        }
        // Skins share one banner region; each skin paints it differently.
        for (int c = 0; c < kSkinPatchCells; ++c) skin_cells_.push_back((c / 8) * kGridSide + (c % 8));
        Rng skin_rng = rng.fork("skins");
        skin_patches_.resize(static_cast<std::size_t>(spec_.skins));
        for (int k = 0; k < spec_.skins; ++k) {
            auto& p = skin_patches_[static_cast<std::size_t>(k)];
            for (int c = 0; c < kSkinPatchCells; ++c) {
                std::uint8_t v = static_cast<std::uint8_t>(skin_rng.below(8));
                if (k > 0) {
                    while (v == skin_patches_[0][static_cast<std::size_t>(c)]) v = static_cast<std::uint8_t>(skin_rng.below(8));
                }
                p.push_back(v);
            }
        }
    }

    /// Cells outside the skin banner, chosen deterministically.
    static std::vector<int> pick_cells(Rng& rng, int count, bool avoid_banner) {
        std::vector<int> pool;
        for (int c = 0; c < kGridCells; ++c) {
            const bool banner = (c / kGridSide) < 3 && (c % kGridSide) < 8;
            if (!(avoid_banner && banner)) pool.push_back(c);
        }
        for (std::size_t i = 0; i + 1 < pool.size(); ++i) {
            const auto j = i + rng.below(pool.size() - i);
            std::swap(pool[i], pool[j]);
        }
        pool.resize(static_cast<std::size_t>(std::min<int>(count, static_cast<int>(pool.size()))));
        return pool;
    }

    std::vector<int> cosmetic_cells(int screen_id, ObjectId element, int count) const {
        Rng rng = Rng(spec_.seed).fork("cosmetic").fork(static_cast<std::uint64_t>(screen_id) * 1000003ULL +
                                                         static_cast<std::uint64_t>(element));
        return pick_cells(rng, count, true);
    }

    void build_basis() {
        const std::size_t d = spec_.dimension;
        int families = 0;
        std::map<int, std::vector<int>> members;
        for (const auto& s : spec_.screens) {
            families = std::max(families, s.family + 1);
            members[s.family].push_back(s.id);
        }
        std::size_t largest = 0;
        for (const auto& [f, m] : members) largest = std::max(largest, m.size());
        if (static_cast<std::size_t>(families) + static_cast<std::size_t>(spec_.skins) + largest > d)
            throw ContractViolation("world has too many families/skins for embedding dimension " + std::to_string(d));

        Rng rng = Rng(spec_.seed).fork("basis");
        std::vector<std::vector<double>> shared;
        auto fresh = [&](const std::vector<std::vector<double>>& against) {
            for (;;) {
                std::vector<double> v(d);
                for (auto& x : v) x = rng.normal();
                for (const auto& b : against) {
                    const double p = dot(v, b);
                    axpy(-p, b, v);
                }
                const double n = std::sqrt(dot(v, v));
                if (n > 1e-6) {
                    for (auto& x : v) x /= n;
                    return v;
                }
            }
        };
        family_dirs_.resize(static_cast<std::size_t>(families));
        for (int f = 0; f < families; ++f) {
            family_dirs_[static_cast<std::size_t>(f)] = fresh(shared);
            shared.push_back(family_dirs_[static_cast<std::size_t>(f)]);
        }
        skin_dirs_.resize(static_cast<std::size_t>(spec_.skins));
        for (int k = 0; k < spec_.skins; ++k) {
            skin_dirs_[static_cast<std::size_t>(k)] = fresh(shared);
            shared.push_back(skin_dirs_[static_cast<std::size_t>(k)]);
        }
        screen_dirs_.resize(spec_.screens.size());
        for (const auto& [f, ids] : members) {
            auto against = shared;
            for (int id : ids) {
                screen_dirs_[static_cast<std::size_t>(id)] = fresh(against);
                against.push_back(screen_dirs_[static_cast<std::size_t>(id)]);
            }
        }
    }

    /// Same screen+skin must merge; same screen under another skin, and
    /// family siblings under one skin, must land in the similarity band.
    void verify_embedding_calibration() const {
        const SimilarityThresholds t{};
        WorldState probe;
        probe.rng = Rng(spec_.seed).fork("calibration");
        const int samples = 4;
        for (const auto& s : spec_.screens) {
            for (int k = 0; k < spec_.skins; ++k) {
                std::vector<Embedding> obs;
                for (int i = 0; i < samples; ++i) obs.push_back(noisy(s.id, k, probe.rng));
                for (int i = 0; i < samples; ++i)
                    for (int j = i + 1; j < samples; ++j)
                        if (!(cosine(obs[static_cast<std::size_t>(i)], obs[static_cast<std::size_t>(j)]) > t.merge()))
                            throw ContractViolation("calibration: same-screen observations of " + s.name + " do not merge");
                for (int k2 = k + 1; k2 < spec_.skins; ++k2) {
                    const double c = cosine(obs[0], noisy(s.id, k2, probe.rng));
                    if (classify(c, t) != SimilarityClass::SimilarEdge)
                        throw ContractViolation("calibration: skins of " + s.name + " fall outside the similarity band");
                }
                for (const auto& o : spec_.screens) {
                    if (o.id <= s.id) continue;
                    const double c = cosine(obs[0], noisy(o.id, k, probe.rng));
                    const auto cls = classify(c, t);
                    if (o.family == s.family && cls != SimilarityClass::SimilarEdge)
                        throw ContractViolation("calibration: siblings " + s.name + "/" + o.name + " outside the band");
                    if (o.family != s.family && cls != SimilarityClass::Unrelated)
                        throw ContractViolation("calibration: unrelated screens " + s.name + "/" + o.name + " too similar");
                }
            }
        }
    }

    Embedding noisy(int screen_id, int skin, Rng& rng) const {
        auto v = clean_embedding(screen_id, skin);
        std::vector<double> n(v.size());
        for (auto& x : n) x = rng.normal();
        const double norm = std::sqrt(dot(n, n));
        axpy(geometry_.noise_scale / norm, n, v);
        return Embedding(std::move(v));
    }

    Embedding embed(WorldState& s) const { return noisy(s.screen, s.skin, s.rng); }

    ScreenSnapshot snapshot_of(const WorldState& s) const {
        return {s.screen, s.skin, s.cosmetic_element, static_cast<int>(s.milestones_reached.size()), s.serial};
    }

    void apply(WorldState& s, ObjectId element, StepOutcome& out) const {
        const int from = s.screen;
        int to = from;
        ObjectId cosmetic = s.cosmetic_element;
        if (const Transition* t = transition(from, element)) {
            to = t->target;
            if (t->target == from && t->cosmetic_cells > 0) cosmetic = (cosmetic == element) ? 0 : element;
        }
        // Combos override the plain transition once their last step matches.
        for (std::size_t c = 0; c < spec_.combos.size(); ++c) {
            const auto& combo = spec_.combos[c];
            auto& prog = s.combo_progress[c];
            const ComboStep here{from, element};
            if (combo.steps[prog] == here) {
                ++prog;
            } else {
                prog = combo.steps[0] == here ? 1 : 0;
            }
            if (prog == combo.steps.size()) {
                to = combo.target;
                prog = 0;
            }
        }
        if (to != from) cosmetic = 0;
        s.cosmetic_element = cosmetic;
        s.screen = to;
        // Each new milestone is shown under a freshly drawn skin.
        if (auto m = milestone_index(to); m && !s.milestones_reached.contains(*m)) {
            s.milestones_reached.insert(*m);
            out.milestone_reached = *m;
            s.skin = static_cast<int>(s.rng.below(static_cast<std::uint64_t>(spec_.skins)));
        }
        if (is_terminal(to)) s.terminal = true;
    }

    void compute_distances() {
        const auto n = spec_.screens.size();
        std::vector<std::vector<int>> reverse(n);
        for (const auto& t : spec_.transitions)
            if (t.target != t.screen) reverse[static_cast<std::size_t>(t.target)].push_back(t.screen);
        for (int m : spec_.milestones) {
            std::vector<int> d(n, -1);
            std::vector<int> queue{m};
            d[static_cast<std::size_t>(m)] = 0;
            for (std::size_t head = 0; head < queue.size(); ++head) {
                const int cur = queue[head];
                for (int prev : reverse[static_cast<std::size_t>(cur)]) {
                    if (d[static_cast<std::size_t>(prev)] >= 0) continue;
                    d[static_cast<std::size_t>(prev)] = d[static_cast<std::size_t>(cur)] + 1;
                    queue.push_back(prev);
                }
            }
            distances_.push_back(std::move(d));
        }
    }

    static double dot(const std::vector<double>& a, const std::vector<double>& b) {
        double r = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) r += a[i] * b[i];
        return r;
    }
    static void axpy(double k, const std::vector<double>& x, std::vector<double>& y) {
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += k * x[i];
    }

    WorldSpec spec_;
    EmbeddingGeometry geometry_;
    std::map<std::pair<int, ObjectId>, std::size_t> transitions_;
    std::map<ObjectId, std::string> object_names_;
    std::vector<std::vector<std::uint8_t>> grids_;
    std::vector<int> skin_cells_;
    std::vector<std::vector<std::uint8_t>> skin_patches_;
    std::vector<std::vector<double>> family_dirs_;
    std::vector<std::vector<double>> skin_dirs_;
    std::vector<std::vector<double>> screen_dirs_;
    std::vector<std::vector<int>> distances_;
};

} // namespace kgagent::sim
