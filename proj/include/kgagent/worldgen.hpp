#pragma once

// Seeded world generator for the three built-in profiles.
//
// linear:      a chain of hub screens, one progressing element per hub.
// branching:   hubs with side menus (some offering a shortcut) and dead-end
//              branches that must be backed out of.
// combo-heavy: a turn-based game. Most turns only end after a quiet setup
//              click (a few changed cells, sibling screen of the turn), while
//              a flashy toolbar button opens a dead-end panel.

#include <algorithm>
#include <array>
#include <string>
#include <vector>

#include "envsim.hpp"

namespace kgagent::sim {

enum class Profile { Linear, Branching, ComboHeavy };

inline const char* to_string(Profile p) {
    switch (p) {
    case Profile::Linear: return "linear";
    case Profile::Branching: return "branching";
    case Profile::ComboHeavy: return "combo-heavy";
    }
    return "?";
}

inline Profile profile_from_string(const std::string& s) {
    if (s == "linear") return Profile::Linear;
    if (s == "branching") return Profile::Branching;
    if (s == "combo-heavy") return Profile::ComboHeavy;
    throw ContractViolation("unknown world profile '" + s + "'");
}

struct GeneratorOptions {
    int stages = 0;  // 0: profile default
    int skins = 3;
    double grounding_failure_rate = 0.05;
    std::size_t dimension = kDefaultEmbeddingDim;
    /// Cells rewritten by a setup click; 6 of 256 keeps delta near 0.023.
    int setup_cells = 6;
    /// Probability that a combo-heavy stage needs a setup click.
    double combo_stage_rate = 0.75;
    /// Probability that a turn's setup element is unique to that turn.
    double unique_setup_rate = 0.5;
    /// Cells that differ between consecutive turn screens.
    int turn_cells = 40;
};

inline int default_stages(Profile p) {
    switch (p) {
    case Profile::Linear: return 8;
    case Profile::Branching: return 10;
    case Profile::ComboHeavy: return 40;
    }
    return 8;
}

namespace detail {

class WorldBuilder {
public:
    WorldBuilder(Profile p, std::uint64_t seed, const GeneratorOptions& opt) : rng_(Rng(seed).fork("worldgen")) {
        spec_.profile = to_string(p);
        spec_.seed = seed;
        spec_.skins = opt.skins;
        spec_.grounding_failure_rate = opt.grounding_failure_rate;
        spec_.dimension = opt.dimension;
        // Object ids are drawn from a shuffled pool so that id order carries
        // no information about an element's role.
        for (int i = 0; i < 900; ++i) id_pool_.push_back(100 + i);
        for (std::size_t i = 0; i + 1 < id_pool_.size(); ++i)
            std::swap(id_pool_[i], id_pool_[i + rng_.below(id_pool_.size() - i)]);
    }

    Rng& rng() { return rng_; }

    int family() { return next_family_++; }

    int screen(std::string name, int family, int base = -1, int diff_cells = 0) {
        Screen s;
        s.id = static_cast<int>(spec_.screens.size());
        s.name = std::move(name);
        s.family = family;
        s.base = base;
        s.diff_cells = diff_cells;
        spec_.screens.push_back(std::move(s));
        return spec_.screens.back().id;
    }

    ObjectId fresh_id() { return id_pool_.at(next_id_++); }

    ObjectId element(int screen, std::string name) {
        const ObjectId id = fresh_id();
        spec_.screens[static_cast<std::size_t>(screen)].elements.push_back({id, std::move(name), Operate::Click});
        return id;
    }

    /// Makes an existing element visible on another screen as well.
    void share(int screen, ObjectId id, const std::string& name) {
        spec_.screens[static_cast<std::size_t>(screen)].elements.push_back({id, name, Operate::Click});
    }

    void link(int screen, ObjectId element, int target, int cosmetic_cells = 0) {
        spec_.transitions.push_back({screen, element, target, cosmetic_cells});
    }

    std::string pick(const std::vector<std::string>& pool) { return pool[rng_.below(pool.size())]; }

    WorldSpec finish() {
        for (auto& s : spec_.screens) {
            for (std::size_t i = 0; i + 1 < s.elements.size(); ++i)
                std::swap(s.elements[i], s.elements[i + rng_.below(s.elements.size() - i)]);
        }
        return std::move(spec_);
    }

    WorldSpec& spec() { return spec_; }

private:
    WorldSpec spec_;
    Rng rng_;
    std::vector<ObjectId> id_pool_;
    std::size_t next_id_ = 0;
    int next_family_ = 0;
};

inline const std::vector<std::string>& decor_names() {
    static const std::vector<std::string> v{"Tooltip_Icon", "Resource_Bar", "Minimap", "Portrait", "Banner",
                                            "Score_Label", "Clock", "Flag_Icon", "Status_Text", "Help_Hint"};
    return v;
}
inline const std::vector<std::string>& advance_names() {
    static const std::vector<std::string> v{"Next_Turn", "Continue", "Proceed", "End_Turn", "Advance"};
    return v;
}
inline const std::vector<std::string>& setup_names() {
    static const std::vector<std::string> v{"Select_Unit", "Choose_Production", "Pick_Card", "Assign_Worker",
                                            "Select_Target", "Choose_Research"};
    return v;
}
inline const std::vector<std::string>& payoff_names() {
    static const std::vector<std::string> v{"Confirm_Order", "Play_Card", "Execute_Plan", "Found_City", "Commit"};
    return v;
}
inline const std::vector<std::string>& flashy_names() {
    static const std::vector<std::string> v{"Open_Encyclopedia", "Show_Demographics", "Open_Diplomacy_Overview",
                                            "View_Deck", "Open_Trade_Routes"};
    return v;
}

/// A few decorative elements per hub; one responds with a cosmetic highlight.
inline void add_decor(WorldBuilder& b, int screen, int count, bool with_highlight) {
    for (int i = 0; i < count; ++i) {
        const ObjectId e = b.element(screen, b.pick(decor_names()));
        if (with_highlight && i == 0) b.link(screen, e, screen, 4);
    }
}

inline WorldSpec linear_world(WorldBuilder& b, int stages) {
    std::vector<int> hubs;
    for (int i = 0; i <= stages; ++i) hubs.push_back(b.screen("Stage_" + std::to_string(i), b.family()));
    for (int i = 0; i < stages; ++i) {
        const ObjectId go = b.element(hubs[static_cast<std::size_t>(i)], b.pick(advance_names()));
        b.link(hubs[static_cast<std::size_t>(i)], go, hubs[static_cast<std::size_t>(i + 1)]);
        add_decor(b, hubs[static_cast<std::size_t>(i)], 2, false);
    }
    add_decor(b, hubs.back(), 2, false);
    b.spec().start = hubs.front();
    b.spec().milestones.assign(hubs.begin() + 1, hubs.end());
    b.spec().terminal = {hubs.back()};
    return b.finish();
}

inline WorldSpec branching_world(WorldBuilder& b, int stages) {
    std::vector<int> hubs;
    for (int i = 0; i <= stages; ++i) hubs.push_back(b.screen("Stage_" + std::to_string(i), b.family()));
    for (int i = 0; i < stages; ++i) {
        const int h = hubs[static_cast<std::size_t>(i)];
        const int next = hubs[static_cast<std::size_t>(i + 1)];
        b.link(h, b.element(h, b.pick(advance_names())), next);
        const int menu = b.screen("Menu_" + std::to_string(i), b.family());
        b.link(h, b.element(h, "Open_Menu"), menu);
        b.link(menu, b.element(menu, "Back"), h);
        if (i % 2 == 1) b.link(menu, b.element(menu, "Shortcut"), next);
        add_decor(b, menu, 1, false);
        const int dead = b.screen("Branch_" + std::to_string(i), b.family());
        b.link(h, b.element(h, b.pick(flashy_names())), dead);
        b.link(dead, b.element(dead, "Close"), h);
        add_decor(b, h, 1, true);
    }
    add_decor(b, hubs.back(), 2, false);
    b.spec().start = hubs.front();
    b.spec().milestones.assign(hubs.begin() + 1, hubs.end());
    b.spec().terminal = {hubs.back()};
    return b.finish();
}

inline WorldSpec combo_world(WorldBuilder& b, int stages, const GeneratorOptions& opt) {
    // A turn-based game. Turn screens are siblings of one family and share
    // their toolbar (same element ids), so skills carry over between turns.
    // On combo turns End_Turn only appears once a setup has armed the turn;
    // the armed screen also offers unit orders.
    const int turn_family = b.family();
    const int armed_family = b.family();
    const int panel_family = b.family();
    std::vector<int> turns;
    std::vector<bool> combo;
    for (int i = 0; i <= stages; ++i) {
        turns.push_back(b.screen("Turn_" + std::to_string(i), turn_family, i == 0 ? -1 : turns.back(), opt.turn_cells));
        combo.push_back(i < stages && (i == 0 || b.rng().bernoulli(opt.combo_stage_rate)));
    }

    struct Named {
        std::string name;
        ObjectId id;
    };
    const auto make = [&](const std::string& name) { return Named{name, b.fresh_id()}; };
    const Named end_turn = make("End_Turn");
    const Named flashy = make(b.pick(flashy_names()));
    std::vector<Named> setups;
    for (const char* n : {"Choose_Research", "Choose_Production", "Assign_Worker"}) setups.push_back(make(n));
    const Named highlight = make(b.pick(decor_names()));
    const Named inert = make(b.pick(decor_names()));
    std::vector<Named> orders;
    for (const char* n : {"Fortify", "Sentry"}) orders.push_back(make(n));
    const Named close = make("Close_Panel");

    std::vector<Named> toolbar{flashy, highlight, inert};
    toolbar.insert(toolbar.end(), setups.begin(), setups.end());
    for (std::size_t i = 0; i < turns.size(); ++i) {
        const int t = turns[i];
        for (const auto& e : toolbar) b.share(t, e.id, e.name);
        if (!combo[i]) b.share(t, end_turn.id, end_turn.name);
    }

    for (int i = 0; i < stages; ++i) {
        const int t = turns[static_cast<std::size_t>(i)];
        const int next = turns[static_cast<std::size_t>(i + 1)];
        b.link(t, highlight.id, t, 4);
        const int panel = b.screen("Panel_" + std::to_string(i), panel_family);
        b.share(panel, close.id, close.name);
        add_decor(b, panel, 1, false);
        b.link(t, flashy.id, panel);
        b.link(panel, close.id, t);

        if (!combo[static_cast<std::size_t>(i)]) {
            for (const auto& s : setups) b.link(t, s.id, t, 4);
            b.link(t, end_turn.id, next);
            continue;
        }
        // Required setup: a toolbar action, or one only this turn offers.
        Named required;
        if (b.rng().bernoulli(opt.unique_setup_rate)) {
            std::string name = b.pick(setup_names());
            while (std::any_of(setups.begin(), setups.end(), [&](const Named& s) { return s.name == name; }))
                name = b.pick(setup_names());
            required = {name, b.element(t, name)};
        } else {
            required = setups[b.rng().below(setups.size())];
        }
        for (const auto& s : setups)
            if (s.id != required.id) b.link(t, s.id, t, 4);
        const int armed = b.screen("Turn_" + std::to_string(i) + "_Armed", armed_family, t, opt.setup_cells);
        for (const auto& e : b.spec().screens[static_cast<std::size_t>(t)].elements) b.share(armed, e.id, e.name);
        b.share(armed, end_turn.id, end_turn.name);
        for (const auto& o : orders) {
            b.share(armed, o.id, o.name);
            b.link(armed, o.id, armed, 3);
        }
        // Armed, the flashy button and the setup itself do nothing.
        b.link(t, required.id, armed);
        b.link(armed, end_turn.id, next);
        b.spec().combos.push_back({{{t, required.id}, {armed, end_turn.id}}, next});
    }
    b.spec().start = turns.front();
    b.spec().milestones.assign(turns.begin() + 1, turns.end());
    b.spec().terminal = {turns.back()};
    return b.finish();
}

} // namespace detail

inline WorldSpec generate_world(Profile profile, std::uint64_t seed, GeneratorOptions opt = {}) {
    const int stages = opt.stages > 0 ? opt.stages : default_stages(profile);
    detail::WorldBuilder b(profile, seed, opt);
    switch (profile) {
    case Profile::Linear: return detail::linear_world(b, stages);
    case Profile::Branching: return detail::branching_world(b, stages);
    case Profile::ComboHeavy: return detail::combo_world(b, stages, opt);
    }
    throw ContractViolation("unknown world profile");
}

inline WorldSpec generate_world(const std::string& profile, std::uint64_t seed, GeneratorOptions opt = {}) {
    return generate_world(profile_from_string(profile), seed, opt);
}

/// Setup steps of two-step combos: the first click changes few cells and is
/// required before the payoff appears.
struct SetupAction {
    int screen = 0;
    ObjectId element = 0;
    int armed_screen = 0;
    ObjectId payoff = 0;
    int milestone_screen = 0;
};

inline std::vector<SetupAction> setup_actions(const WorldSpec& w) {
    std::vector<SetupAction> out;
    for (const auto& c : w.combos) {
        if (c.steps.size() != 2) continue;
        out.push_back({c.steps[0].screen, c.steps[0].element, c.steps[1].screen, c.steps[1].element, c.target});
    }
    return out;
}

} // namespace kgagent::sim
