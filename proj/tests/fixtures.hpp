#pragma once

// Small hand-authored world used across tests.
//
//   Home(0) --Play--> Level(1) --Arm--> Armed(3) --Fire--> Boss(4, terminal)
//      |  Glow: cosmetic        \--Quit--> Home
//      \--Settings--> Settings(2) --Back--> Home
//
// Milestones: Level, Boss. Fire only works right after Arm (a combo).

#include "kgagent/envsim.hpp"

namespace fixtures {

inline constexpr kgagent::ObjectId kPlay = 11, kSettings = 12, kGlow = 13, kNoop = 14;
inline constexpr kgagent::ObjectId kArm = 21, kQuit = 22, kBack = 31, kFire = 41;

inline kgagent::sim::WorldSpec tiny_world(double grounding_failure_rate = 0.0, int skins = 2) {
    using namespace kgagent::sim;
    WorldSpec w;
    w.profile = "tiny";
    w.seed = 5;
    w.skins = skins;
    w.grounding_failure_rate = grounding_failure_rate;
    w.screens = {
        {0, "Home", 0, {{kPlay, "Play"}, {kSettings, "Settings"}, {kGlow, "Glow"}, {kNoop, "Logo"}}, -1, 0},
        {1, "Level", 1, {{kArm, "Arm"}, {kQuit, "Quit"}}, -1, 0},
        {2, "Settings", 2, {{kBack, "Back"}}, -1, 0},
        {3, "Armed", 1, {{kFire, "Fire"}, {kQuit, "Quit"}}, 1, 6},
        {4, "Boss", 3, {{kQuit, "Quit"}}, -1, 0},
    };
    w.transitions = {
        {0, kPlay, 1, 0},    {0, kSettings, 2, 0}, {0, kGlow, 0, 4}, {1, kArm, 3, 0},
        {1, kQuit, 0, 0},    {2, kBack, 0, 0},     {3, kQuit, 0, 0}, {4, kQuit, 0, 0},
    };
    w.milestones = {1, 4};
    w.combos = {{{{1, kArm}, {3, kFire}}, 4}};
    w.terminal = {4};
    return w;
}

} // namespace fixtures
