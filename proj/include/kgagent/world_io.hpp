#pragma once

// World spec files (JSON), so hand-authored worlds can sit next to generated ones.
//
// {
//   "format_version": 1, "profile": "custom", "seed": 3, "start": 0,
//   "skins": 2, "grounding_failure_rate": 0.05, "dimension": 64,
//   "screens": [{"id": 0, "name": "Home", "family": 0,
//                "elements": [{"id": 11, "name": "Play"}], "base": -1, "diff_cells": 0}],
//   "transitions": [{"screen": 0, "element": 11, "target": 1, "cosmetic_cells": 0}],
//   "milestones": [1], "combos": [{"steps": [[0, 11], [1, 12]], "target": 2}],
//   "terminal": [2]
// }

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "envsim.hpp"
#include "errors.hpp"

namespace kgagent::sim {

inline constexpr int kWorldFormatVersion = 1;

inline nlohmann::json world_to_json(const WorldSpec& w) {
    using nlohmann::json;
    json screens = json::array();
    for (const auto& s : w.screens) {
        json els = json::array();
        for (const auto& e : s.elements) els.push_back({{"id", e.id}, {"name", e.name}, {"operate", to_string(e.operate)}});
        screens.push_back({{"id", s.id}, {"name", s.name}, {"family", s.family}, {"elements", els}, {"base", s.base},
                           {"diff_cells", s.diff_cells}});
    }
    json transitions = json::array();
    for (const auto& t : w.transitions)
        transitions.push_back({{"screen", t.screen}, {"element", t.element}, {"target", t.target}, {"cosmetic_cells", t.cosmetic_cells}});
    json combos = json::array();
    for (const auto& c : w.combos) {
        json steps = json::array();
        for (const auto& s : c.steps) steps.push_back(json::array({s.screen, s.element}));
        combos.push_back({{"steps", steps}, {"target", c.target}});
    }
    return {{"format_version", kWorldFormatVersion},
            {"profile", w.profile},
            {"seed", w.seed},
            {"start", w.start},
            {"skins", w.skins},
            {"grounding_failure_rate", w.grounding_failure_rate},
            {"dimension", w.dimension},
            {"screens", screens},
            {"transitions", transitions},
            {"milestones", w.milestones},
            {"combos", combos},
            {"terminal", w.terminal}};
}

inline WorldSpec world_from_json(const nlohmann::json& j) {
    try {
        const int version = j.value("format_version", kWorldFormatVersion);
        if (version > kWorldFormatVersion)
            throw VersionMismatch("world format_version " + std::to_string(version) + " is newer than supported");
        WorldSpec w;
        w.profile = j.value("profile", std::string("custom"));
        w.seed = j.value("seed", std::uint64_t{0});
        w.start = j.value("start", 0);
        w.skins = j.value("skins", 1);
        w.grounding_failure_rate = j.value("grounding_failure_rate", 0.05);
        w.dimension = j.value("dimension", kDefaultEmbeddingDim);
        for (const auto& s : j.at("screens")) {
            Screen sc;
            sc.id = s.at("id").get<int>();
            sc.name = s.value("name", "screen_" + std::to_string(sc.id));
            sc.family = s.value("family", sc.id);
            sc.base = s.value("base", -1);
            sc.diff_cells = s.value("diff_cells", 0);
            for (const auto& e : s.at("elements")) {
                Element el;
                el.id = e.at("id").get<ObjectId>();
                el.name = e.value("name", "element_" + std::to_string(el.id));
                el.operate = operate_from_string(e.value("operate", std::string("Click")));
                sc.elements.push_back(el);
            }
            w.screens.push_back(std::move(sc));
        }
        if (j.contains("transitions"))
            for (const auto& t : j.at("transitions"))
                w.transitions.push_back({t.at("screen").get<int>(), t.at("element").get<ObjectId>(), t.at("target").get<int>(),
                                         t.value("cosmetic_cells", 0)});
        w.milestones = j.at("milestones").get<std::vector<int>>();
        if (j.contains("combos"))
            for (const auto& c : j.at("combos")) {
                Combo combo;
                for (const auto& s : c.at("steps")) combo.steps.push_back({s.at(0).get<int>(), s.at(1).get<ObjectId>()});
                combo.target = c.at("target").get<int>();
                w.combos.push_back(std::move(combo));
            }
        if (j.contains("terminal")) w.terminal = j.at("terminal").get<std::vector<int>>();
        return w;
    } catch (const nlohmann::json::exception& e) {
        throw ContractViolation(std::string("malformed world spec: ") + e.what());
    }
}

inline WorldSpec load_world_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw NotFound("cannot open world file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    auto j = nlohmann::json::parse(ss.str(), nullptr, false);
    if (j.is_discarded()) throw ContractViolation("world file " + path + " is not valid JSON");
    return world_from_json(j);
}

} // namespace kgagent::sim
