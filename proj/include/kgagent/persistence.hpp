#pragma once

// Single-file JSON snapshots of the agent's stores. Saves are atomic (temp
// file + rename); loads re-validate every store invariant.
//
// {
//   "format_version": 1, "created_step": 400,
//   "graph":  { see graph_io.hpp },
//   "memory": { "skills": [...], "clusters": [...], "objects": [...],
//               "tree_stats": [...], "pruned_total": 3, "format_version": 1 },
//   "config": { free-form echo of the run configuration }
// }

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <system_error>

#include <json.hpp>

#include "errors.hpp"
#include "graph_io.hpp"
#include "stores.hpp"

namespace kgagent {

inline constexpr int kSnapshotFormatVersion = 1;

struct Snapshot {
    std::int64_t created_step = 0;
    AgentStores stores;
    nlohmann::json config = nlohmann::json::object();
};

namespace snapshot_json {

using nlohmann::json;

inline json encode(const AtomicAction& a) {
    json j{{"operate", to_string(a.operate)}, {"object_id", a.object_id}, {"object_name", a.object_name}};
    if (a.payload) j["payload"] = *a.payload;
    return j;
}

inline AtomicAction decode_action(const json& j) {
    AtomicAction a;
    a.operate = operate_from_string(j.at("operate").get<std::string>());
    a.object_id = j.at("object_id").get<ObjectId>();
    a.object_name = j.value("object_name", std::string{});
    if (j.contains("payload") && !j.at("payload").is_null()) a.payload = j.at("payload").get<std::string>();
    return a;
}

inline json memory_to_json(const ProceduralMemory& m) {
    json skills = json::array();
    for (const auto& s : m.skills()) {
        json acts = json::array();
        for (const auto& a : s.actions) acts.push_back(encode(a));
        skills.push_back({{"id", s.id.value},
                          {"name", s.name},
                          {"descriptor", s.descriptor},
                          {"actions", acts},
                          {"fitness", s.fitness},
                          {"exec_count", s.exec_count},
                          {"created_step", s.created_step},
                          {"status", s.active() ? "active" : "pruned"},
                          {"cluster", s.cluster ? json(s.cluster->value) : json()},
                          {"last_reward", s.last_reward ? json(*s.last_reward) : json()}});
    }
    json clusters = json::array();
    for (const auto& c : m.clusters()) {
        const auto v = c.centroid.values();
        json ids = json::array();
        for (SkillId s : c.skill_ids) ids.push_back(s.value);
        clusters.push_back({{"id", c.id.value}, {"centroid", std::vector<double>(v.begin(), v.end())}, {"skill_ids", ids}});
    }
    json objects = json::array();
    for (const auto& [id, o] : m.objects())
        objects.push_back({{"id", o.id}, {"name", o.name}, {"reference", o.reference_descriptor}});
    json trees = json::array();
    for (const auto& [state, t] : m.trees()) {
        json per = json::array();
        for (const auto& [skill, rec] : t.per_skill)
            per.push_back({{"skill", skill.value}, {"visits", rec.visits}, {"value_sum", rec.value_sum}});
        trees.push_back({{"state", state.value}, {"total_selections", t.total_selections}, {"per_skill", per}});
    }
    return {{"format_version", kSnapshotFormatVersion},
            {"skills", skills},
            {"clusters", clusters},
            {"objects", objects},
            {"tree_stats", trees},
            {"pruned_total", m.pruned_total()}};
}

inline ProceduralMemory memory_from_json(const json& j, SimilarityThresholds thresholds) {
    std::vector<Skill> skills;
    std::vector<ActionCluster> clusters;
    std::vector<UIObject> objects;
    std::vector<SearchTreeStats> trees;
    std::uint64_t pruned_total = 0;
    try {
        for (const auto& s : j.at("skills")) {
            Skill k;
            k.id = SkillId{s.at("id").get<std::uint32_t>()};
            k.name = s.at("name").get<std::string>();
            k.descriptor = s.at("descriptor").get<std::string>();
            for (const auto& a : s.at("actions")) k.actions.push_back(decode_action(a));
            k.fitness = s.at("fitness").get<double>();
            k.exec_count = s.at("exec_count").get<std::uint64_t>();
            k.created_step = s.at("created_step").get<std::int64_t>();
            const auto status = s.at("status").get<std::string>();
            if (status != "active" && status != "pruned") throw CorruptSnapshot("skill-status", "'" + status + "'");
            k.status = status == "active" ? SkillStatus::Active : SkillStatus::Pruned;
            if (!s.at("cluster").is_null()) k.cluster = ClusterId{s.at("cluster").get<std::uint32_t>()};
            if (s.contains("last_reward") && !s.at("last_reward").is_null()) k.last_reward = s.at("last_reward").get<double>();
            skills.push_back(std::move(k));
        }
        for (const auto& c : j.at("clusters")) {
            ActionCluster ac{ClusterId{c.at("id").get<std::uint32_t>()}, Embedding(c.at("centroid").get<std::vector<double>>()), {}};
            for (const auto& s : c.at("skill_ids")) ac.skill_ids.insert(SkillId{s.get<std::uint32_t>()});
            clusters.push_back(std::move(ac));
        }
        for (const auto& o : j.at("objects"))
            objects.push_back({o.at("id").get<ObjectId>(), o.at("name").get<std::string>(), o.value("reference", std::string{})});
        for (const auto& t : j.at("tree_stats")) {
            SearchTreeStats st;
            st.state = NodeId{t.at("state").get<std::uint32_t>()};
            st.total_selections = t.at("total_selections").get<std::uint64_t>();
            for (const auto& p : t.at("per_skill"))
                st.per_skill[SkillId{p.at("skill").get<std::uint32_t>()}] = {p.at("visits").get<std::uint64_t>(),
                                                                            p.at("value_sum").get<double>()};
            trees.push_back(std::move(st));
        }
        pruned_total = j.value("pruned_total", std::uint64_t{0});
    } catch (const json::exception& e) {
        throw CorruptSnapshot("memory-schema", e.what());
    } catch (const ContractViolation& e) {
        throw CorruptSnapshot("memory-schema", e.what());
    }
    return ProceduralMemory::restore(thresholds, std::move(skills), std::move(clusters), std::move(objects), std::move(trees),
                                     pruned_total);
}

} // namespace snapshot_json

inline nlohmann::json snapshot_to_json(const AgentStores& stores, std::int64_t created_step,
                                       const nlohmann::json& config = nlohmann::json::object()) {
    return {{"format_version", kSnapshotFormatVersion},
            {"created_step", created_step},
            {"graph", graph_to_json(stores.graph)},
            {"memory", snapshot_json::memory_to_json(stores.memory)},
            {"config", config}};
}

/// Rebuilds and validates the stores. Throws VersionMismatch or
/// CorruptSnapshot naming the violated invariant.
inline Snapshot snapshot_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw CorruptSnapshot("snapshot-schema", "top level is not an object");
    if (!j.contains("format_version") || !j.at("format_version").is_number_integer())
        throw CorruptSnapshot("snapshot-schema", "missing format_version");
    const int version = j.at("format_version").get<int>();
    if (version > kSnapshotFormatVersion)
        throw VersionMismatch("snapshot format_version " + std::to_string(version) + " is newer than supported (" +
                              std::to_string(kSnapshotFormatVersion) + ")");
    if (version < 1) throw VersionMismatch("snapshot format_version " + std::to_string(version) + " is not supported");
    for (const char* key : {"created_step", "graph", "memory"})
        if (!j.contains(key)) throw CorruptSnapshot("snapshot-schema", std::string("missing '") + key + "'");
    KnowledgeGraph graph = graph_from_json(j.at("graph"));
    ProceduralMemory memory = snapshot_json::memory_from_json(j.at("memory"), graph.config().thresholds);
    Snapshot s{0, AgentStores(std::move(graph), std::move(memory)), j.value("config", nlohmann::json::object())};
    try {
        s.created_step = j.at("created_step").get<std::int64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw CorruptSnapshot("snapshot-schema", e.what());
    }
    s.stores.validate();
    return s;
}

/// Test hook: runs after the temp file is complete and before the rename.
using SaveFault = std::function<void(const std::filesystem::path& temp)>;

/// Atomic: the destination either keeps its previous content or holds the
/// complete new snapshot.
inline void save_snapshot(const std::filesystem::path& path, const AgentStores& stores, std::int64_t created_step,
                          const nlohmann::json& config = nlohmann::json::object(), const SaveFault& fault = {}) {
    const std::string text = snapshot_to_json(stores, created_step, config).dump(1) + "\n";
    std::filesystem::path temp = path;
    temp += ".tmp";
    {
        std::ofstream out(temp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + temp.string() + " for writing");
        out << text;
        out.flush();
        if (!out) throw IoError("write failed for " + temp.string());
    }
    try {
        if (fault) fault(temp);
    } catch (...) {
        std::error_code ec;
        std::filesystem::remove(temp, ec);
        throw;
    }
    std::error_code ec;
    std::filesystem::rename(temp, path, ec);
    if (ec) throw IoError("cannot move snapshot into place at " + path.string() + ": " + ec.message());
}

inline Snapshot load_snapshot(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFound("snapshot not found: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    auto j = nlohmann::json::parse(ss.str(), nullptr, false);
    if (j.is_discarded()) throw CorruptSnapshot("json-syntax", path.string() + " is not valid JSON");
    return snapshot_from_json(j);
}

} // namespace kgagent
