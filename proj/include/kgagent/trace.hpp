#pragma once

// Episode trace: one record per oracle invocation or skill execution, written
// as line-delimited JSON behind a versioned header line.

#include <algorithm>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "ids.hpp"
#include "memory.hpp"
#include "rewards.hpp"

namespace kgagent {

inline constexpr int kTraceFormatVersion = 1;

enum class Stage { KgSample, UctFallback, Augment, Refine };

inline const char* to_string(Stage s) {
    switch (s) {
    case Stage::KgSample: return "kg-sample";
    case Stage::UctFallback: return "uct-fallback";
    case Stage::Augment: return "augment";
    case Stage::Refine: return "refine";
    }
    return "?";
}

inline Stage stage_from_string(const std::string& s) {
    if (s == "kg-sample") return Stage::KgSample;
    if (s == "uct-fallback") return Stage::UctFallback;
    if (s == "augment") return Stage::Augment;
    if (s == "refine") return Stage::Refine;
    throw ProtocolError("unknown trace stage '" + s + "'");
}

/// `Execute` records change the world; `Invoke` records the oracle's
/// candidate set; `Trial` records a sandboxed refinement test.
enum class RecordKind { Execute, Invoke, Trial };

inline const char* to_string(RecordKind k) {
    switch (k) {
    case RecordKind::Execute: return "execute";
    case RecordKind::Invoke: return "invoke";
    case RecordKind::Trial: return "trial";
    }
    return "?";
}

inline RecordKind record_kind_from_string(const std::string& s) {
    if (s == "execute") return RecordKind::Execute;
    if (s == "invoke") return RecordKind::Invoke;
    if (s == "trial") return RecordKind::Trial;
    throw ProtocolError("unknown trace record kind '" + s + "'");
}

struct TraceRecord {
    std::int64_t step = 0;
    int attempt = 0;  // 1-based within the stage
    RecordKind kind = RecordKind::Execute;
    Stage stage = Stage::KgSample;
    NodeId node;
    std::optional<SkillId> skill;
    std::vector<AtomicAction> actions;

    // Execution outcome
    NodeId next_node;
    bool new_node = false;
    bool latent_changed = false;
    double delta = 0.0;
    bool grounding_failed = false;
    std::optional<int> milestone;
    int screen_before = 0;
    int screen_after = 0;
    RewardBreakdown reward;
    bool success = false;
    bool edge_recorded = false;

    // Selection detail
    std::vector<SkillId> candidates;
    std::vector<double> probabilities;

    // Library changes caused by this record
    std::optional<SkillId> skill_added;
    std::vector<SkillId> skills_pruned;
    std::optional<SkillId> replaced_by;
};

struct EpisodeSummary {
    int progression = 0;
    std::uint64_t executions = 0;
    std::uint64_t responsive = 0;
    std::uint64_t oracle_cost = 0;
    std::uint64_t skills_augmented = 0;
    std::uint64_t skills_pruned = 0;
    std::int64_t steps = 0;
    bool completed = false;

    /// Executions that changed the latent screen; 1.0 by convention when nothing ran.
    double responsive_rate() const {
        return executions == 0 ? 1.0 : static_cast<double>(responsive) / static_cast<double>(executions);
    }
};

struct EpisodeTrace {
    std::vector<TraceRecord> records;
    EpisodeSummary summary;
};

/// Metrics recomputed from records alone.
inline EpisodeSummary metrics(const std::vector<TraceRecord>& records, std::uint64_t oracle_cost = 0) {
    EpisodeSummary m;
    std::vector<int> seen;
    for (const auto& r : records) {
        m.steps = std::max(m.steps, r.step + 1);
        if (r.kind != RecordKind::Execute) continue;
        ++m.executions;
        if (r.latent_changed) ++m.responsive;
        if (r.milestone && std::find(seen.begin(), seen.end(), *r.milestone) == seen.end()) seen.push_back(*r.milestone);
        if (r.skill_added) ++m.skills_augmented;
        m.skills_pruned += r.skills_pruned.size();
    }
    m.progression = static_cast<int>(seen.size());
    m.oracle_cost = oracle_cost;
    return m;
}

namespace trace_json {

using nlohmann::json;

inline json ids(const std::vector<SkillId>& v) {
    json a = json::array();
    for (SkillId s : v) a.push_back(s.value);
    return a;
}

inline json to_json(const TraceRecord& r) {
    json acts = json::array();
    for (const auto& a : r.actions) {
        json j{{"operate", to_string(a.operate)}, {"object_id", a.object_id}, {"object_name", a.object_name}};
        if (a.payload) j["payload"] = *a.payload;
        acts.push_back(j);
    }
    json j{{"step", r.step},
           {"attempt", r.attempt},
           {"kind", to_string(r.kind)},
           {"stage", to_string(r.stage)},
           {"node", r.node.value},
           {"skill", r.skill ? json(r.skill->value) : json()},
           {"actions", acts}};
    if (r.kind != RecordKind::Invoke) {
        j["next_node"] = r.next_node.value;
        j["new_node"] = r.new_node;
        j["latent_changed"] = r.latent_changed;
        j["delta"] = r.delta;
        j["grounding_failed"] = r.grounding_failed;
        j["milestone"] = r.milestone ? json(*r.milestone) : json();
        j["screen_before"] = r.screen_before;
        j["screen_after"] = r.screen_after;
        j["reward"] = {{"progress", r.reward.progress}, {"semantics", r.reward.semantics}, {"state", r.reward.state},
                       {"novel", r.reward.novel},       {"total", r.reward.total}};
        j["success"] = r.success;
        j["edge_recorded"] = r.edge_recorded;
    }
    if (!r.candidates.empty() || r.kind == RecordKind::Invoke) j["candidates"] = ids(r.candidates);
    if (!r.probabilities.empty()) j["probabilities"] = r.probabilities;
    if (r.skill_added) j["skill_added"] = r.skill_added->value;
    if (!r.skills_pruned.empty()) j["skills_pruned"] = ids(r.skills_pruned);
    if (r.replaced_by) j["replaced_by"] = r.replaced_by->value;
    return j;
}

inline TraceRecord from_json(const json& j) {
    try {
        TraceRecord r;
        r.step = j.at("step").get<std::int64_t>();
        r.attempt = j.at("attempt").get<int>();
        r.kind = record_kind_from_string(j.at("kind").get<std::string>());
        r.stage = stage_from_string(j.at("stage").get<std::string>());
        r.node = NodeId{j.at("node").get<std::uint32_t>()};
        if (!j.at("skill").is_null()) r.skill = SkillId{j.at("skill").get<std::uint32_t>()};
        for (const auto& a : j.at("actions")) {
            AtomicAction act;
            act.operate = operate_from_string(a.at("operate").get<std::string>());
            act.object_id = a.at("object_id").get<ObjectId>();
            act.object_name = a.value("object_name", std::string{});
            if (a.contains("payload")) act.payload = a.at("payload").get<std::string>();
            r.actions.push_back(act);
        }
        if (r.kind != RecordKind::Invoke) {
            r.next_node = NodeId{j.at("next_node").get<std::uint32_t>()};
            r.new_node = j.at("new_node").get<bool>();
            r.latent_changed = j.at("latent_changed").get<bool>();
            r.delta = j.at("delta").get<double>();
            r.grounding_failed = j.at("grounding_failed").get<bool>();
            if (!j.at("milestone").is_null()) r.milestone = j.at("milestone").get<int>();
            r.screen_before = j.at("screen_before").get<int>();
            r.screen_after = j.at("screen_after").get<int>();
            const auto& w = j.at("reward");
            r.reward = {w.at("progress").get<double>(), w.at("semantics").get<double>(), w.at("state").get<double>(),
                        w.at("novel").get<double>(), w.at("total").get<double>()};
            r.success = j.at("success").get<bool>();
            r.edge_recorded = j.at("edge_recorded").get<bool>();
        }
        if (j.contains("candidates"))
            for (const auto& c : j.at("candidates")) r.candidates.push_back(SkillId{c.get<std::uint32_t>()});
        if (j.contains("probabilities")) r.probabilities = j.at("probabilities").get<std::vector<double>>();
        if (j.contains("skill_added")) r.skill_added = SkillId{j.at("skill_added").get<std::uint32_t>()};
        if (j.contains("skills_pruned"))
            for (const auto& c : j.at("skills_pruned")) r.skills_pruned.push_back(SkillId{c.get<std::uint32_t>()});
        if (j.contains("replaced_by")) r.replaced_by = SkillId{j.at("replaced_by").get<std::uint32_t>()};
        return r;
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("malformed trace record: ") + e.what());
    } catch (const ContractViolation& e) {
        throw ProtocolError(std::string("malformed trace record: ") + e.what());
    }
}

} // namespace trace_json

/// Writes the header line followed by one line per record.
inline void write_trace(std::ostream& os, const EpisodeTrace& t, const nlohmann::json& meta = nlohmann::json::object()) {
    nlohmann::json header{{"type", "kgagent-trace"}, {"format_version", kTraceFormatVersion}, {"meta", meta}};
    os << header.dump() << '\n';
    for (const auto& r : t.records) os << trace_json::to_json(r).dump() << '\n';
}

struct LoadedTrace {
    nlohmann::json meta;
    std::vector<TraceRecord> records;
};

inline LoadedTrace read_trace(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw ProtocolError("trace is empty: missing header line");
    nlohmann::json header = nlohmann::json::parse(line, nullptr, false);
    if (header.is_discarded() || !header.is_object() || header.value("type", "") != "kgagent-trace")
        throw ProtocolError("not a trace file: bad header line");
    const int version = header.value("format_version", -1);
    if (version != kTraceFormatVersion)
        throw VersionMismatch("trace format_version " + std::to_string(version) + " is not supported (expected " +
                              std::to_string(kTraceFormatVersion) + ")");
    LoadedTrace out;
    out.meta = header.value("meta", nlohmann::json::object());
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) throw ProtocolError("trace line is not valid JSON");
        out.records.push_back(trace_json::from_json(j));
    }
    return out;
}

} // namespace kgagent
