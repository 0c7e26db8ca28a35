#pragma once

// Oracle abstraction: the four request kinds the agent sends to its
// vision-language model, their JSON wire encoding, and the closed-world
// checks every response must pass.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "envsim.hpp"
#include "errors.hpp"
#include "memory.hpp"
#include "rewards.hpp"

namespace kgagent {

inline constexpr int kOracleFormatVersion = 1;

enum class OracleKind { Invoke, Augment, Refine, Evaluate };

inline const char* to_string(OracleKind k) {
    switch (k) {
    case OracleKind::Invoke: return "invoke";
    case OracleKind::Augment: return "augment";
    case OracleKind::Refine: return "refine";
    case OracleKind::Evaluate: return "evaluate";
    }
    return "?";
}

/// What the oracle sees of a screen: the snapshot handle and its elements.
struct ObservationView {
    std::string handle;
    std::vector<UIObject> visible;
    std::int64_t step = 0;

    bool has_object(ObjectId id) const {
        return std::any_of(visible.begin(), visible.end(), [id](const UIObject& o) { return o.id == id; });
    }
};

inline ObservationView view_of(const sim::Observation& o) {
    return {o.snapshot.handle(), o.visible_elements, o.step_index};
}

struct SkillView {
    SkillId id;
    std::string name;
    std::string descriptor;
    std::vector<AtomicAction> actions;
    double fitness = 0.0;
};

inline SkillView view_of(const Skill& s) { return {s.id, s.name, s.descriptor, s.actions, s.fitness}; }

struct TrajectoryStep {
    ObjectId object_id = 0;
    bool grounded = true;
    int cells_changed = 0;
};

inline std::vector<TrajectoryStep> trajectory_of(const sim::StepOutcome& o) {
    std::vector<TrajectoryStep> t;
    for (const auto& fx : o.trajectory) t.push_back({fx.object_id, fx.grounded, fx.cells_changed});
    return t;
}

struct InvokeRequest {
    ObservationView observation;
    std::vector<SkillView> library;
    /// Skills already tried at this step; an oracle should not propose them again.
    std::vector<SkillId> attempted;
};
struct InvokeResponse {
    std::vector<SkillId> skills;
};

struct AugmentRequest {
    ObservationView observation;
    std::vector<Operate> operations;
    std::vector<UIObject> objects;
    /// Validated prefix the proposed action will be appended to.
    std::vector<AtomicAction> prefix;
    /// Objects that already start a known skill for this kind of screen.
    std::vector<ObjectId> known;
};
struct AugmentResponse {
    AtomicAction action;
    std::string descriptor;
};

struct RefineRequest {
    ObservationView observation;
    SkillView skill;
    std::vector<TrajectoryStep> trajectory;
};
struct RefineResponse {
    std::string name;
    std::string descriptor;
    std::vector<AtomicAction> actions;
};

struct EvaluateRequest {
    ObservationView before;
    ObservationView after;
    SkillView skill;
    std::vector<TrajectoryStep> trajectory;
};
struct EvaluateResponse {
    OracleScores scores;
    std::string rationale;
};

class Oracle {
public:
    virtual ~Oracle() = default;
    virtual InvokeResponse invoke(const InvokeRequest& req) = 0;
    virtual AugmentResponse augment(const AugmentRequest& req) = 0;
    virtual RefineResponse refine(const RefineRequest& req) = 0;
    virtual EvaluateResponse evaluate(const EvaluateRequest& req) = 0;
    /// Running sum of cost units over all calls.
    virtual std::uint64_t cost_total() const = 0;
};

// ---------------------------------------------------------------------------
// Closed-world contract

inline void check_response(const InvokeRequest& req, const InvokeResponse& resp) {
    std::set<SkillId> offered;
    for (const auto& s : req.library) offered.insert(s.id);
    std::set<SkillId> seen;
    for (SkillId id : resp.skills) {
        if (!offered.contains(id)) throw ProtocolError("invoke: skill " + std::to_string(id.value) + " was not offered");
        if (!seen.insert(id).second) throw ProtocolError("invoke: skill " + std::to_string(id.value) + " listed twice");
    }
}

inline void check_response(const AugmentRequest& req, const AugmentResponse& resp) {
    const auto& a = resp.action;
    if (std::none_of(req.objects.begin(), req.objects.end(), [&](const UIObject& o) { return o.id == a.object_id; }))
        throw ProtocolError("augment: object " + std::to_string(a.object_id) + " was not offered");
    if (std::find(req.operations.begin(), req.operations.end(), a.operate) == req.operations.end())
        throw ProtocolError(std::string("augment: operation ") + to_string(a.operate) + " was not offered");
}

inline void check_response(const RefineRequest& req, const RefineResponse& resp) {
    if (resp.actions.empty()) throw ProtocolError("refine: empty action sequence");
    if (resp.descriptor.empty()) throw ProtocolError("refine: empty descriptor");
    for (const auto& a : resp.actions) {
        const bool in_skill = std::any_of(req.skill.actions.begin(), req.skill.actions.end(),
                                          [&](const AtomicAction& x) { return x.object_id == a.object_id; });
        if (!in_skill && !req.observation.has_object(a.object_id))
            throw ProtocolError("refine: object " + std::to_string(a.object_id) + " is neither in the skill nor on screen");
    }
}

inline void check_response(const EvaluateRequest&, const EvaluateResponse& resp) {
    const auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
    if (!in_unit(resp.scores.progress) || !in_unit(resp.scores.semantics))
        throw ProtocolError("evaluate: scores must lie in [0, 1]");
}

// ---------------------------------------------------------------------------
// Wire encoding. Field names are the documented protocol; see README.

namespace wire {

using nlohmann::json;

inline json encode(const UIObject& o) { return {{"id", o.id}, {"name", o.name}, {"reference", o.reference_descriptor}}; }

inline json encode(const AtomicAction& a) {
    json j{{"operate", to_string(a.operate)}, {"object_id", a.object_id}, {"object_name", a.object_name}};
    if (a.payload) j["payload"] = *a.payload;
    return j;
}

inline json encode(const ObservationView& o) {
    json vis = json::array();
    for (const auto& v : o.visible) vis.push_back(encode(v));
    return {{"handle", o.handle}, {"step", o.step}, {"visible", vis}};
}

inline json encode(const SkillView& s) {
    json acts = json::array();
    for (const auto& a : s.actions) acts.push_back(encode(a));
    return {{"id", s.id.value}, {"name", s.name}, {"descriptor", s.descriptor}, {"actions", acts}, {"fitness", s.fitness}};
}

inline json encode(const std::vector<TrajectoryStep>& t) {
    json out = json::array();
    for (const auto& s : t) out.push_back({{"object_id", s.object_id}, {"grounded", s.grounded}, {"cells_changed", s.cells_changed}});
    return out;
}

inline json payload(const InvokeRequest& r) {
    json lib = json::array();
    for (const auto& s : r.library) lib.push_back(encode(s));
    json att = json::array();
    for (SkillId s : r.attempted) att.push_back(s.value);
    return {{"observation", encode(r.observation)}, {"library", lib}, {"attempted", att}};
}

inline json payload(const AugmentRequest& r) {
    json ops = json::array();
    for (Operate o : r.operations) ops.push_back(to_string(o));
    json objs = json::array();
    for (const auto& o : r.objects) objs.push_back(encode(o));
    json prefix = json::array();
    for (const auto& a : r.prefix) prefix.push_back(encode(a));
    return {{"observation", encode(r.observation)}, {"operations", ops}, {"objects", objs}, {"prefix", prefix},
            {"known", r.known}};
}

inline json payload(const RefineRequest& r) {
    return {{"observation", encode(r.observation)}, {"skill", encode(r.skill)}, {"trajectory", encode(r.trajectory)}};
}

inline json payload(const EvaluateRequest& r) {
    return {{"before", encode(r.before)}, {"after", encode(r.after)}, {"skill", encode(r.skill)},
            {"trajectory", encode(r.trajectory)}};
}

inline json envelope(OracleKind kind, json body, std::optional<std::uint64_t> cost = std::nullopt) {
    json j{{"format_version", kOracleFormatVersion}, {"kind", to_string(kind)}, {"payload", std::move(body)}};
    if (cost) j["cost_units"] = *cost;
    return j;
}

template <class Request>
json request_body(OracleKind kind, const Request& r) {
    return envelope(kind, payload(r));
}

// Decoding. Any structural problem is a protocol error.

template <class T>
T field(const json& j, const char* key, const char* what) {
    if (!j.is_object() || !j.contains(key)) throw ProtocolError(std::string(what) + ": missing field '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ProtocolError(std::string(what) + ": bad field '" + key + "': " + e.what());
    }
}

inline AtomicAction decode_action(const json& j) {
    AtomicAction a;
    try {
        a.operate = operate_from_string(field<std::string>(j, "operate", "action"));
    } catch (const ContractViolation& e) {
        throw ProtocolError(e.what());
    }
    a.object_id = field<ObjectId>(j, "object_id", "action");
    a.object_name = j.contains("object_name") ? field<std::string>(j, "object_name", "action") : std::string{};
    if (j.contains("payload") && !j.at("payload").is_null()) a.payload = field<std::string>(j, "payload", "action");
    return a;
}

inline UIObject decode_object(const json& j) {
    return {field<ObjectId>(j, "id", "object"), field<std::string>(j, "name", "object"),
            j.contains("reference") ? field<std::string>(j, "reference", "object") : std::string{}};
}

inline ObservationView decode_observation(const json& j) {
    ObservationView o;
    o.handle = field<std::string>(j, "handle", "observation");
    o.step = field<std::int64_t>(j, "step", "observation");
    for (const auto& v : field<json>(j, "visible", "observation")) o.visible.push_back(decode_object(v));
    return o;
}

inline SkillView decode_skill(const json& j) {
    SkillView s;
    s.id = SkillId{field<std::uint32_t>(j, "id", "skill")};
    s.name = field<std::string>(j, "name", "skill");
    s.descriptor = field<std::string>(j, "descriptor", "skill");
    for (const auto& a : field<json>(j, "actions", "skill")) s.actions.push_back(decode_action(a));
    s.fitness = field<double>(j, "fitness", "skill");
    return s;
}

inline std::vector<TrajectoryStep> decode_trajectory(const json& j) {
    std::vector<TrajectoryStep> t;
    if (!j.is_array()) throw ProtocolError("trajectory: not an array");
    for (const auto& s : j)
        t.push_back({field<ObjectId>(s, "object_id", "trajectory"), field<bool>(s, "grounded", "trajectory"),
                     field<int>(s, "cells_changed", "trajectory")});
    return t;
}

/// Validates the envelope and returns its payload and cost.
inline std::pair<json, std::uint64_t> open_envelope(const json& j, OracleKind kind, bool require_cost) {
    if (!j.is_object()) throw ProtocolError("response is not a JSON object");
    const int version = field<int>(j, "format_version", "envelope");
    if (version != kOracleFormatVersion)
        throw ProtocolError("unsupported oracle format_version " + std::to_string(version));
    if (field<std::string>(j, "kind", "envelope") != to_string(kind))
        throw ProtocolError(std::string("expected a '") + to_string(kind) + "' response");
    std::uint64_t cost = 0;
    if (require_cost || j.contains("cost_units")) {
        const json& c = j.contains("cost_units") ? j.at("cost_units") : json();
        if (!c.is_number_integer() || c.get<std::int64_t>() < 0)
            throw ProtocolError("cost_units must be a nonnegative integer");
        cost = c.get<std::uint64_t>();
    }
    return {field<json>(j, "payload", "envelope"), cost};
}

inline json payload(const InvokeResponse& r) {
    json ids = json::array();
    for (SkillId s : r.skills) ids.push_back(s.value);
    return {{"skills", ids}};
}
inline json payload(const AugmentResponse& r) { return {{"action", encode(r.action)}, {"descriptor", r.descriptor}}; }
inline json payload(const RefineResponse& r) {
    json acts = json::array();
    for (const auto& a : r.actions) acts.push_back(encode(a));
    return {{"name", r.name}, {"descriptor", r.descriptor}, {"actions", acts}};
}
inline json payload(const EvaluateResponse& r) {
    return {{"progress", r.scores.progress}, {"semantics", r.scores.semantics}, {"rationale", r.rationale}};
}

inline InvokeResponse decode_invoke(const json& p) {
    InvokeResponse r;
    for (const auto& id : field<json>(p, "skills", "invoke")) {
        if (!id.is_number_unsigned()) throw ProtocolError("invoke: skill ids must be nonnegative integers");
        r.skills.push_back(SkillId{id.get<std::uint32_t>()});
    }
    return r;
}
inline AugmentResponse decode_augment(const json& p) {
    return {decode_action(field<json>(p, "action", "augment")), field<std::string>(p, "descriptor", "augment")};
}
inline RefineResponse decode_refine(const json& p) {
    RefineResponse r;
    r.name = field<std::string>(p, "name", "refine");
    r.descriptor = field<std::string>(p, "descriptor", "refine");
    for (const auto& a : field<json>(p, "actions", "refine")) r.actions.push_back(decode_action(a));
    return r;
}
inline EvaluateResponse decode_evaluate(const json& p) {
    return {{field<double>(p, "progress", "evaluate"), field<double>(p, "semantics", "evaluate")},
            p.contains("rationale") ? field<std::string>(p, "rationale", "evaluate") : std::string{}};
}

// Request decoding, used by fixture servers and shims.

inline InvokeRequest decode_invoke_request(const json& p) {
    InvokeRequest r;
    r.observation = decode_observation(field<json>(p, "observation", "invoke"));
    for (const auto& s : field<json>(p, "library", "invoke")) r.library.push_back(decode_skill(s));
    for (const auto& s : field<json>(p, "attempted", "invoke")) r.attempted.push_back(SkillId{s.get<std::uint32_t>()});
    return r;
}
inline AugmentRequest decode_augment_request(const json& p) {
    AugmentRequest r;
    r.observation = decode_observation(field<json>(p, "observation", "augment"));
    for (const auto& o : field<json>(p, "operations", "augment")) {
        try {
            r.operations.push_back(operate_from_string(o.get<std::string>()));
        } catch (const std::exception& e) {
            throw ProtocolError(e.what());
        }
    }
    for (const auto& o : field<json>(p, "objects", "augment")) r.objects.push_back(decode_object(o));
    for (const auto& a : field<json>(p, "prefix", "augment")) r.prefix.push_back(decode_action(a));
    r.known = field<std::vector<ObjectId>>(p, "known", "augment");
    return r;
}
inline RefineRequest decode_refine_request(const json& p) {
    return {decode_observation(field<json>(p, "observation", "refine")), decode_skill(field<json>(p, "skill", "refine")),
            decode_trajectory(field<json>(p, "trajectory", "refine"))};
}
inline EvaluateRequest decode_evaluate_request(const json& p) {
    return {decode_observation(field<json>(p, "before", "evaluate")), decode_observation(field<json>(p, "after", "evaluate")),
            decode_skill(field<json>(p, "skill", "evaluate")), decode_trajectory(field<json>(p, "trajectory", "evaluate"))};
}

} // namespace wire

/// Parses a snapshot handle produced by the simulator.
inline std::optional<sim::ScreenSnapshot> parse_handle(const std::string& h) {
    sim::ScreenSnapshot s;
    unsigned long long serial = 0;
    if (std::sscanf(h.c_str(), "screen:%d/skin:%d/progress:%d/obs:%llu", &s.screen, &s.skin, &s.progress, &serial) != 4)
        return std::nullopt;
    s.serial = serial;
    return s;
}

} // namespace kgagent
