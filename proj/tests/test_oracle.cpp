#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "kgagent/scripted_oracle.hpp"

using namespace kgagent;
using namespace fixtures;

namespace {

AtomicAction act(ObjectId id, const std::string& name = "") { return {Operate::Click, id, name, std::nullopt}; }

SkillView skill(std::uint32_t id, std::vector<AtomicAction> actions) {
    return {SkillId{id}, "s" + std::to_string(id), "", std::move(actions), 0.0};
}

struct Env {
    sim::World world{tiny_world()};
    sim::WorldState state = world.initial_state(1);
    ObservationView home() { return view_of(world.observe(state)); }
};

} // namespace

TEST(ScriptedInvoke, VisibleRuleReturnsExactlyOnScreenSkills) {
    Env env;
    ScriptedOracle o(Persona::Perfect, &env.world, 1, {}, InvokeRule::Visible);
    InvokeRequest req{env.home(), {skill(0, {act(kPlay)}), skill(1, {act(kFire)}), skill(2, {act(kGlow)}), skill(3, {act(kBack)})}, {}};
    auto r = o.invoke(req);
    EXPECT_EQ(r.skills, (std::vector<SkillId>{SkillId{0}, SkillId{2}}));
    req.attempted = {SkillId{0}};
    EXPECT_EQ(o.invoke(req).skills, (std::vector<SkillId>{SkillId{2}}));
}

TEST(ScriptedInvoke, HelpfulRuleKeepsOnlyProgressingSkills) {
    Env env;
    ScriptedOracle o(Persona::Perfect, &env.world, 1);
    InvokeRequest req{env.home(), {skill(0, {act(kPlay)}), skill(1, {act(kSettings)}), skill(2, {act(kGlow)})}, {}};
    EXPECT_EQ(o.invoke(req).skills, (std::vector<SkillId>{SkillId{0}}));
}

TEST(ScriptedInvoke, EmptyLibraryGivesEmptySet) {
    Env env;
    ScriptedOracle o(Persona::Perfect, &env.world, 1);
    EXPECT_TRUE(o.invoke({env.home(), {}, {}}).skills.empty());
}

TEST(ScriptedAugment, SingleButtonIsClicked) {
    Env env;
    ScriptedOracle o(Persona::Perfect, &env.world, 1);
    AugmentRequest req{env.home(), {Operate::Click}, {{kGlow, "Glow", ""}}, {}, {}};
    auto r = o.augment(req);
    EXPECT_EQ(r.action.object_id, kGlow);
    EXPECT_EQ(r.action.operate, Operate::Click);
    EXPECT_THROW(o.augment({env.home(), {Operate::Click}, {}, {}, {}}), ContractViolation);
}

TEST(ScriptedAugment, PrefersScreenChangingUntriedObjects) {
    Env env;
    ScriptedOracle o(Persona::Perfect, &env.world, 1);
    AugmentRequest req{env.home(), {Operate::Click}, env.home().visible, {}, {}};
    auto first = o.augment(req);
    EXPECT_TRUE(first.action.object_id == kPlay || first.action.object_id == kSettings);
    req.known = {kPlay, kSettings};
    // Tier still dominates: a known screen changer beats an untried cosmetic button.
    auto second = o.augment(req);
    EXPECT_TRUE(second.action.object_id == kPlay || second.action.object_id == kSettings);
    EXPECT_EQ(o.augment(req).action.object_id, second.action.object_id);
}

TEST(ScriptedRefine, DropsInertActions) {
    Env env;
    ScriptedOracle o(Persona::Perfect, &env.world, 1);
    RefineRequest req{env.home(), skill(0, {act(kNoop), act(kPlay)}), {{kNoop, true, 0}, {kPlay, true, 120}}};
    auto r = o.refine(req);
    ASSERT_EQ(r.actions.size(), 1u);
    EXPECT_EQ(r.actions[0].object_id, kPlay);
    EXPECT_FALSE(r.descriptor.empty());
    RefineRequest single{env.home(), skill(1, {act(kGlow)}), {{kGlow, true, 0}}};
    auto s = o.refine(single);
    EXPECT_EQ(s.actions.size(), 1u);
    EXPECT_EQ(s.actions[0].object_id, kGlow);
    EXPECT_FALSE(s.descriptor.empty());
}

TEST(ScriptedEvaluate, GroundTruthScores) {
    Env env;
    ScriptedOracle o(Persona::Perfect, &env.world, 1);
    const auto before = env.home();
    auto out = env.world.execute(env.state, {act(kPlay)});
    auto r = o.evaluate({before, view_of(out.next_observation), skill(0, {act(kPlay)}), trajectory_of(out)});
    EXPECT_EQ(r.scores, (OracleScores{1.0, 1.0}));
    const auto here = view_of(out.next_observation);
    auto noop = o.evaluate({here, here, skill(1, {act(kQuit)}), {}});
    EXPECT_EQ(noop.scores, (OracleScores{0.0, 0.0}));
}

TEST(ScriptedOracle, CostCountsCalls) {
    Env env;
    ScriptedOracle o(Persona::Noisy, &env.world, 1);
    EXPECT_EQ(o.cost_total(), 0u);
    const auto h = env.home();
    for (int i = 0; i < 3; ++i) o.invoke({h, {}, {}});
    for (int i = 0; i < 2; ++i) o.augment({h, {Operate::Click}, h.visible, {}, {}});
    o.refine({h, skill(0, {act(kPlay)}), {}});
    o.evaluate({h, h, skill(0, {act(kPlay)}), {}});
    EXPECT_EQ(o.cost_total(), 7u);
}

TEST(ScriptedOracle, PureFunctionOfRequestAndSeed) {
    Env env;
    const auto h = env.home();
    ScriptedOracle a(Persona::Adversarial, nullptr, 3), b(Persona::Adversarial, nullptr, 3);
    AugmentRequest req{h, {Operate::Click, Operate::Scroll}, h.visible, {}, {}};
    for (int i = 0; i < 5; ++i) {
        EXPECT_EQ(a.augment(req).action, b.augment(req).action);
        EXPECT_EQ(a.augment(req).action, a.augment(req).action);
    }
    EXPECT_THROW(ScriptedOracle(Persona::Perfect, nullptr, 1), ContractViolation);
}

TEST(ScriptedOracleProperty, AdversarialStaysInClosedWorld) {
    Env env;
    const auto h = env.home();
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        ScriptedOracle o(Persona::Adversarial, nullptr, seed);
        InvokeRequest inv{h, {skill(0, {act(kPlay)}), skill(4, {act(kFire)}), skill(9, {act(kGlow)})}, {}};
        EXPECT_NO_THROW(check_response(inv, o.invoke(inv)));
        AugmentRequest aug{h, {Operate::Click, Operate::Type}, h.visible, {}, {}};
        EXPECT_NO_THROW(check_response(aug, o.augment(aug)));
        RefineRequest ref{h, skill(0, {act(kPlay), act(kGlow), act(kNoop)}), {}};
        EXPECT_NO_THROW(check_response(ref, o.refine(ref)));
        EvaluateRequest ev{h, h, skill(0, {act(kPlay)}), {}};
        EXPECT_NO_THROW(check_response(ev, o.evaluate(ev)));
    }
}

TEST(ScriptedOracleProperty, NoisyScoresStayInUnitInterval) {
    Env env;
    ScriptedOracle o(Persona::Noisy, &env.world, 4);
    for (int i = 0; i < 300; ++i) {
        auto s = env.world.initial_state(static_cast<std::uint64_t>(i));
        const auto before = view_of(env.world.observe(s));
        auto out = env.world.execute(s, {act(i % 2 ? kPlay : kGlow)});
        auto r = o.evaluate({before, view_of(out.next_observation), skill(0, {act(kPlay)}), trajectory_of(out)});
        EXPECT_GE(r.scores.progress, 0.0);
        EXPECT_LE(r.scores.progress, 1.0);
        EXPECT_GE(r.scores.semantics, 0.0);
        EXPECT_LE(r.scores.semantics, 1.0);
    }
}

TEST(ClosedWorld, ViolationsAreProtocolErrors) {
    Env env;
    const auto h = env.home();
    InvokeRequest inv{h, {skill(0, {act(kPlay)})}, {}};
    EXPECT_THROW(check_response(inv, InvokeResponse{{SkillId{5}}}), ProtocolError);
    EXPECT_THROW(check_response(inv, InvokeResponse{{SkillId{0}, SkillId{0}}}), ProtocolError);
    AugmentRequest aug{h, {Operate::Click}, {{11, "a", ""}, {24, "b", ""}}, {}, {}};
    EXPECT_NO_THROW(check_response(aug, AugmentResponse{act(24), "x"}));
    EXPECT_THROW(check_response(aug, AugmentResponse{act(25), "x"}), ProtocolError);
    EXPECT_THROW(check_response(aug, AugmentResponse{{Operate::Drag, 11, "", {}}, "x"}), ProtocolError);
    EvaluateRequest ev{h, h, skill(0, {act(kPlay)}), {}};
    EXPECT_THROW(check_response(ev, EvaluateResponse{{1.2, 0.0}, ""}), ProtocolError);
    RefineRequest ref{h, skill(0, {act(kPlay)}), {}};
    EXPECT_THROW(check_response(ref, RefineResponse{"n", "", {act(kPlay)}}), ProtocolError);
    EXPECT_THROW(check_response(ref, RefineResponse{"n", "d", {}}), ProtocolError);
    EXPECT_THROW(check_response(ref, RefineResponse{"n", "d", {act(kFire)}}), ProtocolError);
}

TEST(Wire, RequestsRoundTrip) {
    Env env;
    const auto h = env.home();
    InvokeRequest inv{h, {skill(2, {act(kPlay, "Play"), {Operate::Type, kGlow, "Glow", std::string("abc")}})}, {SkillId{2}}};
    auto inv2 = wire::decode_invoke_request(wire::payload(inv));
    EXPECT_EQ(wire::payload(inv2), wire::payload(inv));
    AugmentRequest aug{h, {Operate::Click, Operate::Drag}, h.visible, {act(kPlay)}, {kGlow}};
    EXPECT_EQ(wire::payload(wire::decode_augment_request(wire::payload(aug))), wire::payload(aug));
    RefineRequest ref{h, skill(1, {act(kPlay)}), {{kPlay, true, 40}}};
    EXPECT_EQ(wire::payload(wire::decode_refine_request(wire::payload(ref))), wire::payload(ref));
    EvaluateRequest ev{h, h, skill(1, {act(kPlay)}), {{kPlay, false, 0}}};
    EXPECT_EQ(wire::payload(wire::decode_evaluate_request(wire::payload(ev))), wire::payload(ev));
}

TEST(Wire, EnvelopeChecks) {
    auto env = wire::envelope(OracleKind::Evaluate, wire::payload(EvaluateResponse{{0.5, 0.25}, "ok"}), 3);
    auto [p, cost] = wire::open_envelope(env, OracleKind::Evaluate, true);
    EXPECT_EQ(cost, 3u);
    EXPECT_EQ(wire::decode_evaluate(p).scores, (OracleScores{0.5, 0.25}));
    EXPECT_THROW(wire::open_envelope(env, OracleKind::Invoke, true), ProtocolError);
    auto bad = env;
    bad["format_version"] = 2;
    EXPECT_THROW(wire::open_envelope(bad, OracleKind::Evaluate, true), ProtocolError);
    bad = env;
    bad["cost_units"] = -1;
    EXPECT_THROW(wire::open_envelope(bad, OracleKind::Evaluate, true), ProtocolError);
    bad = env;
    bad.erase("cost_units");
    EXPECT_THROW(wire::open_envelope(bad, OracleKind::Evaluate, true), ProtocolError);
    EXPECT_THROW(wire::decode_invoke(nlohmann::json{{"skills", {-1}}}), ProtocolError);
    EXPECT_THROW(wire::decode_augment(nlohmann::json{{"action", {{"operate", "Punch"}, {"object_id", 1}}}, {"descriptor", ""}}),
                 ProtocolError);
}

TEST(Handles, ParseRoundTrip) {
    sim::ScreenSnapshot s{3, 1, 0, 2, 77};
    auto p = parse_handle(s.handle());
    ASSERT_TRUE(p);
    EXPECT_EQ(p->screen, 3);
    EXPECT_EQ(p->skin, 1);
    EXPECT_EQ(p->progress, 2);
    EXPECT_EQ(p->serial, 77u);
    EXPECT_FALSE(parse_handle("garbage"));
}
