#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "interceptor/autonomous.hpp"

using namespace interceptor;

namespace {

constexpr double kPi = std::numbers::pi;

const ControlGains kGains{};

Observation obs(Tick tick = 0) { return Observation{tick, PursuerState{{0, 0, 10}, 0, 0, 0}}; }

template <typename A>
std::vector<const A*> find_actions(const TransitionResult& r) {
  std::vector<const A*> out;
  for (const auto& a : r.actions)
    if (auto* p = std::get_if<A>(&a)) out.push_back(p);
  return out;
}

MissionContext searching(std::string target = "T1", bool signalled = true) {
  MissionContext ctx;
  ctx.current_target = std::move(target);
  ctx.target_position = Vec3{60, 10, 12};
  ctx.remaining_targets = 1;
  ctx.signal_sent_for_current = signalled;
  return ctx;
}

}  // namespace

TEST(Transitions, AllowedSet) {
  using enum FsmState;
  EXPECT_TRUE(is_allowed_transition(Boot, Search));
  EXPECT_TRUE(is_allowed_transition(Search, Lock));
  EXPECT_TRUE(is_allowed_transition(Lock, Search));
  EXPECT_TRUE(is_allowed_transition(Search, Landing));
  EXPECT_TRUE(is_allowed_transition(Landing, Landed));
  EXPECT_FALSE(is_allowed_transition(Boot, Lock));
  EXPECT_FALSE(is_allowed_transition(Lock, Landing));
  EXPECT_FALSE(is_allowed_transition(Landed, Search));
}

TEST(HandleEvent, BootRequestsTarget) {
  auto r = handle_event(FsmState::Boot, {}, events::BootComplete{}, kGains, obs());
  EXPECT_EQ(r.state, FsmState::Search);
  EXPECT_EQ(find_actions<actions::RequestTarget>(r).size(), 1u);
}

TEST(HandleEvent, TelemetryResponseStoresTargetAndSteers) {
  auto r = handle_event(FsmState::Search, {}, events::TelemetryResponse{"T1", {100, 0, 10}, 1}, kGains, obs());
  EXPECT_EQ(r.state, FsmState::Search);
  EXPECT_EQ(r.ctx.current_target, "T1");
  auto g = find_actions<actions::SetGuidance>(r);
  ASSERT_EQ(g.size(), 1u);
  EXPECT_EQ(g[0]->command.speed, kGains.v_cruise);
}

TEST(HandleEvent, DistanceBelowThresholdSignalsOnce) {
  auto r = handle_event(FsmState::Search, searching("T1", false), events::DistanceBelowThreshold{}, kGains, obs());
  auto pubs = find_actions<actions::Publish>(r);
  ASSERT_EQ(pubs.size(), 1u);
  EXPECT_EQ(pubs[0]->topic, "/signal/process_image");
  auto again = handle_event(r.state, r.ctx, events::DistanceBelowThreshold{}, kGains, obs());
  EXPECT_TRUE(find_actions<actions::Publish>(again).empty());
}

TEST(HandleEvent, CameraOffsetEntersLock) {
  MissionContext ctx = searching();
  ctx.lock_timer = 3.0;
  auto r = handle_event(FsmState::Search, ctx, events::CameraOffset{{0.2, -0.1, 40}}, kGains, obs(41));
  EXPECT_EQ(r.state, FsmState::Lock);
  EXPECT_EQ(r.ctx.lock_timer, 0.0);
  EXPECT_EQ(r.ctx.last_camera_tick, 40);
  EXPECT_EQ(r.ctx.lock_start_tick, 40);
}

TEST(HandleEvent, CameraOffsetBeforeSignalIgnored) {
  auto r = handle_event(FsmState::Search, searching("T1", false), events::CameraOffset{{0.2, -0.1, 40}}, kGains,
                        obs(41));
  EXPECT_EQ(r.state, FsmState::Search);
  EXPECT_TRUE(r.actions.empty());
}

TEST(HandleEvent, LockCameraOffsetUpdatesTick) {
  MissionContext ctx = searching();
  ctx.last_camera_tick = 40;
  ctx.lock_start_tick = 40;
  auto r = handle_event(FsmState::Lock, ctx, events::CameraOffset{{0.0, 0.0, 42}}, kGains, obs(43));
  EXPECT_EQ(r.state, FsmState::Lock);
  EXPECT_EQ(r.ctx.last_camera_tick, 42);
  EXPECT_EQ(r.ctx.lock_start_tick, 40);
}

TEST(HandleEvent, CameraStaleReturnsToSearch) {
  MissionContext ctx = searching();
  ctx.lock_timer = 4.0;
  auto r = handle_event(FsmState::Lock, ctx, events::CameraStale{}, kGains, obs());
  EXPECT_EQ(r.state, FsmState::Search);
  EXPECT_EQ(r.ctx.lock_timer, 0.0);
}

TEST(HandleEvent, LockElapsedWithAnotherTargetRequestsNext) {
  MissionContext ctx = searching();
  ctx.remaining_targets = 2;
  ctx.lock_start_tick = 100;
  auto r = handle_event(FsmState::Lock, ctx, events::LockTimerElapsed{}, kGains, obs(300));
  EXPECT_EQ(r.state, FsmState::Search);
  auto pubs = find_actions<actions::Publish>(r);
  ASSERT_EQ(pubs.size(), 1u);
  EXPECT_EQ(pubs[0]->topic, "/lock");
  const auto report = decode_payload<LockReport>(pubs[0]->payload);
  EXPECT_EQ(report.target_id, "T1");
  EXPECT_EQ(report.lock_start_tick, 100);
  EXPECT_EQ(report.lock_end_tick, 300);
  EXPECT_EQ(find_actions<actions::RequestTarget>(r).size(), 1u);
  EXPECT_TRUE(find_actions<actions::Raise>(r).empty());
  // Publish /lock comes before the request for the next target.
  EXPECT_TRUE(std::holds_alternative<actions::Publish>(r.actions.front()));
  EXPECT_EQ(r.ctx.completed_targets, std::vector<std::string>{"T1"});
  EXPECT_FALSE(r.ctx.current_target);
}

TEST(HandleEvent, LockElapsedOnLastTargetRaisesNoMoreTargets) {
  auto r = handle_event(FsmState::Lock, searching(), events::LockTimerElapsed{}, kGains, obs(300));
  auto raises = find_actions<actions::Raise>(r);
  ASSERT_EQ(raises.size(), 1u);
  EXPECT_TRUE(std::holds_alternative<events::NoMoreTargets>(raises[0]->event));
}

TEST(HandleEvent, NoMoreTargetsLands) {
  auto r = handle_event(FsmState::Search, {}, events::NoMoreTargets{}, kGains, obs());
  EXPECT_EQ(r.state, FsmState::Landing);
  auto pubs = find_actions<actions::Publish>(r);
  ASSERT_EQ(pubs.size(), 1u);
  EXPECT_EQ(pubs[0]->topic, "/land");
}

TEST(HandleEvent, TouchdownLands) {
  EXPECT_EQ(handle_event(FsmState::Landing, {}, events::TouchedDown{}, kGains, obs()).state, FsmState::Landed);
}

TEST(HandleEvent, IllegalEventsRejected) {
  EXPECT_THROW(handle_event(FsmState::Search, searching(), events::LockTimerElapsed{}, kGains, obs()),
               StateMachineViolation);
  EXPECT_THROW(handle_event(FsmState::Boot, {}, events::CameraStale{}, kGains, obs()), StateMachineViolation);
  EXPECT_THROW(handle_event(FsmState::Lock, searching(), events::NoMoreTargets{}, kGains, obs()),
               StateMachineViolation);
  EXPECT_THROW(handle_event(FsmState::Landed, {}, events::BootComplete{}, kGains, obs()), StateMachineViolation);
  EXPECT_THROW(handle_event(FsmState::Search, {}, events::BootComplete{}, kGains, obs()), StateMachineViolation);
}

TEST(HandleEvent, ResponseForCompletedTargetIgnored) {
  MissionContext ctx;
  ctx.completed_targets = {"T1"};
  auto r = handle_event(FsmState::Search, ctx, events::TelemetryResponse{"T1", {1, 1, 1}, 1}, kGains, obs());
  EXPECT_FALSE(r.ctx.current_target);
  EXPECT_TRUE(r.actions.empty());
}

TEST(HandleEventProperty, PureAndLockOnlyViaCamera) {
  std::mt19937_64 rng(2024);
  const std::vector<Event> pool{events::TelemetryResponse{"T1", {50, 0, 10}, 2},
                                events::TelemetryResponse{"T2", {0, 50, 10}, 1},
                                events::DistanceBelowThreshold{},
                                events::CameraOffset{{0.1, 0.1, 10}},
                                events::CameraStale{},
                                events::LockTimerElapsed{},
                                events::NoMoreTargets{}};
  for (int trial = 0; trial < 200; ++trial) {
    FsmState state = FsmState::Boot;
    MissionContext ctx;
    auto first = handle_event(state, ctx, events::BootComplete{}, kGains, obs());
    state = first.state;
    ctx = first.ctx;
    for (int i = 0; i < 30 && state != FsmState::Landing; ++i) {
      const Event& e = pool[rng() % pool.size()];
      try {
        auto a = handle_event(state, ctx, e, kGains, obs(i));
        auto b = handle_event(state, ctx, e, kGains, obs(i));
        EXPECT_EQ(a.state, b.state);
        EXPECT_EQ(a.ctx, b.ctx);
        EXPECT_EQ(a.actions.size(), b.actions.size());
        if (a.state != state) {
          EXPECT_TRUE(is_allowed_transition(state, a.state));
        }
        if (a.state == FsmState::Lock && state != FsmState::Lock) {
          EXPECT_TRUE(std::holds_alternative<events::CameraOffset>(e));
        }
        state = a.state;
        ctx = a.ctx;
      } catch (const StateMachineViolation&) {
      }
    }
  }
}

TEST(SearchGuidance, AlignedTarget) {
  auto g = search_guidance({{0, 0, 10}, 0, 0, 0}, {100, 0, 10}, kGains);
  EXPECT_NEAR(g.yaw_rate, 0, 1e-12);
  EXPECT_NEAR(g.pitch_rate, 0, 1e-12);
  EXPECT_EQ(g.speed, 8.0);
}

TEST(SearchGuidance, TargetNinetyDegreesLeft) {
  auto g = search_guidance({{0, 0, 10}, 0, 0, 0}, {0, 100, 10}, kGains);
  EXPECT_NEAR(g.yaw_rate, 0.8 * (kPi / 2), 1e-12);
  EXPECT_GT(g.yaw_rate, 0);
}

TEST(SearchGuidance, CoincidentIsZeroRate) {
  auto g = search_guidance({{5, 5, 5}, 1, 0.2, 0}, {5, 5, 5}, kGains);
  EXPECT_EQ(g.yaw_rate, 0);
  EXPECT_EQ(g.pitch_rate, 0);
  EXPECT_EQ(g.speed, kGains.v_cruise);
}

TEST(SearchGuidance, TakesShortWayRound) {
  // Heading just left of -x, target just right of -x: error crosses the +-pi seam.
  auto g = search_guidance({{0, 0, 10}, kPi - 0.1, 0, 0}, {-100, -10, 10}, kGains);
  EXPECT_GT(g.yaw_rate, 0);
  EXPECT_LT(std::abs(g.yaw_rate), 0.8 * 0.5);
}

TEST(LockGuidance, Centered) {
  auto g = lock_guidance({0, 0, 0}, kGains);
  EXPECT_EQ(g.yaw_rate, 0);
  EXPECT_EQ(g.pitch_rate, 0);
  EXPECT_EQ(g.speed, kGains.v_lock);
}

TEST(LockGuidance, HalfRightTurnsRightAtPointFour) {
  auto g = lock_guidance({0.5, 0, 0}, kGains);
  EXPECT_NEAR(std::abs(g.yaw_rate), 0.8 * 0.5, 1e-12);
  // Positive x is to the right; yaw is counterclockwise-positive, so the turn is negative.
  EXPECT_NEAR(g.yaw_rate, -0.4, 1e-12);
}

TEST(LockGuidance, TurnsTowardTarget) {
  // After applying the command the target moves toward the image center.
  PursuerState p{{0, 0, 10}, 0, 0, 0};
  const Vec3 target{20, -6, 11};
  auto before = project_to_camera(p, target, CameraParams{});
  ASSERT_TRUE(before);
  auto g = lock_guidance({before->u, before->v, 0}, kGains);
  p.yaw += g.yaw_rate * 0.05;
  p.pitch += g.pitch_rate * 0.05;
  auto after = project_to_camera(p, target, CameraParams{});
  ASSERT_TRUE(after);
  EXPECT_LT(std::abs(after->u), std::abs(before->u));
  EXPECT_LT(std::abs(after->v), std::abs(before->v));
}

TEST(LockGuidance, RejectsOutOfRangeOffset) {
  EXPECT_THROW(lock_guidance({1.2, 0, 0}, kGains), ValidationError);
  EXPECT_THROW(lock_guidance({0, -1.01, 0}, kGains), ValidationError);
}

TEST(LockTimer, ReachesBoundary) {
  MissionContext ctx;
  ctx.lock_timer = 9.95;
  auto [next, achieved] = lock_timer_update(ctx, true, 0.05, kGains);
  EXPECT_NEAR(next.lock_timer, 10.0, 1e-9);
  EXPECT_TRUE(achieved);
}

TEST(LockTimer, ResetsWhenNotContained) {
  MissionContext ctx;
  ctx.lock_timer = 4.0;
  auto [next, achieved] = lock_timer_update(ctx, false, 0.05, kGains);
  EXPECT_EQ(next.lock_timer, 0.0);
  EXPECT_FALSE(achieved);
}

TEST(LockTimer, StartsAccumulating) {
  auto [next, achieved] = lock_timer_update({}, true, 0.05, kGains);
  EXPECT_DOUBLE_EQ(next.lock_timer, 0.05);
  EXPECT_FALSE(achieved);
}

TEST(LockTimer, TwoHundredStepsOfDtReachTenSeconds) {
  MissionContext ctx;
  bool achieved = false;
  int steps = 0;
  while (!achieved) {
    std::tie(ctx, achieved) = lock_timer_update(ctx, true, 0.05, kGains);
    ++steps;
  }
  EXPECT_EQ(steps, 200);
}

TEST(LockTimer, RejectsNonPositiveDt) {
  EXPECT_THROW(lock_timer_update({}, true, 0.0, kGains), ValidationError);
}

// Node-level: drive the node with hand-made deliveries.
class NodeHarness : public ::testing::Test {
 protected:
  Broker broker;
  AutonomousNode node{broker, AutonomousConfig{}};
  Publisher server{"proxy"};
  Publisher camera{"vision"};

  std::vector<Envelope> tick(Tick t, const PursuerState& p) {
    node.step(broker, t, p);
    auto out = broker.flush();
    return out;
  }
};

TEST_F(NodeHarness, BootPublishesTelemetryImmediately) {
  auto out = tick(0, {{0, 0, 10}, 0, 0, 0});
  EXPECT_EQ(node.state(), FsmState::Search);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].topic.name(), "/telemetry");
}

TEST_F(NodeHarness, SignalOnceThenLockAfterTenSeconds) {
  tick(0, {{0, 0, 10}, 0, 0, 0});
  TelemetryResponse resp{true, "T1", Vec3{5, 0, 10}, 1, false};
  server.publish(broker, "/telemetry/response", encode_payload(resp), 0);
  broker.flush();

  int signals = 0;
  std::optional<Tick> lock_tick;
  const Tick first_frame = 2;
  for (Tick t = 1; t < 400 && !lock_tick; ++t) {
    if (t >= first_frame && t % 2 == 0) {
      camera.publish(broker, "/image/message", encode_payload(OffsetMessage{0, 0, t}), t);
    }
    node.step(broker, t, {{0, 0, 10}, 0, 0, 0});
    for (const auto& e : broker.flush()) {
      if (e.topic.name() == "/signal/process_image") ++signals;
      if (e.topic.name() == "/lock") lock_tick = e.tick;
    }
  }
  EXPECT_EQ(signals, 1);
  ASSERT_TRUE(lock_tick);
  // The first offset (frame tick 2) is consumed at tick 3; the lock comes 10 s after the frame.
  EXPECT_EQ(*lock_tick, first_frame + 200);
}

TEST_F(NodeHarness, StaleCameraFallsBackToSearch) {
  tick(0, {{0, 0, 10}, 0, 0, 0});
  server.publish(broker, "/telemetry/response", encode_payload(TelemetryResponse{true, "T1", Vec3{5, 0, 10}, 1}), 0);
  broker.flush();
  tick(1, {{0, 0, 10}, 0, 0, 0});
  camera.publish(broker, "/image/message", encode_payload(OffsetMessage{0.1, 0, 2}), 2);
  tick(2, {{0, 0, 10}, 0, 0, 0});
  tick(3, {{0, 0, 10}, 0, 0, 0});
  EXPECT_EQ(node.state(), FsmState::Lock);
  for (Tick t = 4; t <= 12; ++t) tick(t, {{0, 0, 10}, 0, 0, 0});
  EXPECT_EQ(node.state(), FsmState::Search);
  EXPECT_EQ(node.context().lock_timer, 0.0);
}

TEST_F(NodeHarness, EmptyQueueLandsAndDegradedDoesNot) {
  tick(0, {{0, 0, 10}, 0, 0, 0});
  TelemetryResponse degraded;
  degraded.degraded = true;
  server.publish(broker, "/telemetry/response", encode_payload(degraded), 0);
  broker.flush();
  tick(1, {{0, 0, 10}, 0, 0, 0});
  EXPECT_EQ(node.state(), FsmState::Search);
  EXPECT_EQ(node.degraded_responses(), 1u);

  server.publish(broker, "/telemetry/response", encode_payload(TelemetryResponse{}), 1);
  broker.flush();
  auto out = tick(2, {{0, 0, 10}, 0, 0, 0});
  EXPECT_EQ(node.state(), FsmState::Landing);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].topic.name(), "/land");
  tick(3, {{0, 0, 10}, 0, 0, 0});
  EXPECT_EQ(node.state(), FsmState::Landed);
}

TEST_F(NodeHarness, LastLockPrecedesLandByOneTick) {
  tick(0, {{0, 0, 10}, 0, 0, 0});
  server.publish(broker, "/telemetry/response", encode_payload(TelemetryResponse{true, "T1", Vec3{5, 0, 10}, 1}), 0);
  broker.flush();
  std::optional<Tick> lock_tick, land_tick;
  for (Tick t = 1; t < 400 && !land_tick; ++t) {
    if (t % 2 == 0) camera.publish(broker, "/image/message", encode_payload(OffsetMessage{0, 0, t}), t);
    node.step(broker, t, {{0, 0, 10}, 0, 0, 0});
    for (const auto& e : broker.flush()) {
      if (e.topic.name() == "/lock") lock_tick = e.tick;
      if (e.topic.name() == "/land") land_tick = e.tick;
    }
  }
  ASSERT_TRUE(lock_tick);
  ASSERT_TRUE(land_tick);
  EXPECT_EQ(*land_tick, *lock_tick + 1);
}
