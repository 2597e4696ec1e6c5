#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "interceptor/bus.hpp"
#include "interceptor/payload.hpp"
#include "interceptor/vision.hpp"
#include "interceptor/world.hpp"

namespace interceptor {

class StateMachineViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

enum class FsmState { Boot, Search, Lock, Landing, Landed };

inline std::string_view to_string(FsmState s) {
  switch (s) {
    case FsmState::Boot: return "BOOT";
    case FsmState::Search: return "SEARCH";
    case FsmState::Lock: return "LOCK";
    case FsmState::Landing: return "LANDING";
    case FsmState::Landed: return "LANDED";
  }
  return "?";
}

inline std::optional<FsmState> fsm_state_from_string(std::string_view s) {
  for (auto st : {FsmState::Boot, FsmState::Search, FsmState::Lock, FsmState::Landing, FsmState::Landed}) {
    if (to_string(st) == s) return st;
  }
  return std::nullopt;
}

inline bool is_allowed_transition(FsmState from, FsmState to) {
  using enum FsmState;
  return (from == Boot && to == Search) || (from == Search && to == Lock) || (from == Lock && to == Search) ||
         (from == Search && to == Landing) || (from == Landing && to == Landed);
}

struct ControlGains {
  double k_yaw = 0.8;
  double k_pitch = 0.8;
  double v_cruise = 8.0;
  double v_lock = 6.0;
  double activation_radius = 10.0;
  double lock_duration = 10.0;
  double camera_grace = 0.5;

  void validate() const {
    if (!(k_yaw > 0.0)) throw ValidationError("gains.k_yaw must be > 0");
    if (!(k_pitch > 0.0)) throw ValidationError("gains.k_pitch must be > 0");
    if (!(v_cruise > 0.0)) throw ValidationError("gains.v_cruise must be > 0");
    if (!(v_lock > 0.0)) throw ValidationError("gains.v_lock must be > 0");
    if (!(activation_radius > 0.0)) throw ValidationError("gains.activation_radius must be > 0");
    if (!(lock_duration > 0.0)) throw ValidationError("gains.lock_duration must be > 0");
    if (!(camera_grace > 0.0)) throw ValidationError("gains.camera_grace must be > 0");
  }

  friend bool operator==(const ControlGains&, const ControlGains&) = default;
};

struct MissionContext {
  std::string uav_id = "uav-1";
  std::optional<std::string> current_target;
  std::optional<Vec3> target_position;
  std::int64_t remaining_targets = 0;
  double lock_timer = 0.0;
  std::optional<Tick> last_camera_tick;
  // Frame tick that opened the current unbroken containment run.
  std::optional<Tick> lock_start_tick;
  bool signal_sent_for_current = false;
  std::vector<std::string> completed_targets;

  friend bool operator==(const MissionContext&, const MissionContext&) = default;
};

namespace events {
struct BootComplete {};
struct TelemetryResponse {
  std::string target_id;
  Vec3 position;
  std::int64_t remaining_targets = 1;
};
struct DistanceBelowThreshold {};
struct CameraOffset {
  OffsetMessage offset;
};
struct CameraStale {};
struct LockTimerElapsed {};
struct NoMoreTargets {};
struct TouchedDown {};
}  // namespace events

using Event = std::variant<events::BootComplete, events::TelemetryResponse, events::DistanceBelowThreshold,
                           events::CameraOffset, events::CameraStale, events::LockTimerElapsed,
                           events::NoMoreTargets, events::TouchedDown>;

inline std::string_view event_name(const Event& e) {
  static constexpr std::string_view names[] = {"BootComplete",     "TelemetryResponse", "DistanceBelowThreshold",
                                               "CameraOffset",     "CameraStale",       "LockTimerElapsed",
                                               "NoMoreTargets",    "TouchedDown"};
  return names[e.index()];
}

namespace actions {
struct Publish {
  std::string topic;
  std::string payload;
};
struct SetGuidance {
  GuidanceCommand command;
};
// Ask the server for the next assignment (publishes /telemetry immediately).
struct RequestTarget {};
// Feed a follow-up event back into the machine in the same step.
struct Raise {
  Event event;
};
}  // namespace actions

using Action = std::variant<actions::Publish, actions::SetGuidance, actions::RequestTarget, actions::Raise>;

/// What the node knows about itself when an event is handled.
struct Observation {
  Tick tick = 0;
  PursuerState pursuer;
};

struct TransitionResult {
  FsmState state;
  MissionContext ctx;
  std::vector<Action> actions;
};

inline GuidanceCommand search_guidance(const PursuerState& pursuer, const Vec3& target, const ControlGains& gains) {
  const Vec3 los = target - pursuer.position;
  if (los.norm() < 1e-6) return {0.0, 0.0, gains.v_cruise};
  const double bearing = std::atan2(los.y, los.x);
  const double elevation = std::atan2(los.z, std::hypot(los.x, los.y));
  return {gains.k_yaw * wrap_angle(bearing - pursuer.yaw), gains.k_pitch * (elevation - pursuer.pitch),
          gains.v_cruise};
}

// Image x grows to the right while yaw grows counterclockwise, so turning
// toward a target at positive x needs a negative yaw rate.
inline GuidanceCommand lock_guidance(const OffsetMessage& offset, const ControlGains& gains) {
  if (!(std::abs(offset.x) <= 1.0) || !(std::abs(offset.y) <= 1.0)) {
    throw ValidationError("lock_guidance: offset outside [-1, 1]");
  }
  return {-gains.k_yaw * offset.x, -gains.k_pitch * offset.y, gains.v_lock};
}

inline constexpr double kTimeEpsilon = 1e-9;

inline std::pair<MissionContext, bool> lock_timer_update(MissionContext ctx, bool contained, double dt,
                                                         const ControlGains& gains) {
  if (!(dt > 0.0)) throw ValidationError("lock_timer_update: dt must be > 0");
  if (contained) {
    ctx.lock_timer += dt;
  } else {
    ctx.lock_timer = 0.0;
    ctx.lock_start_tick.reset();
  }
  const bool achieved = ctx.lock_timer >= gains.lock_duration - kTimeEpsilon;
  return {std::move(ctx), achieved};
}

/// Pure transition function of the mission state machine.
inline TransitionResult handle_event(FsmState state, MissionContext ctx, const Event& event,
                                     const ControlGains& gains, const Observation& obs) {
  using enum FsmState;
  auto violation = [&] {
    return StateMachineViolation("event " + std::string(event_name(event)) + " is illegal in state " +
                                 std::string(to_string(state)));
  };
  if (state == Landed) throw violation();

  std::vector<Action> out;

  if (std::holds_alternative<events::BootComplete>(event)) {
    if (state != Boot) throw violation();
    out.emplace_back(actions::RequestTarget{});
    return {Search, std::move(ctx), std::move(out)};
  }

  if (const auto* resp = std::get_if<events::TelemetryResponse>(&event)) {
    if (state != Search && state != Lock) throw violation();
    const bool done = std::ranges::find(ctx.completed_targets, resp->target_id) != ctx.completed_targets.end();
    if (done) return {state, std::move(ctx), {}};
    if (state == Lock) {
      // Periodic telemetry keeps flowing while locked; only refresh bookkeeping.
      if (ctx.current_target == resp->target_id) {
        ctx.target_position = resp->position;
        ctx.remaining_targets = resp->remaining_targets;
      }
      return {state, std::move(ctx), {}};
    }
    if (ctx.current_target != resp->target_id) {
      ctx.current_target = resp->target_id;
      ctx.signal_sent_for_current = false;
    }
    ctx.target_position = resp->position;
    ctx.remaining_targets = resp->remaining_targets;
    out.emplace_back(actions::SetGuidance{search_guidance(obs.pursuer, resp->position, gains)});
    return {Search, std::move(ctx), std::move(out)};
  }

  if (std::holds_alternative<events::DistanceBelowThreshold>(event)) {
    if (state != Search) throw violation();
    if (ctx.current_target && !ctx.signal_sent_for_current) {
      ctx.signal_sent_for_current = true;
      out.emplace_back(actions::Publish{std::string(topics::kProcessImage), ""});
    }
    return {Search, std::move(ctx), std::move(out)};
  }

  if (const auto* cam = std::get_if<events::CameraOffset>(&event)) {
    if (state == Search) {
      // Camera data only counts once image processing was requested for this target.
      if (!ctx.current_target || !ctx.signal_sent_for_current) return {Search, std::move(ctx), {}};
      ctx.lock_timer = 0.0;
      ctx.last_camera_tick = cam->offset.tick;
      ctx.lock_start_tick = cam->offset.tick;
      out.emplace_back(actions::SetGuidance{lock_guidance(cam->offset, gains)});
      return {Lock, std::move(ctx), std::move(out)};
    }
    if (state != Lock) throw violation();
    ctx.last_camera_tick = cam->offset.tick;
    if (!ctx.lock_start_tick) ctx.lock_start_tick = cam->offset.tick;
    out.emplace_back(actions::SetGuidance{lock_guidance(cam->offset, gains)});
    return {Lock, std::move(ctx), std::move(out)};
  }

  if (std::holds_alternative<events::CameraStale>(event)) {
    if (state != Lock) throw violation();
    ctx.lock_timer = 0.0;
    ctx.lock_start_tick.reset();
    ctx.last_camera_tick.reset();
    if (ctx.target_position) {
      out.emplace_back(actions::SetGuidance{search_guidance(obs.pursuer, *ctx.target_position, gains)});
    }
    return {Search, std::move(ctx), std::move(out)};
  }

  if (std::holds_alternative<events::LockTimerElapsed>(event)) {
    if (state != Lock) throw violation();
    LockReport report{ctx.uav_id, *ctx.current_target, ctx.lock_start_tick.value_or(obs.tick), obs.tick,
                      obs.pursuer.position};
    out.emplace_back(actions::Publish{std::string(topics::kLock), encode_payload(report)});
    ctx.completed_targets.push_back(*ctx.current_target);
    ctx.current_target.reset();
    ctx.target_position.reset();
    ctx.signal_sent_for_current = false;
    ctx.lock_timer = 0.0;
    ctx.lock_start_tick.reset();
    ctx.last_camera_tick.reset();
    ctx.remaining_targets = std::max<std::int64_t>(0, ctx.remaining_targets - 1);
    if (ctx.remaining_targets > 0) {
      out.emplace_back(actions::RequestTarget{});
    } else {
      out.emplace_back(actions::Raise{events::NoMoreTargets{}});
    }
    out.emplace_back(actions::SetGuidance{GuidanceCommand{0.0, 0.0, 0.0}});
    return {Search, std::move(ctx), std::move(out)};
  }

  if (std::holds_alternative<events::NoMoreTargets>(event)) {
    if (state != Search) throw violation();
    out.emplace_back(actions::Publish{std::string(topics::kLand), ""});
    out.emplace_back(actions::SetGuidance{GuidanceCommand{0.0, 0.0, 0.0}});
    return {Landing, std::move(ctx), std::move(out)};
  }

  if (std::holds_alternative<events::TouchedDown>(event)) {
    if (state != Landing) throw violation();
    return {Landed, std::move(ctx), {}};
  }

  throw violation();
}

struct StateChange {
  Tick tick = 0;
  FsmState from;
  FsmState to;
};

struct AutonomousConfig {
  NodeId node_id = "autonomous";
  std::string uav_id = "uav-1";
  ControlGains gains;
  double dt = 0.05;
  double frame_period = 0.1;
  double telemetry_period = 1.0;
};

/// Bus-facing wrapper around the mission state machine. One call to `step`
/// per tick: drain deliveries, run the periodic checks, emit guidance.
class AutonomousNode {
 public:
  AutonomousNode(Broker& broker, AutonomousConfig config) : config_(std::move(config)), publisher_(config_.node_id) {
    ctx_.uav_id = config_.uav_id;
    broker.subscribe(config_.node_id, Topic(std::string(topics::kTelemetryResponse)));
    broker.subscribe(config_.node_id, Topic(std::string(topics::kImageMessage)));
    broker.subscribe(config_.node_id, Topic(std::string(topics::kLand)));
  }

  GuidanceCommand step(Broker& broker, Tick tick, const PursuerState& pursuer) {
    broker_ = &broker;
    obs_ = Observation{tick, pursuer};
    const double dt = config_.dt;
    const auto& gains = config_.gains;

    if (state_ == FsmState::Landed) {
      broker.drain(config_.node_id);
      return guidance_;
    }
    if (state_ == FsmState::Boot) apply(events::BootComplete{});
    // Raised events apply on the next tick, so subscribers consume the
    // envelopes published alongside them first.
    for (auto& e : std::exchange(deferred_, {})) apply(e);

    for (auto& env : broker.drain(config_.node_id)) {
      if (state_ == FsmState::Landing || state_ == FsmState::Landed) break;
      const auto& topic = env.topic.name();
      if (topic == topics::kTelemetryResponse) {
        auto resp = decode_payload<TelemetryResponse>(env.payload);
        if (resp.degraded) {
          ++degraded_responses_;
        } else if (resp.has_target) {
          apply(events::TelemetryResponse{*resp.target_id, *resp.target_position, resp.remaining_targets});
        } else if (state_ == FsmState::Search) {
          apply(events::NoMoreTargets{});
        }
      } else if (topic == topics::kImageMessage) {
        apply(events::CameraOffset{decode_payload<OffsetMessage>(env.payload)});
      }
    }

    if (state_ == FsmState::Landing) {
      if (tick > land_tick_) apply(events::TouchedDown{});
      return guidance_;
    }

    if (state_ == FsmState::Search && ctx_.current_target && ctx_.target_position) {
      if (!ctx_.signal_sent_for_current &&
          distance(pursuer.position, *ctx_.target_position) < gains.activation_radius) {
        apply(events::DistanceBelowThreshold{});
      }
      guidance_ = search_guidance(pursuer, *ctx_.target_position, gains);
    }

    if (state_ == FsmState::Lock) {
      const double since_frame = static_cast<double>(tick - ctx_.last_camera_tick.value_or(tick)) * dt;
      if (since_frame >= gains.camera_grace - kTimeEpsilon) {
        apply(events::CameraStale{});
      } else {
        const bool contained = since_frame <= config_.frame_period + kTimeEpsilon;
        auto [next, achieved] = lock_timer_update(std::move(ctx_), contained, dt, gains);
        ctx_ = std::move(next);
        if (achieved) apply(events::LockTimerElapsed{});
      }
    }

    if ((state_ == FsmState::Search || state_ == FsmState::Lock) &&
        static_cast<double>(tick - last_telemetry_tick_) * dt >= config_.telemetry_period - kTimeEpsilon) {
      publish_telemetry();
    }
    return guidance_;
  }

  FsmState state() const noexcept { return state_; }
  const MissionContext& context() const noexcept { return ctx_; }
  const GuidanceCommand& guidance() const noexcept { return guidance_; }
  const NodeId& id() const noexcept { return config_.node_id; }
  std::size_t degraded_responses() const noexcept { return degraded_responses_; }

  std::vector<StateChange> take_state_changes() { return std::exchange(changes_, {}); }

 private:
  void apply(const Event& event) {
    auto result = handle_event(state_, std::move(ctx_), event, config_.gains, obs_);
    if (result.state != state_) {
      changes_.push_back(StateChange{obs_.tick, state_, result.state});
      if (result.state == FsmState::Landing) land_tick_ = obs_.tick;
    }
    state_ = result.state;
    ctx_ = std::move(result.ctx);
    for (auto& action : result.actions) {
      std::visit(
          [&](auto& a) {
            using A = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<A, actions::Publish>) {
              publisher_.publish(*broker_, a.topic, std::move(a.payload), obs_.tick);
            } else if constexpr (std::is_same_v<A, actions::SetGuidance>) {
              guidance_ = a.command;
            } else if constexpr (std::is_same_v<A, actions::RequestTarget>) {
              publish_telemetry();
            } else {
              deferred_.push_back(a.event);
            }
          },
          action);
    }
  }

  void publish_telemetry() {
    TelemetryRequest req{config_.uav_id, static_cast<double>(obs_.tick) * config_.dt, obs_.pursuer.position,
                         std::string(to_string(state_))};
    publisher_.publish(*broker_, topics::kTelemetry, encode_payload(req), obs_.tick);
    last_telemetry_tick_ = obs_.tick;
  }

  AutonomousConfig config_;
  Publisher publisher_;
  FsmState state_ = FsmState::Boot;
  MissionContext ctx_;
  GuidanceCommand guidance_;
  Observation obs_;
  Broker* broker_ = nullptr;
  Tick last_telemetry_tick_ = 0;
  Tick land_tick_ = 0;
  std::vector<Event> deferred_;
  std::size_t degraded_responses_ = 0;
  std::vector<StateChange> changes_;
};

}  // namespace interceptor
