#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "interceptor/autonomous.hpp"
#include "interceptor/bus.hpp"
#include "interceptor/event_log.hpp"
#include "interceptor/http.hpp"
#include "interceptor/metrics.hpp"
#include "interceptor/proxy.hpp"
#include "interceptor/scenario.hpp"
#include "interceptor/server.hpp"
#include "interceptor/vision_node.hpp"
#include "interceptor/world.hpp"

namespace interceptor {

enum class Termination { Land, Timeout, Crash, Aborted };

inline std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::Land: return "land";
    case Termination::Timeout: return "timeout";
    case Termination::Crash: return "crash";
    case Termination::Aborted: return "aborted";
  }
  return "?";
}

struct TraceSample {
  Tick tick = 0;
  PursuerState pursuer;
};

struct RunResult {
  RunReport report;
  RunLog log;
  Termination terminated_by = Termination::Timeout;
  std::optional<std::string> abort_reason;
  // Pursuer state after the world step of each tick.
  std::vector<TraceSample> trace;
  // Tick at which each server request was issued, in order.
  std::vector<Tick> server_request_ticks;
  std::vector<LinkEvent> link_events;
  std::size_t records_on_server = 0;
};

/// Image position of the nearest live target in frame. With `engaged` set, only
/// that target is considered.
inline std::optional<ImagePoint> camera_truth(const WorldState& world, const CameraParams& cam,
                                              const std::optional<std::string>& engaged = std::nullopt) {
  std::optional<ImagePoint> best;
  double best_range = 0.0;
  for (const auto& t : world.targets) {
    if (!t.alive || (engaged && t.id != *engaged)) continue;
    auto p = project_to_camera(world.pursuer, t.position, cam);
    if (!p) continue;
    const double range = distance(world.pursuer.position, t.position);
    if (!best || range < best_range) {
      best = p;
      best_range = range;
    }
  }
  return best;
}

namespace detail {

class RecordingTransport final : public Transport {
 public:
  RecordingTransport(Transport& inner, const Tick& clock, std::vector<Tick>& ticks)
      : inner_(inner), clock_(clock), ticks_(ticks) {}

  TransportResult post(std::string_view path, std::string_view body) override {
    ticks_.push_back(clock_);
    return inner_.post(path, body);
  }

 private:
  Transport& inner_;
  const Tick& clock_;
  std::vector<Tick>& ticks_;
};

}  // namespace detail

/// Lockstep scheduler. Per tick: world step, camera frame and vision,
/// autonomous node, proxy/server exchange, then bus delivery.
inline RunResult run(const Scenario& scenario) {
  scenario.validate();
  const double dt = scenario.dt;
  const Tick frame_ticks = scenario.frame_ticks();
  const Tick max_ticks = scenario.max_ticks();

  RunResult result;
  result.log.header = RunHeader{scenario.seed, dt, scenario.frame_period, scenario.gains.lock_duration,
                                scenario.gains.activation_radius, {}};

  WorldState world;
  world.pursuer = scenario.pursuer_init;
  std::vector<TargetAssignment> seed_targets;
  for (const auto& t : scenario.targets) {
    world.targets.push_back({t.id, t.trajectory, true, {}});
    seed_targets.push_back({t.id, t.trajectory.p0, false});
    result.log.header.target_ids.push_back(t.id);
  }
  refresh_targets(world);

  std::atomic<double> sim_ms{0.0};
  MissionServer server(seed_targets, [&sim_ms] { return sim_ms.load(); });

  std::unique_ptr<Transport> inner;
  std::unique_ptr<HttpMissionServer> http_server;
  if (scenario.transport.mode == TransportMode::LoopbackHttp) {
    http_server = std::make_unique<HttpMissionServer>(server);
    const int port = http_server->start(0);
    inner = std::make_unique<HttpTransport>("127.0.0.1", port);
  } else {
    inner = std::make_unique<InProcessTransport>(server);
  }
  Tick now = 0;
  detail::RecordingTransport transport(*inner, now, result.server_request_ticks);

  Broker broker;
  VisionNode vision(broker, VisionConfig{"vision", scenario.vision, scenario.seed});
  AutonomousNode autonomous(broker, AutonomousConfig{"autonomous", scenario.uav_id, scenario.gains, dt,
                                                     scenario.frame_period, scenario.telemetry_period});
  ProxyConfig proxy_cfg;
  proxy_cfg.response_delay_ticks =
      scenario.transport.mode == TransportMode::InProcess
          ? static_cast<Tick>(std::floor(scenario.transport.latency_ms / (dt * 1000.0) + 1e-9))
          : 0;
  proxy_cfg.min_lock_span_ticks = std::llround(scenario.gains.lock_duration / dt);
  ProxyNode proxy(broker, transport, proxy_cfg);

  auto finish = [&](Termination how, Tick tick, std::string error = {}) {
    result.terminated_by = how;
    result.log.end = RunEnd{tick, std::string(to_string(how)), std::move(error)};
  };

  GuidanceCommand guidance;
  for (bool first = true;; first = false) {
    if (!first) world = step(std::move(world), guidance, dt);
    now = world.tick;
    sim_ms.store(world.time * 1000.0);
    // The ground station tracks target positions; telemetry replies carry them.
    for (const auto& t : world.targets) server.update_target_position(t.id, t.position);
    result.trace.push_back({now, world.pursuer});

    if (world.pursuer.position.z < 0.0) {
      proxy.forward_crash(CrashReport{scenario.uav_id, world.time, world.pursuer.position});
      finish(Termination::Crash, now);
      break;
    }

    try {
      const bool frame_due = now % frame_ticks == 0;
      // The detector is cued to the assigned target, so a second drone in view
      // cannot run the lock timer for the first.
      const auto& engaged = autonomous.context().current_target;
      const auto truth = frame_due && engaged ? camera_truth(world, scenario.camera, engaged) : std::nullopt;
      vision.step(broker, now, truth, frame_due);
      guidance = autonomous.step(broker, now, world.pursuer);
      proxy.step(broker, now);
    } catch (const StateMachineViolation& e) {
      result.abort_reason = "tick " + std::to_string(now) + ": " + e.what();
      for (const auto& c : autonomous.take_state_changes()) {
        result.log.records.push_back(
            LogRecord::transition(c.tick, std::string(to_string(c.from)), std::string(to_string(c.to))));
      }
      finish(Termination::Aborted, now, *result.abort_reason);
      break;
    }

    for (const auto& c : autonomous.take_state_changes()) {
      result.log.records.push_back(
          LogRecord::transition(c.tick, std::string(to_string(c.from)), std::string(to_string(c.to))));
    }
    for (const auto& env : broker.flush()) {
      result.log.records.push_back(LogRecord::envelope(env));
      if (env.topic.name() == topics::kLock) {
        const auto report = decode_payload<LockReport>(env.payload);
        for (auto& t : world.targets) {
          if (t.id == report.target_id) t.alive = false;
        }
      }
    }

    if (autonomous.state() == FsmState::Landed) {
      finish(Termination::Land, now);
      break;
    }
    if (now >= max_ticks) {
      finish(Termination::Timeout, now);
      break;
    }
  }

  broker.shutdown();
  if (http_server) {
    inner.reset();  // close the keep-alive connection so stop() does not wait on it
    http_server->stop();
  }
  result.link_events = proxy.link_events();
  result.records_on_server = server.records().size();
  result.report = summarize_run(result.log);
  return result;
}

}  // namespace interceptor
