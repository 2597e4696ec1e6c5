#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "interceptor/autonomous.hpp"
#include "interceptor/payload.hpp"
#include "interceptor/vision.hpp"
#include "interceptor/world.hpp"

namespace interceptor {

enum class TransportMode { InProcess, LoopbackHttp };

struct TransportSpec {
  TransportMode mode = TransportMode::InProcess;
  double latency_ms = 5.0;  // simulated server latency, in-process only

  friend bool operator==(const TransportSpec&, const TransportSpec&) = default;
};

struct ScenarioTarget {
  std::string id;
  TrajectorySpec trajectory;

  friend bool operator==(const ScenarioTarget&, const ScenarioTarget&) = default;
};

struct Scenario {
  std::string name = "unnamed";
  std::string uav_id = "uav-1";
  std::uint64_t seed = 42;
  double dt = 0.05;
  double frame_period = 0.1;
  double max_time = 60.0;
  double telemetry_period = 1.0;
  PursuerState pursuer_init{{0.0, 0.0, 10.0}, 0.0, 0.0, 0.0};
  std::vector<ScenarioTarget> targets;
  CameraParams camera;
  VisionParams vision;
  ControlGains gains;
  TransportSpec transport;

  std::int64_t frame_ticks() const { return std::llround(frame_period / dt); }
  std::int64_t max_ticks() const { return static_cast<std::int64_t>(std::ceil(max_time / dt - 1e-9)); }

  void validate() const {
    if (!(dt > 0.0)) throw ValidationError("scenario field 'dt': must be > 0");
    if (!(frame_period > 0.0)) throw ValidationError("scenario field 'frame_period': must be > 0");
    const double ratio = frame_period / dt;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 || std::round(ratio) < 1.0) {
      throw ValidationError("scenario field 'frame_period': must be an integer multiple of dt");
    }
    if (!(max_time > 0.0)) throw ValidationError("scenario field 'max_time': must be > 0");
    if (!(telemetry_period > 0.0)) throw ValidationError("scenario field 'telemetry_period': must be > 0");
    if (uav_id.empty()) throw ValidationError("scenario field 'uav_id': must be nonempty");
    if (!pursuer_init.position.finite() || !(pursuer_init.speed >= 0.0) ||
        !(std::abs(pursuer_init.pitch) <= std::numbers::pi / 2.0)) {
      throw ValidationError("scenario field 'pursuer': invalid initial state");
    }
    std::set<std::string> ids;
    for (const auto& t : targets) {
      if (t.id.empty()) throw ValidationError("scenario field 'targets.id': must be nonempty");
      if (!ids.insert(t.id).second) throw ValidationError("scenario field 'targets.id': duplicate '" + t.id + "'");
      t.trajectory.validate();
    }
    camera.validate();
    vision.validate();
    gains.validate();
    if (!(transport.latency_ms >= 0.0)) throw ValidationError("scenario field 'transport.latency_ms': must be >= 0");
  }

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

namespace scenario_json {

inline std::string path(const std::string& prefix, const char* key) {
  return prefix.empty() ? key : prefix + "." + key;
}

inline double number(const json& j, const char* key, double fallback, const std::string& prefix = {}) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_number()) throw ValidationError("scenario field '" + path(prefix, key) + "': expected a number");
  return it->get<double>();
}

inline const json* object(const json& j, const char* key, const std::string& prefix = {}) {
  auto it = j.find(key);
  if (it == j.end()) return nullptr;
  if (!it->is_object()) throw ValidationError("scenario field '" + path(prefix, key) + "': expected an object");
  return &*it;
}

inline Vec3 vec3(const json& j, const char* key, Vec3 fallback, const std::string& prefix = {}) {
  const json* o = object(j, key, prefix);
  if (!o) return fallback;
  const std::string p = path(prefix, key);
  return {number(*o, "x", 0.0, p), number(*o, "y", 0.0, p), number(*o, "z", 0.0, p)};
}

inline TrajectoryKind trajectory_kind(const std::string& s, const std::string& field) {
  if (s == "Stationary") return TrajectoryKind::Stationary;
  if (s == "ConstantVelocity") return TrajectoryKind::ConstantVelocity;
  if (s == "ConstantAcceleration") return TrajectoryKind::ConstantAcceleration;
  throw ValidationError("scenario field '" + field + "': unknown trajectory kind '" + s + "'");
}

inline std::string_view to_string(TrajectoryKind k) {
  switch (k) {
    case TrajectoryKind::Stationary: return "Stationary";
    case TrajectoryKind::ConstantVelocity: return "ConstantVelocity";
    case TrajectoryKind::ConstantAcceleration: return "ConstantAcceleration";
  }
  return "?";
}

}  // namespace scenario_json

/// Builds a validated scenario, filling every omitted field with its default.
inline Scenario scenario_from_json(const json& j) {
  using namespace scenario_json;
  if (!j.is_object()) throw ValidationError("scenario: expected a JSON object");
  Scenario s;
  if (auto it = j.find("name"); it != j.end()) {
    if (!it->is_string()) throw ValidationError("scenario field 'name': expected a string");
    s.name = it->get<std::string>();
  }
  if (auto it = j.find("uav_id"); it != j.end()) {
    if (!it->is_string()) throw ValidationError("scenario field 'uav_id': expected a string");
    s.uav_id = it->get<std::string>();
  }
  if (auto it = j.find("seed"); it != j.end()) {
    if (!it->is_number_integer()) throw ValidationError("scenario field 'seed': expected an integer");
    s.seed = it->get<std::uint64_t>();
  }
  s.dt = number(j, "dt", s.dt);
  s.frame_period = number(j, "frame_period", s.frame_period);
  s.max_time = number(j, "max_time", s.max_time);
  s.telemetry_period = number(j, "telemetry_period", s.telemetry_period);

  if (const json* p = object(j, "pursuer")) {
    s.pursuer_init.position = vec3(*p, "position", s.pursuer_init.position, "pursuer");
    s.pursuer_init.yaw = wrap_angle(number(*p, "yaw", 0.0, "pursuer"));
    s.pursuer_init.pitch = number(*p, "pitch", 0.0, "pursuer");
    s.pursuer_init.speed = number(*p, "speed", 0.0, "pursuer");
  }

  if (auto it = j.find("targets"); it != j.end()) {
    if (!it->is_array()) throw ValidationError("scenario field 'targets': expected an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const json& t = (*it)[i];
      const std::string prefix = "targets[" + std::to_string(i) + "]";
      if (!t.is_object()) throw ValidationError("scenario field '" + prefix + "': expected an object");
      ScenarioTarget target;
      auto id = t.find("id");
      if (id == t.end() || !id->is_string()) {
        throw ValidationError("scenario field '" + prefix + ".id': expected a string");
      }
      target.id = id->get<std::string>();
      auto kind = t.find("kind");
      if (kind == t.end() || !kind->is_string()) {
        throw ValidationError("scenario field '" + prefix + ".kind': expected a string");
      }
      target.trajectory.kind = trajectory_kind(kind->get<std::string>(), prefix + ".kind");
      target.trajectory.p0 = vec3(t, "p0", {}, prefix);
      target.trajectory.v0 = vec3(t, "v0", {}, prefix);
      target.trajectory.a = vec3(t, "a", {}, prefix);
      s.targets.push_back(std::move(target));
    }
  }

  if (const json* c = object(j, "camera")) {
    s.camera.hfov = number(*c, "hfov", s.camera.hfov, "camera");
    s.camera.vfov = number(*c, "vfov", s.camera.vfov, "camera");
  }
  s.camera.frame_period = s.frame_period;

  if (const json* v = object(j, "vision")) {
    s.vision.p_detect = number(*v, "p_detect", s.vision.p_detect, "vision");
    const double latency = number(*v, "detector_latency_frames", s.vision.detector_latency_frames, "vision");
    if (latency != std::floor(latency)) {
      throw ValidationError("scenario field 'vision.detector_latency_frames': expected an integer");
    }
    s.vision.detector_latency_frames = static_cast<int>(latency);
    s.vision.track_window = number(*v, "track_window", s.vision.track_window, "vision");
    s.vision.p_track_dropout = number(*v, "p_track_dropout", s.vision.p_track_dropout, "vision");
  }

  if (const json* g = object(j, "gains")) {
    auto& k = s.gains;
    k.k_yaw = number(*g, "k_yaw", k.k_yaw, "gains");
    k.k_pitch = number(*g, "k_pitch", k.k_pitch, "gains");
    k.v_cruise = number(*g, "v_cruise", k.v_cruise, "gains");
    k.v_lock = number(*g, "v_lock", k.v_lock, "gains");
    k.activation_radius = number(*g, "activation_radius", k.activation_radius, "gains");
    k.lock_duration = number(*g, "lock_duration", k.lock_duration, "gains");
    k.camera_grace = number(*g, "camera_grace", k.camera_grace, "gains");
  }

  if (const json* t = object(j, "transport")) {
    if (auto m = t->find("mode"); m != t->end()) {
      if (!m->is_string()) throw ValidationError("scenario field 'transport.mode': expected a string");
      const auto mode = m->get<std::string>();
      if (mode == "in_process") {
        s.transport.mode = TransportMode::InProcess;
      } else if (mode == "loopback_http") {
        s.transport.mode = TransportMode::LoopbackHttp;
      } else {
        throw ValidationError("scenario field 'transport.mode': unknown mode '" + mode + "'");
      }
    }
    s.transport.latency_ms = number(*t, "latency_ms", s.transport.latency_ms, "transport");
  }

  s.validate();
  return s;
}

inline json to_json(const Scenario& s) {
  json targets = json::array();
  for (const auto& t : s.targets) {
    targets.push_back({{"id", t.id},
                       {"kind", scenario_json::to_string(t.trajectory.kind)},
                       {"p0", wire::vec3(t.trajectory.p0)},
                       {"v0", wire::vec3(t.trajectory.v0)},
                       {"a", wire::vec3(t.trajectory.a)}});
  }
  const auto& p = s.pursuer_init;
  const auto& g = s.gains;
  return {{"name", s.name},
          {"uav_id", s.uav_id},
          {"seed", s.seed},
          {"dt", s.dt},
          {"frame_period", s.frame_period},
          {"max_time", s.max_time},
          {"telemetry_period", s.telemetry_period},
          {"pursuer", {{"position", wire::vec3(p.position)}, {"yaw", p.yaw}, {"pitch", p.pitch}, {"speed", p.speed}}},
          {"targets", std::move(targets)},
          {"camera", {{"hfov", s.camera.hfov}, {"vfov", s.camera.vfov}}},
          {"vision",
           {{"p_detect", s.vision.p_detect},
            {"detector_latency_frames", s.vision.detector_latency_frames},
            {"track_window", s.vision.track_window},
            {"p_track_dropout", s.vision.p_track_dropout}}},
          {"gains",
           {{"k_yaw", g.k_yaw},
            {"k_pitch", g.k_pitch},
            {"v_cruise", g.v_cruise},
            {"v_lock", g.v_lock},
            {"activation_radius", g.activation_radius},
            {"lock_duration", g.lock_duration},
            {"camera_grace", g.camera_grace}}},
          {"transport",
           {{"mode", s.transport.mode == TransportMode::InProcess ? "in_process" : "loopback_http"},
            {"latency_ms", s.transport.latency_ms}}}};
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("scenario file '" + path + "': cannot open");
  std::stringstream buf;
  buf << in.rdbuf();
  json j = json::parse(buf.str(), nullptr, false);
  if (j.is_discarded()) throw ValidationError("scenario file '" + path + "': parse error");
  return scenario_from_json(j);
}

}  // namespace interceptor
