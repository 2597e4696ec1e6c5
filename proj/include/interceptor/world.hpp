#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace interceptor {

class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Local flat-earth frame in meters: x east, y north, z up.
struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const { return std::sqrt(dot(*this)); }
  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }

  friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline double distance(const Vec3& a, const Vec3& b) { return (a - b).norm(); }

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

// Yaw 0 faces +x, counterclockwise positive. Pitch positive is nose up.
struct PursuerState {
  Vec3 position;
  double yaw = 0.0;
  double pitch = 0.0;
  double speed = 0.0;

  friend bool operator==(const PursuerState&, const PursuerState&) = default;
};

inline Vec3 forward_axis(double yaw, double pitch) {
  return {std::cos(pitch) * std::cos(yaw), std::cos(pitch) * std::sin(yaw), std::sin(pitch)};
}

enum class TrajectoryKind { Stationary, ConstantVelocity, ConstantAcceleration };

struct TrajectorySpec {
  TrajectoryKind kind = TrajectoryKind::Stationary;
  Vec3 p0;
  Vec3 v0;
  Vec3 a;

  static TrajectorySpec stationary(Vec3 p0) { return {TrajectoryKind::Stationary, p0, {}, {}}; }
  static TrajectorySpec constant_velocity(Vec3 p0, Vec3 v0) {
    return {TrajectoryKind::ConstantVelocity, p0, v0, {}};
  }
  static TrajectorySpec constant_acceleration(Vec3 p0, Vec3 v0, Vec3 a) {
    return {TrajectoryKind::ConstantAcceleration, p0, v0, a};
  }

  void validate() const {
    if (!p0.finite() || !v0.finite() || !a.finite()) throw ValidationError("trajectory: non-finite component");
    const Vec3 zero{};
    if (kind == TrajectoryKind::Stationary && (v0 != zero || a != zero)) {
      throw ValidationError("trajectory: Stationary requires v0 = a = 0");
    }
    if (kind == TrajectoryKind::ConstantVelocity && a != zero) {
      throw ValidationError("trajectory: ConstantVelocity requires a = 0");
    }
  }

  friend bool operator==(const TrajectorySpec&, const TrajectorySpec&) = default;
};

inline Vec3 eval_trajectory(const TrajectorySpec& spec, double t) {
  if (!(t >= 0.0)) throw ValidationError("eval_trajectory: t must be >= 0");
  return spec.p0 + spec.v0 * t + spec.a * (0.5 * t * t);
}

struct CameraParams {
  double hfov = std::numbers::pi / 2.0;
  double vfov = std::numbers::pi / 3.0;
  double frame_period = 0.1;

  void validate() const {
    if (!(hfov > 0.0 && hfov < std::numbers::pi)) throw ValidationError("camera.hfov must lie in (0, pi)");
    if (!(vfov > 0.0 && vfov < std::numbers::pi)) throw ValidationError("camera.vfov must lie in (0, pi)");
    if (!(frame_period > 0.0)) throw ValidationError("camera.frame_period must be > 0");
  }

  friend bool operator==(const CameraParams&, const CameraParams&) = default;
};

/// Normalized image coordinates: u to the right, v downward, both in [-1, 1] when in frame.
struct ImagePoint {
  double u = 0.0;
  double v = 0.0;

  friend bool operator==(const ImagePoint&, const ImagePoint&) = default;
};

/// Pinhole projection along the pursuer's boresight. Absent when the target is
/// behind the camera or outside the field of view.
inline std::optional<ImagePoint> project_to_camera(const PursuerState& pursuer, const Vec3& target,
                                                   const CameraParams& cam) {
  const double cy = std::cos(pursuer.yaw), sy = std::sin(pursuer.yaw);
  const double cp = std::cos(pursuer.pitch), sp = std::sin(pursuer.pitch);
  const Vec3 fwd{cp * cy, cp * sy, sp};
  const Vec3 right{sy, -cy, 0.0};
  const Vec3 up{-sp * cy, -sp * sy, cp};

  const Vec3 rel = target - pursuer.position;
  const double f = rel.dot(fwd);
  if (f <= 0.0) return std::nullopt;
  const double r = rel.dot(right);
  const double d = -rel.dot(up);

  const ImagePoint p{(r / f) / std::tan(cam.hfov / 2.0), (d / f) / std::tan(cam.vfov / 2.0)};
  if (std::abs(p.u) > 1.0 || std::abs(p.v) > 1.0) return std::nullopt;
  return p;
}

struct GuidanceCommand {
  double yaw_rate = 0.0;
  double pitch_rate = 0.0;
  double speed = 0.0;

  friend bool operator==(const GuidanceCommand&, const GuidanceCommand&) = default;
};

struct TargetTruth {
  std::string id;
  TrajectorySpec trajectory;
  bool alive = true;
  Vec3 position;
};

struct WorldState {
  double time = 0.0;
  std::int64_t tick = 0;
  PursuerState pursuer;
  std::vector<TargetTruth> targets;
};

/// Re-evaluates every target at the state's current time.
inline void refresh_targets(WorldState& world) {
  for (auto& t : world.targets) t.position = eval_trajectory(t.trajectory, world.time);
}

/// One forward-Euler step of the kinematic pursuer. Attitude is integrated
/// first and the pursuer then moves along the new boresight.
inline WorldState step(WorldState world, const GuidanceCommand& guidance, double dt) {
  if (!(dt > 0.0)) throw ValidationError("step: dt must be > 0");
  if (!(guidance.speed >= 0.0)) throw ValidationError("step: guidance speed must be >= 0");

  auto& p = world.pursuer;
  p.yaw = wrap_angle(p.yaw + guidance.yaw_rate * dt);
  p.pitch = std::clamp(p.pitch + guidance.pitch_rate * dt, -std::numbers::pi / 2.0, std::numbers::pi / 2.0);
  p.speed = guidance.speed;
  p.position = p.position + forward_axis(p.yaw, p.pitch) * (p.speed * dt);

  world.tick += 1;
  world.time = static_cast<double>(world.tick) * dt;
  refresh_targets(world);
  return world;
}

}  // namespace interceptor
