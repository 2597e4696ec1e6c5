#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "json.hpp"

#include "interceptor/vision.hpp"
#include "interceptor/world.hpp"

// JSON wire schemas shared by the nodes and the mission server. Decoders ignore
// unknown fields and reject missing or mistyped required ones, naming the field.

namespace interceptor {

using json = nlohmann::json;

class DecodeError : public std::runtime_error {
 public:
  DecodeError(std::string field, const std::string& what)
      : std::runtime_error("field '" + field + "': " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

struct TelemetryRequest {
  std::string uav_id;
  double time = 0.0;
  Vec3 position;
  std::string state;

  friend bool operator==(const TelemetryRequest&, const TelemetryRequest&) = default;
};

struct TelemetryResponse {
  bool has_target = false;
  std::optional<std::string> target_id;
  std::optional<Vec3> target_position;
  std::int64_t remaining_targets = 0;
  // Set by the proxy when it synthesizes a reply after the server link failed.
  bool degraded = false;

  friend bool operator==(const TelemetryResponse&, const TelemetryResponse&) = default;
};

struct LockReport {
  std::string uav_id;
  std::string target_id;
  std::int64_t lock_start_tick = 0;
  std::int64_t lock_end_tick = 0;
  Vec3 position;

  friend bool operator==(const LockReport&, const LockReport&) = default;
};

struct CrashReport {
  std::string uav_id;
  double time = 0.0;
  Vec3 position;

  friend bool operator==(const CrashReport&, const CrashReport&) = default;
};

namespace wire {

inline json parse(std::string_view bytes) {
  json j = json::parse(bytes, nullptr, false);
  if (j.is_discarded()) throw DecodeError("<body>", "malformed JSON");
  if (!j.is_object()) throw DecodeError("<body>", "expected a JSON object");
  return j;
}

inline const json& field(const json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end() || it->is_null()) throw DecodeError(name, "missing required field");
  return *it;
}

inline double number(const json& j, const char* name) {
  const json& v = field(j, name);
  if (!v.is_number()) throw DecodeError(name, "expected a number");
  return v.get<double>();
}

inline std::int64_t integer(const json& j, const char* name) {
  const json& v = field(j, name);
  if (!v.is_number_integer()) throw DecodeError(name, "expected an integer");
  return v.get<std::int64_t>();
}

inline std::string string(const json& j, const char* name) {
  const json& v = field(j, name);
  if (!v.is_string()) throw DecodeError(name, "expected a string");
  return v.get<std::string>();
}

inline bool boolean(const json& j, const char* name) {
  const json& v = field(j, name);
  if (!v.is_boolean()) throw DecodeError(name, "expected a boolean");
  return v.get<bool>();
}

inline json vec3(const Vec3& v) { return json{{"x", v.x}, {"y", v.y}, {"z", v.z}}; }

inline Vec3 vec3(const json& j, const char* name) {
  const json& v = field(j, name);
  if (!v.is_object()) throw DecodeError(name, "expected an object {x, y, z}");
  try {
    return {number(v, "x"), number(v, "y"), number(v, "z")};
  } catch (const DecodeError& e) {
    throw DecodeError(std::string(name) + "." + e.field(), "missing or non-numeric component");
  }
}

}  // namespace wire

inline json to_json(const TelemetryRequest& m) {
  return {{"uav_id", m.uav_id}, {"time", m.time}, {"position", wire::vec3(m.position)}, {"state", m.state}};
}

inline json to_json(const TelemetryResponse& m) {
  json j{{"has_target", m.has_target}, {"remaining_targets", m.remaining_targets}};
  if (m.target_id) j["target_id"] = *m.target_id;
  if (m.target_position) j["target_position"] = wire::vec3(*m.target_position);
  if (m.degraded) j["degraded"] = true;
  return j;
}

inline json to_json(const LockReport& m) {
  return {{"uav_id", m.uav_id},
          {"target_id", m.target_id},
          {"lock_start_tick", m.lock_start_tick},
          {"lock_end_tick", m.lock_end_tick},
          {"position", wire::vec3(m.position)}};
}

inline json to_json(const CrashReport& m) {
  return {{"uav_id", m.uav_id}, {"time", m.time}, {"position", wire::vec3(m.position)}};
}

inline json to_json(const OffsetMessage& m) { return {{"x", m.x}, {"y", m.y}, {"tick", m.tick}}; }

template <typename Message>
std::string encode_payload(const Message& m) {
  return to_json(m).dump();
}

template <typename Message>
Message decode_payload(std::string_view bytes);

template <>
inline TelemetryRequest decode_payload<TelemetryRequest>(std::string_view bytes) {
  const json j = wire::parse(bytes);
  TelemetryRequest m{wire::string(j, "uav_id"), wire::number(j, "time"), wire::vec3(j, "position"),
                     wire::string(j, "state")};
  if (m.uav_id.empty()) throw DecodeError("uav_id", "must be nonempty");
  return m;
}

template <>
inline TelemetryResponse decode_payload<TelemetryResponse>(std::string_view bytes) {
  const json j = wire::parse(bytes);
  TelemetryResponse m;
  m.has_target = wire::boolean(j, "has_target");
  m.remaining_targets = wire::integer(j, "remaining_targets");
  if (m.remaining_targets < 0) throw DecodeError("remaining_targets", "must be >= 0");
  if (m.has_target) {
    m.target_id = wire::string(j, "target_id");
    m.target_position = wire::vec3(j, "target_position");
  }
  if (auto it = j.find("degraded"); it != j.end() && !it->is_null()) m.degraded = wire::boolean(j, "degraded");
  return m;
}

template <>
inline LockReport decode_payload<LockReport>(std::string_view bytes) {
  const json j = wire::parse(bytes);
  return {wire::string(j, "uav_id"), wire::string(j, "target_id"), wire::integer(j, "lock_start_tick"),
          wire::integer(j, "lock_end_tick"), wire::vec3(j, "position")};
}

template <>
inline CrashReport decode_payload<CrashReport>(std::string_view bytes) {
  const json j = wire::parse(bytes);
  return {wire::string(j, "uav_id"), wire::number(j, "time"), wire::vec3(j, "position")};
}

template <>
inline OffsetMessage decode_payload<OffsetMessage>(std::string_view bytes) {
  const json j = wire::parse(bytes);
  OffsetMessage m{wire::number(j, "x"), wire::number(j, "y"), wire::integer(j, "tick")};
  if (std::abs(m.x) > 1.0) throw DecodeError("x", "must lie in [-1, 1]");
  if (std::abs(m.y) > 1.0) throw DecodeError("y", "must lie in [-1, 1]");
  return m;
}

}  // namespace interceptor
