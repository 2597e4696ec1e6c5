#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "interceptor/payload.hpp"
#include "interceptor/world.hpp"

namespace interceptor {

enum class RecordKind { Telemetry, Lock, Crash };

inline std::string_view to_string(RecordKind k) {
  switch (k) {
    case RecordKind::Telemetry: return "Telemetry";
    case RecordKind::Lock: return "Lock";
    case RecordKind::Crash: return "Crash";
  }
  return "?";
}

inline std::optional<RecordKind> record_kind_from_string(std::string_view s) {
  for (auto k : {RecordKind::Telemetry, RecordKind::Lock, RecordKind::Crash}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

struct MissionRecord {
  std::int64_t record_id = 0;
  RecordKind kind = RecordKind::Telemetry;
  double received_at = 0.0;  // server clock, milliseconds
  json body;

  friend bool operator==(const MissionRecord&, const MissionRecord&) = default;
};

struct TargetAssignment {
  std::string target_id;
  Vec3 position;
  bool assigned = false;
};

struct HttpReply {
  int status = 200;
  std::string body;
};

inline json to_json(const MissionRecord& r) {
  return {{"record_id", r.record_id}, {"kind", to_string(r.kind)}, {"received_at", r.received_at}, {"body", r.body}};
}

inline std::vector<MissionRecord> decode_records(std::string_view bytes) {
  const json j = wire::parse(bytes);
  const json& arr = wire::field(j, "records");
  if (!arr.is_array()) throw DecodeError("records", "expected an array");
  std::vector<MissionRecord> out;
  for (const auto& item : arr) {
    auto kind = record_kind_from_string(wire::string(item, "kind"));
    if (!kind) throw DecodeError("kind", "unknown record kind");
    out.push_back({wire::integer(item, "record_id"), *kind, wire::number(item, "received_at"),
                   wire::field(item, "body")});
  }
  return out;
}

/// Remote mission server: FIFO target assignment plus an append-only,
/// in-memory record store. All handlers are safe to call concurrently.
class MissionServer {
 public:
  using Clock = std::function<double()>;

  static double wall_clock_ms() {
    using namespace std::chrono;
    return duration<double, std::milli>(system_clock::now().time_since_epoch()).count();
  }

  explicit MissionServer(std::vector<TargetAssignment> targets = {}, Clock clock = &MissionServer::wall_clock_ms)
      : queue_(std::move(targets)), initial_targets_(queue_.size()), clock_(std::move(clock)) {}

  HttpReply handle_telemetry(std::string_view body) {
    std::lock_guard lock(mutex_);
    ++requests_;
    TelemetryRequest req;
    try {
      req = decode_payload<TelemetryRequest>(body);
    } catch (const DecodeError& e) {
      return bad_request(e);
    }
    append(RecordKind::Telemetry, to_json(req));

    TelemetryResponse resp;
    resp.remaining_targets = static_cast<std::int64_t>(queue_.size());
    if (!queue_.empty()) {
      auto& head = queue_.front();
      head.assigned = true;
      resp.has_target = true;
      resp.target_id = head.target_id;
      resp.target_position = head.position;
    }
    return {200, encode_payload(resp)};
  }

  HttpReply handle_lock_report(std::string_view body) {
    std::lock_guard lock(mutex_);
    ++requests_;
    LockReport report;
    try {
      report = decode_payload<LockReport>(body);
    } catch (const DecodeError& e) {
      return bad_request(e);
    }
    if (report.lock_end_tick < report.lock_start_tick) {
      return bad_request(DecodeError("lock_end_tick", "precedes lock_start_tick"));
    }
    auto it = std::ranges::find(queue_, report.target_id, &TargetAssignment::target_id);
    if (it == queue_.end()) {
      return {404, json{{"error", "unknown or already locked target"}, {"target_id", report.target_id}}.dump()};
    }
    queue_.erase(it);
    const auto id = append(RecordKind::Lock, to_json(report));
    ++locks_;
    return {201, json{{"record_id", id}}.dump()};
  }

  HttpReply handle_crash_report(std::string_view body) {
    std::lock_guard lock(mutex_);
    ++requests_;
    CrashReport report;
    try {
      report = decode_payload<CrashReport>(body);
    } catch (const DecodeError& e) {
      return bad_request(e);
    }
    const auto id = append(RecordKind::Crash, to_json(report));
    return {201, json{{"record_id", id}}.dump()};
  }

  /// Appends targets to the queue: {"targets": [{"target_id": ..., "position": {...}}]}.
  HttpReply handle_seed(std::string_view body) {
    std::lock_guard lock(mutex_);
    ++requests_;
    std::vector<TargetAssignment> incoming;
    try {
      incoming = decode_targets(body);
    } catch (const DecodeError& e) {
      return bad_request(e);
    }
    for (const auto& t : incoming) {
      if (std::ranges::find(queue_, t.target_id, &TargetAssignment::target_id) != queue_.end()) {
        return bad_request(DecodeError("target_id", "duplicate target '" + t.target_id + "'"));
      }
    }
    queue_.insert(queue_.end(), incoming.begin(), incoming.end());
    initial_targets_ += incoming.size();
    return {201, json{{"queued", queue_.size()}}.dump()};
  }

  HttpReply query_records(std::optional<std::string_view> kind_filter = std::nullopt) const {
    std::lock_guard lock(mutex_);
    std::optional<RecordKind> kind;
    if (kind_filter) {
      kind = record_kind_from_string(*kind_filter);
      if (!kind) return {400, json{{"error", "unknown record kind"}, {"field", "kind"}}.dump()};
    }
    json arr = json::array();
    for (const auto& r : records_) {
      if (!kind || r.kind == *kind) arr.push_back(to_json(r));
    }
    return {200, json{{"records", std::move(arr)}}.dump()};
  }

  /// Routes a request the way the HTTP front end does.
  HttpReply dispatch(std::string_view method, std::string_view path, std::string_view body,
                     std::optional<std::string_view> kind_query = std::nullopt) {
    if (method == "POST" && path == "/api/telemetry") return handle_telemetry(body);
    if (method == "POST" && path == "/api/lock") return handle_lock_report(body);
    if (method == "POST" && path == "/api/crash") return handle_crash_report(body);
    if (method == "POST" && path == "/api/seed") return handle_seed(body);
    if (method == "GET" && path == "/api/records") return query_records(kind_query);
    return {404, json{{"error", "no such route"}}.dump()};
  }

  /// Moves a queued target; returns false when the id is not queued.
  bool update_target_position(std::string_view target_id, const Vec3& position) {
    std::lock_guard lock(mutex_);
    auto it = std::ranges::find(queue_, target_id, &TargetAssignment::target_id);
    if (it == queue_.end()) return false;
    it->position = position;
    return true;
  }

  std::vector<MissionRecord> records() const {
    std::lock_guard lock(mutex_);
    return records_;
  }
  std::vector<TargetAssignment> queue() const {
    std::lock_guard lock(mutex_);
    return queue_;
  }
  std::size_t queue_length() const {
    std::lock_guard lock(mutex_);
    return queue_.size();
  }
  std::size_t initial_targets() const {
    std::lock_guard lock(mutex_);
    return initial_targets_;
  }
  std::size_t locks_recorded() const {
    std::lock_guard lock(mutex_);
    return locks_;
  }
  std::size_t request_count() const {
    std::lock_guard lock(mutex_);
    return requests_;
  }

  static std::vector<TargetAssignment> decode_targets(std::string_view bytes) {
    const json j = wire::parse(bytes);
    const json& arr = wire::field(j, "targets");
    if (!arr.is_array()) throw DecodeError("targets", "expected an array");
    std::vector<TargetAssignment> out;
    for (const auto& item : arr) {
      if (!item.is_object()) throw DecodeError("targets", "expected objects");
      out.push_back({wire::string(item, "target_id"), wire::vec3(item, "position"), false});
    }
    return out;
  }

 private:
  static HttpReply bad_request(const DecodeError& e) {
    return {400, json{{"error", e.what()}, {"field", e.field()}}.dump()};
  }

  std::int64_t append(RecordKind kind, json body) {
    const std::int64_t id = static_cast<std::int64_t>(records_.size()) + 1;
    records_.push_back(MissionRecord{id, kind, clock_(), std::move(body)});
    return id;
  }

  mutable std::mutex mutex_;
  std::vector<TargetAssignment> queue_;
  std::size_t initial_targets_ = 0;
  std::vector<MissionRecord> records_;
  std::size_t locks_ = 0;
  std::size_t requests_ = 0;
  Clock clock_;
};

}  // namespace interceptor
