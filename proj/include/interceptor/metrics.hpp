#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "interceptor/bus.hpp"
#include "interceptor/event_log.hpp"
#include "interceptor/payload.hpp"

namespace interceptor {

struct ConfusionCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
};

struct DetectionMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

class MetricsError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

inline DetectionMetrics confusion_metrics(const ConfusionCounts& c) {
  if (c.tp < 0 || c.fp < 0 || c.fn < 0) throw ValidationError("confusion counts must be >= 0");
  if (c.tp + c.fp + c.fn == 0) throw MetricsError("metrics undefined for tp = fp = fn = 0");
  if (c.tp == 0) return {};
  const auto tp = static_cast<double>(c.tp);
  return {tp / (tp + static_cast<double>(c.fp)), tp / (tp + static_cast<double>(c.fn)),
          2.0 * tp / (2.0 * tp + static_cast<double>(c.fp) + static_cast<double>(c.fn))};
}

inline double round_to(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::round(value * scale) / scale;
}

inline json to_json(const DetectionMetrics& m) {
  return {{"precision", round_to(m.precision, 4)}, {"recall", round_to(m.recall, 4)}, {"f1", round_to(m.f1, 4)}};
}

enum class FailureReason { NeverDetected, ContainmentNeverReached, MissionTimeout };

inline std::string_view to_string(FailureReason r) {
  switch (r) {
    case FailureReason::NeverDetected: return "never_detected";
    case FailureReason::ContainmentNeverReached: return "containment_never_reached";
    case FailureReason::MissionTimeout: return "mission_timeout";
  }
  return "?";
}

struct TargetOutcome {
  std::string target_id;
  bool locked = false;
  double time_to_lock = 0.0;  // seconds from /signal/process_image to /lock
  std::optional<FailureReason> reason;
  double max_containment = 0.0;
  std::optional<Tick> signal_tick;
  std::optional<Tick> lock_tick;
};

struct RunReport {
  std::vector<TargetOutcome> targets;
  std::map<std::string, std::size_t> topic_counts;
  std::string terminated_by;
};

inline json to_json(const RunReport& r) {
  json targets = json::array();
  for (const auto& t : r.targets) {
    json o{{"target_id", t.target_id}, {"max_containment", round_to(t.max_containment, 4)}};
    if (t.locked) {
      o["outcome"] = "Locked";
      o["time_to_lock"] = round_to(t.time_to_lock, 4);
    } else {
      o["outcome"] = "Failed";
      o["reason"] = to_string(*t.reason);
    }
    targets.push_back(std::move(o));
  }
  return {{"targets", std::move(targets)}, {"topic_counts", r.topic_counts}, {"terminated_by", r.terminated_by}};
}

/// Maximal runs of offset-message ticks with no gap above one frame. Each run is
/// credited with containment until one frame after its last message, capped at `cutoff`.
inline double max_containment_seconds(const std::vector<Tick>& frame_ticks, Tick frame_ticks_per_period,
                                      std::optional<Tick> cutoff, double dt) {
  double best = 0.0;
  std::size_t i = 0;
  while (i < frame_ticks.size()) {
    std::size_t j = i;
    while (j + 1 < frame_ticks.size() && frame_ticks[j + 1] - frame_ticks[j] <= frame_ticks_per_period) ++j;
    Tick end = frame_ticks[j] + frame_ticks_per_period;
    if (cutoff) end = std::min(end, *cutoff);
    best = std::max(best, static_cast<double>(end - frame_ticks[i]) * dt);
    i = j + 1;
  }
  return best;
}

/// Classifies each scenario target from a complete run log.
inline RunReport summarize_run(const RunLog& log) {
  if (!log.end) throw ValidationError("run log is incomplete: no terminal record");
  const auto& h = log.header;
  const Tick frame_ticks = std::max<Tick>(1, std::llround(h.frame_period / h.dt));

  struct Trace {
    std::optional<Tick> signal;
    std::optional<Tick> lock;
    std::vector<Tick> offsets;
  };
  std::map<std::string, Trace> traces;
  std::optional<std::string> current;  // latest assignment seen on /telemetry/response
  std::optional<std::string> engaged;   // target that image processing was requested for

  RunReport report;
  report.terminated_by = log.end->terminated_by;

  for (const auto& r : log.records) {
    if (r.kind != LogRecord::Kind::Envelope) continue;
    ++report.topic_counts[r.topic];
    if (r.topic == topics::kTelemetryResponse) {
      auto resp = decode_payload<TelemetryResponse>(r.payload);
      if (resp.has_target && !traces[*resp.target_id].lock) current = resp.target_id;
    } else if (r.topic == topics::kProcessImage) {
      if (current) {
        auto& t = traces[*current];
        if (!t.signal) t.signal = r.tick;
        engaged = current;
      }
    } else if (r.topic == topics::kImageMessage) {
      if (engaged) traces[*engaged].offsets.push_back(decode_payload<OffsetMessage>(r.payload).tick);
    } else if (r.topic == topics::kLock) {
      auto lock = decode_payload<LockReport>(r.payload);
      auto& t = traces[lock.target_id];
      if (!t.lock) t.lock = r.tick;
      if (engaged == lock.target_id) engaged.reset();
      if (current == lock.target_id) current.reset();
    }
  }

  for (const auto& id : h.target_ids) {
    const Trace& t = traces[id];
    TargetOutcome out;
    out.target_id = id;
    out.signal_tick = t.signal;
    out.lock_tick = t.lock;
    out.max_containment = max_containment_seconds(t.offsets, frame_ticks, t.lock, h.dt);
    if (t.lock) {
      out.locked = true;
      const Tick from = t.signal.value_or(*t.lock);
      out.time_to_lock = static_cast<double>(*t.lock - from) * h.dt;
    } else if (!t.signal) {
      out.reason = FailureReason::MissionTimeout;
    } else if (t.offsets.empty()) {
      out.reason = FailureReason::NeverDetected;
    } else {
      out.reason = FailureReason::ContainmentNeverReached;
    }
    report.targets.push_back(std::move(out));
  }
  return report;
}

}  // namespace interceptor
