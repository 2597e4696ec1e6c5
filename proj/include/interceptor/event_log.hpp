#pragma once

#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "interceptor/bus.hpp"
#include "interceptor/payload.hpp"

// JSON Lines run log. One header line, then per tick the state transitions
// followed by the delivered envelopes in (publisher, seq) order, then one end line.

namespace interceptor {

struct RunHeader {
  std::uint64_t seed = 0;
  double dt = 0.05;
  double frame_period = 0.1;
  double lock_duration = 10.0;
  double activation_radius = 10.0;
  std::vector<std::string> target_ids;

  friend bool operator==(const RunHeader&, const RunHeader&) = default;
};

struct LogRecord {
  enum class Kind { Envelope, Transition };

  Kind kind = Kind::Envelope;
  Tick tick = 0;
  // Envelope fields.
  std::string topic;
  std::string publisher;
  std::uint64_t seq = 0;
  std::string payload;
  // Transition fields.
  std::string from;
  std::string to;

  static LogRecord envelope(const Envelope& e) {
    LogRecord r;
    r.kind = Kind::Envelope;
    r.tick = e.tick;
    r.topic = e.topic.name();
    r.publisher = e.publisher_id;
    r.seq = e.seq;
    r.payload = e.payload;
    return r;
  }

  static LogRecord transition(Tick tick, std::string from, std::string to) {
    LogRecord r;
    r.kind = Kind::Transition;
    r.tick = tick;
    r.from = std::move(from);
    r.to = std::move(to);
    return r;
  }

  friend bool operator==(const LogRecord&, const LogRecord&) = default;
};

struct RunEnd {
  Tick tick = 0;
  std::string terminated_by;
  std::string error;

  friend bool operator==(const RunEnd&, const RunEnd&) = default;
};

struct RunLog {
  RunHeader header;
  std::vector<LogRecord> records;
  std::optional<RunEnd> end;

  friend bool operator==(const RunLog&, const RunLog&) = default;
};

inline std::string to_jsonl(const RunLog& log) {
  std::string out;
  const auto& h = log.header;
  out += json{{"type", "header"},
              {"seed", h.seed},
              {"dt", h.dt},
              {"frame_period", h.frame_period},
              {"lock_duration", h.lock_duration},
              {"activation_radius", h.activation_radius},
              {"targets", h.target_ids}}
             .dump();
  out += '\n';
  for (const auto& r : log.records) {
    json j;
    if (r.kind == LogRecord::Kind::Envelope) {
      j = {{"type", "envelope"}, {"tick", r.tick},    {"topic", r.topic},
           {"publisher", r.publisher}, {"seq", r.seq}, {"payload", r.payload}};
    } else {
      j = {{"type", "transition"}, {"tick", r.tick}, {"from", r.from}, {"to", r.to}};
    }
    out += j.dump();
    out += '\n';
  }
  if (log.end) {
    json j{{"type", "end"}, {"tick", log.end->tick}, {"terminated_by", log.end->terminated_by}};
    if (!log.end->error.empty()) j["error"] = log.end->error;
    out += j.dump();
    out += '\n';
  }
  return out;
}

/// Parses a JSONL run log. A missing end line is accepted here; consumers that
/// need a complete run check `end` themselves.
inline RunLog parse_jsonl(std::string_view text) {
  RunLog log;
  bool have_header = false;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = wire::parse(line);
      const std::string type = wire::string(j, "type");
      if (type == "header") {
        auto& h = log.header;
        h.seed = wire::field(j, "seed").get<std::uint64_t>();
        h.dt = wire::number(j, "dt");
        h.frame_period = wire::number(j, "frame_period");
        h.lock_duration = wire::number(j, "lock_duration");
        h.activation_radius = wire::number(j, "activation_radius");
        h.target_ids = wire::field(j, "targets").get<std::vector<std::string>>();
        have_header = true;
      } else if (type == "envelope") {
        LogRecord r;
        r.kind = LogRecord::Kind::Envelope;
        r.tick = wire::integer(j, "tick");
        r.topic = wire::string(j, "topic");
        r.publisher = wire::string(j, "publisher");
        r.seq = static_cast<std::uint64_t>(wire::integer(j, "seq"));
        r.payload = wire::string(j, "payload");
        log.records.push_back(std::move(r));
      } else if (type == "transition") {
        log.records.push_back(
            LogRecord::transition(wire::integer(j, "tick"), wire::string(j, "from"), wire::string(j, "to")));
      } else if (type == "end") {
        RunEnd end{wire::integer(j, "tick"), wire::string(j, "terminated_by"), {}};
        if (j.contains("error")) end.error = wire::string(j, "error");
        log.end = std::move(end);
      } else {
        throw DecodeError("type", "unknown record type '" + type + "'");
      }
    } catch (const DecodeError& e) {
      throw DecodeError(e.field(), std::string("line ") + std::to_string(line_no) + ": " + e.what());
    } catch (const json::exception& e) {
      throw DecodeError("<line>", std::string("line ") + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_header) throw DecodeError("header", "run log has no header line");
  return log;
}

}  // namespace interceptor
