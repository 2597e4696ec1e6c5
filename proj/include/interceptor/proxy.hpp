#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "interceptor/bus.hpp"
#include "interceptor/payload.hpp"
#include "interceptor/server.hpp"

namespace interceptor {

struct TransportResult {
  bool delivered = false;  // false on connection-level failure
  int status = 0;
  std::string body;
  std::string error;

  bool success() const noexcept { return delivered && status >= 200 && status < 300; }
};

/// Request/response channel from the proxy to the mission server.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual TransportResult post(std::string_view path, std::string_view body) = 0;
};

/// Calls the server object directly; used by deterministic simulation runs.
class InProcessTransport final : public Transport {
 public:
  explicit InProcessTransport(MissionServer& server) : server_(server) {}

  TransportResult post(std::string_view path, std::string_view body) override {
    auto reply = server_.dispatch("POST", path, body);
    return {true, reply.status, std::move(reply.body), {}};
  }

 private:
  MissionServer& server_;
};

struct RetryPolicy {
  int telemetry_attempts = 3;
  int lock_attempts = 2;  // initial try plus one retry
  std::chrono::milliseconds backoff{50};
};

struct ProxyConfig {
  NodeId node_id = "proxy";
  RetryPolicy retry;
  // Ticks between a request and the publication of its reply.
  Tick response_delay_ticks = 0;
  // Lock reports spanning fewer ticks are rejected before they are sent.
  std::int64_t min_lock_span_ticks = 0;
  // Backoff hook. Simulation runs leave it empty so no wall time passes.
  std::function<void(std::chrono::milliseconds)> sleep;
};

struct LinkEvent {
  Tick tick = 0;
  std::string what;
};

class ProxyNode {
 public:
  ProxyNode(Broker& broker, Transport& transport, ProxyConfig config = {})
      : transport_(transport), config_(std::move(config)), publisher_(config_.node_id) {
    broker.subscribe(config_.node_id, Topic(std::string(topics::kTelemetry)));
    broker.subscribe(config_.node_id, Topic(std::string(topics::kLock)));
    broker.subscribe(config_.node_id, Topic(std::string(topics::kLand)));
  }

  /// POSTs the request and decodes the reply. After the retry budget is spent
  /// a degraded, target-less reply is returned instead.
  TelemetryResponse forward_telemetry(const TelemetryRequest& req) {
    const std::string body = encode_payload(req);
    std::string last_error;
    for (int attempt = 0; attempt < config_.retry.telemetry_attempts; ++attempt) {
      if (attempt > 0) backoff();
      auto result = send("/api/telemetry", body);
      if (result.success()) {
        try {
          return decode_payload<TelemetryResponse>(result.body);
        } catch (const DecodeError& e) {
          last_error = e.what();
          continue;
        }
      }
      last_error = describe(result);
    }
    log("degraded-link: telemetry failed after " + std::to_string(config_.retry.telemetry_attempts) +
        " attempts: " + last_error);
    TelemetryResponse degraded;
    degraded.degraded = true;
    return degraded;
  }

  bool forward_lock(const LockReport& report) {
    const auto span = report.lock_end_tick - report.lock_start_tick;
    if (span < 0 || span < config_.min_lock_span_ticks || report.target_id.empty()) {
      throw ValidationError("lock report rejected locally: tick span " + std::to_string(span));
    }
    return post_with_retry("/api/lock", encode_payload(report), config_.retry.lock_attempts, "lock");
  }

  bool forward_crash(const CrashReport& report) {
    return post_with_retry("/api/crash", encode_payload(report), config_.retry.lock_attempts, "crash");
  }

  void step(Broker& broker, Tick tick) {
    tick_ = tick;
    if (terminated_) {
      broker.drain(config_.node_id);
      return;
    }
    for (auto& env : broker.drain(config_.node_id)) {
      const auto& topic = env.topic.name();
      if (topic == topics::kLand) {
        terminated_ = true;
        pending_.clear();
        return;
      }
      if (topic == topics::kTelemetry) {
        TelemetryResponse resp;
        try {
          resp = forward_telemetry(decode_payload<TelemetryRequest>(env.payload));
        } catch (const DecodeError& e) {
          log(std::string("dropped malformed telemetry: ") + e.what());
          continue;
        }
        const Tick ready = std::max(tick, last_ready_) + config_.response_delay_ticks;
        last_ready_ = ready;
        pending_.push_back({ready, encode_payload(resp)});
      } else if (topic == topics::kLock) {
        try {
          forward_lock(decode_payload<LockReport>(env.payload));
        } catch (const std::exception& e) {
          log(std::string("lock report not forwarded: ") + e.what());
        }
      }
    }
    while (!pending_.empty() && pending_.front().first <= tick) {
      publisher_.publish(broker, topics::kTelemetryResponse, std::move(pending_.front().second), tick);
      pending_.pop_front();
    }
  }

  bool terminated() const noexcept { return terminated_; }
  std::size_t requests_sent() const noexcept { return requests_sent_; }
  const std::vector<LinkEvent>& link_events() const noexcept { return events_; }
  const NodeId& id() const noexcept { return config_.node_id; }

 private:
  TransportResult send(std::string_view path, const std::string& body) {
    ++requests_sent_;
    return transport_.post(path, body);
  }

  bool post_with_retry(std::string_view path, const std::string& body, int attempts, const char* what) {
    TransportResult result;
    for (int attempt = 0; attempt < attempts; ++attempt) {
      if (attempt > 0) backoff();
      result = send(path, body);
      if (result.success()) return true;
    }
    log(std::string(what) + " report failed: " + describe(result));
    return false;
  }

  void backoff() {
    if (config_.sleep) config_.sleep(config_.retry.backoff);
  }

  static std::string describe(const TransportResult& r) {
    if (!r.delivered) return "transport error: " + r.error;
    return "status " + std::to_string(r.status);
  }

  void log(std::string what) { events_.push_back({tick_, std::move(what)}); }

  Transport& transport_;
  ProxyConfig config_;
  Publisher publisher_;
  std::deque<std::pair<Tick, std::string>> pending_;
  Tick last_ready_ = 0;
  Tick tick_ = 0;
  bool terminated_ = false;
  std::size_t requests_sent_ = 0;
  std::vector<LinkEvent> events_;
};

}  // namespace interceptor
