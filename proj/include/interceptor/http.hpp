#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "httplib.h"

#include "interceptor/payload.hpp"
#include "interceptor/proxy.hpp"
#include "interceptor/server.hpp"

namespace interceptor {

/// Loopback HTTP front end for a MissionServer.
class HttpMissionServer {
 public:
  explicit HttpMissionServer(MissionServer& core) : core_(core) {
    server_.set_tcp_nodelay(true);
    auto route = [this](std::string path) {
      server_.Post(path, [this, path](const httplib::Request& req, httplib::Response& res) {
        reply(res, core_.dispatch("POST", path, req.body));
      });
    };
    route("/api/telemetry");
    route("/api/lock");
    route("/api/crash");
    route("/api/seed");
    server_.Get("/api/records", [this](const httplib::Request& req, httplib::Response& res) {
      std::optional<std::string> kind;
      if (req.has_param("kind")) kind = req.get_param_value("kind");
      reply(res, core_.query_records(kind ? std::optional<std::string_view>(*kind) : std::nullopt));
    });
  }

  HttpMissionServer(const HttpMissionServer&) = delete;
  HttpMissionServer& operator=(const HttpMissionServer&) = delete;

  ~HttpMissionServer() { stop(); }

  /// Binds and starts serving on a background thread. Port 0 picks a free port.
  int start(int port = 0, const std::string& host = "127.0.0.1") {
    if (port == 0) {
      port_ = server_.bind_to_any_port(host);
    } else {
      port_ = server_.bind_to_port(host, port) ? port : -1;
    }
    if (port_ < 0) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return port_;
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  /// Blocks until the server is stopped from elsewhere.
  void wait() {
    if (thread_.joinable()) thread_.join();
  }

  int port() const noexcept { return port_; }

 private:
  static void reply(httplib::Response& res, const HttpReply& r) {
    res.status = r.status;
    res.set_content(r.body, "application/json");
  }

  MissionServer& core_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = -1;
};

class HttpTransport final : public Transport {
 public:
  HttpTransport(const std::string& host, int port) : client_(host, port) {
    client_.set_keep_alive(true);
    client_.set_tcp_nodelay(true);
    client_.set_connection_timeout(std::chrono::seconds(2));
    client_.set_read_timeout(std::chrono::seconds(5));
  }

  TransportResult post(std::string_view path, std::string_view body) override {
    auto res = client_.Post(std::string(path), body.data(), body.size(), "application/json");
    if (!res) return {false, 0, {}, httplib::to_string(res.error())};
    return {true, res->status, res->body, {}};
  }

 private:
  httplib::Client client_;
};

class HarnessError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LatencyReport {
  std::size_t count = 0;
  std::size_t payload_bytes = 0;
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  double mean_ms = 0.0;
  double min_ms = 0.0;
  double max_ms = 0.0;
};

inline json to_json(const LatencyReport& r) {
  return {{"count", r.count}, {"payload_bytes", r.payload_bytes}, {"p50_ms", r.p50_ms}, {"p95_ms", r.p95_ms},
          {"mean_ms", r.mean_ms},  {"min_ms", r.min_ms},        {"max_ms", r.max_ms}};
}

/// A telemetry request body padded with an ignored field to exactly `bytes` bytes.
inline std::string padded_telemetry_body(std::size_t bytes, std::size_t index) {
  TelemetryRequest req{"latency-probe", static_cast<double>(index), Vec3{1.0, 2.0, 10.0}, "SEARCH"};
  json j = to_json(req);
  j["padding"] = "";
  const std::size_t base = j.dump().size();
  if (bytes < base) {
    throw ValidationError("payload_size must be >= " + std::to_string(base) + " bytes");
  }
  j["padding"] = std::string(bytes - base, 'x');
  return j.dump();
}

/// Nearest-rank percentile over an already sorted sample.
inline double percentile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return 0.0;
  const auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(sorted.size())));
  return sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
}

/// Issues `n_requests` telemetry POSTs against a running server and reports
/// round-trip times. Any failed request aborts the whole measurement.
inline LatencyReport latency_harness(std::size_t payload_size, std::size_t n_requests, int port,
                                     const std::string& host = "127.0.0.1") {
  if (n_requests == 0) throw ValidationError("n_requests must be > 0");
  httplib::Client client(host, port);
  client.set_keep_alive(true);
  client.set_tcp_nodelay(true);
  client.set_connection_timeout(std::chrono::seconds(2));
  client.set_read_timeout(std::chrono::seconds(5));

  std::vector<double> samples;
  samples.reserve(n_requests);
  for (std::size_t i = 0; i < n_requests; ++i) {
    const std::string body = padded_telemetry_body(payload_size, i);
    const auto start = std::chrono::steady_clock::now();
    auto res = client.Post("/api/telemetry", body, "application/json");
    const auto stop = std::chrono::steady_clock::now();
    if (!res) {
      throw HarnessError("request " + std::to_string(i) + " failed: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
      throw HarnessError("request " + std::to_string(i) + " failed: status " + std::to_string(res->status));
    }
    samples.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
  }

  std::ranges::sort(samples);
  LatencyReport report;
  report.count = samples.size();
  report.payload_bytes = payload_size;
  report.p50_ms = percentile(samples, 0.50);
  report.p95_ms = percentile(samples, 0.95);
  report.mean_ms = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(samples.size());
  report.min_ms = samples.front();
  report.max_ms = samples.back();
  return report;
}

}  // namespace interceptor
