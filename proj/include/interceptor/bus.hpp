#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace interceptor {

using NodeId = std::string;
using Tick = std::int64_t;

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Routing key. Exact string match only, no wildcards.
class Topic {
 public:
  explicit Topic(std::string name) : name_(std::move(name)) {
    if (name_.empty() || name_.front() != '/') {
      throw ProtocolError("malformed topic '" + name_ + "': must begin with '/'");
    }
    for (char c : name_) {
      if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f') {
        throw ProtocolError("malformed topic '" + name_ + "': contains whitespace");
      }
    }
  }

  const std::string& name() const noexcept { return name_; }

  friend bool operator==(const Topic&, const Topic&) = default;
  friend auto operator<=>(const Topic&, const Topic&) = default;

 private:
  std::string name_;
};

namespace topics {
inline constexpr std::string_view kTelemetry = "/telemetry";
inline constexpr std::string_view kTelemetryResponse = "/telemetry/response";
inline constexpr std::string_view kLand = "/land";
inline constexpr std::string_view kProcessImage = "/signal/process_image";
inline constexpr std::string_view kImageMessage = "/image/message";
inline constexpr std::string_view kLock = "/lock";
}  // namespace topics

struct Envelope {
  Topic topic;
  std::string payload;
  NodeId publisher_id;
  std::uint64_t seq = 0;
  Tick tick = 0;

  friend bool operator==(const Envelope&, const Envelope&) = default;
};

struct Subscription {
  NodeId client_id;
  Topic topic;

  friend bool operator==(const Subscription&, const Subscription&) = default;
};

/// In-process publish/subscribe broker with at-most-once, tick-batched delivery.
///
/// `publish` snapshots the subscriber set of the envelope's topic and stages
/// the envelope. `flush` then hands every staged envelope to its recipients'
/// inboxes in (publisher_id, seq) order, so a run is reproducible no matter
/// which node happened to publish first within a tick.
class Broker {
 public:
  Subscription subscribe(const NodeId& client_id, const Topic& topic) {
    ensure_open("subscribe");
    subscribers_[topic].insert(client_id);
    return Subscription{client_id, topic};
  }

  bool unsubscribe(const NodeId& client_id, const Topic& topic) {
    auto it = subscribers_.find(topic);
    if (it == subscribers_.end()) return false;
    bool removed = it->second.erase(client_id) > 0;
    if (it->second.empty()) subscribers_.erase(it);
    return removed;
  }

  bool is_subscribed(const NodeId& client_id, const Topic& topic) const {
    auto it = subscribers_.find(topic);
    return it != subscribers_.end() && it->second.contains(client_id);
  }

  /// Stages the envelope and returns how many clients it will reach.
  std::size_t publish(Envelope envelope) {
    ensure_open("publish");
    auto [last, inserted] = last_seq_.try_emplace(envelope.publisher_id, envelope.seq);
    if (!inserted) {
      if (envelope.seq <= last->second) {
        throw ProtocolError("publisher '" + envelope.publisher_id + "' reused or reordered seq " +
                            std::to_string(envelope.seq));
      }
      last->second = envelope.seq;
    }

    std::vector<NodeId> recipients;
    if (auto it = subscribers_.find(envelope.topic); it != subscribers_.end()) {
      recipients.assign(it->second.begin(), it->second.end());
    }
    const std::size_t count = recipients.size();
    staged_.push_back(Staged{std::move(envelope), std::move(recipients)});
    return count;
  }

  /// Delivers all staged envelopes and returns them in delivery order.
  std::vector<Envelope> flush() {
    std::stable_sort(staged_.begin(), staged_.end(), [](const Staged& a, const Staged& b) {
      if (a.envelope.publisher_id != b.envelope.publisher_id) {
        return a.envelope.publisher_id < b.envelope.publisher_id;
      }
      return a.envelope.seq < b.envelope.seq;
    });
    std::vector<Envelope> delivered;
    delivered.reserve(staged_.size());
    for (auto& s : staged_) {
      for (const auto& client : s.recipients) inboxes_[client].push_back(s.envelope);
      delivered.push_back(std::move(s.envelope));
    }
    staged_.clear();
    return delivered;
  }

  std::vector<Envelope> drain(const NodeId& client_id) {
    auto it = inboxes_.find(client_id);
    if (it == inboxes_.end()) return {};
    std::vector<Envelope> out = std::move(it->second);
    inboxes_.erase(it);
    return out;
  }

  std::size_t pending() const noexcept { return staged_.size(); }

  void shutdown() noexcept { shut_down_ = true; }
  bool is_shut_down() const noexcept { return shut_down_; }

 private:
  struct Staged {
    Envelope envelope;
    std::vector<NodeId> recipients;
  };

  void ensure_open(const char* what) const {
    if (shut_down_) throw ProtocolError(std::string(what) + " after broker shutdown");
  }

  std::map<Topic, std::set<NodeId>> subscribers_;
  std::map<NodeId, std::uint64_t> last_seq_;
  std::map<NodeId, std::vector<Envelope>> inboxes_;
  std::vector<Staged> staged_;
  bool shut_down_ = false;
};

/// Stamps outgoing envelopes with a per-publisher sequence number.
class Publisher {
 public:
  explicit Publisher(NodeId id) : id_(std::move(id)) {}

  std::size_t publish(Broker& broker, std::string_view topic, std::string payload, Tick tick) {
    return broker.publish(Envelope{Topic(std::string(topic)), std::move(payload), id_, next_seq_++, tick});
  }

  const NodeId& id() const noexcept { return id_; }
  std::uint64_t published() const noexcept { return next_seq_; }

 private:
  NodeId id_;
  std::uint64_t next_seq_ = 0;
};

}  // namespace interceptor
