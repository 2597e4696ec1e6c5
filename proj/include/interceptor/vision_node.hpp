#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>

#include "interceptor/bus.hpp"
#include "interceptor/payload.hpp"
#include "interceptor/rng.hpp"
#include "interceptor/vision.hpp"

namespace interceptor {

struct VisionConfig {
  NodeId node_id = "vision";
  VisionParams params;
  std::uint64_t seed = 0;
};

/// Image-processing node. Armed by /signal/process_image, terminated by /land.
class VisionNode {
 public:
  VisionNode(Broker& broker, VisionConfig config)
      : config_(std::move(config)), rng_(config_.seed, "vision"), publisher_(config_.node_id) {
    broker.subscribe(config_.node_id, Topic(std::string(topics::kProcessImage)));
    broker.subscribe(config_.node_id, Topic(std::string(topics::kLand)));
  }

  /// `truth` is the ground-truth projection for this tick's camera frame; it is
  /// only consulted when `frame_due` is set.
  std::optional<OffsetMessage> step(Broker& broker, Tick tick, const std::optional<ImagePoint>& truth,
                                    bool frame_due) {
    for (const auto& env : broker.drain(config_.node_id)) {
      if (terminated_) break;
      if (env.topic.name() == topics::kLand) {
        terminated_ = true;
        state_ = disarm(std::move(state_));
      } else if (env.topic.name() == topics::kProcessImage) {
        state_ = arm(std::move(state_), config_.params);
        ++arm_count_;
      }
    }
    if (terminated_ || !frame_due) return std::nullopt;

    auto [next, message] = process_frame(std::move(state_), truth, config_.params, rng_, tick);
    state_ = std::move(next);
    if (message) publisher_.publish(broker, topics::kImageMessage, encode_payload(*message), tick);
    return message;
  }

  const PipelineState& state() const noexcept { return state_; }
  bool terminated() const noexcept { return terminated_; }
  int arm_count() const noexcept { return arm_count_; }
  const NodeId& id() const noexcept { return config_.node_id; }

 private:
  VisionConfig config_;
  RandomStream rng_;
  Publisher publisher_;
  PipelineState state_;
  bool terminated_ = false;
  int arm_count_ = 0;
};

}  // namespace interceptor
