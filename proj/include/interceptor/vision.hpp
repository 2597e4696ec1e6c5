#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>

#include "interceptor/rng.hpp"
#include "interceptor/world.hpp"

namespace interceptor {

struct VisionParams {
  double p_detect = 0.5;
  int detector_latency_frames = 2;
  double track_window = 0.25;
  double p_track_dropout = 0.0;

  void validate() const {
    if (!(p_detect >= 0.0 && p_detect <= 1.0)) throw ValidationError("vision.p_detect must lie in [0, 1]");
    if (detector_latency_frames < 0) throw ValidationError("vision.detector_latency_frames must be >= 0");
    if (!(track_window > 0.0)) throw ValidationError("vision.track_window must be > 0");
    if (!(p_track_dropout >= 0.0 && p_track_dropout <= 1.0)) {
      throw ValidationError("vision.p_track_dropout must lie in [0, 1]");
    }
  }

  friend bool operator==(const VisionParams&, const VisionParams&) = default;
};

enum class PipelineMode { Detecting, Tracking };

struct PipelineState {
  PipelineMode mode = PipelineMode::Detecting;
  std::optional<ImagePoint> last_known;
  // Frames of in-frame presence still required before the detector may report.
  int pending_latency = 0;
  bool active = false;
};

/// The "X, Y" offset of the target from the image center, published on /image/message.
struct OffsetMessage {
  double x = 0.0;
  double y = 0.0;
  std::int64_t tick = 0;

  friend bool operator==(const OffsetMessage&, const OffsetMessage&) = default;
};

inline PipelineState arm(PipelineState state, const VisionParams& params) {
  state.active = true;
  state.mode = PipelineMode::Detecting;
  state.last_known.reset();
  state.pending_latency = params.detector_latency_frames;
  return state;
}

inline PipelineState disarm(PipelineState state) {
  state.active = false;
  state.mode = PipelineMode::Detecting;
  state.last_known.reset();
  state.pending_latency = 0;
  return state;
}

/// Full-frame detector. The latency counter is part of the pipeline state: it
/// only runs down over consecutive frames with the target in view.
inline std::optional<ImagePoint> detector_attempt(PipelineState& state, const std::optional<ImagePoint>& truth,
                                                  const VisionParams& params, RandomStream& rng) {
  if (!truth) {
    state.pending_latency = params.detector_latency_frames;
    return std::nullopt;
  }
  if (state.pending_latency > 0) {
    --state.pending_latency;
    return std::nullopt;
  }
  if (!rng.bernoulli(params.p_detect)) return std::nullopt;
  return truth;
}

/// Windowed tracker around the last known position.
inline std::optional<ImagePoint> tracker_update(const ImagePoint& last_known, const std::optional<ImagePoint>& truth,
                                                const VisionParams& params, RandomStream& rng) {
  if (!truth) return std::nullopt;
  if (std::hypot(truth->u - last_known.u, truth->v - last_known.v) > params.track_window) return std::nullopt;
  if (rng.bernoulli(params.p_track_dropout)) return std::nullopt;
  return truth;
}

inline std::pair<PipelineState, std::optional<OffsetMessage>> process_frame(PipelineState state,
                                                                            const std::optional<ImagePoint>& truth,
                                                                            const VisionParams& params,
                                                                            RandomStream& rng, std::int64_t tick) {
  if (!state.active) return {std::move(state), std::nullopt};

  if (state.mode == PipelineMode::Detecting) {
    auto hit = detector_attempt(state, truth, params, rng);
    if (!hit) return {std::move(state), std::nullopt};
    state.mode = PipelineMode::Tracking;
    state.last_known = hit;
    return {std::move(state), OffsetMessage{hit->u, hit->v, tick}};
  }

  auto hit = tracker_update(*state.last_known, truth, params, rng);
  if (!hit) {
    state.mode = PipelineMode::Detecting;
    state.last_known.reset();
    state.pending_latency = params.detector_latency_frames;
    return {std::move(state), std::nullopt};
  }
  state.last_known = hit;
  return {std::move(state), OffsetMessage{hit->u, hit->v, tick}};
}

}  // namespace interceptor
