#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pcip/errors.hpp"

namespace pcip::data {

/// Plain dense tensor for dataset payloads; decoupled from the autodiff graph.
struct RawTensor {
  std::vector<std::int64_t> dims;
  std::vector<double> values;

  bool empty() const { return dims.empty(); }
  std::int64_t numel() const {
    std::int64_t n = dims.empty() ? 0 : 1;
    for (auto d : dims) n *= d;
    return n;
  }
};

enum class FeatureKind { kVector, kImage };

inline const char* feature_kind_name(FeatureKind k) {
  return k == FeatureKind::kVector ? "vector" : "image";
}

inline FeatureKind parse_feature_kind(const std::string& s) {
  if (s == "vector") return FeatureKind::kVector;
  if (s == "image") return FeatureKind::kImage;
  throw ConfigError("unknown feature kind '" + s + "'; expected vector or image");
}

/// Per-frame observation of one pedestrian track.
struct FrameObs {
  std::array<double, 4> bbox{};  // x_t, y_t, x_b, y_b in pixels
  std::vector<double> pose;      // 36 reals (18 keypoints), empty when absent
  bool pose_present = false;
  int driver_action = 0;  // 0 stopped, 1 slow, 2 fast, 3 decelerating, 4 accelerating
};

constexpr std::int64_t kPoseRawDim = 36;
constexpr std::int64_t kBBoxDim = 4;
constexpr std::int64_t kDriverActions = 5;

struct TrackRecord {
  std::string track_id;
  std::vector<FrameObs> frames;
  std::int64_t event_frame = 0;  // index of the C/NC event, past the last frame
  int label = 0;                 // 0 not crossing, 1 crossing
  double frame_rate = 30.0;
  std::string local_ref;   // sidecar path, relative to the manifest
  std::string global_ref;
  int target_mask_id = -1;  // reserved for real exports; unused by synthetic data

  // sidecar payloads; empty until resolved
  RawTensor local_feat;    // [L,d] or [L,H,W,C]
  RawTensor global_feat;
  bool resolved = false;
};

/// The five aligned per-window channels consumed by the fusion models.
struct ChannelBundle {
  std::int64_t T = 0;
  RawTensor pose;    // [T,36] raw; [T,37] after normalization (presence flag appended)
  std::vector<std::uint8_t> pose_present;  // per-frame availability
  RawTensor bbox;    // [T,4]
  RawTensor speed;   // [T,5] one-hot driver action
  RawTensor local;   // [T,d] or [T,H,W,C]
  RawTensor global_ctx;  // same shape family as local
};

struct SampleWindow {
  ChannelBundle channels;
  int label = 0;
  std::string track_id;
  std::int64_t time_to_event = 0;  // frames between window end and the event
  bool normalized = false;
};

/// Dataset-level header stored on the first manifest line.
struct DatasetMeta {
  int version = 1;
  FeatureKind kind = FeatureKind::kVector;
  std::int64_t feature_dim = 8;               // vector mode
  std::int64_t img_h = 0, img_w = 0, img_c = 0;  // image mode
  std::int64_t frame_w = 640, frame_h = 480;
  double frame_rate = 30.0;
  double local_context_scale = 1.5;  // provenance only; cropping is upstream
};

struct SynthConfig {
  std::int64_t n_samples = 64;  // number of tracks
  double positive_rate = 0.5;
  double pose_strength = 0.0;
  double bbox_strength = 0.0;
  double speed_strength = 0.0;
  double local_strength = 0.0;
  double global_strength = 0.0;
  double noise_sigma = 0.1;
  FeatureKind kind = FeatureKind::kVector;
  std::int64_t feature_dim = 8;
  std::int64_t img_h = 12, img_w = 12, img_c = 1;
  std::int64_t track_len = 16;
  std::int64_t frame_w = 640, frame_h = 480;
  double frame_rate = 30.0;
  std::int64_t tte_lo = 30, tte_hi = 60;
  std::uint64_t seed = 0;
};

inline void validate(const SynthConfig& cfg) {
  auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (cfg.n_samples < 0) throw ConfigError("synth: n_samples must be >= 0");
  if (!in01(cfg.positive_rate)) throw ConfigError("synth: positive_rate must lie in [0,1]");
  for (double s : {cfg.pose_strength, cfg.bbox_strength, cfg.speed_strength,
                   cfg.local_strength, cfg.global_strength}) {
    if (!in01(s)) throw ConfigError("synth: channel strengths must lie in [0,1]");
  }
  if (cfg.noise_sigma < 0.0) throw ConfigError("synth: noise_sigma must be >= 0");
  if (cfg.track_len < 1) throw ConfigError("synth: track_len must be >= 1");
  if (cfg.kind == FeatureKind::kVector && cfg.feature_dim < 1) {
    throw ConfigError("synth: feature_dim must be >= 1 in vector mode");
  }
  if (cfg.kind == FeatureKind::kImage &&
      (cfg.img_h < 4 || cfg.img_w < 4 || cfg.img_c < 1)) {
    throw ConfigError("synth: image dims must be at least 4x4x1");
  }
  if (cfg.frame_w < 1 || cfg.frame_h < 1) throw ConfigError("synth: frame dims must be positive");
  if (cfg.tte_lo < 1 || cfg.tte_hi < cfg.tte_lo) {
    throw ConfigError("synth: tte range must satisfy 1 <= lo <= hi");
  }
}

}  // namespace pcip::data
