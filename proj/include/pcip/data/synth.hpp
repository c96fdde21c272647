#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pcip/data/types.hpp"
#include "pcip/rng.hpp"

// Synthetic scenario generator. Each channel blends an uninformative baseline
// with a label-dependent signal, weighted by the channel's strength:
//   bbox   - sign of the horizontal walking velocity
//   pose   - lateral keypoint drift within the bounding box
//   speed  - shifted driver-action distribution (decelerate/stop vs keep going)
//   vector features - designated coordinate 0 offset by +/- strength
//   image features  - bright blob placed on or off a fixed road stripe
// Strength 0 leaves the channel pure noise; the label never leaks elsewhere.

namespace pcip::data {

namespace detail {

// 18 keypoints as (x,y) fractions of the bounding box
inline const std::array<std::array<double, 2>, 18>& skeleton_fractions() {
  static const std::array<std::array<double, 2>, 18> k = {{
      {0.50, 0.06}, {0.50, 0.16}, {0.35, 0.18}, {0.30, 0.32}, {0.28, 0.45},
      {0.65, 0.18}, {0.70, 0.32}, {0.72, 0.45}, {0.42, 0.50}, {0.40, 0.70},
      {0.38, 0.92}, {0.58, 0.50}, {0.60, 0.70}, {0.62, 0.92}, {0.46, 0.04},
      {0.54, 0.04}, {0.42, 0.07}, {0.58, 0.07},
  }};
  return k;
}

inline std::string padded_id(std::int64_t i) {
  std::string digits = std::to_string(i);
  return "track_" + std::string(5 - std::min<std::size_t>(5, digits.size()), '0') + digits;
}

// driver-action distributions: crossing correlates with the driver yielding
inline const std::array<double, 5>& action_dist_positive() {
  static const std::array<double, 5> d = {0.35, 0.20, 0.05, 0.30, 0.10};
  return d;
}
inline const std::array<double, 5>& action_dist_negative() {
  static const std::array<double, 5> d = {0.05, 0.15, 0.35, 0.10, 0.35};
  return d;
}

inline RawTensor make_vector_features(Rng& rng, std::int64_t L, std::int64_t d,
                                      double strength, int dir, double sigma) {
  RawTensor t;
  t.dims = {L, d};
  t.values.resize(static_cast<std::size_t>(L * d));
  for (std::int64_t f = 0; f < L; ++f) {
    for (std::int64_t j = 0; j < d; ++j) {
      double v = sigma * rng.normal();
      if (j == 0) v += strength * dir;
      t.values[static_cast<std::size_t>(f * d + j)] = v;
    }
  }
  return t;
}

inline RawTensor make_image_features(Rng& rng, std::int64_t L, std::int64_t H,
                                     std::int64_t W, std::int64_t C, double strength,
                                     int label, double sigma) {
  RawTensor t;
  t.dims = {L, H, W, C};
  t.values.assign(static_cast<std::size_t>(L * H * W * C), 0.0);
  const std::int64_t stripe_cx = W / 2;
  // label 1 puts the blob on the stripe; label 0 puts it a third of the image away
  const double cx_label = static_cast<double>(label == 1 ? stripe_cx : stripe_cx + W / 3);
  const double cx_rand = rng.uniform(1.0, static_cast<double>(W - 2));
  const double cx_base = strength * cx_label + (1.0 - strength) * cx_rand;
  const double cy_base = static_cast<double>(H) / 2.0;
  auto at = [&](std::int64_t f, std::int64_t y, std::int64_t x, std::int64_t c) -> double& {
    return t.values[static_cast<std::size_t>(((f * H + y) * W + x) * C + c)];
  };
  for (std::int64_t f = 0; f < L; ++f) {
    for (std::int64_t y = 0; y < H; ++y)
      for (std::int64_t dx = -1; dx <= 1; ++dx) {
        const std::int64_t x = stripe_cx + dx;
        if (x >= 0 && x < W) at(f, y, x, 0) += 0.5;
      }
    const std::int64_t cx = std::clamp<std::int64_t>(
        static_cast<std::int64_t>(std::lround(cx_base + sigma * 1.5 * rng.normal())), 1,
        W - 2);
    const std::int64_t cy = std::clamp<std::int64_t>(
        static_cast<std::int64_t>(std::lround(cy_base + sigma * 1.5 * rng.normal())), 1,
        H - 2);
    for (std::int64_t dy = -1; dy <= 1; ++dy)
      for (std::int64_t dx = -1; dx <= 1; ++dx) at(f, cy + dy, cx + dx, 0) += 0.5;
    for (std::int64_t y = 0; y < H; ++y)
      for (std::int64_t x = 0; x < W; ++x)
        for (std::int64_t c = 0; c < C; ++c) {
          double& v = at(f, y, x, c);
          v = std::clamp(v + sigma * 0.15 * rng.normal(), 0.0, 1.0);
        }
  }
  return t;
}

}  // namespace detail

inline std::vector<TrackRecord> synth_generate(const SynthConfig& cfg) {
  validate(cfg);
  Rng rng(cfg.seed);
  std::vector<TrackRecord> tracks;
  tracks.reserve(static_cast<std::size_t>(cfg.n_samples));
  const std::int64_t L = cfg.track_len;
  for (std::int64_t i = 0; i < cfg.n_samples; ++i) {
    TrackRecord t;
    t.track_id = detail::padded_id(i);
    t.label = rng.bernoulli(cfg.positive_rate) ? 1 : 0;
    const int dir = t.label == 1 ? 1 : -1;
    t.event_frame = (L - 1) + cfg.tte_lo +
                    static_cast<std::int64_t>(rng.uniform_int(
                        static_cast<std::uint64_t>(cfg.tte_hi - cfg.tte_lo + 1)));
    t.frame_rate = cfg.frame_rate;
    t.local_ref = t.track_id + ".local.bin";
    t.global_ref = t.track_id + ".global.bin";

    const double w0 = 30.0 + rng.uniform() * 20.0;
    const double h0 = 60.0 + rng.uniform() * 30.0;
    const double x0 = cfg.frame_w * (0.25 + 0.4 * rng.uniform());
    const double y0 = cfg.frame_h * (0.30 + 0.2 * rng.uniform());
    const double v_base = 3.0;
    const double v = v_base * (cfg.bbox_strength * dir +
                               (1.0 - cfg.bbox_strength) * rng.uniform(-1.0, 1.0));
    const double drift_frac =
        0.35 * (cfg.pose_strength * dir +
                (1.0 - cfg.pose_strength) * rng.uniform(-1.0, 1.0));
    const auto& skel = detail::skeleton_fractions();
    const auto& dpos = detail::action_dist_positive();
    const auto& dneg = detail::action_dist_negative();
    const auto& dlab = t.label == 1 ? dpos : dneg;

    for (std::int64_t f = 0; f < L; ++f) {
      FrameObs obs;
      const double jitter_x = cfg.noise_sigma * 2.0 * rng.normal();
      const double jitter_y = cfg.noise_sigma * 1.0 * rng.normal();
      double xt = x0 + v * static_cast<double>(f) + jitter_x;
      double yt = y0 + jitter_y;
      xt = std::clamp(xt, 1.0, static_cast<double>(cfg.frame_w) - w0 - 1.0);
      yt = std::clamp(yt, 1.0, static_cast<double>(cfg.frame_h) - h0 - 1.0);
      obs.bbox = {xt, yt, xt + w0, yt + h0};

      std::array<double, 5> mix;
      for (std::size_t a = 0; a < 5; ++a) {
        mix[a] = cfg.speed_strength * dlab[a] + (1.0 - cfg.speed_strength) * 0.2;
      }
      obs.driver_action = static_cast<int>(rng.categorical(mix));

      if (rng.uniform() >= 0.05) {  // 5% of frames lose the pose (occlusion)
        obs.pose_present = true;
        obs.pose.resize(36);
        const double progress = L > 1 ? static_cast<double>(f) / static_cast<double>(L - 1) : 0.0;
        const double drift = drift_frac * w0 * progress;
        for (std::size_t k = 0; k < skel.size(); ++k) {
          obs.pose[2 * k] = xt + skel[k][0] * w0 + drift + cfg.noise_sigma * 2.0 * rng.normal();
          obs.pose[2 * k + 1] = yt + skel[k][1] * h0 + cfg.noise_sigma * 2.0 * rng.normal();
        }
      }
      t.frames.push_back(std::move(obs));
    }

    if (cfg.kind == FeatureKind::kVector) {
      t.local_feat = detail::make_vector_features(rng, L, cfg.feature_dim,
                                                  cfg.local_strength, dir, cfg.noise_sigma);
      t.global_feat = detail::make_vector_features(rng, L, cfg.feature_dim,
                                                   cfg.global_strength, dir, cfg.noise_sigma);
    } else {
      t.local_feat = detail::make_image_features(rng, L, cfg.img_h, cfg.img_w, cfg.img_c,
                                                 cfg.local_strength, t.label, cfg.noise_sigma);
      t.global_feat = detail::make_image_features(rng, L, cfg.img_h, cfg.img_w, cfg.img_c,
                                                  cfg.global_strength, t.label, cfg.noise_sigma);
    }
    t.resolved = true;
    tracks.push_back(std::move(t));
  }
  return tracks;
}

inline DatasetMeta meta_for(const SynthConfig& cfg) {
  DatasetMeta m;
  m.kind = cfg.kind;
  m.feature_dim = cfg.kind == FeatureKind::kVector ? cfg.feature_dim : 0;
  if (cfg.kind == FeatureKind::kImage) {
    m.img_h = cfg.img_h;
    m.img_w = cfg.img_w;
    m.img_c = cfg.img_c;
  }
  m.frame_w = cfg.frame_w;
  m.frame_h = cfg.frame_h;
  m.frame_rate = cfg.frame_rate;
  return m;
}

}  // namespace pcip::data
