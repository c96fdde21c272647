#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "pcip/data/types.hpp"
#include "pcip/errors.hpp"
#include "pcip/rng.hpp"

namespace pcip::data {

/// Window stride for a given length and fractional overlap; never below 1.
/// Rounds half-down so overlap 0.8 at T=16 gives stride 3, not 4.
inline std::int64_t window_stride(std::int64_t window_len, double overlap) {
  if (window_len < 1) throw ContractError("window_stride: window_len must be >= 1");
  if (overlap < 0.0 || overlap >= 1.0) {
    throw ConfigError("window_stride: overlap must lie in [0,1)");
  }
  const double raw = (1.0 - overlap) * static_cast<double>(window_len);
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(raw - 0.5)));
}

struct WindowingResult {
  std::vector<SampleWindow> windows;
  std::int64_t skipped_short = 0;  // tracks shorter than one window
};

namespace detail {

inline RawTensor slice_rows(const RawTensor& t, std::int64_t start, std::int64_t count,
                            const std::string& what, const std::string& track_id) {
  if (t.empty() || t.dims[0] < start + count) {
    throw ContractError("make_windows: " + what + " of track " + track_id +
                        " is missing frames; resolve features first");
  }
  std::int64_t row = 1;
  for (std::size_t i = 1; i < t.dims.size(); ++i) row *= t.dims[i];
  RawTensor out;
  out.dims = t.dims;
  out.dims[0] = count;
  out.values.assign(t.values.begin() + static_cast<std::ptrdiff_t>(start * row),
                    t.values.begin() + static_cast<std::ptrdiff_t>((start + count) * row));
  return out;
}

}  // namespace detail

/// Cuts every track into fixed-length windows and keeps those whose end falls
/// inside the time-to-event band [tte_lo, tte_hi].
inline WindowingResult make_windows(const std::vector<TrackRecord>& tracks,
                                    std::int64_t window_len, double overlap,
                                    std::int64_t tte_lo = 30, std::int64_t tte_hi = 60) {
  if (tte_lo > tte_hi) throw ConfigError("make_windows: tte_lo must be <= tte_hi");
  const std::int64_t stride = window_stride(window_len, overlap);
  WindowingResult res;
  for (const auto& t : tracks) {
    const std::int64_t L = static_cast<std::int64_t>(t.frames.size());
    if (L < window_len) {
      ++res.skipped_short;
      continue;
    }
    if (!t.resolved) {
      throw ContractError("make_windows: track " + t.track_id +
                          " has unresolved features");
    }
    for (std::int64_t s = 0; s + window_len <= L; s += stride) {
      const std::int64_t end = s + window_len - 1;
      const std::int64_t tte = t.event_frame - end;
      if (tte < tte_lo || tte > tte_hi) continue;

      SampleWindow w;
      w.label = t.label;
      w.track_id = t.track_id;
      w.time_to_event = tte;
      ChannelBundle& ch = w.channels;
      ch.T = window_len;
      ch.pose.dims = {window_len, kPoseRawDim};
      ch.pose.values.assign(static_cast<std::size_t>(window_len * kPoseRawDim), 0.0);
      ch.pose_present.assign(static_cast<std::size_t>(window_len), 0);
      ch.bbox.dims = {window_len, kBBoxDim};
      ch.bbox.values.resize(static_cast<std::size_t>(window_len * kBBoxDim));
      ch.speed.dims = {window_len, kDriverActions};
      ch.speed.values.assign(static_cast<std::size_t>(window_len * kDriverActions), 0.0);
      for (std::int64_t f = 0; f < window_len; ++f) {
        const FrameObs& obs = t.frames[static_cast<std::size_t>(s + f)];
        for (std::int64_t c = 0; c < kBBoxDim; ++c) {
          ch.bbox.values[static_cast<std::size_t>(f * kBBoxDim + c)] =
              obs.bbox[static_cast<std::size_t>(c)];
        }
        if (obs.driver_action < 0 || obs.driver_action >= kDriverActions) {
          throw ValidationError("make_windows: track " + t.track_id +
                                " has driver_action out of range");
        }
        ch.speed.values[static_cast<std::size_t>(f * kDriverActions + obs.driver_action)] = 1.0;
        if (obs.pose_present) {
          if (static_cast<std::int64_t>(obs.pose.size()) != kPoseRawDim) {
            throw ValidationError("make_windows: track " + t.track_id +
                                  " has a pose of the wrong size");
          }
          ch.pose_present[static_cast<std::size_t>(f)] = 1;
          std::copy(obs.pose.begin(), obs.pose.end(),
                    ch.pose.values.begin() +
                        static_cast<std::ptrdiff_t>(f * kPoseRawDim));
        }
      }
      ch.local = detail::slice_rows(t.local_feat, s, window_len, "local features", t.track_id);
      ch.global_ctx =
          detail::slice_rows(t.global_feat, s, window_len, "global features", t.track_id);
      res.windows.push_back(std::move(w));
    }
  }
  return res;
}

/// Scales bbox to frame-relative coordinates and pose to bbox-relative ones,
/// appending a per-frame presence flag (pose column count becomes 37).
/// Idempotent: a window already normalized is returned unchanged.
inline void normalize_window(SampleWindow& w, std::int64_t frame_w, std::int64_t frame_h) {
  if (w.normalized) return;
  if (frame_w < 1 || frame_h < 1) {
    throw ContractError("normalize_window: frame dims must be positive");
  }
  ChannelBundle& ch = w.channels;
  const std::int64_t T = ch.T;
  RawTensor pose_out;
  pose_out.dims = {T, kPoseRawDim + 1};
  pose_out.values.assign(static_cast<std::size_t>(T * (kPoseRawDim + 1)), 0.0);
  for (std::int64_t f = 0; f < T; ++f) {
    double* bb = &ch.bbox.values[static_cast<std::size_t>(f * kBBoxDim)];
    const double bw = bb[2] - bb[0];
    const double bh = bb[3] - bb[1];
    if (!(bw > 0.0) || !(bh > 0.0)) {
      throw ValidationError("normalize_window: track " + w.track_id + " frame " +
                            std::to_string(f) + " has a degenerate bounding box");
    }
    double* po = &pose_out.values[static_cast<std::size_t>(f * (kPoseRawDim + 1))];
    if (ch.pose_present[static_cast<std::size_t>(f)]) {
      const double* pi = &ch.pose.values[static_cast<std::size_t>(f * kPoseRawDim)];
      for (std::int64_t k = 0; k < kPoseRawDim / 2; ++k) {
        po[2 * k] = (pi[2 * k] - bb[0]) / bw;
        po[2 * k + 1] = (pi[2 * k + 1] - bb[1]) / bh;
      }
      po[kPoseRawDim] = 1.0;
    }
    bb[0] /= static_cast<double>(frame_w);
    bb[2] /= static_cast<double>(frame_w);
    bb[1] /= static_cast<double>(frame_h);
    bb[3] /= static_cast<double>(frame_h);
  }
  ch.pose = std::move(pose_out);
  w.normalized = true;
}

inline void normalize_windows(std::vector<SampleWindow>& ws, const DatasetMeta& meta) {
  for (auto& w : ws) normalize_window(w, meta.frame_w, meta.frame_h);
}

enum class SplitMode { kByTrack, kByWindow };

struct SplitResult {
  std::vector<SampleWindow> train, val, test;
};

/// Deterministic split. kByTrack keeps all windows of a track together so no
/// test pedestrian leaks into training.
inline SplitResult split_windows(const std::vector<SampleWindow>& windows,
                                 double train_ratio, double val_ratio, double test_ratio,
                                 std::uint64_t seed, SplitMode mode = SplitMode::kByTrack) {
  for (double r : {train_ratio, val_ratio, test_ratio}) {
    if (r < 0.0) throw ConfigError("split: ratios must be nonnegative");
  }
  if (std::abs(train_ratio + val_ratio + test_ratio - 1.0) > 1e-9) {
    throw ConfigError("split: ratios must sum to 1");
  }
  SplitResult res;
  Rng rng(seed);
  auto cut = [](double r, std::size_t n) {
    return static_cast<std::size_t>(std::floor(r * static_cast<double>(n) + 0.5));
  };
  if (mode == SplitMode::kByWindow) {
    std::vector<std::size_t> idx(windows.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    rng.shuffle(idx);
    const std::size_t n_train = cut(train_ratio, idx.size());
    const std::size_t n_val =
        std::min(idx.size() - n_train, cut(val_ratio, idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const SampleWindow& w = windows[idx[i]];
      if (i < n_train) res.train.push_back(w);
      else if (i < n_train + n_val) res.val.push_back(w);
      else res.test.push_back(w);
    }
    return res;
  }
  std::vector<std::string> track_ids;
  std::unordered_map<std::string, int> bucket;  // 0 train, 1 val, 2 test
  for (const auto& w : windows) {
    if (bucket.emplace(w.track_id, 0).second) track_ids.push_back(w.track_id);
  }
  rng.shuffle(track_ids);
  const std::size_t n_train = cut(train_ratio, track_ids.size());
  const std::size_t n_val =
      std::min(track_ids.size() - n_train, cut(val_ratio, track_ids.size()));
  for (std::size_t i = 0; i < track_ids.size(); ++i) {
    bucket[track_ids[i]] = i < n_train ? 0 : (i < n_train + n_val ? 1 : 2);
  }
  for (const auto& w : windows) {
    switch (bucket[w.track_id]) {
      case 0: res.train.push_back(w); break;
      case 1: res.val.push_back(w); break;
      default: res.test.push_back(w); break;
    }
  }
  return res;
}

}  // namespace pcip::data
