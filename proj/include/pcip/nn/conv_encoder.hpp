#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pcip/nn/dense.hpp"
#include "pcip/nn/init.hpp"
#include "pcip/tensor/conv.hpp"
#include "pcip/tensor/ops.hpp"
#include "pcip/tensor/tensor.hpp"

namespace pcip::nn {

using autodiff::Tensor;

// Small trainable stand-in for a pretrained frame backbone: depth blocks of
// conv(3x3) -> relu -> maxpool(2x2), spatial average, dense head. Consumes a
// clip [T,H,W,C] with T as the conv batch axis, emits one feature row per frame.
class ConvEncoder2D {
 public:
  ConvEncoder2D(std::int64_t in_channels, std::int64_t c_out, std::int64_t depth,
                std::int64_t feature_dim, Rng& rng)
      : in_channels_(in_channels), c_out_(c_out), depth_(depth), feature_dim_(feature_dim),
        head_(c_out, feature_dim, Activation::kNone, rng) {
    if (in_channels < 1 || c_out < 1 || depth < 1 || feature_dim < 1) {
      throw ContractError("ConvEncoder2D: all dims must be positive");
    }
    for (std::int64_t d = 0; d < depth; ++d) {
      const std::int64_t ci = d == 0 ? in_channels : c_out;
      kernels_.push_back(uniform_init(rng, {3, 3, ci, c_out}, 3 * 3 * ci));
      biases_.push_back(zero_init({c_out}));
    }
  }

  std::int64_t in_channels() const { return in_channels_; }
  std::int64_t depth() const { return depth_; }
  std::int64_t feature_dim() const { return feature_dim_; }

  void named_params(const std::string& prefix, ParamMap& out) const {
    for (std::size_t d = 0; d < kernels_.size(); ++d) {
      out.emplace_back(prefix + ".conv" + std::to_string(d) + ".kernel", kernels_[d]);
      out.emplace_back(prefix + ".conv" + std::to_string(d) + ".bias", biases_[d]);
    }
    head_.named_params(prefix + ".head", out);
  }

  /// frames [N,H,W,C] -> [N,feature_dim]; N may be T or B*T.
  Tensor encode_stack(const Tensor& frames) const {
    using namespace autodiff;
    if (frames.rank() != 4 || frames.shape()[3] != in_channels_) {
      throw DimensionError("encode_frames_2d: clip " + shape_str(frames.shape()) +
                           " does not match encoder channels " +
                           std::to_string(in_channels_));
    }
    const std::int64_t min_hw = std::int64_t{1} << depth_;
    if (frames.shape()[1] < min_hw || frames.shape()[2] < min_hw) {
      throw DimensionError("encode_frames_2d: spatial dims of " +
                           shape_str(frames.shape()) + " too small for pooling depth " +
                           std::to_string(depth_));
    }
    Tensor h = frames;
    for (std::size_t d = 0; d < kernels_.size(); ++d) {
      h = maxpool2d(relu(conv2d(h, kernels_[d], biases_[d])), 2, 2);
    }
    return head_.forward_batch(global_avg_pool2d(h));
  }

 private:
  std::int64_t in_channels_;
  std::int64_t c_out_;
  std::int64_t depth_;
  std::int64_t feature_dim_;
  std::vector<Tensor> kernels_;
  std::vector<Tensor> biases_;
  DenseLayer head_;
};

/// clip [T,H,W,C] -> per-frame features [T,feature_dim].
inline Tensor encode_frames_2d(const ConvEncoder2D& enc, const Tensor& clip) {
  if (clip.rank() != 4) {
    throw DimensionError("encode_frames_2d: expected [T,H,W,C], got " +
                         shape_str(clip.shape()));
  }
  return enc.encode_stack(clip);
}

// Clip-level 3D encoder: depth blocks of conv3d(3x3x3) -> relu -> maxpool(2x2x2)
// over the whole [T,H,W,C] volume, then spatio-temporal average and dense head.
// Emits a single vector; there is no per-timestep sequence to attend over.
class ConvEncoder3D {
 public:
  ConvEncoder3D(std::int64_t in_channels, std::int64_t c_out, std::int64_t depth,
                std::int64_t feature_dim, Rng& rng)
      : in_channels_(in_channels), c_out_(c_out), depth_(depth), feature_dim_(feature_dim),
        head_(c_out, feature_dim, Activation::kNone, rng) {
    if (in_channels < 1 || c_out < 1 || depth < 1 || feature_dim < 1) {
      throw ContractError("ConvEncoder3D: all dims must be positive");
    }
    for (std::int64_t d = 0; d < depth; ++d) {
      const std::int64_t ci = d == 0 ? in_channels : c_out;
      kernels_.push_back(uniform_init(rng, {3, 3, 3, ci, c_out}, 3 * 3 * 3 * ci));
      biases_.push_back(zero_init({c_out}));
    }
  }

  std::int64_t in_channels() const { return in_channels_; }
  std::int64_t depth() const { return depth_; }
  std::int64_t feature_dim() const { return feature_dim_; }

  void named_params(const std::string& prefix, ParamMap& out) const {
    for (std::size_t d = 0; d < kernels_.size(); ++d) {
      out.emplace_back(prefix + ".conv" + std::to_string(d) + ".kernel", kernels_[d]);
      out.emplace_back(prefix + ".conv" + std::to_string(d) + ".bias", biases_[d]);
    }
    head_.named_params(prefix + ".head", out);
  }

  /// clips [B,T,H,W,C] -> [B,feature_dim].
  Tensor encode_batch(const Tensor& clips) const {
    using namespace autodiff;
    if (clips.rank() != 5 || clips.shape()[4] != in_channels_) {
      throw DimensionError("encode_clip_3d: clips " + shape_str(clips.shape()) +
                           " do not match encoder channels " +
                           std::to_string(in_channels_));
    }
    const std::int64_t min_dim = std::int64_t{1} << depth_;
    if (clips.shape()[1] < min_dim || clips.shape()[2] < min_dim ||
        clips.shape()[3] < min_dim) {
      throw DimensionError("encode_clip_3d: dims of " + shape_str(clips.shape()) +
                           " too small for pooling depth " + std::to_string(depth_));
    }
    Tensor h = clips;
    for (std::size_t d = 0; d < kernels_.size(); ++d) {
      h = maxpool3d(relu(conv3d(h, kernels_[d], biases_[d])), 2, 2, 2);
    }
    return head_.forward_batch(global_avg_pool3d(h));
  }

 private:
  std::int64_t in_channels_;
  std::int64_t c_out_;
  std::int64_t depth_;
  std::int64_t feature_dim_;
  std::vector<Tensor> kernels_;
  std::vector<Tensor> biases_;
  DenseLayer head_;
};

/// clip [T,H,W,C] -> one clip-level feature vector [feature_dim].
inline Tensor encode_clip_3d(const ConvEncoder3D& enc, const Tensor& clip) {
  using namespace autodiff;
  if (clip.rank() != 4) {
    throw DimensionError("encode_clip_3d: expected [T,H,W,C], got " +
                         shape_str(clip.shape()));
  }
  const auto& s = clip.shape();
  Tensor batched = enc.encode_batch(reshape(clip, {1, s[0], s[1], s[2], s[3]}));
  return reshape(batched, {enc.feature_dim()});
}

}  // namespace pcip::nn
