#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pcip/data/types.hpp"
#include "pcip/errors.hpp"
#include "pcip/fusion/config.hpp"
#include "pcip/nn/attention.hpp"
#include "pcip/nn/conv_encoder.hpp"
#include "pcip/nn/dense.hpp"
#include "pcip/nn/gru.hpp"
#include "pcip/nn/init.hpp"
#include "pcip/rng.hpp"
#include "pcip/tensor/ops.hpp"
#include "pcip/tensor/tensor.hpp"

namespace pcip::fusion {

using autodiff::Tensor;

// Batched model inputs. Sequence channels are packed time-major as [T*B, dim]
// (row t*B+b holds sample b at step t) so each GRU step is one contiguous
// slice. clip3d keeps whole clips per sample: [B,T,H,W,C].
struct BatchInputs {
  std::int64_t B = 0;
  std::int64_t T = 0;
  Tensor pose;
  Tensor bbox;
  Tensor speed;
  Tensor local;
  Tensor global_ctx;
  bool has_global = false;
  Tensor labels;  // [B,1]
};

namespace detail {

inline void expect_dims(const data::RawTensor& t, std::vector<std::int64_t> want,
                        const std::string& what, const std::string& track_id) {
  if (t.dims != want) {
    std::string got = "[";
    for (std::size_t i = 0; i < t.dims.size(); ++i) {
      got += (i ? "," : "") + std::to_string(t.dims[i]);
    }
    got += "]";
    throw ValidationError("batch: " + what + " of window from track " + track_id +
                          " has dims " + got + ", which do not match the model config");
  }
}

}  // namespace detail

/// Packs selected windows into model-ready tensors. Windows must already
/// carry channel dims matching the config (pose normalization included).
inline BatchInputs make_batch(const ModelConfig& cfg, const std::vector<data::SampleWindow>& ws,
                              const std::vector<std::size_t>& idx) {
  if (idx.empty()) throw ContractError("make_batch: empty batch");
  const std::int64_t B = static_cast<std::int64_t>(idx.size());
  const std::int64_t T = cfg.seq_len;
  const bool vector_mode = cfg.visual_encoder == VisualEncoder::kPrecomputed;
  const std::int64_t img_row = cfg.img_h * cfg.img_w * cfg.img_c;
  const std::int64_t vis_row = vector_mode ? cfg.feature_dim : img_row;

  std::vector<double> pose(static_cast<std::size_t>(T * B * cfg.pose_dim));
  std::vector<double> bbox(static_cast<std::size_t>(T * B * cfg.bbox_dim));
  std::vector<double> speed(static_cast<std::size_t>(T * B * cfg.speed_dim));
  const bool clip_mode = cfg.visual_encoder == VisualEncoder::kClip3d;
  std::vector<double> local(static_cast<std::size_t>(T * B * vis_row));
  std::vector<double> global_vals;
  std::vector<double> labels(static_cast<std::size_t>(B));
  bool has_global = true;

  for (std::int64_t b = 0; b < B; ++b) {
    if (idx[static_cast<std::size_t>(b)] >= ws.size()) {
      throw ContractError("make_batch: window index out of range");
    }
    const data::SampleWindow& w = ws[idx[static_cast<std::size_t>(b)]];
    const data::ChannelBundle& ch = w.channels;
    if (ch.T != T) {
      throw ValidationError("batch: window T=" + std::to_string(ch.T) +
                            " does not match model seq_len " + std::to_string(T));
    }
    detail::expect_dims(ch.pose, {T, cfg.pose_dim}, "pose", w.track_id);
    detail::expect_dims(ch.bbox, {T, cfg.bbox_dim}, "bbox", w.track_id);
    detail::expect_dims(ch.speed, {T, cfg.speed_dim}, "speed", w.track_id);
    if (vector_mode) {
      detail::expect_dims(ch.local, {T, cfg.feature_dim}, "local features", w.track_id);
    } else {
      detail::expect_dims(ch.local, {T, cfg.img_h, cfg.img_w, cfg.img_c}, "local images",
                          w.track_id);
    }
    if (ch.global_ctx.empty()) {
      has_global = false;
    } else if (vector_mode) {
      detail::expect_dims(ch.global_ctx, {T, cfg.feature_dim}, "global features", w.track_id);
    } else {
      detail::expect_dims(ch.global_ctx, {T, cfg.img_h, cfg.img_w, cfg.img_c},
                          "global images", w.track_id);
    }
    if (w.label != 0 && w.label != 1) {
      throw ValidationError("batch: track " + w.track_id + " has a non-binary label");
    }
    labels[static_cast<std::size_t>(b)] = static_cast<double>(w.label);

    auto scatter_tm = [&](std::vector<double>& dst, const std::vector<double>& src,
                          std::int64_t row) {
      for (std::int64_t t = 0; t < T; ++t) {
        std::copy(src.begin() + static_cast<std::ptrdiff_t>(t * row),
                  src.begin() + static_cast<std::ptrdiff_t>((t + 1) * row),
                  dst.begin() + static_cast<std::ptrdiff_t>((t * B + b) * row));
      }
    };
    scatter_tm(pose, ch.pose.values, cfg.pose_dim);
    scatter_tm(bbox, ch.bbox.values, cfg.bbox_dim);
    scatter_tm(speed, ch.speed.values, cfg.speed_dim);
    if (clip_mode) {
      std::copy(ch.local.values.begin(), ch.local.values.end(),
                local.begin() + static_cast<std::ptrdiff_t>(b * T * vis_row));
    } else {
      scatter_tm(local, ch.local.values, vis_row);
    }
    if (!ch.global_ctx.empty()) {
      if (global_vals.empty()) global_vals.resize(local.size());
      if (clip_mode) {
        std::copy(ch.global_ctx.values.begin(), ch.global_ctx.values.end(),
                  global_vals.begin() + static_cast<std::ptrdiff_t>(b * T * vis_row));
      } else {
        scatter_tm(global_vals, ch.global_ctx.values, vis_row);
      }
    }
  }

  BatchInputs in;
  in.B = B;
  in.T = T;
  in.pose = Tensor::leaf({T * B, cfg.pose_dim}, std::move(pose));
  in.bbox = Tensor::leaf({T * B, cfg.bbox_dim}, std::move(bbox));
  in.speed = Tensor::leaf({T * B, cfg.speed_dim}, std::move(speed));
  const autodiff::Shape vis_shape = clip_mode
      ? autodiff::Shape{B, T, cfg.img_h, cfg.img_w, cfg.img_c}
      : (vector_mode ? autodiff::Shape{T * B, cfg.feature_dim}
                     : autodiff::Shape{T * B, cfg.img_h, cfg.img_w, cfg.img_c});
  in.local = Tensor::leaf(vis_shape, std::move(local));
  in.has_global = has_global && !global_vals.empty();
  if (in.has_global) in.global_ctx = Tensor::leaf(vis_shape, std::move(global_vals));
  in.labels = Tensor::leaf({B, 1}, std::move(labels));
  return in;
}

inline BatchInputs make_batch(const ModelConfig& cfg,
                              const std::vector<data::SampleWindow>& ws) {
  std::vector<std::size_t> idx(ws.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return make_batch(cfg, ws, idx);
}

// One network assembled from the shared channel encoders according to the
// configured fusion strategy. Parameters are created in a fixed order from a
// single seeded stream, so equal (config, seed) gives equal parameters.
class Model {
 public:
  Model(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    validate(cfg_);
    Rng rng(seed);
    build(rng);
  }

  const ModelConfig& config() const { return cfg_; }

  nn::ParamMap named_params() const {
    nn::ParamMap out;
    if (enc_local2_) enc_local2_->named_params("enc_local", out);
    if (enc_global2_) enc_global2_->named_params("enc_global", out);
    if (enc_local3_) enc_local3_->named_params("enc_local", out);
    if (enc_global3_) enc_global3_->named_params("enc_global", out);
    if (proj_local_) proj_local_->named_params("proj_local", out);
    if (proj_global_) proj_global_->named_params("proj_global", out);
    if (gru_pose_) gru_pose_->named_params("gru_pose", out);
    if (gru_bbox_) gru_bbox_->named_params("gru_bbox", out);
    if (gru_speed_) gru_speed_->named_params("gru_speed", out);
    if (gru_local_) gru_local_->named_params("gru_local", out);
    if (gru_global_) gru_global_->named_params("gru_global", out);
    if (gru_early_) gru_early_->named_params("gru_early", out);
    if (att_pose_) att_pose_->named_params("att_pose", out);
    if (att_bbox_) att_bbox_->named_params("att_bbox", out);
    if (att_speed_) att_speed_->named_params("att_speed", out);
    if (att_local_) att_local_->named_params("att_local", out);
    if (att_global_) att_global_->named_params("att_global", out);
    if (att_nvi_) att_nvi_->named_params("att_nvi", out);
    if (att_final_) att_final_->named_params("att_final", out);
    fc_->named_params("fc", out);
    return out;
  }

  std::vector<Tensor> params() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_params()) out.push_back(t);
    return out;
  }

  nn::DenseLayer& final_fc() { return *fc_; }
  const nn::DenseLayer& final_fc() const { return *fc_; }

  int gru_count() const {
    int n = 0;
    for (const auto* g : {&gru_pose_, &gru_bbox_, &gru_speed_, &gru_local_, &gru_global_,
                          &gru_early_}) {
      n += g->has_value() ? 1 : 0;
    }
    return n;
  }
  int attention_count() const {
    int n = 0;
    for (const auto* a : {&att_pose_, &att_bbox_, &att_speed_, &att_local_, &att_global_,
                          &att_nvi_, &att_final_}) {
      n += a->has_value() ? 1 : 0;
    }
    return n;
  }
  /// Modality-level visual paths (separate GRU+attention or clip projection).
  int visual_branch_count() const {
    const int local = att_local_ || proj_local_ ? 1 : 0;
    const int global = att_global_ || proj_global_ ? 1 : 0;
    return local + global;
  }

  /// Probabilities [B,1]. With train=true, dropout draws from rng.
  Tensor forward_batch(const BatchInputs& in, bool train, Rng& rng) const {
    check_inputs(in);
    const auto pose = unstack(in.pose, in.B, in.T);
    const auto bbox = unstack(in.bbox, in.B, in.T);
    const auto speed = unstack(in.speed, in.B, in.T);
    switch (cfg_.fusion) {
      case FusionStrategy::kHybrid: {
        auto h = nn::gru_sequence_batch(*gru_pose_, pose);
        h = fused_stage(*gru_bbox_, h, bbox);
        h = fused_stage(*gru_speed_, h, speed);
        Tensor v_nvi = nn::attend_batch(*att_nvi_, h, train, rng).output;
        std::vector<Tensor> modal;
        modal.push_back(visual_modality(in, false, train, rng));
        if (cfg_.use_global_context) modal.push_back(visual_modality(in, true, train, rng));
        modal.push_back(v_nvi);  // deepest-fused branch is the attention query
        Tensor fused = nn::attend_batch(*att_final_, modal, train, rng).output;
        return fc_->forward_batch(fused);
      }
      case FusionStrategy::kLater: {
        std::vector<Tensor> modal;
        modal.push_back(channel_vector(*gru_pose_, *att_pose_, pose, train, rng));
        modal.push_back(channel_vector(*gru_bbox_, *att_bbox_, bbox, train, rng));
        modal.push_back(channel_vector(*gru_speed_, *att_speed_, speed, train, rng));
        modal.push_back(visual_modality(in, false, train, rng));
        if (cfg_.use_global_context) modal.push_back(visual_modality(in, true, train, rng));
        Tensor fused = nn::attend_batch(*att_final_, modal, train, rng).output;
        return fc_->forward_batch(fused);
      }
      case FusionStrategy::kEarly: {
        std::vector<Tensor> xs;
        xs.reserve(static_cast<std::size_t>(in.T));
        const bool temporal_visual = cfg_.visual_encoder != VisualEncoder::kClip3d;
        std::vector<Tensor> lseq, gseq;
        if (temporal_visual) {
          lseq = visual_sequence(in, false);
          if (cfg_.use_global_context) gseq = visual_sequence(in, true);
        }
        for (std::int64_t t = 0; t < in.T; ++t) {
          const auto ti = static_cast<std::size_t>(t);
          std::vector<Tensor> parts = {pose[ti], bbox[ti], speed[ti]};
          if (temporal_visual) {
            parts.push_back(lseq[ti]);
            if (cfg_.use_global_context) parts.push_back(gseq[ti]);
          }
          xs.push_back(autodiff::concat(parts, 1));
        }
        auto h = nn::gru_sequence_batch(*gru_early_, xs);
        Tensor fused = nn::attend_batch(*att_final_, h, train, rng).output;
        return fc_->forward_batch(with_clip_vectors(fused, in));
      }
      case FusionStrategy::kHierarchical: {
        std::vector<Tensor> h;
        if (cfg_.visual_encoder != VisualEncoder::kClip3d) {
          h = nn::gru_sequence_batch(*gru_local_, visual_sequence(in, false));
          if (cfg_.use_global_context) {
            h = fused_stage(*gru_global_, h, visual_sequence(in, true));
          }
          h = fused_stage(*gru_pose_, h, pose);
        } else {
          h = nn::gru_sequence_batch(*gru_pose_, pose);
        }
        h = fused_stage(*gru_bbox_, h, bbox);
        h = fused_stage(*gru_speed_, h, speed);
        Tensor fused = nn::attend_batch(*att_final_, h, train, rng).output;
        return fc_->forward_batch(with_clip_vectors(fused, in));
      }
    }
    throw ContractError("forward: unreachable fusion strategy");
  }

  /// Eval-mode forward; dropout is inactive so no randomness is consumed.
  Tensor forward_batch(const BatchInputs& in) const {
    Rng unused(0);
    return forward_batch(in, false, unused);
  }

 private:
  void build(Rng& rng) {
    const std::int64_t hid = cfg_.hidden_dim;
    const std::int64_t d = cfg_.feature_dim;
    const bool global = cfg_.use_global_context;
    const bool temporal_visual = cfg_.visual_encoder != VisualEncoder::kClip3d;
    if (cfg_.visual_encoder == VisualEncoder::kFrame2dRnn) {
      enc_local2_.emplace(cfg_.img_c, cfg_.conv_channels, cfg_.conv_depth, d, rng);
      if (global) enc_global2_.emplace(cfg_.img_c, cfg_.conv_channels, cfg_.conv_depth, d, rng);
    } else if (cfg_.visual_encoder == VisualEncoder::kClip3d) {
      enc_local3_.emplace(cfg_.img_c, cfg_.conv_channels, cfg_.conv_depth, d, rng);
      if (global) enc_global3_.emplace(cfg_.img_c, cfg_.conv_channels, cfg_.conv_depth, d, rng);
      proj_local_.emplace(d, hid, nn::Activation::kTanh, rng);
      if (global) proj_global_.emplace(d, hid, nn::Activation::kTanh, rng);
    }
    switch (cfg_.fusion) {
      case FusionStrategy::kHybrid:
        gru_pose_.emplace(cfg_.pose_dim, hid, rng);
        gru_bbox_.emplace(hid + cfg_.bbox_dim, hid, rng);
        gru_speed_.emplace(hid + cfg_.speed_dim, hid, rng);
        if (temporal_visual) {
          gru_local_.emplace(d, hid, rng);
          if (global) gru_global_.emplace(d, hid, rng);
          att_local_.emplace(hid, rng, cfg_.dropout_rate);
          if (global) att_global_.emplace(hid, rng, cfg_.dropout_rate);
        }
        att_nvi_.emplace(hid, rng, cfg_.dropout_rate);
        att_final_.emplace(hid, rng, cfg_.dropout_rate);
        fc_.emplace(hid, 1, nn::Activation::kSigmoid, rng);
        break;
      case FusionStrategy::kLater:
        gru_pose_.emplace(cfg_.pose_dim, hid, rng);
        gru_bbox_.emplace(cfg_.bbox_dim, hid, rng);
        gru_speed_.emplace(cfg_.speed_dim, hid, rng);
        if (temporal_visual) {
          gru_local_.emplace(d, hid, rng);
          if (global) gru_global_.emplace(d, hid, rng);
        }
        att_pose_.emplace(hid, rng, cfg_.dropout_rate);
        att_bbox_.emplace(hid, rng, cfg_.dropout_rate);
        att_speed_.emplace(hid, rng, cfg_.dropout_rate);
        if (temporal_visual) {
          att_local_.emplace(hid, rng, cfg_.dropout_rate);
          if (global) att_global_.emplace(hid, rng, cfg_.dropout_rate);
        }
        att_final_.emplace(hid, rng, cfg_.dropout_rate);
        fc_.emplace(hid, 1, nn::Activation::kSigmoid, rng);
        break;
      case FusionStrategy::kEarly: {
        std::int64_t width = cfg_.pose_dim + cfg_.bbox_dim + cfg_.speed_dim;
        if (temporal_visual) width += (global ? 2 : 1) * d;
        gru_early_.emplace(width, hid, rng);
        att_final_.emplace(hid, rng, cfg_.dropout_rate);
        const std::int64_t fc_in =
            temporal_visual ? hid : hid * (1 + (global ? 2 : 1));
        fc_.emplace(fc_in, 1, nn::Activation::kSigmoid, rng);
        break;
      }
      case FusionStrategy::kHierarchical: {
        if (temporal_visual) {
          gru_local_.emplace(d, hid, rng);
          if (global) gru_global_.emplace(hid + d, hid, rng);
          gru_pose_.emplace(hid + cfg_.pose_dim, hid, rng);
        } else {
          gru_pose_.emplace(cfg_.pose_dim, hid, rng);
        }
        gru_bbox_.emplace(hid + cfg_.bbox_dim, hid, rng);
        gru_speed_.emplace(hid + cfg_.speed_dim, hid, rng);
        att_final_.emplace(hid, rng, cfg_.dropout_rate);
        const std::int64_t fc_in =
            temporal_visual ? hid : hid * (1 + (global ? 2 : 1));
        fc_.emplace(fc_in, 1, nn::Activation::kSigmoid, rng);
        break;
      }
    }
  }

  void check_inputs(const BatchInputs& in) const {
    if (in.B < 1 || in.T < 1) throw ContractError("forward: empty batch");
    if (in.T != cfg_.seq_len) {
      throw DimensionError("forward: batch T=" + std::to_string(in.T) +
                           " does not match model seq_len " + std::to_string(cfg_.seq_len));
    }
    auto expect = [&](const Tensor& t, const autodiff::Shape& want, const char* what) {
      if (t.shape() != want) {
        throw DimensionError(std::string("forward: ") + what + " " + shape_str(t.shape()) +
                             " does not match expected " + shape_str(want));
      }
    };
    expect(in.pose, {in.T * in.B, cfg_.pose_dim}, "pose");
    expect(in.bbox, {in.T * in.B, cfg_.bbox_dim}, "bbox");
    expect(in.speed, {in.T * in.B, cfg_.speed_dim}, "speed");
    autodiff::Shape vis;
    switch (cfg_.visual_encoder) {
      case VisualEncoder::kPrecomputed: vis = {in.T * in.B, cfg_.feature_dim}; break;
      case VisualEncoder::kFrame2dRnn:
        vis = {in.T * in.B, cfg_.img_h, cfg_.img_w, cfg_.img_c};
        break;
      case VisualEncoder::kClip3d:
        vis = {in.B, in.T, cfg_.img_h, cfg_.img_w, cfg_.img_c};
        break;
    }
    expect(in.local, vis, "local channel");
    if (cfg_.use_global_context) {
      if (!in.has_global) {
        throw ValidationError(
            "forward: the model requires a global context channel but the batch has none");
      }
      expect(in.global_ctx, vis, "global channel");
    }
  }

  static std::vector<Tensor> unstack(const Tensor& tm, std::int64_t B, std::int64_t T) {
    std::vector<Tensor> out;
    out.reserve(static_cast<std::size_t>(T));
    for (std::int64_t t = 0; t < T; ++t) out.push_back(autodiff::slice(tm, 0, t * B, B));
    return out;
  }

  static std::vector<Tensor> fused_stage(const nn::GRULayer& gru,
                                         const std::vector<Tensor>& prev,
                                         const std::vector<Tensor>& feats) {
    std::vector<Tensor> xs;
    xs.reserve(feats.size());
    for (std::size_t t = 0; t < feats.size(); ++t) {
      xs.push_back(autodiff::concat({prev[t], feats[t]}, 1));
    }
    return nn::gru_sequence_batch(gru, xs);
  }

  static Tensor channel_vector(const nn::GRULayer& gru, const nn::AttentionBlock& att,
                               const std::vector<Tensor>& xs, bool train, Rng& rng) {
    return nn::attend_batch(att, nn::gru_sequence_batch(gru, xs), train, rng).output;
  }

  /// Per-timestep visual features [B,feature_dim] for temporal encoders.
  std::vector<Tensor> visual_sequence(const BatchInputs& in, bool global_side) const {
    const Tensor& ch = global_side ? in.global_ctx : in.local;
    if (cfg_.visual_encoder == VisualEncoder::kPrecomputed) {
      return unstack(ch, in.B, in.T);
    }
    const auto& enc = global_side ? enc_global2_ : enc_local2_;
    return unstack(enc->encode_stack(ch), in.B, in.T);
  }

  /// Modality vector [B,hidden] of one visual channel (hybrid/later fusion).
  Tensor visual_modality(const BatchInputs& in, bool global_side, bool train,
                         Rng& rng) const {
    if (cfg_.visual_encoder == VisualEncoder::kClip3d) return clip_vector(in, global_side);
    const auto& gru = global_side ? gru_global_ : gru_local_;
    const auto& att = global_side ? att_global_ : att_local_;
    return channel_vector(*gru, *att, visual_sequence(in, global_side), train, rng);
  }

  Tensor clip_vector(const BatchInputs& in, bool global_side) const {
    const Tensor& ch = global_side ? in.global_ctx : in.local;
    const auto& enc = global_side ? enc_global3_ : enc_local3_;
    const auto& proj = global_side ? proj_global_ : proj_local_;
    return proj->forward_batch(enc->encode_batch(ch));
  }

  /// clip3d under early/hierarchical fusion: visual vectors join right
  /// before the classifier head.
  Tensor with_clip_vectors(const Tensor& fused, const BatchInputs& in) const {
    if (cfg_.visual_encoder != VisualEncoder::kClip3d) return fused;
    std::vector<Tensor> parts = {fused, clip_vector(in, false)};
    if (cfg_.use_global_context) parts.push_back(clip_vector(in, true));
    return autodiff::concat(parts, 1);
  }

  ModelConfig cfg_;
  std::optional<nn::ConvEncoder2D> enc_local2_, enc_global2_;
  std::optional<nn::ConvEncoder3D> enc_local3_, enc_global3_;
  std::optional<nn::DenseLayer> proj_local_, proj_global_;
  std::optional<nn::GRULayer> gru_pose_, gru_bbox_, gru_speed_;
  std::optional<nn::GRULayer> gru_local_, gru_global_, gru_early_;
  std::optional<nn::AttentionBlock> att_pose_, att_bbox_, att_speed_;
  std::optional<nn::AttentionBlock> att_local_, att_global_, att_nvi_, att_final_;
  std::optional<nn::DenseLayer> fc_;
};

namespace detail {

inline BatchInputs bundle_batch(const ModelConfig& cfg, const data::ChannelBundle& ch) {
  data::SampleWindow w;
  w.channels = ch;
  w.track_id = "<bundle>";
  return make_batch(cfg, {w}, {0});
}

inline Tensor forward_one(const Model& m, const data::ChannelBundle& ch, bool train,
                          Rng& rng, FusionStrategy expected, const char* caller) {
  if (m.config().fusion != expected) {
    throw ContractError(std::string(caller) + ": model was built with fusion strategy " +
                        fusion_name(m.config().fusion));
  }
  Tensor p = m.forward_batch(bundle_batch(m.config(), ch), train, rng);
  return autodiff::reshape(p, {1});
}

}  // namespace detail

/// Single-sample entry points, one per fusion strategy; each returns the
/// crossing probability as a one-element tensor.
inline Tensor forward_hybrid(const Model& m, const data::ChannelBundle& b, bool train,
                             Rng& rng) {
  return detail::forward_one(m, b, train, rng, FusionStrategy::kHybrid, "forward_hybrid");
}
inline Tensor forward_later(const Model& m, const data::ChannelBundle& b, bool train,
                            Rng& rng) {
  return detail::forward_one(m, b, train, rng, FusionStrategy::kLater, "forward_later");
}
inline Tensor forward_early(const Model& m, const data::ChannelBundle& b, bool train,
                            Rng& rng) {
  return detail::forward_one(m, b, train, rng, FusionStrategy::kEarly, "forward_early");
}
inline Tensor forward_hierarchical(const Model& m, const data::ChannelBundle& b, bool train,
                                   Rng& rng) {
  return detail::forward_one(m, b, train, rng, FusionStrategy::kHierarchical,
                             "forward_hierarchical");
}

}  // namespace pcip::fusion
