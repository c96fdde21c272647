#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pcip/errors.hpp"

namespace pcip::fusion {

enum class FusionStrategy { kHybrid, kLater, kEarly, kHierarchical };
enum class VisualEncoder { kPrecomputed, kFrame2dRnn, kClip3d };

inline const char* fusion_name(FusionStrategy f) {
  switch (f) {
    case FusionStrategy::kHybrid: return "hybrid";
    case FusionStrategy::kLater: return "later";
    case FusionStrategy::kEarly: return "early";
    case FusionStrategy::kHierarchical: return "hierarchical";
  }
  return "hybrid";
}

inline FusionStrategy parse_fusion(const std::string& s) {
  if (s == "hybrid") return FusionStrategy::kHybrid;
  if (s == "later") return FusionStrategy::kLater;
  if (s == "early") return FusionStrategy::kEarly;
  if (s == "hierarchical") return FusionStrategy::kHierarchical;
  throw ConfigError("unknown fusion strategy '" + s +
                    "' (expected hybrid|later|early|hierarchical)");
}

inline const char* visual_encoder_name(VisualEncoder v) {
  switch (v) {
    case VisualEncoder::kPrecomputed: return "precomputed";
    case VisualEncoder::kFrame2dRnn: return "frame2d_rnn";
    case VisualEncoder::kClip3d: return "clip3d";
  }
  return "precomputed";
}

inline VisualEncoder parse_visual_encoder(const std::string& s) {
  if (s == "precomputed") return VisualEncoder::kPrecomputed;
  if (s == "frame2d_rnn") return VisualEncoder::kFrame2dRnn;
  if (s == "clip3d") return VisualEncoder::kClip3d;
  throw ConfigError("unknown visual encoder '" + s +
                    "' (expected precomputed|frame2d_rnn|clip3d)");
}

struct ModelConfig {
  FusionStrategy fusion = FusionStrategy::kHybrid;
  VisualEncoder visual_encoder = VisualEncoder::kPrecomputed;
  bool use_global_context = true;
  std::int64_t hidden_dim = 256;
  std::int64_t feature_dim = 512;  // visual width: precomputed input or encoder output
  std::int64_t seq_len = 16;
  double dropout_rate = 0.5;
  // non-visual channel widths; pose is 37 after normalization (36 + presence flag)
  std::int64_t pose_dim = 37;
  std::int64_t bbox_dim = 4;
  std::int64_t speed_dim = 5;
  // image-mode inputs; zero means "no images" and is required for precomputed
  std::int64_t img_h = 0, img_w = 0, img_c = 0;
  std::int64_t conv_channels = 4;
  std::int64_t conv_depth = 1;
};

inline void validate(const ModelConfig& c) {
  if (c.hidden_dim < 1 || c.feature_dim < 1 || c.seq_len < 1) {
    throw ConfigError("model: hidden_dim, feature_dim and seq_len must be positive");
  }
  if (c.pose_dim < 1 || c.bbox_dim < 1 || c.speed_dim < 1) {
    throw ConfigError("model: channel dims must be positive");
  }
  if (!(c.dropout_rate >= 0.0 && c.dropout_rate < 1.0)) {
    throw ConfigError("model: dropout_rate must lie in [0,1)");
  }
  const bool has_img = c.img_h > 0 || c.img_w > 0 || c.img_c > 0;
  if (c.visual_encoder == VisualEncoder::kPrecomputed) {
    if (has_img) {
      throw ConfigError(
          "model: precomputed visual features cannot take image dims; drop img_h/img_w/img_c "
          "or pick an image encoder");
    }
    return;
  }
  if (c.img_h < 1 || c.img_w < 1 || c.img_c < 1) {
    throw ConfigError(std::string("model: visual encoder ") +
                      visual_encoder_name(c.visual_encoder) +
                      " needs positive img_h/img_w/img_c");
  }
  if (c.conv_channels < 1 || c.conv_depth < 1) {
    throw ConfigError("model: conv_channels and conv_depth must be positive");
  }
  const std::int64_t min_hw = std::int64_t{1} << c.conv_depth;
  if (c.img_h < min_hw || c.img_w < min_hw) {
    throw ConfigError("model: image dims too small for conv_depth " +
                      std::to_string(c.conv_depth));
  }
}

inline nlohmann::json config_to_json(const ModelConfig& c) {
  return nlohmann::json{{"fusion", fusion_name(c.fusion)},
                        {"visual_encoder", visual_encoder_name(c.visual_encoder)},
                        {"use_global_context", c.use_global_context},
                        {"hidden_dim", c.hidden_dim},
                        {"feature_dim", c.feature_dim},
                        {"seq_len", c.seq_len},
                        {"dropout_rate", c.dropout_rate},
                        {"pose_dim", c.pose_dim},
                        {"bbox_dim", c.bbox_dim},
                        {"speed_dim", c.speed_dim},
                        {"img_h", c.img_h},
                        {"img_w", c.img_w},
                        {"img_c", c.img_c},
                        {"conv_channels", c.conv_channels},
                        {"conv_depth", c.conv_depth}};
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.fusion = parse_fusion(j.at("fusion").get<std::string>());
    c.visual_encoder = parse_visual_encoder(j.at("visual_encoder").get<std::string>());
    c.use_global_context = j.at("use_global_context").get<bool>();
    c.hidden_dim = j.at("hidden_dim").get<std::int64_t>();
    c.feature_dim = j.at("feature_dim").get<std::int64_t>();
    c.seq_len = j.at("seq_len").get<std::int64_t>();
    c.dropout_rate = j.at("dropout_rate").get<double>();
    c.pose_dim = j.at("pose_dim").get<std::int64_t>();
    c.bbox_dim = j.at("bbox_dim").get<std::int64_t>();
    c.speed_dim = j.at("speed_dim").get<std::int64_t>();
    c.img_h = j.at("img_h").get<std::int64_t>();
    c.img_w = j.at("img_w").get<std::int64_t>();
    c.img_c = j.at("img_c").get<std::int64_t>();
    c.conv_channels = j.at("conv_channels").get<std::int64_t>();
    c.conv_depth = j.at("conv_depth").get<std::int64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  validate(c);
  return c;
}

/// The ablation grid: every published row as (name, fusion, encoder, global).
/// Dims and other knobs are copied from the caller's base config.
inline std::vector<std::pair<std::string, ModelConfig>> variant_grid(
    const ModelConfig& base) {
  struct Row {
    const char* name;
    FusionStrategy fusion;
    VisualEncoder visual;
    bool global;
  };
  static const Row rows[] = {
      {"Ours", FusionStrategy::kHybrid, VisualEncoder::kFrame2dRnn, true},
      {"Ours1", FusionStrategy::kLater, VisualEncoder::kClip3d, true},
      {"Ours2", FusionStrategy::kEarly, VisualEncoder::kClip3d, true},
      {"Ours3", FusionStrategy::kHierarchical, VisualEncoder::kClip3d, true},
      {"Ours4", FusionStrategy::kLater, VisualEncoder::kFrame2dRnn, false},
      {"Ours5", FusionStrategy::kLater, VisualEncoder::kFrame2dRnn, true},
      {"Ours6", FusionStrategy::kEarly, VisualEncoder::kFrame2dRnn, true},
      {"Ours7", FusionStrategy::kHierarchical, VisualEncoder::kFrame2dRnn, true},
  };
  std::vector<std::pair<std::string, ModelConfig>> grid;
  for (const Row& r : rows) {
    ModelConfig c = base;
    c.fusion = r.fusion;
    c.visual_encoder = r.visual;
    c.use_global_context = r.global;
    grid.emplace_back(r.name, c);
  }
  return grid;
}

}  // namespace pcip::fusion
