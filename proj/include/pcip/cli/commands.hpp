#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pcip/data/manifest.hpp"
#include "pcip/data/synth.hpp"
#include "pcip/data/windows.hpp"
#include "pcip/fusion/checkpoint.hpp"
#include "pcip/fusion/model.hpp"
#include "pcip/metrics/metrics.hpp"
#include "pcip/nn/attention.hpp"
#include "pcip/nn/conv_encoder.hpp"
#include "pcip/nn/dense.hpp"
#include "pcip/nn/gru.hpp"
#include "pcip/tensor/gradcheck.hpp"
#include "pcip/train/loop.hpp"
#include "pcip/version.hpp"

namespace pcip::cli {

namespace fs = std::filesystem;
using autodiff::Tensor;
using nlohmann::json;

// ---------------------------------------------------------------------------
// options and sparse config-file overlays; a config file may set any subset
// of fields, command-line flags override on top

struct WindowingOptions {
  double overlap = 0.8;
  std::int64_t tte_lo = 30;
  std::int64_t tte_hi = 60;
  double train_ratio = 0.7;
  double val_ratio = 0.1;
  double test_ratio = 0.2;
  std::uint64_t split_seed = 0;
};

namespace detail {

template <typename T>
void take(const json& j, const char* key, T& into) {
  if (j.contains(key)) into = j.at(key).get<T>();
}

inline std::string fmt(double v) {
  json j = v;
  return j.dump();
}

}  // namespace detail

inline json windowing_to_json(const WindowingOptions& w) {
  return json{{"overlap", w.overlap},       {"tte_lo", w.tte_lo},
              {"tte_hi", w.tte_hi},         {"train_ratio", w.train_ratio},
              {"val_ratio", w.val_ratio},   {"test_ratio", w.test_ratio},
              {"split_seed", w.split_seed}};
}

inline WindowingOptions windowing_overlay(WindowingOptions base, const json& j) {
  try {
    detail::take(j, "overlap", base.overlap);
    detail::take(j, "tte_lo", base.tte_lo);
    detail::take(j, "tte_hi", base.tte_hi);
    detail::take(j, "train_ratio", base.train_ratio);
    detail::take(j, "val_ratio", base.val_ratio);
    detail::take(j, "test_ratio", base.test_ratio);
    detail::take(j, "split_seed", base.split_seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("windows config: ") + e.what());
  }
  return base;
}

inline json synth_to_json(const data::SynthConfig& c) {
  return json{{"n_samples", c.n_samples},
              {"positive_rate", c.positive_rate},
              {"pose_strength", c.pose_strength},
              {"bbox_strength", c.bbox_strength},
              {"speed_strength", c.speed_strength},
              {"local_strength", c.local_strength},
              {"global_strength", c.global_strength},
              {"noise_sigma", c.noise_sigma},
              {"kind", c.kind == data::FeatureKind::kImage ? "image" : "vector"},
              {"feature_dim", c.feature_dim},
              {"img_h", c.img_h},
              {"img_w", c.img_w},
              {"img_c", c.img_c},
              {"track_len", c.track_len},
              {"frame_w", c.frame_w},
              {"frame_h", c.frame_h},
              {"frame_rate", c.frame_rate},
              {"tte_lo", c.tte_lo},
              {"tte_hi", c.tte_hi},
              {"seed", c.seed}};
}

inline data::SynthConfig synth_overlay(data::SynthConfig base, const json& j) {
  try {
    detail::take(j, "n_samples", base.n_samples);
    detail::take(j, "positive_rate", base.positive_rate);
    detail::take(j, "pose_strength", base.pose_strength);
    detail::take(j, "bbox_strength", base.bbox_strength);
    detail::take(j, "speed_strength", base.speed_strength);
    detail::take(j, "local_strength", base.local_strength);
    detail::take(j, "global_strength", base.global_strength);
    detail::take(j, "noise_sigma", base.noise_sigma);
    if (j.contains("kind")) base.kind = data::parse_feature_kind(j.at("kind").get<std::string>());
    detail::take(j, "feature_dim", base.feature_dim);
    detail::take(j, "img_h", base.img_h);
    detail::take(j, "img_w", base.img_w);
    detail::take(j, "img_c", base.img_c);
    detail::take(j, "track_len", base.track_len);
    detail::take(j, "frame_w", base.frame_w);
    detail::take(j, "frame_h", base.frame_h);
    detail::take(j, "frame_rate", base.frame_rate);
    detail::take(j, "tte_lo", base.tte_lo);
    detail::take(j, "tte_hi", base.tte_hi);
    detail::take(j, "seed", base.seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("synth config: ") + e.what());
  }
  return base;
}

inline json hyperparams_to_json(const train::Hyperparams& h) {
  return json{{"learning_rate", h.learning_rate}, {"epochs", h.epochs},
              {"batch_size", h.batch_size},       {"l2_lambda", h.l2_lambda},
              {"beta1", h.beta1},                 {"beta2", h.beta2},
              {"adam_epsilon", h.adam_epsilon},   {"seed", h.seed}};
}

inline train::Hyperparams hyperparams_overlay(train::Hyperparams base, const json& j) {
  try {
    detail::take(j, "learning_rate", base.learning_rate);
    detail::take(j, "epochs", base.epochs);
    detail::take(j, "batch_size", base.batch_size);
    detail::take(j, "l2_lambda", base.l2_lambda);
    detail::take(j, "beta1", base.beta1);
    detail::take(j, "beta2", base.beta2);
    detail::take(j, "adam_epsilon", base.adam_epsilon);
    detail::take(j, "seed", base.seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  return base;
}

inline fusion::ModelConfig model_overlay(fusion::ModelConfig base, const json& j) {
  try {
    if (j.contains("fusion")) base.fusion = fusion::parse_fusion(j.at("fusion").get<std::string>());
    if (j.contains("visual_encoder")) {
      base.visual_encoder =
          fusion::parse_visual_encoder(j.at("visual_encoder").get<std::string>());
    }
    detail::take(j, "use_global_context", base.use_global_context);
    detail::take(j, "hidden_dim", base.hidden_dim);
    detail::take(j, "feature_dim", base.feature_dim);
    detail::take(j, "seq_len", base.seq_len);
    detail::take(j, "dropout_rate", base.dropout_rate);
    detail::take(j, "img_h", base.img_h);
    detail::take(j, "img_w", base.img_w);
    detail::take(j, "img_c", base.img_c);
    detail::take(j, "conv_channels", base.conv_channels);
    detail::take(j, "conv_depth", base.conv_depth);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  return base;
}

/// Loads a sectioned config file; every section is optional.
inline json load_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// shared plumbing

/// Resolves a published variant name through the ablation grid; dims come
/// from the base config. Unknown names fail before any work happens.
inline fusion::ModelConfig resolve_variant(const std::string& name,
                                           const fusion::ModelConfig& base) {
  auto grid = fusion::variant_grid(base);
  for (const auto& [n, cfg] : grid) {
    if (n == name) return cfg;
  }
  std::string names;
  for (const auto& [n, cfg] : grid) names += (names.empty() ? "" : ", ") + n;
  throw ConfigError("unknown variant '" + name + "'; expected one of: " + names);
}

struct PreparedData {
  data::DatasetMeta meta;
  json provenance;  // dataset header provenance, null when absent
  data::SplitResult split;
  std::size_t n_windows = 0;
  std::size_t skipped_short = 0;
};

inline fs::path manifest_path_of(const fs::path& dataset) {
  return fs::is_directory(dataset) ? dataset / "manifest.jsonl" : dataset;
}

/// Dataset -> resolved features -> windows -> normalization -> split.
inline PreparedData prepare_windows(const fs::path& dataset, std::int64_t window_len,
                                    const WindowingOptions& w) {
  data::Dataset ds = data::load_manifest(manifest_path_of(dataset));
  data::resolve_features(ds);
  auto wr = data::make_windows(ds.tracks, window_len, w.overlap, w.tte_lo, w.tte_hi);
  data::normalize_windows(wr.windows, ds.meta);
  PreparedData out;
  out.meta = ds.meta;
  out.n_windows = wr.windows.size();
  out.skipped_short = wr.skipped_short;
  out.split = data::split_windows(wr.windows, w.train_ratio, w.val_ratio, w.test_ratio,
                                  w.split_seed);
  return out;
}

/// Training builds a fresh model against a concrete dataset, so the dataset is
/// authoritative for input geometry: the precomputed feature width and the
/// image dims. feature_dim stays a free hyperparameter (encoder output width)
/// when an image encoder is in play. Kind mismatches are left for
/// check_model_dataset, which has the clearer message.
inline fusion::ModelConfig adopt_dataset_geometry(fusion::ModelConfig cfg,
                                                  const data::DatasetMeta& meta) {
  if (cfg.visual_encoder == fusion::VisualEncoder::kPrecomputed) {
    if (meta.kind == data::FeatureKind::kVector) cfg.feature_dim = meta.feature_dim;
  } else if (meta.kind == data::FeatureKind::kImage) {
    cfg.img_h = meta.img_h;
    cfg.img_w = meta.img_w;
    cfg.img_c = meta.img_c;
  }
  return cfg;
}

/// A checkpoint or requested model must agree with the dataset's feature
/// geometry before any training or evaluation starts.
inline void check_model_dataset(const fusion::ModelConfig& cfg, const data::DatasetMeta& meta) {
  if (cfg.visual_encoder == fusion::VisualEncoder::kPrecomputed) {
    if (meta.kind != data::FeatureKind::kVector) {
      throw ConfigError("model expects precomputed feature vectors but the dataset holds images");
    }
    if (cfg.feature_dim != meta.feature_dim) {
      throw ConfigError("model feature_dim " + std::to_string(cfg.feature_dim) +
                        " does not match dataset feature_dim " +
                        std::to_string(meta.feature_dim));
    }
  } else {
    if (meta.kind != data::FeatureKind::kImage) {
      throw ConfigError("model expects image channels but the dataset holds feature vectors");
    }
    if (cfg.img_h != meta.img_h || cfg.img_w != meta.img_w || cfg.img_c != meta.img_c) {
      throw ConfigError("model image dims " + std::to_string(cfg.img_h) + "x" +
                        std::to_string(cfg.img_w) + "x" + std::to_string(cfg.img_c) +
                        " do not match dataset " + std::to_string(meta.img_h) + "x" +
                        std::to_string(meta.img_w) + "x" + std::to_string(meta.img_c));
    }
  }
}

inline void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// gen-data

struct GenDataOptions {
  data::SynthConfig synth;
  fs::path out_dir = "dataset";
};

struct GenDataResult {
  fs::path manifest;
  std::int64_t n_tracks = 0;
};

inline GenDataResult cmd_gen_data(const GenDataOptions& o) {
  data::validate(o.synth);
  auto tracks = data::synth_generate(o.synth);
  const json provenance{{"tool", "pcip"},
                        {"tool_version", kToolVersion},
                        {"command", "gen-data"},
                        {"synth", synth_to_json(o.synth)}};
  GenDataResult r;
  r.manifest = data::save_dataset(o.out_dir, data::meta_for(o.synth), tracks, provenance);
  r.n_tracks = static_cast<std::int64_t>(tracks.size());
  return r;
}

// ---------------------------------------------------------------------------
// train

struct TrainOptions {
  fs::path dataset;
  std::string variant;  // resolved through the grid when nonempty
  fusion::ModelConfig model;
  train::Hyperparams hp;
  WindowingOptions windows;
  fs::path out_dir = "run";
};

struct TrainResult {
  fusion::ModelConfig config;
  train::TrainHistory history;
  fs::path best_checkpoint;
  fs::path final_checkpoint;
  fs::path history_path;
};

inline json run_provenance(const char* command, const fusion::ModelConfig& cfg,
                           const train::Hyperparams& hp, const WindowingOptions& w,
                           const fs::path& dataset) {
  return json{{"tool", "pcip"},          {"tool_version", kToolVersion},
              {"command", command},      {"dataset", dataset.string()},
              {"model", fusion::config_to_json(cfg)},
              {"train", hyperparams_to_json(hp)},
              {"windows", windowing_to_json(w)}};
}

inline TrainResult cmd_train(const TrainOptions& o) {
  train::validate(o.hp);
  fusion::ModelConfig cfg = o.variant.empty() ? o.model : resolve_variant(o.variant, o.model);
  if (cfg.seq_len < 1) throw ConfigError("model: seq_len must be positive");

  PreparedData pd = prepare_windows(o.dataset, cfg.seq_len, o.windows);
  cfg = adopt_dataset_geometry(cfg, pd.meta);
  check_model_dataset(cfg, pd.meta);
  fusion::validate(cfg);
  if (pd.split.train.empty()) {
    throw ContractError("train: the train split is empty (" + std::to_string(pd.n_windows) +
                        " windows total)");
  }

  fusion::Model model(cfg, o.hp.seed);
  train::TrainHistory hist = train::train(model, pd.split.train, pd.split.val, o.hp);

  fs::create_directories(o.out_dir);
  const json prov = run_provenance("train", cfg, o.hp, o.windows, o.dataset);

  TrainResult r;
  r.config = cfg;
  r.history_path = o.out_dir / "history.csv";
  write_text_file(r.history_path, "# config " + prov.dump() + "\n" + train::history_csv(hist));

  // train() leaves the model at the best epoch's parameters
  r.best_checkpoint = o.out_dir / "checkpoint_best.json";
  fusion::save_checkpoint(r.best_checkpoint, model);

  r.final_checkpoint = o.out_dir / "checkpoint_final.json";
  if (!hist.final_values.empty()) {
    train::apply_param_values(model, hist.final_values);
    fusion::save_checkpoint(r.final_checkpoint, model);
    train::apply_param_values(model, hist.best_values);
  } else {
    fusion::save_checkpoint(r.final_checkpoint, model);
  }

  r.history = std::move(hist);
  return r;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOptions {
  fs::path checkpoint;
  fs::path dataset;
  std::string split = "test";
  WindowingOptions windows;
  std::int64_t batch_size = 16;
  double threshold = 0.5;
  fs::path out_dir = "eval";
};

struct EvalCmdResult {
  train::EvalResult eval;
  std::string text;
  fs::path report_path;
};

/// Five metrics in fixed column order, then counts, then degeneracy flags.
inline std::string render_metrics_report(const metrics::MetricsReport& r, double loss,
                                         std::size_t n, const json& provenance) {
  std::string out = "# metrics report\n# config " + provenance.dump() + "\n";
  out += "samples " + std::to_string(n) + "\n";
  out += "loss " + detail::fmt(loss) + "\n";
  out += "accuracy " + detail::fmt(r.accuracy) + "\n";
  out += "auc " + detail::fmt(r.auc) + "\n";
  out += "f1 " + detail::fmt(r.f1) + "\n";
  out += "precision " + detail::fmt(r.precision) + "\n";
  out += "recall " + detail::fmt(r.recall) + "\n";
  out += "tp " + std::to_string(r.tp) + "\nfp " + std::to_string(r.fp) + "\ntn " +
         std::to_string(r.tn) + "\nfn " + std::to_string(r.fn) + "\n";
  out += "threshold " + detail::fmt(r.threshold) + "\n";
  std::string degenerate;
  if (!r.auc_defined) degenerate += " auc";
  if (!r.precision_defined) degenerate += " precision";
  if (!r.recall_defined) degenerate += " recall";
  if (!r.f1_defined) degenerate += " f1";
  if (!degenerate.empty()) out += "degenerate" + degenerate + "\n";
  return out;
}

inline EvalCmdResult cmd_eval(const EvalOptions& o) {
  fusion::Model model = fusion::load_checkpoint(o.checkpoint);
  PreparedData pd = prepare_windows(o.dataset, model.config().seq_len, o.windows);
  check_model_dataset(model.config(), pd.meta);

  std::vector<data::SampleWindow> all;
  const std::vector<data::SampleWindow>* set = nullptr;
  if (o.split == "train") {
    set = &pd.split.train;
  } else if (o.split == "val") {
    set = &pd.split.val;
  } else if (o.split == "test") {
    set = &pd.split.test;
  } else if (o.split == "all") {
    all.reserve(pd.n_windows);
    for (const auto* part : {&pd.split.train, &pd.split.val, &pd.split.test}) {
      all.insert(all.end(), part->begin(), part->end());
    }
    set = &all;
  } else {
    throw ConfigError("unknown split '" + o.split + "'; expected train, val, test or all");
  }
  if (set->empty()) {
    throw ContractError("eval: split '" + o.split + "' is empty");
  }

  EvalCmdResult r;
  r.eval = train::evaluate(model, *set, o.batch_size, o.threshold);

  json prov{{"tool", "pcip"},
            {"tool_version", kToolVersion},
            {"command", "eval"},
            {"dataset", o.dataset.string()},
            {"checkpoint", o.checkpoint.string()},
            {"split", o.split},
            {"threshold", o.threshold},
            {"model", fusion::config_to_json(model.config())},
            {"windows", windowing_to_json(o.windows)}};
  r.text = render_metrics_report(r.eval.report, r.eval.loss, set->size(), prov);

  fs::create_directories(o.out_dir);
  r.report_path = o.out_dir / "metrics.txt";
  write_text_file(r.report_path, r.text);
  return r;
}

// ---------------------------------------------------------------------------
// ablate

struct AblateOptions {
  fs::path dataset;
  fusion::ModelConfig base;  // dims and knobs shared by every variant
  train::Hyperparams hp;
  WindowingOptions windows;
  double threshold = 0.5;
  fs::path out_dir = "ablation";
};

struct AblateRow {
  std::string name;
  fusion::ModelConfig config;
  bool ok = false;
  std::string error;
  metrics::MetricsReport report;
};

struct AblateResult {
  std::vector<AblateRow> rows;
  fs::path csv_path;
  fs::path table_path;
  std::string table_text;
};

namespace detail {

inline std::string ablation_csv(const std::vector<AblateRow>& rows, const json& prov) {
  std::string out = "# config " + prov.dump() + "\n";
  out += "model,visual_encoder,global_context,fusion,accuracy,auc,f1,precision,recall\n";
  std::string failures;
  for (const auto& r : rows) {
    out += r.name;
    out += ',';
    out += fusion::visual_encoder_name(r.config.visual_encoder);
    out += ',';
    out += r.config.use_global_context ? "yes" : "no";
    out += ',';
    out += fusion::fusion_name(r.config.fusion);
    if (r.ok) {
      out += ',' + fmt(r.report.accuracy) + ',' + fmt(r.report.auc) + ',' + fmt(r.report.f1) +
             ',' + fmt(r.report.precision) + ',' + fmt(r.report.recall);
    } else {
      out += ",,,,,";
      failures += "# " + r.name + " failed: " + r.error + "\n";
    }
    out += '\n';
  }
  return out + failures;
}

inline std::string ablation_table(const std::vector<AblateRow>& rows) {
  const char* headers[] = {"Model",    "Visual Encoder", "Global Context",
                           "Fusion Approach", "Accuracy", "AUC",
                           "F1",       "Precision",      "Recall"};
  constexpr std::size_t kCols = 9;

  // column-best over succeeded rows; the winning cells get *bold* markers
  double best[5] = {-1.0, -1.0, -1.0, -1.0, -1.0};
  for (const auto& r : rows) {
    if (!r.ok) continue;
    const double vals[5] = {r.report.accuracy, r.report.auc, r.report.f1,
                            r.report.precision, r.report.recall};
    for (int k = 0; k < 5; ++k) best[k] = std::max(best[k], vals[k]);
  }

  auto metric_cell = [&](double v, int k) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    std::string s(buf);
    if (v == best[k]) s = "*" + s + "*";
    return s;
  };

  std::vector<std::vector<std::string>> grid;
  grid.emplace_back(headers, headers + kCols);
  for (const auto& r : rows) {
    std::vector<std::string> row{r.name, fusion::visual_encoder_name(r.config.visual_encoder),
                                 r.config.use_global_context ? "yes" : "no",
                                 fusion::fusion_name(r.config.fusion)};
    if (r.ok) {
      const double vals[5] = {r.report.accuracy, r.report.auc, r.report.f1,
                              r.report.precision, r.report.recall};
      for (int k = 0; k < 5; ++k) row.push_back(metric_cell(vals[k], k));
    } else {
      row.push_back("failed: " + r.error);
      while (row.size() < kCols) row.emplace_back("");
    }
    grid.push_back(std::move(row));
  }

  std::size_t width[kCols] = {};
  for (const auto& row : grid) {
    for (std::size_t c = 0; c < kCols; ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::string out;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    std::string line;
    for (std::size_t c = 0; c < kCols; ++c) {
      std::string cell = grid[i][c];
      cell.resize(width[c], ' ');
      line += cell;
      if (c + 1 < kCols) line += "  ";
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
    if (i == 0) {
      std::string rule;
      for (std::size_t c = 0; c < kCols; ++c) {
        rule += std::string(width[c], '-');
        if (c + 1 < kCols) rule += "  ";
      }
      out += rule + "\n";
    }
  }
  return out;
}

}  // namespace detail

/// Trains and evaluates every grid variant on one shared split; a variant
/// failure is recorded in its row and the rest continue.
inline AblateResult cmd_ablate(const AblateOptions& o) {
  train::validate(o.hp);
  if (o.base.seq_len < 1) throw ConfigError("model: seq_len must be positive");
  auto grid = fusion::variant_grid(o.base);
  PreparedData pd = prepare_windows(o.dataset, o.base.seq_len, o.windows);

  AblateResult res;
  for (auto& [name, cfg] : grid) {
    AblateRow row;
    row.name = name;
    cfg = adopt_dataset_geometry(cfg, pd.meta);
    row.config = cfg;
    try {
      check_model_dataset(cfg, pd.meta);
      fusion::validate(cfg);
      if (pd.split.train.empty()) throw ContractError("train split is empty");
      if (pd.split.test.empty()) throw ContractError("test split is empty");
      fusion::Model model(cfg, o.hp.seed);
      train::train(model, pd.split.train, pd.split.val, o.hp);
      row.report = train::evaluate(model, pd.split.test, o.hp.batch_size, o.threshold).report;
      row.ok = true;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    res.rows.push_back(std::move(row));
  }

  const json prov = run_provenance("ablate", o.base, o.hp, o.windows, o.dataset);
  fs::create_directories(o.out_dir);
  res.csv_path = o.out_dir / "ablation.csv";
  write_text_file(res.csv_path, detail::ablation_csv(res.rows, prov));
  res.table_text = detail::ablation_table(res.rows);
  res.table_path = o.out_dir / "ablation.txt";
  write_text_file(res.table_path, "# config " + prov.dump() + "\n" + res.table_text);
  return res;
}

// ---------------------------------------------------------------------------
// gradcheck

struct GradcheckOptions {
  std::uint64_t seed = 0;
  bool inject_backward_fault = false;  // mutation self-test: corrupt one backward rule
  fs::path out_file;                   // optional report copy
};

struct GradcheckComponent {
  std::string name;
  double worst = 0.0;
  bool pass = false;
};

struct GradcheckResult {
  std::vector<GradcheckComponent> components;
  bool all_pass = false;
  std::string text;
};

namespace detail {

// Desk-dim audit constants: T=4, feature_dim=8, hidden=8, eps=1e-5, rel-err
// threshold 1e-4. The audited loss is the output sum scaled by 2^-8: the
// exact binary scale pushes central-difference quantization noise under the
// 1e-8 absolute floor of the relative-error denominator while leaving the
// comparison for real gradients relative (see tensor/gradcheck.hpp).
inline constexpr double kGcEps = 1e-5;
inline constexpr double kGcThreshold = 1e-4;
inline constexpr std::int64_t kGcSeqLen = 4;
inline constexpr std::int64_t kGcDim = 8;

inline Tensor gc_scaled_sum(const Tensor& t) {
  return autodiff::mul(autodiff::sum_all(t), Tensor::leaf({1}, {1.0 / 256.0}));
}

inline Tensor gc_random_leaf(Rng& rng, autodiff::Shape shape) {
  std::vector<double> v(static_cast<std::size_t>(autodiff::numel(shape)));
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return Tensor::leaf(std::move(shape), std::move(v));
}

inline std::vector<Tensor> gc_params(const nn::ParamMap& named) {
  std::vector<Tensor> out;
  for (const auto& [name, t] : named) out.push_back(t);
  return out;
}

inline fusion::BatchInputs gc_random_inputs(const fusion::ModelConfig& cfg, Rng& rng) {
  fusion::BatchInputs in;
  in.B = 1;
  in.T = cfg.seq_len;
  in.pose = gc_random_leaf(rng, {cfg.seq_len, cfg.pose_dim});
  in.bbox = gc_random_leaf(rng, {cfg.seq_len, cfg.bbox_dim});
  in.speed = gc_random_leaf(rng, {cfg.seq_len, cfg.speed_dim});
  in.local = gc_random_leaf(rng, {cfg.seq_len, cfg.feature_dim});
  in.global_ctx = gc_random_leaf(rng, {cfg.seq_len, cfg.feature_dim});
  in.has_global = true;
  return in;
}

}  // namespace detail

/// Finite-difference audit of every layer type and all four fusion forwards
/// at desk dims. Returns per-component worst relative errors; a component
/// passes below 1e-4.
inline GradcheckResult cmd_gradcheck(const GradcheckOptions& o) {
  using namespace detail;
  const double fault_before = autodiff::fault::tanh_backward_scale;
  if (o.inject_backward_fault) autodiff::fault::tanh_backward_scale = 1.001;

  GradcheckResult res;
  auto run = [&](const std::string& name, const std::function<Tensor()>& rebuild,
                 const std::vector<Tensor>& params) {
    GradcheckComponent c;
    c.name = name;
    c.worst = autodiff::finite_diff_check(rebuild, params, kGcEps);
    c.pass = c.worst < kGcThreshold;
    res.components.push_back(c);
  };

  {
    Rng rng(o.seed + 1);
    nn::DenseLayer layer(kGcDim, kGcDim, nn::Activation::kSigmoid, rng);
    Tensor x = gc_random_leaf(rng, {3, kGcDim});
    nn::ParamMap named;
    layer.named_params("dense", named);
    run("dense", [&]() { return gc_scaled_sum(layer.forward_batch(x)); }, gc_params(named));
  }
  {
    Rng rng(o.seed + 2);
    nn::GRULayer layer(kGcDim, kGcDim, rng);
    std::vector<Tensor> xs;
    for (std::int64_t t = 0; t < kGcSeqLen; ++t) xs.push_back(gc_random_leaf(rng, {2, kGcDim}));
    nn::ParamMap named;
    layer.named_params("gru", named);
    run("gru",
        [&]() {
          auto hs = nn::gru_sequence_batch(layer, xs);
          return gc_scaled_sum(autodiff::concat(hs, 0));
        },
        gc_params(named));
  }
  {
    Rng rng(o.seed + 3);
    nn::AttentionBlock block(kGcDim, rng, 0.0);
    std::vector<Tensor> hs;
    for (std::int64_t t = 0; t < kGcSeqLen; ++t) hs.push_back(gc_random_leaf(rng, {2, kGcDim}));
    nn::ParamMap named;
    block.named_params("attention", named);
    Rng unused(0);
    run("attention",
        [&]() {
          return gc_scaled_sum(nn::attend_batch(block, hs, false, unused).output);
        },
        gc_params(named));
  }
  {
    Rng rng(o.seed + 4);
    nn::ConvEncoder2D enc(1, 2, 1, kGcDim, rng);
    Tensor frames = gc_random_leaf(rng, {2, 8, 8, 1});
    nn::ParamMap named;
    enc.named_params("conv2d", named);
    run("conv2d", [&]() { return gc_scaled_sum(enc.encode_stack(frames)); }, gc_params(named));
  }
  {
    Rng rng(o.seed + 5);
    nn::ConvEncoder3D enc(1, 2, 1, kGcDim, rng);
    Tensor clips = gc_random_leaf(rng, {1, kGcSeqLen, 8, 8, 1});
    nn::ParamMap named;
    enc.named_params("conv3d", named);
    run("conv3d", [&]() { return gc_scaled_sum(enc.encode_batch(clips)); }, gc_params(named));
  }
  for (auto fusion_kind :
       {fusion::FusionStrategy::kHybrid, fusion::FusionStrategy::kLater,
        fusion::FusionStrategy::kEarly, fusion::FusionStrategy::kHierarchical}) {
    fusion::ModelConfig cfg;
    cfg.fusion = fusion_kind;
    cfg.visual_encoder = fusion::VisualEncoder::kPrecomputed;
    cfg.use_global_context = true;
    cfg.hidden_dim = kGcDim;
    cfg.feature_dim = kGcDim;
    cfg.seq_len = kGcSeqLen;
    fusion::Model model(cfg, o.seed + 10);
    Rng rng(o.seed + 100);
    const fusion::BatchInputs in = gc_random_inputs(cfg, rng);
    run(std::string("fusion_") + fusion::fusion_name(fusion_kind),
        [&]() { return gc_scaled_sum(model.forward_batch(in)); },
        model.params());
  }

  autodiff::fault::tanh_backward_scale = fault_before;

  res.all_pass = true;
  std::string text = "# gradient check: central differences, eps=1e-5, threshold 1e-4\n";
  if (o.inject_backward_fault) text += "# backward fault injected: tanh rule scaled by 1.001\n";
  char line[96];
  for (const auto& c : res.components) {
    res.all_pass = res.all_pass && c.pass;
    std::snprintf(line, sizeof line, "%-20s %.3e  %s\n", c.name.c_str(), c.worst,
                  c.pass ? "PASS" : "FAIL");
    text += line;
  }
  text += res.all_pass ? "all components pass\n" : "gradient check FAILED\n";
  res.text = text;

  if (!o.out_file.empty()) {
    if (o.out_file.has_parent_path()) fs::create_directories(o.out_file.parent_path());
    write_text_file(o.out_file, res.text);
  }
  return res;
}

}  // namespace pcip::cli
