#include <cstdint>
#include <exception>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "pcip/cli/commands.hpp"

namespace {

using namespace pcip;
namespace fs = std::filesystem;

// Precedence: command-line flags > config file sections > built-in defaults.
// Flags are parsed into scratch variables; only the ones the user actually
// passed are copied over the config-file overlay.
struct FlagValue {
  double d = 0.0;
  std::int64_t i = 0;
  std::uint64_t u = 0;
  std::string s;
};

nlohmann::json section(const nlohmann::json& cfg, const char* name) {
  if (cfg.is_object() && cfg.contains(name)) return cfg.at(name);
  return nlohmann::json();
}

void add_window_flags(CLI::App* cmd, std::map<std::string, FlagValue>& fv) {
  cmd->add_option("--overlap", fv["overlap"].d, "window overlap fraction [0,1)");
  cmd->add_option("--tte-lo", fv["tte_lo"].i, "minimum frames from window end to event");
  cmd->add_option("--tte-hi", fv["tte_hi"].i, "maximum frames from window end to event");
  cmd->add_option("--train-ratio", fv["train_ratio"].d, "train split fraction");
  cmd->add_option("--val-ratio", fv["val_ratio"].d, "validation split fraction");
  cmd->add_option("--test-ratio", fv["test_ratio"].d, "test split fraction");
  cmd->add_option("--split-seed", fv["split_seed"].u, "split shuffle seed");
}

void apply_window_flags(const CLI::App* cmd, const std::map<std::string, FlagValue>& fv,
                        cli::WindowingOptions& w) {
  if (cmd->count("--overlap")) w.overlap = fv.at("overlap").d;
  if (cmd->count("--tte-lo")) w.tte_lo = fv.at("tte_lo").i;
  if (cmd->count("--tte-hi")) w.tte_hi = fv.at("tte_hi").i;
  if (cmd->count("--train-ratio")) w.train_ratio = fv.at("train_ratio").d;
  if (cmd->count("--val-ratio")) w.val_ratio = fv.at("val_ratio").d;
  if (cmd->count("--test-ratio")) w.test_ratio = fv.at("test_ratio").d;
  if (cmd->count("--split-seed")) w.split_seed = fv.at("split_seed").u;
}

void add_model_flags(CLI::App* cmd, std::map<std::string, FlagValue>& fv) {
  cmd->add_option("--fusion", fv["fusion"].s, "fusion strategy: hybrid, later, early, hierarchical");
  cmd->add_option("--encoder", fv["encoder"].s, "visual encoder: precomputed, frame2d_rnn, clip3d");
  cmd->add_option("--global", fv["global"].i, "use the global context channel (0/1)");
  cmd->add_option("--hidden", fv["hidden"].i, "hidden state width");
  cmd->add_option("--feature-dim", fv["feature_dim"].i, "visual feature width");
  cmd->add_option("--seq-len", fv["seq_len"].i, "observation window length (frames)");
  cmd->add_option("--dropout", fv["dropout"].d, "dropout rate in [0,1)");
  // image dims are adopted from the dataset at train time; no flags for them here
  cmd->add_option("--conv-channels", fv["conv_channels"].i, "conv encoder channel count");
  cmd->add_option("--conv-depth", fv["conv_depth"].i, "conv encoder pooling depth");
}

void apply_model_flags(const CLI::App* cmd, const std::map<std::string, FlagValue>& fv,
                       fusion::ModelConfig& m) {
  if (cmd->count("--fusion")) m.fusion = fusion::parse_fusion(fv.at("fusion").s);
  if (cmd->count("--encoder")) m.visual_encoder = fusion::parse_visual_encoder(fv.at("encoder").s);
  if (cmd->count("--global")) m.use_global_context = fv.at("global").i != 0;
  if (cmd->count("--hidden")) m.hidden_dim = fv.at("hidden").i;
  if (cmd->count("--feature-dim")) m.feature_dim = fv.at("feature_dim").i;
  if (cmd->count("--seq-len")) m.seq_len = fv.at("seq_len").i;
  if (cmd->count("--dropout")) m.dropout_rate = fv.at("dropout").d;
  if (cmd->count("--conv-channels")) m.conv_channels = fv.at("conv_channels").i;
  if (cmd->count("--conv-depth")) m.conv_depth = fv.at("conv_depth").i;
}

void add_train_flags(CLI::App* cmd, std::map<std::string, FlagValue>& fv) {
  cmd->add_option("--lr", fv["lr"].d, "learning rate");
  cmd->add_option("--epochs", fv["epochs"].i, "training epochs");
  cmd->add_option("--batch-size", fv["batch_size"].i, "minibatch size");
  cmd->add_option("--l2", fv["l2"].d, "L2 weight on the final classifier layer");
  cmd->add_option("--beta1", fv["beta1"].d, "Adam first-moment decay");
  cmd->add_option("--beta2", fv["beta2"].d, "Adam second-moment decay");
}

void apply_train_flags(const CLI::App* cmd, const std::map<std::string, FlagValue>& fv,
                       train::Hyperparams& hp) {
  if (cmd->count("--lr")) hp.learning_rate = fv.at("lr").d;
  if (cmd->count("--epochs")) hp.epochs = fv.at("epochs").i;
  if (cmd->count("--batch-size")) hp.batch_size = fv.at("batch_size").i;
  if (cmd->count("--l2")) hp.l2_lambda = fv.at("l2").d;
  if (cmd->count("--beta1")) hp.beta1 = fv.at("beta1").d;
  if (cmd->count("--beta2")) hp.beta2 = fv.at("beta2").d;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pedestrian crossing-intention models: data, training, evaluation, ablation"};
  app.require_subcommand(1);
  app.fallthrough();  // --config/--seed/--out may follow the subcommand name

  std::string config_path;
  std::uint64_t seed = 0;
  std::string out;
  app.add_option("--config", config_path, "JSON config file (sections: synth, model, train, windows)")
      ->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "master seed (model init, training, data generation)");
  app.add_option("--out", out, "output directory (gradcheck: report file)");

  std::map<std::string, FlagValue> fv;

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  gen->add_option("--n-samples", fv["n_samples"].i, "number of tracks");
  gen->add_option("--positive-rate", fv["positive_rate"].d, "crossing fraction");
  gen->add_option("--pose", fv["pose"].d, "pose signal strength [0,1]");
  gen->add_option("--bbox", fv["bbox"].d, "bbox signal strength [0,1]");
  gen->add_option("--speed", fv["speed"].d, "speed signal strength [0,1]");
  gen->add_option("--local", fv["local"].d, "local context signal strength [0,1]");
  gen->add_option("--global", fv["g_global"].d, "global context signal strength [0,1]");
  gen->add_option("--noise", fv["noise"].d, "noise sigma");
  gen->add_option("--kind", fv["kind"].s, "feature kind: vector or image");
  gen->add_option("--feature-dim", fv["g_feature_dim"].i, "vector feature width");
  gen->add_option("--img-h", fv["g_img_h"].i, "image height");
  gen->add_option("--img-w", fv["g_img_w"].i, "image width");
  gen->add_option("--img-c", fv["g_img_c"].i, "image channels");
  gen->add_option("--track-len", fv["track_len"].i, "frames per track");
  gen->add_option("--tte-lo", fv["g_tte_lo"].i, "minimum time to event");
  gen->add_option("--tte-hi", fv["g_tte_hi"].i, "maximum time to event");

  auto* tr = app.add_subcommand("train", "train one model and write checkpoints + history");
  std::string tr_dataset, tr_variant;
  tr->add_option("--dataset", tr_dataset, "dataset directory or manifest path")->required();
  tr->add_option("--variant", tr_variant, "published variant name (Ours, Ours1..Ours7)");
  add_model_flags(tr, fv);
  add_train_flags(tr, fv);
  add_window_flags(tr, fv);

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset split");
  std::string ev_checkpoint, ev_dataset, ev_split;
  double ev_threshold = 0.5;
  std::int64_t ev_batch = 16;
  ev->add_option("--checkpoint", ev_checkpoint, "checkpoint file")->required();
  ev->add_option("--dataset", ev_dataset, "dataset directory or manifest path")->required();
  ev->add_option("--split", ev_split, "train, val, test or all");
  ev->add_option("--threshold", ev_threshold, "decision threshold");
  ev->add_option("--batch-size", ev_batch, "evaluation batch size");
  add_window_flags(ev, fv);

  auto* ab = app.add_subcommand("ablate", "train and evaluate the full 8-variant grid");
  std::string ab_dataset;
  double ab_threshold = 0.5;
  ab->add_option("--dataset", ab_dataset, "dataset directory or manifest path")->required();
  ab->add_option("--threshold", ab_threshold, "decision threshold");
  add_model_flags(ab, fv);
  add_train_flags(ab, fv);
  add_window_flags(ab, fv);

  auto* gc = app.add_subcommand("gradcheck", "finite-difference audit of layers and fusion models");
  bool gc_fault = false;
  gc->add_flag("--inject-backward-fault", gc_fault,
               "mutation self-test: corrupt the tanh backward rule and expect failure");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    nlohmann::json cfg;
    if (!config_path.empty()) cfg = cli::load_config_file(config_path);
    const bool seed_set = app.count("--seed") > 0;
    const bool out_set = app.count("--out") > 0;

    if (gen->parsed()) {
      cli::GenDataOptions o;
      o.synth = cli::synth_overlay(o.synth, section(cfg, "synth"));
      if (gen->count("--n-samples")) o.synth.n_samples = fv["n_samples"].i;
      if (gen->count("--positive-rate")) o.synth.positive_rate = fv["positive_rate"].d;
      if (gen->count("--pose")) o.synth.pose_strength = fv["pose"].d;
      if (gen->count("--bbox")) o.synth.bbox_strength = fv["bbox"].d;
      if (gen->count("--speed")) o.synth.speed_strength = fv["speed"].d;
      if (gen->count("--local")) o.synth.local_strength = fv["local"].d;
      if (gen->count("--global")) o.synth.global_strength = fv["g_global"].d;
      if (gen->count("--noise")) o.synth.noise_sigma = fv["noise"].d;
      if (gen->count("--kind")) o.synth.kind = data::parse_feature_kind(fv["kind"].s);
      if (gen->count("--feature-dim")) o.synth.feature_dim = fv["g_feature_dim"].i;
      if (gen->count("--img-h")) o.synth.img_h = fv["g_img_h"].i;
      if (gen->count("--img-w")) o.synth.img_w = fv["g_img_w"].i;
      if (gen->count("--img-c")) o.synth.img_c = fv["g_img_c"].i;
      if (gen->count("--track-len")) o.synth.track_len = fv["track_len"].i;
      if (gen->count("--tte-lo")) o.synth.tte_lo = fv["g_tte_lo"].i;
      if (gen->count("--tte-hi")) o.synth.tte_hi = fv["g_tte_hi"].i;
      if (seed_set) o.synth.seed = seed;
      if (out_set) o.out_dir = out;
      const auto r = cli::cmd_gen_data(o);
      std::cout << "wrote " << r.n_tracks << " tracks to " << r.manifest.string() << "\n";
      return 0;
    }

    if (tr->parsed()) {
      cli::TrainOptions o;
      o.dataset = tr_dataset;
      o.variant = tr_variant;
      o.model = cli::model_overlay(o.model, section(cfg, "model"));
      o.hp = cli::hyperparams_overlay(o.hp, section(cfg, "train"));
      o.windows = cli::windowing_overlay(o.windows, section(cfg, "windows"));
      apply_model_flags(tr, fv, o.model);
      apply_train_flags(tr, fv, o.hp);
      apply_window_flags(tr, fv, o.windows);
      if (seed_set) o.hp.seed = seed;
      if (out_set) o.out_dir = out;
      const auto r = cli::cmd_train(o);
      std::cout << "trained " << (o.variant.empty() ? "model" : o.variant) << " for "
                << r.history.epochs.size() << " epochs in " << r.history.wall_seconds << "s";
      if (r.history.best_epoch >= 0) {
        std::cout << "; best epoch " << r.history.best_epoch << " (loss "
                  << r.history.best_loss << ")";
      }
      std::cout << "\nwrote " << r.best_checkpoint.string() << ", "
                << r.final_checkpoint.string() << ", " << r.history_path.string() << "\n";
      return 0;
    }

    if (ev->parsed()) {
      cli::EvalOptions o;
      o.checkpoint = ev_checkpoint;
      o.dataset = ev_dataset;
      o.windows = cli::windowing_overlay(o.windows, section(cfg, "windows"));
      apply_window_flags(ev, fv, o.windows);
      if (ev->count("--split")) o.split = ev_split;
      if (ev->count("--threshold")) o.threshold = ev_threshold;
      if (ev->count("--batch-size")) o.batch_size = ev_batch;
      if (out_set) o.out_dir = out;
      const auto r = cli::cmd_eval(o);
      std::cout << r.text;
      std::cout << "wrote " << r.report_path.string() << "\n";
      return 0;
    }

    if (ab->parsed()) {
      cli::AblateOptions o;
      o.dataset = ab_dataset;
      o.base = cli::model_overlay(o.base, section(cfg, "model"));
      o.hp = cli::hyperparams_overlay(o.hp, section(cfg, "train"));
      o.windows = cli::windowing_overlay(o.windows, section(cfg, "windows"));
      apply_model_flags(ab, fv, o.base);
      apply_train_flags(ab, fv, o.hp);
      apply_window_flags(ab, fv, o.windows);
      if (ab->count("--threshold")) o.threshold = ab_threshold;
      if (seed_set) o.hp.seed = seed;
      if (out_set) o.out_dir = out;
      const auto r = cli::cmd_ablate(o);
      std::cout << r.table_text;
      std::cout << "wrote " << r.csv_path.string() << " and " << r.table_path.string() << "\n";
      bool any_failed = false;
      for (const auto& row : r.rows) any_failed = any_failed || !row.ok;
      return any_failed ? 1 : 0;
    }

    if (gc->parsed()) {
      cli::GradcheckOptions o;
      o.seed = seed;
      o.inject_backward_fault = gc_fault;
      if (out_set) o.out_file = out;
      const auto r = cli::cmd_gradcheck(o);
      std::cout << r.text;
      return r.all_pass ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "pcip: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
