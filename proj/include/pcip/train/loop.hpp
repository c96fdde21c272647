#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "pcip/fusion/model.hpp"
#include "pcip/metrics/metrics.hpp"
#include "pcip/train/adam.hpp"
#include "pcip/train/loss.hpp"

namespace pcip::train {

struct EpochRecord {
  std::int64_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  bool has_val = false;
  metrics::MetricsReport val_metrics;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::int64_t best_epoch = -1;
  double best_loss = 0.0;
  double wall_seconds = 0.0;
  // parameter snapshots index-aligned with Model::named_params(), kept so a
  // caller can persist both the selected and the last state; desk models are
  // small enough that two copies cost nothing
  std::vector<std::vector<double>> best_values;
  std::vector<std::vector<double>> final_values;
};

/// Writes a snapshot captured by train() back into the model's parameters.
inline void apply_param_values(fusion::Model& model,
                               const std::vector<std::vector<double>>& values) {
  nn::ParamMap params = model.named_params();
  if (values.size() != params.size()) {
    throw ContractError("apply_param_values: snapshot holds " +
                        std::to_string(values.size()) + " tensors for " +
                        std::to_string(params.size()) + " params");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (values[k].size() != params[k].second.values().size()) {
      throw ContractError("apply_param_values: size mismatch for " + params[k].first);
    }
    params[k].second.values() = values[k];
  }
}

struct EvalResult {
  double loss = 0.0;  // mean BCE, no regularizer
  std::vector<double> scores;
  std::vector<int> labels;
  metrics::MetricsReport report;
};

namespace detail {

inline std::vector<std::size_t> batch_slices(std::size_t n, std::int64_t batch_size) {
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s < n; s += static_cast<std::size_t>(batch_size)) starts.push_back(s);
  return starts;
}

}  // namespace detail

/// Deterministic eval pass: forward in eval mode, mean BCE over all samples,
/// and the full metric report at the given threshold.
inline EvalResult evaluate(const fusion::Model& model,
                           const std::vector<data::SampleWindow>& set,
                           std::int64_t batch_size, double threshold = 0.5) {
  if (set.empty()) throw ContractError("evaluate: empty sample set");
  if (batch_size < 1) throw ContractError("evaluate: batch_size must be >= 1");
  EvalResult out;
  out.scores.reserve(set.size());
  out.labels.reserve(set.size());
  std::vector<std::size_t> idx(set.size());
  std::iota(idx.begin(), idx.end(), 0);
  double loss_sum = 0.0;
  for (std::size_t start : detail::batch_slices(set.size(), batch_size)) {
    const std::size_t stop = std::min(set.size(), start + static_cast<std::size_t>(batch_size));
    const std::vector<std::size_t> chunk(idx.begin() + static_cast<std::ptrdiff_t>(start),
                                         idx.begin() + static_cast<std::ptrdiff_t>(stop));
    const fusion::BatchInputs in = fusion::make_batch(model.config(), set, chunk);
    const Tensor p = model.forward_batch(in);
    const Tensor l = bce_loss(p, in.labels);
    loss_sum += l.values()[0] * static_cast<double>(chunk.size());
    for (std::size_t k = 0; k < chunk.size(); ++k) {
      out.scores.push_back(p.values()[k]);
      out.labels.push_back(set[chunk[k]].label);
    }
  }
  out.loss = loss_sum / static_cast<double>(set.size());
  out.report = metrics::evaluate_scores(out.scores, out.labels, threshold);
  return out;
}

/// Minibatch training with Adam. Per epoch: seeded shuffle, then for each
/// batch forward(train), loss = BCE + L2 on the final classifier weights,
/// backward, Adam step, zero grads. History gets one record per epoch; the
/// recorded train loss is the optimized (regularized) per-sample mean, the
/// val loss is plain BCE. The best epoch is chosen by val loss (train loss
/// when no val set) and the model is left holding that epoch's parameters.
inline TrainHistory train(fusion::Model& model,
                          const std::vector<data::SampleWindow>& train_set,
                          const std::vector<data::SampleWindow>& val_set,
                          const Hyperparams& hp) {
  validate(hp);
  if (train_set.empty()) throw ContractError("train: empty training set");
  const auto t0 = std::chrono::steady_clock::now();

  TrainHistory hist;
  nn::ParamMap params = model.named_params();
  AdamState state = AdamState::for_params(params);
  Rng root(hp.seed);

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::int64_t epoch = 0; epoch < hp.epochs; ++epoch) {
    Rng shuffle_rng = root.fork(2 * static_cast<std::uint64_t>(epoch));
    Rng dropout_rng = root.fork(2 * static_cast<std::uint64_t>(epoch) + 1);
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    std::int64_t batch_index = 0;
    for (std::size_t start : detail::batch_slices(order.size(), hp.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(hp.batch_size));
      const std::vector<std::size_t> chunk(order.begin() + static_cast<std::ptrdiff_t>(start),
                                           order.begin() + static_cast<std::ptrdiff_t>(stop));
      const fusion::BatchInputs in = fusion::make_batch(model.config(), train_set, chunk);
      const Tensor p = model.forward_batch(in, /*train=*/true, dropout_rng);
      Tensor loss = autodiff::add(bce_loss(p, in.labels),
                                  l2_penalty(model.final_fc().weight(), hp.l2_lambda));
      const double lv = loss.values()[0];
      if (!std::isfinite(lv)) {
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                           " batch " + std::to_string(batch_index));
      }
      loss_sum += lv * static_cast<double>(chunk.size());
      autodiff::backward(loss);
      adam_step(state, params, hp);
      for (auto& [name, t] : params) t.zero_grad();
      ++batch_index;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(train_set.size());
    double select_loss = rec.train_loss;
    if (!val_set.empty()) {
      const EvalResult ev = evaluate(model, val_set, hp.batch_size);
      rec.val_loss = ev.loss;
      rec.has_val = true;
      rec.val_metrics = ev.report;
      select_loss = ev.loss;
    }
    hist.epochs.push_back(rec);

    if (hist.best_epoch < 0 || select_loss < hist.best_loss) {
      hist.best_epoch = epoch;
      hist.best_loss = select_loss;
      hist.best_values.clear();
      for (const auto& [name, t] : params) hist.best_values.push_back(t.values());
    }
  }

  if (hist.best_epoch >= 0) {
    for (const auto& [name, t] : params) hist.final_values.push_back(t.values());
    for (std::size_t k = 0; k < params.size(); ++k) {
      params[k].second.values() = hist.best_values[k];
    }
  }
  hist.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return hist;
}

/// CSV export: epoch, train loss, val loss, then the five val metrics.
/// Wall time is deliberately absent so same-seed runs serialize identically.
inline std::string history_csv(const TrainHistory& hist) {
  std::string out = "epoch,train_loss,val_loss,accuracy,auc,f1,precision,recall\n";
  auto num = [](double v) {
    nlohmann::json j = v;
    return j.dump();
  };
  for (const auto& r : hist.epochs) {
    out += std::to_string(r.epoch);
    out += ',';
    out += num(r.train_loss);
    if (r.has_val) {
      // undefined metrics (single-class val split) render as empty cells
      auto cell = [&](double v, bool defined) { return defined ? ',' + num(v) : std::string{","}; };
      const auto& m = r.val_metrics;
      out += ',' + num(r.val_loss);
      out += ',' + num(m.accuracy);
      out += cell(m.auc, m.auc_defined);
      out += cell(m.f1, m.f1_defined);
      out += cell(m.precision, m.precision_defined);
      out += cell(m.recall, m.recall_defined);
    } else {
      out += ",,,,,,";
    }
    out += '\n';
  }
  return out;
}

}  // namespace pcip::train
