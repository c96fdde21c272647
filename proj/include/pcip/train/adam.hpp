#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pcip/nn/init.hpp"
#include "pcip/tensor/tensor.hpp"

namespace pcip::train {

using autodiff::Tensor;

struct Hyperparams {
  // Benchmark-scale runs pair 5e-7 with frozen pretrained backbones; desk
  // models train from scratch and want 1e-3.
  double learning_rate = 1e-3;
  std::int64_t epochs = 40;
  std::int64_t batch_size = 16;
  double l2_lambda = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 0;
};

inline void validate(const Hyperparams& hp) {
  // zero is legal and trains as a no-op; only negative or non-finite rates
  // are rejected
  if (!(hp.learning_rate >= 0.0)) {
    throw ContractError("hyperparams: learning_rate must be >= 0, got " +
                        std::to_string(hp.learning_rate));
  }
  if (hp.beta1 < 0.0 || hp.beta1 >= 1.0 || hp.beta2 < 0.0 || hp.beta2 >= 1.0) {
    throw ContractError("hyperparams: betas must lie in [0,1)");
  }
  if (hp.epochs < 0) throw ContractError("hyperparams: epochs must be >= 0");
  if (hp.batch_size < 1) throw ContractError("hyperparams: batch_size must be >= 1");
  if (hp.l2_lambda < 0.0) throw ContractError("hyperparams: l2_lambda must be >= 0");
  if (!(hp.adam_epsilon > 0.0)) throw ContractError("hyperparams: adam_epsilon must be > 0");
}

/// First/second moment accumulators, index-aligned with the parameter list
/// they were created from.
struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::int64_t step = 0;

  static AdamState for_params(const nn::ParamMap& params) {
    AdamState s;
    s.m.reserve(params.size());
    s.v.reserve(params.size());
    for (const auto& [name, t] : params) {
      s.m.emplace_back(t.values().size(), 0.0);
      s.v.emplace_back(t.values().size(), 0.0);
    }
    return s;
  }
};

/// One bias-corrected Adam update, reading each parameter's accumulated grad.
/// Parameter tensors are shared handles, so the update mutates the model the
/// map was taken from. Gradients are left untouched; the caller zeroes them.
inline void adam_step(AdamState& state, const nn::ParamMap& params, const Hyperparams& hp) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ContractError("adam_step: state holds " + std::to_string(state.m.size()) +
                        " slots for " + std::to_string(params.size()) + " params");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor t = params[k].second;
    const auto& grad = t.grad();
    auto& vals = t.values();
    auto& mk = state.m[k];
    auto& vk = state.v[k];
    if (mk.size() != vals.size()) {
      throw ContractError("adam_step: state size mismatch for " + params[k].first);
    }
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double g = grad[i];
      if (!std::isfinite(g)) {
        throw NumericError("adam_step: non-finite gradient in " + params[k].first + "[" +
                           std::to_string(i) + "]");
      }
      mk[i] = hp.beta1 * mk[i] + (1.0 - hp.beta1) * g;
      vk[i] = hp.beta2 * vk[i] + (1.0 - hp.beta2) * g * g;
      const double mhat = mk[i] / bc1;
      const double vhat = vk[i] / bc2;
      vals[i] -= hp.learning_rate * mhat / (std::sqrt(vhat) + hp.adam_epsilon);
    }
  }
}

}  // namespace pcip::train
