#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pcip/tensor/ops.hpp"
#include "pcip/tensor/tensor.hpp"

namespace pcip::train {

using autodiff::Tensor;

inline constexpr double kBceClamp = 1e-12;

/// Mean binary cross-entropy over the batch. Probabilities are clamped to
/// [1e-12, 1-1e-12] before the logs; inside the clamped region the loss is
/// flat, so those coordinates receive zero gradient. Labels must be exactly
/// 0 or 1.
inline Tensor bce_loss(const Tensor& p, const Tensor& y) {
  if (p.shape() != y.shape()) {
    throw ContractError("bce_loss: probabilities " + shape_str(p.shape()) +
                        " vs labels " + shape_str(y.shape()));
  }
  for (double v : y.values()) {
    if (v != 0.0 && v != 1.0) {
      throw ContractError("bce_loss: labels must be 0 or 1, got " + std::to_string(v));
    }
  }
  const std::int64_t n = p.size();
  const auto& pv = p.values();
  const auto& yv = y.values();
  double acc = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double ph = std::min(1.0 - kBceClamp, std::max(kBceClamp, pv[i]));
    acc -= yv[i] * std::log(ph) + (1.0 - yv[i]) * std::log1p(-ph);
  }
  auto pn = p.node();
  auto yn = y.node();
  return autodiff::make_op_node(
      "bce", {1}, {acc / static_cast<double>(n)}, {pn, yn},
      [pn, yn, n](const autodiff::TensorNode& o) {
        if (!pn->requires_grad) return;
        const double g = o.grad[0] / static_cast<double>(n);
        for (std::int64_t i = 0; i < n; ++i) {
          const double pi = pn->values[i];
          if (pi <= kBceClamp || pi >= 1.0 - kBceClamp) continue;
          pn->grad[i] += g * ((1.0 - yn->values[i]) / (1.0 - pi) - yn->values[i] / pi);
        }
      });
}

/// lambda * sum(w^2). Apply to the final classifier weights only; biases and
/// every other layer stay unregularized.
inline Tensor l2_penalty(const Tensor& weights, double lambda) {
  if (lambda < 0.0) {
    throw ContractError("l2_penalty: lambda must be >= 0, got " + std::to_string(lambda));
  }
  using namespace autodiff;
  return mul(sum_all(mul(weights, weights)), Tensor::leaf({1}, {lambda}));
}

}  // namespace pcip::train
