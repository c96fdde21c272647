#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pcip/tensor/tensor.hpp"

namespace pcip::autodiff {

struct FiniteDiffReport {
  double max_rel_err = 0.0;
  std::size_t worst_param = 0;  // index into the params vector
  std::size_t worst_coord = 0;  // flat index within that parameter
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Central-difference gradient audit. `rebuild` must construct the scalar loss
/// from the parameters' current values on every call; the analytic gradient is
/// taken from one backward pass, then each coordinate is perturbed by ±epsilon.
/// Relative error per coordinate: |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
inline FiniteDiffReport finite_diff_report(const std::function<Tensor()>& rebuild,
                                           const std::vector<Tensor>& params,
                                           double epsilon) {
  if (!(epsilon > 0.0)) {
    throw ContractError("finite_diff_check: epsilon must be positive, got " +
                        std::to_string(epsilon));
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (!params[p].requires_grad() || !params[p].is_leaf()) {
      throw ContractError("finite_diff_check: parameter " + std::to_string(p) +
                          " is not a grad-requiring leaf");
    }
  }
  auto eval = [&]() {
    const double v = rebuild().item();
    if (!std::isfinite(v)) throw NumericError("finite_diff_check: non-finite loss");
    return v;
  };

  for (const auto& p : params) const_cast<Tensor&>(p).zero_grad();
  Tensor loss = rebuild();
  if (!std::isfinite(loss.item())) throw NumericError("finite_diff_check: non-finite loss");
  backward(loss);
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) analytic.push_back(p.grad());

  FiniteDiffReport report;
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& vals = const_cast<Tensor&>(params[p]).values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double saved = vals[i];
      vals[i] = saved + epsilon;
      const double plus = eval();
      vals[i] = saved - epsilon;
      const double minus = eval();
      vals[i] = saved;
      const double numeric = (plus - minus) / (2.0 * epsilon);
      const double a = analytic[p][i];
      const double rel =
          std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_param = p;
        report.worst_coord = i;
        report.analytic = a;
        report.numeric = numeric;
      }
    }
  }
  return report;
}

inline double finite_diff_check(const std::function<Tensor()>& rebuild,
                                const std::vector<Tensor>& params, double epsilon) {
  return finite_diff_report(rebuild, params, epsilon).max_rel_err;
}

}  // namespace pcip::autodiff
