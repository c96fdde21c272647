#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pcip/rng.hpp"
#include "pcip/tensor/tensor.hpp"

namespace pcip::nn {

using autodiff::Shape;
using autodiff::Tensor;

/// Named grad-requiring parameters of a layer or model, in a stable order.
using ParamMap = std::vector<std::pair<std::string, Tensor>>;

/// Weight matrices draw uniformly from [-sqrt(1/fan_in), +sqrt(1/fan_in)];
/// keeps pre-activation variance bounded at any width.
inline Tensor uniform_init(Rng& rng, Shape shape, std::int64_t fan_in) {
  if (fan_in <= 0) throw ContractError("uniform_init: fan_in must be positive");
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  std::vector<double> v(static_cast<std::size_t>(autodiff::numel(shape)));
  for (auto& x : v) x = rng.uniform(-bound, bound);
  return Tensor::leaf(std::move(shape), std::move(v), /*requires_grad=*/true);
}

inline Tensor zero_init(Shape shape) {
  return Tensor::zeros(std::move(shape), /*requires_grad=*/true);
}

inline std::vector<Tensor> values_of(const ParamMap& named) {
  std::vector<Tensor> out;
  out.reserve(named.size());
  for (const auto& [name, t] : named) out.push_back(t);
  return out;
}

}  // namespace pcip::nn
