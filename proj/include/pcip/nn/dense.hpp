#pragma once

#include <cstdint>
#include <string>

#include "pcip/nn/init.hpp"
#include "pcip/tensor/ops.hpp"
#include "pcip/tensor/tensor.hpp"

namespace pcip::nn {

using autodiff::Tensor;

enum class Activation { kNone, kSigmoid, kTanh };

inline const char* activation_name(Activation a) {
  switch (a) {
    case Activation::kNone: return "none";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kTanh: return "tanh";
  }
  return "none";
}

/// Affine map y = act(W x + b); weight stored [out, in].
class DenseLayer {
 public:
  DenseLayer(std::int64_t in_dim, std::int64_t out_dim, Activation activation, Rng& rng)
      : in_dim_(in_dim),
        out_dim_(out_dim),
        activation_(activation),
        weight_(uniform_init(rng, {out_dim, in_dim}, in_dim)),
        bias_(zero_init({out_dim})) {
    if (in_dim < 1 || out_dim < 1) {
      throw ContractError("DenseLayer: dims must be positive");
    }
  }

  std::int64_t in_dim() const { return in_dim_; }
  std::int64_t out_dim() const { return out_dim_; }
  Activation activation() const { return activation_; }
  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }
  const Tensor& weight() const { return weight_; }
  const Tensor& bias() const { return bias_; }

  void named_params(const std::string& prefix, ParamMap& out) const {
    out.emplace_back(prefix + ".weight", weight_);
    out.emplace_back(prefix + ".bias", bias_);
  }

  /// Batched forward: x [B,in] -> [B,out].
  Tensor forward_batch(const Tensor& x) const {
    using namespace autodiff;
    if (x.rank() != 2 || x.shape()[1] != in_dim_) {
      throw DimensionError("dense: input " + shape_str(x.shape()) +
                           " does not match in_dim " + std::to_string(in_dim_));
    }
    Tensor y = add_bias(matmul(x, transpose(weight_)), bias_);
    switch (activation_) {
      case Activation::kNone: return y;
      case Activation::kSigmoid: return sigmoid(y);
      case Activation::kTanh: return autodiff::tanh(y);
    }
    return y;
  }

 private:
  std::int64_t in_dim_;
  std::int64_t out_dim_;
  Activation activation_;
  Tensor weight_;  // [out, in]
  Tensor bias_;    // [out]
};

/// Single-sample forward: x [in] -> [out].
inline Tensor dense(const DenseLayer& layer, const Tensor& x) {
  using namespace autodiff;
  if (x.rank() != 1) {
    throw DimensionError("dense: expected rank-1 input, got " + shape_str(x.shape()));
  }
  return reshape(layer.forward_batch(reshape(x, {1, x.size()})), {layer.out_dim()});
}

}  // namespace pcip::nn
