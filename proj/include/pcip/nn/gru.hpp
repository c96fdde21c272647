#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pcip/nn/init.hpp"
#include "pcip/tensor/ops.hpp"
#include "pcip/tensor/tensor.hpp"

namespace pcip::nn {

using autodiff::Tensor;

// Gated recurrent unit, Cho-style convention:
//   z = sigmoid(x Wz + h Uz + bz)
//   r = sigmoid(x Wr + h Ur + br)
//   hcand = tanh(x Wh + (r .* h) Uh + bh)
//   h_new = (1 - z) .* h_prev + z .* hcand
// Weight matrices are stored [in, hidden]; x and h are row vectors, so a
// batched step works on [B, in] and [B, hidden] stacks with the same code.
class GRULayer {
 public:
  GRULayer(std::int64_t input_dim, std::int64_t hidden_dim, Rng& rng)
      : input_dim_(input_dim),
        hidden_dim_(hidden_dim),
        Wz_(uniform_init(rng, {input_dim, hidden_dim}, input_dim)),
        Uz_(uniform_init(rng, {hidden_dim, hidden_dim}, hidden_dim)),
        bz_(zero_init({hidden_dim})),
        Wr_(uniform_init(rng, {input_dim, hidden_dim}, input_dim)),
        Ur_(uniform_init(rng, {hidden_dim, hidden_dim}, hidden_dim)),
        br_(zero_init({hidden_dim})),
        Wh_(uniform_init(rng, {input_dim, hidden_dim}, input_dim)),
        Uh_(uniform_init(rng, {hidden_dim, hidden_dim}, hidden_dim)),
        bh_(zero_init({hidden_dim})) {
    if (input_dim < 1 || hidden_dim < 1) {
      throw ContractError("GRULayer: dims must be positive, got input_dim=" +
                          std::to_string(input_dim) + " hidden_dim=" +
                          std::to_string(hidden_dim));
    }
  }

  std::int64_t input_dim() const { return input_dim_; }
  std::int64_t hidden_dim() const { return hidden_dim_; }

  Tensor& Wz() { return Wz_; }
  Tensor& Uz() { return Uz_; }
  Tensor& bz() { return bz_; }
  Tensor& Wr() { return Wr_; }
  Tensor& Ur() { return Ur_; }
  Tensor& br() { return br_; }
  Tensor& Wh() { return Wh_; }
  Tensor& Uh() { return Uh_; }
  Tensor& bh() { return bh_; }

  void named_params(const std::string& prefix, ParamMap& out) const {
    out.emplace_back(prefix + ".Wz", Wz_);
    out.emplace_back(prefix + ".Uz", Uz_);
    out.emplace_back(prefix + ".bz", bz_);
    out.emplace_back(prefix + ".Wr", Wr_);
    out.emplace_back(prefix + ".Ur", Ur_);
    out.emplace_back(prefix + ".br", br_);
    out.emplace_back(prefix + ".Wh", Wh_);
    out.emplace_back(prefix + ".Uh", Uh_);
    out.emplace_back(prefix + ".bh", bh_);
  }

  /// One step over a batch: x [B,in], h_prev [B,hidden] -> [B,hidden].
  Tensor step_batch(const Tensor& x, const Tensor& h_prev) const {
    using namespace autodiff;
    if (x.rank() != 2 || x.shape()[1] != input_dim_) {
      throw DimensionError("gru_step: input " + shape_str(x.shape()) +
                           " does not match layer input_dim " + std::to_string(input_dim_));
    }
    if (h_prev.rank() != 2 || h_prev.shape()[1] != hidden_dim_ ||
        h_prev.shape()[0] != x.shape()[0]) {
      throw DimensionError("gru_step: hidden state " + shape_str(h_prev.shape()) +
                           " does not match input " + shape_str(x.shape()) +
                           " with hidden_dim " + std::to_string(hidden_dim_));
    }
    Tensor one = Tensor::scalar(1.0);
    Tensor z = sigmoid(add_bias(add(matmul(x, Wz_), matmul(h_prev, Uz_)), bz_));
    Tensor r = sigmoid(add_bias(add(matmul(x, Wr_), matmul(h_prev, Ur_)), br_));
    Tensor hcand =
        autodiff::tanh(add_bias(add(matmul(x, Wh_), matmul(mul(r, h_prev), Uh_)), bh_));
    return add(mul(sub(one, z), h_prev), mul(z, hcand));
  }

 private:
  std::int64_t input_dim_;
  std::int64_t hidden_dim_;
  Tensor Wz_, Uz_, bz_;
  Tensor Wr_, Ur_, br_;
  Tensor Wh_, Uh_, bh_;
};

/// One step over a single sample: x [in], h_prev [hidden] -> [hidden].
inline Tensor gru_step(const GRULayer& layer, const Tensor& x, const Tensor& h_prev) {
  using namespace autodiff;
  if (x.rank() != 1) {
    throw DimensionError("gru_step: expected rank-1 input, got " + shape_str(x.shape()));
  }
  if (h_prev.rank() != 1) {
    throw DimensionError("gru_step: expected rank-1 hidden state, got " +
                         shape_str(h_prev.shape()));
  }
  Tensor h = layer.step_batch(reshape(x, {1, x.size()}), reshape(h_prev, {1, h_prev.size()}));
  return reshape(h, {layer.hidden_dim()});
}

/// Full unrolled sequence: xs [T,in] -> every hidden state [T,hidden].
/// h0 defaults to zeros when not supplied.
inline Tensor gru_sequence(const GRULayer& layer, const Tensor& xs, const Tensor& h0) {
  using namespace autodiff;
  if (xs.rank() != 2 || xs.shape()[1] != layer.input_dim()) {
    throw DimensionError("gru_sequence: input " + shape_str(xs.shape()) +
                         " does not match layer input_dim " +
                         std::to_string(layer.input_dim()));
  }
  const std::int64_t T = xs.shape()[0];
  Tensor h = reshape(h0, {1, layer.hidden_dim()});
  std::vector<Tensor> rows;
  rows.reserve(static_cast<std::size_t>(T));
  for (std::int64_t t = 0; t < T; ++t) {
    h = layer.step_batch(slice(xs, 0, t, 1), h);
    rows.push_back(h);
  }
  return concat(rows, 0);
}

inline Tensor gru_sequence(const GRULayer& layer, const Tensor& xs) {
  return gru_sequence(layer, xs, Tensor::zeros({layer.hidden_dim()}));
}

/// Batched unrolled sequence: xs[t] is [B,in]; returns all T states, each [B,hidden].
inline std::vector<Tensor> gru_sequence_batch(const GRULayer& layer,
                                              const std::vector<Tensor>& xs) {
  if (xs.empty()) throw DimensionError("gru_sequence: empty sequence");
  Tensor h = Tensor::zeros({xs.front().shape()[0], layer.hidden_dim()});
  std::vector<Tensor> hs;
  hs.reserve(xs.size());
  for (const auto& x : xs) {
    h = layer.step_batch(x, h);
    hs.push_back(h);
  }
  return hs;
}

}  // namespace pcip::nn
