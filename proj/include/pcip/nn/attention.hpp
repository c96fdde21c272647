#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pcip/nn/init.hpp"
#include "pcip/tensor/ops.hpp"
#include "pcip/tensor/tensor.hpp"

namespace pcip::nn {

using autodiff::Tensor;

// Bilinear attention over a hidden-state sequence. The query h_e is the last
// state; every state is a source. Per source s:
//   score_s = h_e^T Ws h_s,  alpha = softmax(score),  h_c = sum_s alpha_s h_s,
//   output  = tanh(Wc [h_c ; h_e])
// with dropout on the output during training.
class AttentionBlock {
 public:
  AttentionBlock(std::int64_t dim, Rng& rng, double dropout_rate = 0.5)
      : dim_(dim),
        dropout_rate_(dropout_rate),
        Ws_(uniform_init(rng, {dim, dim}, dim)),
        Wc_(uniform_init(rng, {dim, 2 * dim}, 2 * dim)) {
    if (dim < 1) throw ContractError("AttentionBlock: dim must be positive");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
      throw ContractError("AttentionBlock: dropout_rate must lie in [0,1)");
    }
  }

  std::int64_t dim() const { return dim_; }
  double dropout_rate() const { return dropout_rate_; }
  Tensor& Ws() { return Ws_; }
  Tensor& Wc() { return Wc_; }
  const Tensor& Ws() const { return Ws_; }
  const Tensor& Wc() const { return Wc_; }

  void named_params(const std::string& prefix, ParamMap& out) const {
    out.emplace_back(prefix + ".Ws", Ws_);
    out.emplace_back(prefix + ".Wc", Wc_);
  }

 private:
  std::int64_t dim_;
  double dropout_rate_;
  Tensor Ws_;  // [dim, dim]
  Tensor Wc_;  // [dim, 2*dim]
};

struct AttendResult {
  Tensor output;  // batched: [B,dim]
  Tensor alphas;  // batched: [B,T]
};

/// Batched attention: hs[t] is [B,dim] for t = 0..T-1; query is hs[T-1].
inline AttendResult attend_batch(const AttentionBlock& block, const std::vector<Tensor>& hs,
                                 bool train, Rng& rng) {
  using namespace autodiff;
  if (hs.empty()) throw DimensionError("attend: empty sequence");
  const std::int64_t T = static_cast<std::int64_t>(hs.size());
  const std::int64_t B = hs.front().shape()[0];
  for (const auto& h : hs) {
    if (h.rank() != 2 || h.shape()[0] != B || h.shape()[1] != block.dim()) {
      throw DimensionError("attend: state " + shape_str(h.shape()) +
                           " does not match dim " + std::to_string(block.dim()));
    }
  }
  const Tensor& he = hs.back();
  Tensor query = matmul(he, block.Ws());  // [B,dim]
  std::vector<Tensor> score_cols;
  score_cols.reserve(static_cast<std::size_t>(T));
  for (const auto& h : hs) {
    Tensor s = reduce_sum(mul(query, h), 1);  // [B]
    score_cols.push_back(reshape(s, {B, 1}));
  }
  Tensor alphas = softmax(concat(score_cols, 1));  // [B,T]
  Tensor hc = scale_rows(hs[0], slice(alphas, 1, 0, 1));
  for (std::int64_t t = 1; t < T; ++t) {
    hc = add(hc, scale_rows(hs[static_cast<std::size_t>(t)], slice(alphas, 1, t, 1)));
  }
  Tensor combined = concat({hc, he}, 1);                          // [B,2*dim]
  Tensor out = autodiff::tanh(matmul(combined, transpose(block.Wc())));  // [B,dim]
  out = dropout(out, block.dropout_rate(), train, rng);
  return {out, alphas};
}

/// Single-sample attention over hs [T,dim] -> [dim].
inline Tensor attend(const AttentionBlock& block, const Tensor& hs, bool train, Rng& rng) {
  using namespace autodiff;
  if (hs.rank() != 2 || hs.shape()[1] != block.dim()) {
    throw DimensionError("attend: states " + shape_str(hs.shape()) +
                         " do not match dim " + std::to_string(block.dim()));
  }
  const std::int64_t T = hs.shape()[0];
  std::vector<Tensor> rows;
  rows.reserve(static_cast<std::size_t>(T));
  for (std::int64_t t = 0; t < T; ++t) rows.push_back(slice(hs, 0, t, 1));
  AttendResult res = attend_batch(block, rows, train, rng);
  return reshape(res.output, {block.dim()});
}

}  // namespace pcip::nn
