#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "pcip/rng.hpp"
#include "pcip/tensor/tensor.hpp"

namespace pcip::autodiff {

namespace detail {

inline std::int64_t prod(const Shape& s, std::size_t from, std::size_t to) {
  std::int64_t p = 1;
  for (std::size_t i = from; i < to; ++i) p *= s[i];
  return p;
}

inline void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected rank-2 tensor, got " +
                         shape_str(t.shape()));
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// matmul

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  detail::require_rank2(a, "matmul");
  detail::require_rank2(b, "matmul");
  const std::int64_t m = a.shape()[0], k = a.shape()[1];
  const std::int64_t k2 = b.shape()[0], n = b.shape()[1];
  if (k != k2) {
    throw DimensionError("matmul: inner dimensions differ, " + shape_str(a.shape()) +
                         " x " + shape_str(b.shape()));
  }
  std::vector<double> out(static_cast<std::size_t>(m * n), 0.0);
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = bv.data() + p * n;
      double* orow = out.data() + i * n;
      for (std::int64_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  auto an = a.node();
  auto bn = b.node();
  return make_op_node(
      "matmul", {m, n}, std::move(out), {an, bn},
      [an, bn, m, k, n](const TensorNode& o) {
        const auto& g = o.grad;
        if (an->requires_grad) {
          // a.grad += g . b^T
          auto& ga = an->grad;
          const auto& bv = bn->values;
          for (std::int64_t i = 0; i < m; ++i)
            for (std::int64_t j = 0; j < n; ++j) {
              const double gij = g[i * n + j];
              if (gij == 0.0) continue;
              for (std::int64_t p = 0; p < k; ++p) ga[i * k + p] += gij * bv[p * n + j];
            }
        }
        if (bn->requires_grad) {
          // b.grad += a^T . g
          auto& gb = bn->grad;
          const auto& av = an->values;
          for (std::int64_t i = 0; i < m; ++i)
            for (std::int64_t p = 0; p < k; ++p) {
              const double aip = av[i * k + p];
              if (aip == 0.0) continue;
              for (std::int64_t j = 0; j < n; ++j) gb[p * n + j] += aip * g[i * n + j];
            }
        }
      });
}

// ---------------------------------------------------------------------------
// elementwise binary ops; shapes must match exactly or one side is a scalar
// (size 1). Any other mixing is rejected -- explicit concat/reshape instead.

namespace detail {

enum class BinKind { kAdd, kSub, kMul };

inline Tensor binary_ew(BinKind kind, const char* name, const Tensor& a, const Tensor& b) {
  const bool a_scalar = a.size() == 1;
  const bool b_scalar = b.size() == 1;
  if (!a_scalar && !b_scalar && a.shape() != b.shape()) {
    throw DimensionError(std::string(name) + ": incompatible shapes " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const Tensor& big = (!a_scalar || b_scalar) ? a : b;
  const std::size_t n = static_cast<std::size_t>(big.size());
  std::vector<double> out(n);
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < n; ++i) {
    const double x = a_scalar ? av[0] : av[i];
    const double y = b_scalar ? bv[0] : bv[i];
    switch (kind) {
      case BinKind::kAdd: out[i] = x + y; break;
      case BinKind::kSub: out[i] = x - y; break;
      case BinKind::kMul: out[i] = x * y; break;
    }
  }
  auto an = a.node();
  auto bn = b.node();
  return make_op_node(
      name, big.shape(), std::move(out), {an, bn},
      [an, bn, kind, a_scalar, b_scalar, n](const TensorNode& o) {
        const auto& g = o.grad;
        if (an->requires_grad) {
          auto& ga = an->grad;
          for (std::size_t i = 0; i < n; ++i) {
            double d = g[i];
            if (kind == BinKind::kMul) d *= b_scalar ? bn->values[0] : bn->values[i];
            ga[a_scalar ? 0 : i] += d;
          }
        }
        if (bn->requires_grad) {
          auto& gb = bn->grad;
          for (std::size_t i = 0; i < n; ++i) {
            double d = g[i];
            if (kind == BinKind::kMul) d *= a_scalar ? an->values[0] : an->values[i];
            if (kind == BinKind::kSub) d = -d;
            gb[b_scalar ? 0 : i] += d;
          }
        }
      });
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
  return detail::binary_ew(detail::BinKind::kAdd, "add", a, b);
}
inline Tensor sub(const Tensor& a, const Tensor& b) {
  return detail::binary_ew(detail::BinKind::kSub, "sub", a, b);
}
inline Tensor mul(const Tensor& a, const Tensor& b) {
  return detail::binary_ew(detail::BinKind::kMul, "mul", a, b);
}

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

// ---------------------------------------------------------------------------
// elementwise unary activations

namespace fault {
// Self-test seam for the gradient-check command's mutation mode: scaling this
// corrupts the tanh backward rule so the finite-difference audit must report
// a failure. Production value is 1.0; nothing else may write it.
inline double tanh_backward_scale = 1.0;
}  // namespace fault

inline Tensor sigmoid(const Tensor& x) {
  const std::size_t n = static_cast<std::size_t>(x.size());
  std::vector<double> out(n);
  const auto& xv = x.values();
  for (std::size_t i = 0; i < n; ++i) out[i] = 1.0 / (1.0 + std::exp(-xv[i]));
  auto xn = x.node();
  return make_op_node("sigmoid", x.shape(), std::move(out), {xn},
                      [xn, n](const TensorNode& o) {
                        if (!xn->requires_grad) return;
                        auto& gx = xn->grad;
                        for (std::size_t i = 0; i < n; ++i) {
                          const double s = o.values[i];
                          gx[i] += o.grad[i] * s * (1.0 - s);
                        }
                      });
}

inline Tensor tanh(const Tensor& x) {
  const std::size_t n = static_cast<std::size_t>(x.size());
  std::vector<double> out(n);
  const auto& xv = x.values();
  for (std::size_t i = 0; i < n; ++i) out[i] = std::tanh(xv[i]);
  auto xn = x.node();
  return make_op_node("tanh", x.shape(), std::move(out), {xn},
                      [xn, n](const TensorNode& o) {
                        if (!xn->requires_grad) return;
                        auto& gx = xn->grad;
                        for (std::size_t i = 0; i < n; ++i) {
                          const double t = o.values[i];
                          gx[i] += o.grad[i] * (1.0 - t * t) * fault::tanh_backward_scale;
                        }
                      });
}

inline Tensor relu(const Tensor& x) {
  const std::size_t n = static_cast<std::size_t>(x.size());
  std::vector<double> out(n);
  const auto& xv = x.values();
  for (std::size_t i = 0; i < n; ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  auto xn = x.node();
  return make_op_node("relu", x.shape(), std::move(out), {xn},
                      [xn, n](const TensorNode& o) {
                        if (!xn->requires_grad) return;
                        auto& gx = xn->grad;
                        for (std::size_t i = 0; i < n; ++i) {
                          if (xn->values[i] > 0.0) gx[i] += o.grad[i];
                        }
                      });
}

// ---------------------------------------------------------------------------
// softmax: rank-1 vector, or rank-2 applied per row. Max-subtraction guards
// against overflow; outputs of each row sum to 1.

inline Tensor softmax(const Tensor& x) {
  if (x.rank() != 1 && x.rank() != 2) {
    throw DimensionError("softmax: expected rank 1 or 2, got " + shape_str(x.shape()));
  }
  const std::int64_t rows = x.rank() == 2 ? x.shape()[0] : 1;
  const std::int64_t n = x.shape()[x.rank() - 1];
  if (n < 1) throw DimensionError("softmax: empty input");
  std::vector<double> out(static_cast<std::size_t>(rows * n));
  const auto& xv = x.values();
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* row = xv.data() + r * n;
    double mx = row[0];
    for (std::int64_t i = 1; i < n; ++i) mx = std::max(mx, row[i]);
    double sum = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
      const double e = std::exp(row[i] - mx);
      out[r * n + i] = e;
      sum += e;
    }
    for (std::int64_t i = 0; i < n; ++i) out[r * n + i] /= sum;
  }
  auto xn = x.node();
  return make_op_node("softmax", x.shape(), std::move(out), {xn},
                      [xn, rows, n](const TensorNode& o) {
                        if (!xn->requires_grad) return;
                        auto& gx = xn->grad;
                        for (std::int64_t r = 0; r < rows; ++r) {
                          const double* y = o.values.data() + r * n;
                          const double* g = o.grad.data() + r * n;
                          double dot = 0.0;
                          for (std::int64_t i = 0; i < n; ++i) dot += g[i] * y[i];
                          for (std::int64_t i = 0; i < n; ++i) {
                            gx[r * n + i] += y[i] * (g[i] - dot);
                          }
                        }
                      });
}

// ---------------------------------------------------------------------------
// concat along an axis

inline Tensor concat(const std::vector<Tensor>& parts, std::int64_t axis) {
  if (parts.empty()) throw DimensionError("concat: no parts");
  const auto& first = parts.front().shape();
  const std::int64_t rank = static_cast<std::int64_t>(first.size());
  if (axis < 0 || axis >= rank) {
    throw DimensionError("concat: axis " + std::to_string(axis) + " out of range for " +
                         shape_str(first));
  }
  std::int64_t axis_total = 0;
  for (const auto& p : parts) {
    if (p.rank() != rank) {
      throw DimensionError("concat: rank mismatch " + shape_str(first) + " vs " +
                           shape_str(p.shape()));
    }
    for (std::int64_t d = 0; d < rank; ++d) {
      if (d != axis && p.shape()[d] != first[d]) {
        throw DimensionError("concat: shapes " + shape_str(first) + " and " +
                             shape_str(p.shape()) + " differ off axis " +
                             std::to_string(axis));
      }
    }
    axis_total += p.shape()[axis];
  }
  Shape out_shape = first;
  out_shape[axis] = axis_total;
  const std::int64_t outer = detail::prod(out_shape, 0, static_cast<std::size_t>(axis));
  const std::int64_t inner =
      detail::prod(out_shape, static_cast<std::size_t>(axis) + 1, out_shape.size());
  std::vector<double> out(static_cast<std::size_t>(numel(out_shape)));
  std::vector<std::shared_ptr<TensorNode>> inputs;
  inputs.reserve(parts.size());
  for (const auto& p : parts) inputs.push_back(p.node());
  std::vector<std::int64_t> lens;
  lens.reserve(parts.size());
  for (const auto& p : parts) lens.push_back(p.shape()[axis]);

  for (std::int64_t o = 0; o < outer; ++o) {
    std::int64_t cursor = 0;
    for (std::size_t pi = 0; pi < parts.size(); ++pi) {
      const std::int64_t block = lens[pi] * inner;
      const double* src = parts[pi].values().data() + o * block;
      double* dst = out.data() + (o * axis_total + cursor) * inner;
      std::copy(src, src + block, dst);
      cursor += lens[pi];
    }
  }
  return make_op_node(
      "concat", std::move(out_shape), std::move(out), inputs,
      [inputs, lens, outer, inner, axis_total](const TensorNode& o) {
        for (std::int64_t ot = 0; ot < outer; ++ot) {
          std::int64_t cursor = 0;
          for (std::size_t pi = 0; pi < inputs.size(); ++pi) {
            const std::int64_t block = lens[pi] * inner;
            if (inputs[pi]->requires_grad) {
              const double* src = o.grad.data() + (ot * axis_total + cursor) * inner;
              double* dst = inputs[pi]->grad.data() + ot * block;
              for (std::int64_t i = 0; i < block; ++i) dst[i] += src[i];
            }
            cursor += lens[pi];
          }
        }
      });
}

// ---------------------------------------------------------------------------
// reductions along one axis; reducing a rank-1 tensor yields shape [1]

namespace detail {

inline Tensor reduce_axis(const Tensor& x, std::int64_t axis, bool mean, const char* name) {
  if (axis < 0 || axis >= x.rank()) {
    throw DimensionError(std::string(name) + ": axis " + std::to_string(axis) +
                         " out of range for " + shape_str(x.shape()));
  }
  const Shape& s = x.shape();
  const std::int64_t outer = prod(s, 0, static_cast<std::size_t>(axis));
  const std::int64_t len = s[static_cast<std::size_t>(axis)];
  const std::int64_t inner = prod(s, static_cast<std::size_t>(axis) + 1, s.size());
  Shape out_shape;
  for (std::int64_t d = 0; d < x.rank(); ++d) {
    if (d != axis) out_shape.push_back(s[static_cast<std::size_t>(d)]);
  }
  if (out_shape.empty()) out_shape = {1};
  std::vector<double> out(static_cast<std::size_t>(outer * inner), 0.0);
  const auto& xv = x.values();
  for (std::int64_t o = 0; o < outer; ++o)
    for (std::int64_t l = 0; l < len; ++l)
      for (std::int64_t i = 0; i < inner; ++i)
        out[o * inner + i] += xv[(o * len + l) * inner + i];
  if (mean) {
    for (auto& v : out) v /= static_cast<double>(len);
  }
  auto xn = x.node();
  const double scale = mean ? 1.0 / static_cast<double>(len) : 1.0;
  return make_op_node(name, std::move(out_shape), std::move(out), {xn},
                      [xn, outer, len, inner, scale](const TensorNode& o) {
                        if (!xn->requires_grad) return;
                        auto& gx = xn->grad;
                        for (std::int64_t ot = 0; ot < outer; ++ot)
                          for (std::int64_t l = 0; l < len; ++l)
                            for (std::int64_t i = 0; i < inner; ++i)
                              gx[(ot * len + l) * inner + i] +=
                                  o.grad[ot * inner + i] * scale;
                      });
}

}  // namespace detail

inline Tensor reduce_sum(const Tensor& x, std::int64_t axis) {
  return detail::reduce_axis(x, axis, false, "reduce_sum");
}
inline Tensor reduce_mean(const Tensor& x, std::int64_t axis) {
  return detail::reduce_axis(x, axis, true, "reduce_mean");
}

/// Sum of all elements, as a [1] scalar.
inline Tensor sum_all(const Tensor& x) {
  const std::size_t n = static_cast<std::size_t>(x.size());
  double total = 0.0;
  for (double v : x.values()) total += v;
  auto xn = x.node();
  return make_op_node("sum_all", {1}, {total}, {xn}, [xn, n](const TensorNode& o) {
    if (!xn->requires_grad) return;
    const double g = o.grad[0];
    auto& gx = xn->grad;
    for (std::size_t i = 0; i < n; ++i) gx[i] += g;
  });
}

// ---------------------------------------------------------------------------
// shape plumbing

inline Tensor transpose(const Tensor& x) {
  detail::require_rank2(x, "transpose");
  const std::int64_t m = x.shape()[0], n = x.shape()[1];
  std::vector<double> out(static_cast<std::size_t>(m * n));
  const auto& xv = x.values();
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < n; ++j) out[j * m + i] = xv[i * n + j];
  auto xn = x.node();
  return make_op_node("transpose", {n, m}, std::move(out), {xn},
                      [xn, m, n](const TensorNode& o) {
                        if (!xn->requires_grad) return;
                        auto& gx = xn->grad;
                        for (std::int64_t i = 0; i < m; ++i)
                          for (std::int64_t j = 0; j < n; ++j)
                            gx[i * n + j] += o.grad[j * m + i];
                      });
}

inline Tensor reshape(const Tensor& x, Shape new_shape) {
  if (numel(new_shape) != x.size()) {
    throw DimensionError("reshape: " + shape_str(x.shape()) + " has " +
                         std::to_string(x.size()) + " elements, target " +
                         shape_str(new_shape) + " wants " +
                         std::to_string(numel(new_shape)));
  }
  auto xn = x.node();
  std::vector<double> out = x.values();
  const std::size_t n = out.size();
  return make_op_node("reshape", std::move(new_shape), std::move(out), {xn},
                      [xn, n](const TensorNode& o) {
                        if (!xn->requires_grad) return;
                        auto& gx = xn->grad;
                        for (std::size_t i = 0; i < n; ++i) gx[i] += o.grad[i];
                      });
}

inline Tensor slice(const Tensor& x, std::int64_t axis, std::int64_t start,
                    std::int64_t count) {
  if (axis < 0 || axis >= x.rank()) {
    throw DimensionError("slice: axis " + std::to_string(axis) + " out of range for " +
                         shape_str(x.shape()));
  }
  const Shape& s = x.shape();
  const std::int64_t len = s[static_cast<std::size_t>(axis)];
  if (start < 0 || count < 1 || start + count > len) {
    throw DimensionError("slice: range [" + std::to_string(start) + "," +
                         std::to_string(start + count) + ") invalid for axis of length " +
                         std::to_string(len));
  }
  const std::int64_t outer = detail::prod(s, 0, static_cast<std::size_t>(axis));
  const std::int64_t inner = detail::prod(s, static_cast<std::size_t>(axis) + 1, s.size());
  Shape out_shape = s;
  out_shape[static_cast<std::size_t>(axis)] = count;
  std::vector<double> out(static_cast<std::size_t>(outer * count * inner));
  const auto& xv = x.values();
  for (std::int64_t o = 0; o < outer; ++o) {
    const double* src = xv.data() + (o * len + start) * inner;
    std::copy(src, src + count * inner, out.data() + o * count * inner);
  }
  auto xn = x.node();
  return make_op_node("slice", std::move(out_shape), std::move(out), {xn},
                      [xn, outer, len, inner, start, count](const TensorNode& o) {
                        if (!xn->requires_grad) return;
                        auto& gx = xn->grad;
                        for (std::int64_t ot = 0; ot < outer; ++ot) {
                          const double* g = o.grad.data() + ot * count * inner;
                          double* dst = gx.data() + (ot * len + start) * inner;
                          for (std::int64_t i = 0; i < count * inner; ++i) dst[i] += g[i];
                        }
                      });
}

/// Row-wise scaling: out[i,j] = x[i,j] * s[i]. s has shape [m] or [m,1].
inline Tensor scale_rows(const Tensor& x, const Tensor& s) {
  detail::require_rank2(x, "scale_rows");
  const std::int64_t m = x.shape()[0], n = x.shape()[1];
  if (s.size() != m) {
    throw DimensionError("scale_rows: scale " + shape_str(s.shape()) +
                         " does not match rows of " + shape_str(x.shape()));
  }
  std::vector<double> out(static_cast<std::size_t>(m * n));
  const auto& xv = x.values();
  const auto& sv = s.values();
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < n; ++j) out[i * n + j] = xv[i * n + j] * sv[i];
  auto xn = x.node();
  auto sn = s.node();
  return make_op_node("scale_rows", x.shape(), std::move(out), {xn, sn},
                      [xn, sn, m, n](const TensorNode& o) {
                        if (xn->requires_grad) {
                          auto& gx = xn->grad;
                          for (std::int64_t i = 0; i < m; ++i)
                            for (std::int64_t j = 0; j < n; ++j)
                              gx[i * n + j] += o.grad[i * n + j] * sn->values[i];
                        }
                        if (sn->requires_grad) {
                          auto& gs = sn->grad;
                          for (std::int64_t i = 0; i < m; ++i) {
                            double acc = 0.0;
                            for (std::int64_t j = 0; j < n; ++j)
                              acc += o.grad[i * n + j] * xn->values[i * n + j];
                            gs[i] += acc;
                          }
                        }
                      });
}

/// Column-wise bias: out[i,j] = x[i,j] + b[j]. b has shape [n] or [1,n].
inline Tensor add_bias(const Tensor& x, const Tensor& b) {
  detail::require_rank2(x, "add_bias");
  const std::int64_t m = x.shape()[0], n = x.shape()[1];
  if (b.size() != n) {
    throw DimensionError("add_bias: bias " + shape_str(b.shape()) +
                         " does not match columns of " + shape_str(x.shape()));
  }
  std::vector<double> out(static_cast<std::size_t>(m * n));
  const auto& xv = x.values();
  const auto& bv = b.values();
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < n; ++j) out[i * n + j] = xv[i * n + j] + bv[j];
  auto xn = x.node();
  auto bn = b.node();
  return make_op_node("add_bias", x.shape(), std::move(out), {xn, bn},
                      [xn, bn, m, n](const TensorNode& o) {
                        if (xn->requires_grad) {
                          auto& gx = xn->grad;
                          for (std::int64_t i = 0; i < m * n; ++i) gx[i] += o.grad[i];
                        }
                        if (bn->requires_grad) {
                          auto& gb = bn->grad;
                          for (std::int64_t i = 0; i < m; ++i)
                            for (std::int64_t j = 0; j < n; ++j)
                              gb[j] += o.grad[i * n + j];
                        }
                      });
}

// ---------------------------------------------------------------------------
// dropout (inverted scaling: eval is exactly the identity)

inline Tensor dropout(const Tensor& x, double rate, bool train, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ContractError("dropout: rate must lie in [0,1), got " + std::to_string(rate));
  }
  if (!train || rate == 0.0) return x;
  const std::size_t n = static_cast<std::size_t>(x.size());
  const double scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(n);
  for (std::size_t i = 0; i < n; ++i) mask[i] = rng.uniform() >= rate ? scale : 0.0;
  std::vector<double> out(n);
  const auto& xv = x.values();
  for (std::size_t i = 0; i < n; ++i) out[i] = xv[i] * mask[i];
  auto xn = x.node();
  return make_op_node("dropout", x.shape(), std::move(out), {xn},
                      [xn, mask = std::move(mask), n](const TensorNode& o) {
                        if (!xn->requires_grad) return;
                        auto& gx = xn->grad;
                        for (std::size_t i = 0; i < n; ++i) gx[i] += o.grad[i] * mask[i];
                      });
}

}  // namespace pcip::autodiff
