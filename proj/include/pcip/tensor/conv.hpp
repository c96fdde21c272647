#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "pcip/tensor/ops.hpp"
#include "pcip/tensor/tensor.hpp"

// Convolution and pooling primitives for the visual encoders. Layout is
// channels-last: [N,H,W,C] for 2D stacks, [N,D,H,W,C] for 3D clips. Stride is
// fixed to 1 with zero same-padding for conv, and to the window size for
// pooling; that is all the encoders need.

namespace pcip::autodiff {

namespace detail {

inline void require_rank(const Tensor& t, std::int64_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank-" + std::to_string(rank) +
                         " tensor, got " + shape_str(t.shape()));
  }
}

}  // namespace detail

/// 2D convolution, stride 1, zero same-padding.
/// x: [N,H,W,Cin], kernel: [kh,kw,Cin,Cout], bias: [Cout] -> [N,H,W,Cout].
inline Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias) {
  detail::require_rank(x, 4, "conv2d");
  detail::require_rank(kernel, 4, "conv2d kernel");
  const std::int64_t N = x.shape()[0], H = x.shape()[1], W = x.shape()[2],
                     Cin = x.shape()[3];
  const std::int64_t kh = kernel.shape()[0], kw = kernel.shape()[1],
                     kci = kernel.shape()[2], Cout = kernel.shape()[3];
  if (kci != Cin) {
    throw DimensionError("conv2d: kernel " + shape_str(kernel.shape()) +
                         " expects input channels " + std::to_string(kci) + ", input is " +
                         shape_str(x.shape()));
  }
  if (bias.size() != Cout) {
    throw DimensionError("conv2d: bias " + shape_str(bias.shape()) +
                         " does not match output channels " + std::to_string(Cout));
  }
  const std::int64_t ph = (kh - 1) / 2, pw = (kw - 1) / 2;
  std::vector<double> out(static_cast<std::size_t>(N * H * W * Cout));
  const auto& xv = x.values();
  const auto& kv = kernel.values();
  const auto& bv = bias.values();
  auto xat = [&](std::int64_t n, std::int64_t y, std::int64_t xx, std::int64_t c) {
    return xv[((n * H + y) * W + xx) * Cin + c];
  };
  for (std::int64_t n = 0; n < N; ++n)
    for (std::int64_t y = 0; y < H; ++y)
      for (std::int64_t xx = 0; xx < W; ++xx)
        for (std::int64_t co = 0; co < Cout; ++co) {
          double acc = bv[co];
          for (std::int64_t dy = 0; dy < kh; ++dy) {
            const std::int64_t iy = y + dy - ph;
            if (iy < 0 || iy >= H) continue;
            for (std::int64_t dx = 0; dx < kw; ++dx) {
              const std::int64_t ix = xx + dx - pw;
              if (ix < 0 || ix >= W) continue;
              for (std::int64_t ci = 0; ci < Cin; ++ci)
                acc += xat(n, iy, ix, ci) * kv[((dy * kw + dx) * Cin + ci) * Cout + co];
            }
          }
          out[((n * H + y) * W + xx) * Cout + co] = acc;
        }
  auto xn = x.node();
  auto kn = kernel.node();
  auto bn = bias.node();
  return make_op_node(
      "conv2d", {N, H, W, Cout}, std::move(out), {xn, kn, bn},
      [xn, kn, bn, N, H, W, Cin, kh, kw, Cout, ph, pw](const TensorNode& o) {
        const auto& g = o.grad;
        for (std::int64_t n = 0; n < N; ++n)
          for (std::int64_t y = 0; y < H; ++y)
            for (std::int64_t xx = 0; xx < W; ++xx)
              for (std::int64_t co = 0; co < Cout; ++co) {
                const double go = g[((n * H + y) * W + xx) * Cout + co];
                if (go == 0.0) continue;
                if (bn->requires_grad) bn->grad[co] += go;
                for (std::int64_t dy = 0; dy < kh; ++dy) {
                  const std::int64_t iy = y + dy - ph;
                  if (iy < 0 || iy >= H) continue;
                  for (std::int64_t dx = 0; dx < kw; ++dx) {
                    const std::int64_t ix = xx + dx - pw;
                    if (ix < 0 || ix >= W) continue;
                    for (std::int64_t ci = 0; ci < Cin; ++ci) {
                      const std::size_t xi = ((n * H + iy) * W + ix) * Cin + ci;
                      const std::size_t ki = ((dy * kw + dx) * Cin + ci) * Cout + co;
                      if (kn->requires_grad) kn->grad[ki] += go * xn->values[xi];
                      if (xn->requires_grad) xn->grad[xi] += go * kn->values[ki];
                    }
                  }
                }
              }
      });
}

/// Non-overlapping 2D max pooling with window = stride = (ph, pw); trailing
/// rows/columns that do not fill a window are dropped.
/// x: [N,H,W,C] -> [N,H/ph,W/pw,C].
inline Tensor maxpool2d(const Tensor& x, std::int64_t ph, std::int64_t pw) {
  detail::require_rank(x, 4, "maxpool2d");
  const std::int64_t N = x.shape()[0], H = x.shape()[1], W = x.shape()[2],
                     C = x.shape()[3];
  if (ph < 1 || pw < 1 || H < ph || W < pw) {
    throw DimensionError("maxpool2d: window " + std::to_string(ph) + "x" +
                         std::to_string(pw) + " too large for input " +
                         shape_str(x.shape()));
  }
  const std::int64_t Ho = H / ph, Wo = W / pw;
  std::vector<double> out(static_cast<std::size_t>(N * Ho * Wo * C));
  std::vector<std::int64_t> argmax(out.size());
  const auto& xv = x.values();
  for (std::int64_t n = 0; n < N; ++n)
    for (std::int64_t y = 0; y < Ho; ++y)
      for (std::int64_t xx = 0; xx < Wo; ++xx)
        for (std::int64_t c = 0; c < C; ++c) {
          double best = -std::numeric_limits<double>::infinity();
          std::int64_t best_idx = -1;
          for (std::int64_t dy = 0; dy < ph; ++dy)
            for (std::int64_t dx = 0; dx < pw; ++dx) {
              const std::int64_t idx =
                  ((n * H + y * ph + dy) * W + xx * pw + dx) * C + c;
              if (xv[idx] > best) {
                best = xv[idx];
                best_idx = idx;
              }
            }
          const std::size_t oi = ((n * Ho + y) * Wo + xx) * C + c;
          out[oi] = best;
          argmax[oi] = best_idx;
        }
  auto xn = x.node();
  return make_op_node("maxpool2d", {N, Ho, Wo, C}, std::move(out), {xn},
                      [xn, argmax = std::move(argmax)](const TensorNode& o) {
                        if (!xn->requires_grad) return;
                        for (std::size_t i = 0; i < argmax.size(); ++i)
                          xn->grad[argmax[i]] += o.grad[i];
                      });
}

/// 3D convolution, stride 1, zero same-padding.
/// x: [N,D,H,W,Cin], kernel: [kd,kh,kw,Cin,Cout], bias: [Cout] -> [N,D,H,W,Cout].
inline Tensor conv3d(const Tensor& x, const Tensor& kernel, const Tensor& bias) {
  detail::require_rank(x, 5, "conv3d");
  detail::require_rank(kernel, 5, "conv3d kernel");
  const std::int64_t N = x.shape()[0], D = x.shape()[1], H = x.shape()[2],
                     W = x.shape()[3], Cin = x.shape()[4];
  const std::int64_t kd = kernel.shape()[0], kh = kernel.shape()[1],
                     kw = kernel.shape()[2], kci = kernel.shape()[3],
                     Cout = kernel.shape()[4];
  if (kci != Cin) {
    throw DimensionError("conv3d: kernel " + shape_str(kernel.shape()) +
                         " expects input channels " + std::to_string(kci) + ", input is " +
                         shape_str(x.shape()));
  }
  if (bias.size() != Cout) {
    throw DimensionError("conv3d: bias " + shape_str(bias.shape()) +
                         " does not match output channels " + std::to_string(Cout));
  }
  const std::int64_t pd = (kd - 1) / 2, ph = (kh - 1) / 2, pw = (kw - 1) / 2;
  std::vector<double> out(static_cast<std::size_t>(N * D * H * W * Cout));
  const auto& xv = x.values();
  const auto& kv = kernel.values();
  const auto& bv = bias.values();
  for (std::int64_t n = 0; n < N; ++n)
    for (std::int64_t z = 0; z < D; ++z)
      for (std::int64_t y = 0; y < H; ++y)
        for (std::int64_t xx = 0; xx < W; ++xx)
          for (std::int64_t co = 0; co < Cout; ++co) {
            double acc = bv[co];
            for (std::int64_t dz = 0; dz < kd; ++dz) {
              const std::int64_t iz = z + dz - pd;
              if (iz < 0 || iz >= D) continue;
              for (std::int64_t dy = 0; dy < kh; ++dy) {
                const std::int64_t iy = y + dy - ph;
                if (iy < 0 || iy >= H) continue;
                for (std::int64_t dx = 0; dx < kw; ++dx) {
                  const std::int64_t ix = xx + dx - pw;
                  if (ix < 0 || ix >= W) continue;
                  for (std::int64_t ci = 0; ci < Cin; ++ci)
                    acc += xv[(((n * D + iz) * H + iy) * W + ix) * Cin + ci] *
                           kv[(((dz * kh + dy) * kw + dx) * Cin + ci) * Cout + co];
                }
              }
            }
            out[(((n * D + z) * H + y) * W + xx) * Cout + co] = acc;
          }
  auto xn = x.node();
  auto kn = kernel.node();
  auto bn = bias.node();
  return make_op_node(
      "conv3d", {N, D, H, W, Cout}, std::move(out), {xn, kn, bn},
      [xn, kn, bn, N, D, H, W, Cin, kd, kh, kw, Cout, pd, ph, pw](const TensorNode& o) {
        const auto& g = o.grad;
        for (std::int64_t n = 0; n < N; ++n)
          for (std::int64_t z = 0; z < D; ++z)
            for (std::int64_t y = 0; y < H; ++y)
              for (std::int64_t xx = 0; xx < W; ++xx)
                for (std::int64_t co = 0; co < Cout; ++co) {
                  const double go = g[(((n * D + z) * H + y) * W + xx) * Cout + co];
                  if (go == 0.0) continue;
                  if (bn->requires_grad) bn->grad[co] += go;
                  for (std::int64_t dz = 0; dz < kd; ++dz) {
                    const std::int64_t iz = z + dz - pd;
                    if (iz < 0 || iz >= D) continue;
                    for (std::int64_t dy = 0; dy < kh; ++dy) {
                      const std::int64_t iy = y + dy - ph;
                      if (iy < 0 || iy >= H) continue;
                      for (std::int64_t dx = 0; dx < kw; ++dx) {
                        const std::int64_t ix = xx + dx - pw;
                        if (ix < 0 || ix >= W) continue;
                        for (std::int64_t ci = 0; ci < Cin; ++ci) {
                          const std::size_t xi =
                              (((n * D + iz) * H + iy) * W + ix) * Cin + ci;
                          const std::size_t ki =
                              (((dz * kh + dy) * kw + dx) * Cin + ci) * Cout + co;
                          if (kn->requires_grad) kn->grad[ki] += go * xn->values[xi];
                          if (xn->requires_grad) xn->grad[xi] += go * kn->values[ki];
                        }
                      }
                    }
                  }
                }
      });
}

/// Non-overlapping 3D max pooling with window = stride = (pd, ph, pw).
/// x: [N,D,H,W,C] -> [N,D/pd,H/ph,W/pw,C].
inline Tensor maxpool3d(const Tensor& x, std::int64_t pd, std::int64_t ph,
                        std::int64_t pw) {
  detail::require_rank(x, 5, "maxpool3d");
  const std::int64_t N = x.shape()[0], D = x.shape()[1], H = x.shape()[2],
                     W = x.shape()[3], C = x.shape()[4];
  if (pd < 1 || ph < 1 || pw < 1 || D < pd || H < ph || W < pw) {
    throw DimensionError("maxpool3d: window " + std::to_string(pd) + "x" +
                         std::to_string(ph) + "x" + std::to_string(pw) +
                         " too large for input " + shape_str(x.shape()));
  }
  const std::int64_t Do = D / pd, Ho = H / ph, Wo = W / pw;
  std::vector<double> out(static_cast<std::size_t>(N * Do * Ho * Wo * C));
  std::vector<std::int64_t> argmax(out.size());
  const auto& xv = x.values();
  for (std::int64_t n = 0; n < N; ++n)
    for (std::int64_t z = 0; z < Do; ++z)
      for (std::int64_t y = 0; y < Ho; ++y)
        for (std::int64_t xx = 0; xx < Wo; ++xx)
          for (std::int64_t c = 0; c < C; ++c) {
            double best = -std::numeric_limits<double>::infinity();
            std::int64_t best_idx = -1;
            for (std::int64_t dz = 0; dz < pd; ++dz)
              for (std::int64_t dy = 0; dy < ph; ++dy)
                for (std::int64_t dx = 0; dx < pw; ++dx) {
                  const std::int64_t idx =
                      (((n * D + z * pd + dz) * H + y * ph + dy) * W + xx * pw + dx) * C +
                      c;
                  if (xv[idx] > best) {
                    best = xv[idx];
                    best_idx = idx;
                  }
                }
            const std::size_t oi = (((n * Do + z) * Ho + y) * Wo + xx) * C + c;
            out[oi] = best;
            argmax[oi] = best_idx;
          }
  auto xn = x.node();
  return make_op_node("maxpool3d", {N, Do, Ho, Wo, C}, std::move(out), {xn},
                      [xn, argmax = std::move(argmax)](const TensorNode& o) {
                        if (!xn->requires_grad) return;
                        for (std::size_t i = 0; i < argmax.size(); ++i)
                          xn->grad[argmax[i]] += o.grad[i];
                      });
}

/// Spatial average over H and W: [N,H,W,C] -> [N,C].
inline Tensor global_avg_pool2d(const Tensor& x) {
  detail::require_rank(x, 4, "global_avg_pool2d");
  const auto& s = x.shape();
  return reduce_mean(reshape(x, {s[0], s[1] * s[2], s[3]}), 1);
}

/// Spatio-temporal average over D, H and W: [N,D,H,W,C] -> [N,C].
inline Tensor global_avg_pool3d(const Tensor& x) {
  detail::require_rank(x, 5, "global_avg_pool3d");
  const auto& s = x.shape();
  return reduce_mean(reshape(x, {s[0], s[1] * s[2] * s[3], s[4]}), 1);
}

}  // namespace pcip::autodiff
