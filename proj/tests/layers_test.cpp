#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "pcip/nn/attention.hpp"
#include "pcip/nn/conv_encoder.hpp"
#include "pcip/nn/dense.hpp"
#include "pcip/nn/gru.hpp"
#include "pcip/rng.hpp"
#include "pcip/tensor/gradcheck.hpp"
#include "pcip/tensor/ops.hpp"
#include "support/test_util.hpp"

using namespace pcip;
using namespace pcip::nn;
using autodiff::backward;
using autodiff::finite_diff_check;
using autodiff::Shape;
using autodiff::sum_all;
using autodiff::Tensor;
using pcip::testing::random_tensor;
using Catch::Approx;

namespace {

void zero_all_params(const ParamMap& params) {
  for (const auto& [name, t] : params) {
    auto& v = const_cast<Tensor&>(t).values();
    std::fill(v.begin(), v.end(), 0.0);
  }
}

void clamp_inf_norm(const ParamMap& params, double limit) {
  double mx = 0.0;
  for (const auto& [name, t] : params)
    for (double v : t.values()) mx = std::max(mx, std::abs(v));
  if (mx == 0.0) return;
  const double s = limit / mx;
  for (const auto& [name, t] : params) {
    auto& v = const_cast<Tensor&>(t).values();
    for (auto& x : v) x *= s;
  }
}

}  // namespace

TEST_CASE("gru_step analytic zero cases", "[layers]") {
  Rng rng(1);
  GRULayer gru(2, 2, rng);
  ParamMap params;
  gru.named_params("gru", params);
  zero_all_params(params);

  Tensor h0 = Tensor::zeros({2});
  Tensor x = Tensor::leaf({2}, {0.3, -0.7});
  auto h1 = gru_step(gru, x, h0);
  CHECK(h1.values() == std::vector<double>{0.0, 0.0});

  // zero params give z = 0.5 and hcand = 0, so the old state is halved
  Tensor hprev = Tensor::leaf({2}, {1.0, 1.0});
  auto h2 = gru_step(gru, x, hprev);
  CHECK(h2.values()[0] == Approx(0.5));
  CHECK(h2.values()[1] == Approx(0.5));

  CHECK_THROWS_AS(gru_step(gru, Tensor::zeros({3}), h0), DimensionError);
  CHECK_THROWS_AS(gru_step(gru, x, Tensor::zeros({5})), DimensionError);
}

TEST_CASE("gru three-step trace matches hand-computed values", "[layers]") {
  Rng rng(1);
  GRULayer gru(2, 2, rng);
  auto set = [](Tensor& t, std::vector<double> v) { t.values() = std::move(v); };
  set(gru.Wz(), {0.5, -0.3, 0.1, 0.2});
  set(gru.Uz(), {0.05, -0.15, 0.2, 0.1});
  set(gru.bz(), {0.1, -0.1});
  set(gru.Wr(), {-0.2, 0.4, 0.3, -0.1});
  set(gru.Ur(), {0.1, 0.0, -0.2, 0.25});
  set(gru.br(), {0.05, 0.15});
  set(gru.Wh(), {0.7, -0.5, -0.6, 0.8});
  set(gru.Uh(), {0.3, -0.2, 0.1, 0.4});
  set(gru.bh(), {0.0, 0.2});

  Tensor xs = Tensor::leaf({3, 2}, {1.0, 0.5, -0.5, 1.0, 0.25, -0.75});
  Tensor hs = gru_sequence(gru, xs);
  REQUIRE(hs.shape() == Shape{3, 2});
  const auto& v = hs.values();
  CHECK(v[0] == Approx(0.24963044348362107).margin(1e-10));
  CHECK(v[1] == Approx(0.04241446094702532).margin(1e-10));
  CHECK(v[2] == Approx(-0.22680268127394002).margin(1e-10));
  CHECK(v[3] == Approx(0.48524683981727024).margin(1e-10));
  CHECK(v[4] == Approx(0.21026378696454268).margin(1e-10));
  CHECK(v[5] == Approx(0.10943322643048531).margin(1e-10));
}

TEST_CASE("gru_sequence shape contract and single-step equivalence", "[layers]") {
  Rng rng(2);
  GRULayer big(512, 256, rng);
  Tensor xs = random_tensor(rng, {16, 512}, false);
  Tensor hs = gru_sequence(big, xs);
  CHECK(hs.shape() == Shape{16, 256});

  GRULayer small(3, 4, rng);
  Tensor x1 = random_tensor(rng, {1, 3}, false);
  Tensor seq = gru_sequence(small, x1);
  Tensor step = gru_step(small, autodiff::reshape(x1, {3}), Tensor::zeros({4}));
  REQUIRE(seq.shape() == Shape{1, 4});
  for (int i = 0; i < 4; ++i) CHECK(seq.values()[i] == Approx(step.values()[i]));

  CHECK_THROWS_AS(gru_sequence(small, random_tensor(rng, {4, 7}, false)), DimensionError);
}

TEST_CASE("gru gradients match finite differences", "[layers]") {
  Rng rng(3);
  GRULayer gru(2, 2, rng);
  ParamMap named;
  gru.named_params("gru", named);
  Tensor xs = random_tensor(rng, {3, 2}, false);
  double err = finite_diff_check([&] { return sum_all(gru_sequence(gru, xs)); },
                                 values_of(named), 1e-5);
  CHECK(err < 1e-4);

  // gradient w.r.t. the inputs as well
  Tensor xs2 = random_tensor(rng, {3, 2}, true);
  CHECK(finite_diff_check([&] { return sum_all(gru_sequence(gru, xs2)); }, {xs2}, 1e-5) <
        1e-4);
}

TEST_CASE("gru state converges on constant input for small parameters", "[layers]") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    GRULayer gru(3, 4, rng);
    ParamMap named;
    gru.named_params("gru", named);
    clamp_inf_norm(named, 0.1);
    Tensor x = random_tensor(rng, {1, 3}, false);
    Tensor h = Tensor::zeros({1, 4});
    std::vector<double> deltas;
    for (int t = 0; t < 12; ++t) {
      Tensor hn = gru.step_batch(x, h);
      double d = 0.0;
      for (int i = 0; i < 4; ++i) {
        const double diff = hn.values()[i] - h.values()[i];
        d += diff * diff;
      }
      deltas.push_back(std::sqrt(d));
      h = hn;
    }
    for (std::size_t t = 3; t < deltas.size(); ++t) {
      CHECK(deltas[t] <= deltas[t - 1] + 1e-12);
    }
  }
}

TEST_CASE("attention weights form a probability vector", "[layers]") {
  Rng rng(4);
  AttentionBlock block(6, rng);
  Rng drop(1);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Tensor> hs;
    const int T = 1 + trial % 7;
    for (int t = 0; t < T; ++t) hs.push_back(random_tensor(rng, {2, 6}, false));
    auto res = attend_batch(block, hs, /*train=*/false, drop);
    REQUIRE(res.alphas.shape() == Shape{2, T});
    for (std::int64_t b = 0; b < 2; ++b) {
      double sum = 0.0;
      for (int t = 0; t < T; ++t) {
        const double a = res.alphas.values()[b * T + t];
        CHECK(a >= 0.0);
        sum += a;
      }
      CHECK(std::abs(sum - 1.0) < 1e-9);
    }
    for (double v : res.output.values()) {
      CHECK(v > -1.0);
      CHECK(v < 1.0);
    }
  }
}

TEST_CASE("attention analytic cases", "[layers]") {
  Rng rng(5);
  Rng drop(1);

  // singleton sequence: alpha forced to [1], context equals the lone state
  AttentionBlock block(3, rng);
  Tensor h0 = Tensor::leaf({1, 3}, {0.2, -0.4, 0.9});
  auto res = attend_batch(block, {h0}, false, drop);
  CHECK(res.alphas.values() == std::vector<double>{1.0});

  // zero score matrix: uniform attention
  AttentionBlock zb(3, rng);
  zb.Ws().values().assign(9, 0.0);
  std::vector<Tensor> hs;
  for (int t = 0; t < 4; ++t) hs.push_back(random_tensor(rng, {1, 3}, false));
  auto ures = attend_batch(zb, hs, false, drop);
  for (double a : ures.alphas.values()) CHECK(a == Approx(0.25).margin(1e-12));

  // full-scale shape: dim 256 gives one [1,256] row per sample
  AttentionBlock big(256, rng);
  std::vector<Tensor> seq;
  for (int t = 0; t < 4; ++t) seq.push_back(random_tensor(rng, {1, 256}, false));
  auto bres = attend_batch(big, seq, false, drop);
  CHECK(bres.output.shape() == Shape{1, 256});
  Tensor flat = attend(big, random_tensor(rng, {4, 256}, false), false, drop);
  CHECK(flat.shape() == Shape{256});

  CHECK_THROWS_AS(attend_batch(block, {}, false, drop), DimensionError);
  CHECK_THROWS_AS(attend_batch(block, {random_tensor(rng, {1, 5}, false)}, false, drop),
                  DimensionError);
}

TEST_CASE("attention gradients match finite differences", "[layers]") {
  Rng rng(6);
  AttentionBlock block(4, rng);
  Rng drop(1);
  Tensor hs = random_tensor(rng, {3, 4});
  ParamMap named;
  block.named_params("att", named);
  std::vector<Tensor> params = values_of(named);
  params.push_back(hs);
  double err = finite_diff_check(
      [&] { return sum_all(attend(block, hs, /*train=*/false, drop)); }, params, 1e-5);
  CHECK(err < 1e-4);
}

TEST_CASE("dense layer contract", "[layers]") {
  Rng rng(7);
  DenseLayer fc(4, 2, Activation::kNone, rng);
  fc.weight().values().assign(8, 0.0);
  fc.bias().values() = {1.5, -2.5};
  Tensor x = Tensor::leaf({4}, {1, 2, 3, 4});
  CHECK(dense(fc, x).values() == std::vector<double>{1.5, -2.5});

  DenseLayer head(4, 1, Activation::kSigmoid, rng);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor in = random_tensor(rng, {4}, false);
    const double y = dense(head, in).item();
    CHECK(y > 0.0);
    CHECK(y < 1.0);
  }

  DenseLayer g(4, 1, Activation::kTanh, rng);
  ParamMap named;
  g.named_params("fc", named);
  Tensor in = random_tensor(rng, {4});
  std::vector<Tensor> params = values_of(named);
  params.push_back(in);
  CHECK(finite_diff_check([&] { return sum_all(dense(g, in)); }, params, 1e-5) < 1e-6);

  CHECK_THROWS_AS(dense(fc, Tensor::zeros({5})), DimensionError);
  CHECK_THROWS_AS(fc.forward_batch(Tensor::zeros({2, 5})), DimensionError);
}

TEST_CASE("dropout keeps survivor fraction and mean at rate 0.5", "[layers]") {
  Rng rng(8);
  Tensor x = Tensor::full({100, 100}, 2.0);
  Tensor y = autodiff::dropout(x, 0.5, /*train=*/true, rng);
  int kept = 0;
  double sum = 0.0;
  for (double v : y.values()) {
    if (v != 0.0) ++kept;
    sum += v;
  }
  const double frac = kept / 10000.0;
  CHECK(frac > 0.47);
  CHECK(frac < 0.53);
  const double mean = sum / 10000.0;
  CHECK(mean > 2.0 * 0.95);
  CHECK(mean < 2.0 * 1.05);
}

TEST_CASE("2d encoder emits one temporally ordered row per frame", "[layers]") {
  Rng rng(9);
  ConvEncoder2D enc(1, 4, 2, 8, rng);
  Tensor clip = random_tensor(rng, {16, 8, 8, 1}, false);
  Tensor feats = encode_frames_2d(enc, clip);
  CHECK(feats.shape() == Shape{16, 8});

  // identical frames give identical rows
  Tensor constant = Tensor::full({5, 8, 8, 1}, 0.6);
  Tensor cf = encode_frames_2d(enc, constant);
  for (int t = 1; t < 5; ++t)
    for (int j = 0; j < 8; ++j)
      CHECK(cf.values()[t * 8 + j] == Approx(cf.values()[j]).margin(1e-12));

  // frame order is preserved: permuting frames permutes rows
  Tensor two = random_tensor(rng, {2, 8, 8, 1}, false);
  std::vector<double> swapped(two.values().size());
  std::copy(two.values().begin() + 64, two.values().end(), swapped.begin());
  std::copy(two.values().begin(), two.values().begin() + 64, swapped.begin() + 64);
  Tensor rev = Tensor::leaf({2, 8, 8, 1}, swapped);
  auto a = encode_frames_2d(enc, two).values();
  auto b = encode_frames_2d(enc, rev).values();
  for (int j = 0; j < 8; ++j) {
    CHECK(a[j] == Approx(b[8 + j]));
    CHECK(a[8 + j] == Approx(b[j]));
  }

  CHECK_THROWS_AS(encode_frames_2d(enc, Tensor::zeros({2, 3, 8, 1})), DimensionError);
  CHECK_THROWS_AS(encode_frames_2d(enc, Tensor::zeros({2, 8, 8, 2})), DimensionError);
  CHECK_THROWS_AS(encode_frames_2d(enc, Tensor::zeros({2, 8, 8})), DimensionError);
}

TEST_CASE("2d encoder gradients match finite differences", "[layers]") {
  Rng rng(10);
  ConvEncoder2D enc(1, 2, 1, 3, rng);
  ParamMap named;
  enc.named_params("enc", named);
  Tensor clip = random_tensor(rng, {2, 8, 8, 1});
  std::vector<Tensor> params = values_of(named);
  params.push_back(clip);
  double err = finite_diff_check([&] { return sum_all(encode_frames_2d(enc, clip)); },
                                 params, 1e-5);
  CHECK(err < 1e-4);
}

TEST_CASE("3d encoder emits a single clip vector", "[layers]") {
  Rng rng(11);
  ConvEncoder3D enc(1, 3, 1, 6, rng);
  for (std::int64_t T : {2, 4, 8}) {
    Tensor clip = random_tensor(rng, {T, 8, 8, 1}, false);
    Tensor feat = encode_clip_3d(enc, clip);
    CHECK(feat.shape() == Shape{6});
  }

  // zeroed stack: conv output is zero, so the head sees zeros and returns its bias
  ConvEncoder3D zenc(1, 3, 1, 6, rng);
  ParamMap named;
  zenc.named_params("enc", named);
  zero_all_params(named);
  Tensor clip = Tensor::full({4, 8, 8, 1}, 0.9);
  CHECK(encode_clip_3d(zenc, clip).values() == std::vector<double>(6, 0.0));

  CHECK_THROWS_AS(encode_clip_3d(enc, Tensor::zeros({1, 8, 8, 1})), DimensionError);
  CHECK_THROWS_AS(encode_clip_3d(enc, Tensor::zeros({4, 8, 8, 2})), DimensionError);
}

TEST_CASE("3d encoder gradients match finite differences", "[layers]") {
  Rng rng(12);
  ConvEncoder3D enc(1, 2, 1, 3, rng);
  ParamMap named;
  enc.named_params("enc", named);
  Tensor clip = random_tensor(rng, {4, 8, 8, 1});
  std::vector<Tensor> params = values_of(named);
  params.push_back(clip);
  double err = finite_diff_check([&] { return sum_all(encode_clip_3d(enc, clip)); },
                                 params, 1e-5);
  CHECK(err < 1e-4);
}
