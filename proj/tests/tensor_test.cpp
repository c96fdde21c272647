#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#include "pcip/rng.hpp"
#include "pcip/tensor/conv.hpp"
#include "pcip/tensor/gradcheck.hpp"
#include "pcip/tensor/ops.hpp"
#include "pcip/tensor/tensor.hpp"
#include "support/test_util.hpp"

using namespace pcip;
using namespace pcip::autodiff;
using pcip::testing::random_tensor;
using pcip::testing::random_tensor_away_from_zero;
using Catch::Approx;

TEST_CASE("leaf construction validates shape against value count", "[tensor]") {
  CHECK_THROWS_AS(Tensor::leaf({2, 3}, {1.0, 2.0}), DimensionError);
  CHECK_THROWS_AS(Tensor::leaf({0}, {}), DimensionError);
  CHECK_THROWS_AS(Tensor::leaf({2, -1}, {1.0, 2.0}), DimensionError);
  CHECK_THROWS_AS(Tensor::leaf({}, {}), DimensionError);
  Tensor t = Tensor::leaf({2, 2}, {1, 2, 3, 4});
  CHECK(t.size() == 4);
  CHECK(t.grad() == std::vector<double>{0, 0, 0, 0});
  CHECK_THROWS_AS(t.item(), ContractError);
  CHECK(Tensor::scalar(3.5).item() == 3.5);
}

TEST_CASE("matmul shapes and values", "[tensor]") {
  Tensor a = Tensor::leaf({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor b = Tensor::leaf({3, 2}, {7, 8, 9, 10, 11, 12});
  Tensor c = matmul(a, b);
  REQUIRE(c.shape() == Shape{2, 2});
  CHECK(c.values() == std::vector<double>{58, 64, 139, 154});

  Tensor eye = Tensor::leaf({2, 2}, {1, 0, 0, 1});
  Tensor v = Tensor::leaf({2, 2}, {3.25, -1.5, 0.75, 2.0});
  CHECK(matmul(eye, v).values() == v.values());

  CHECK_THROWS_MATCHES(matmul(a, a), DimensionError,
                       Catch::Matchers::MessageMatches(
                           Catch::Matchers::ContainsSubstring("[2,3]") &&
                           Catch::Matchers::ContainsSubstring("[2,3]")));
  CHECK_THROWS_AS(matmul(a, Tensor::leaf({6}, {1, 2, 3, 4, 5, 6})), DimensionError);
}

TEST_CASE("matmul gradient matches finite differences", "[tensor]") {
  Rng rng(11);
  Tensor a = random_tensor(rng, {3, 3});
  Tensor b = random_tensor(rng, {3, 3});
  double err = finite_diff_check([&] { return sum_all(matmul(a, b)); }, {a, b}, 1e-5);
  CHECK(err < 1e-6);
}

TEST_CASE("elementwise ops and scalar broadcast", "[tensor]") {
  Tensor x = Tensor::leaf({2, 2}, {1, 2, 3, 4});
  Tensor y = Tensor::leaf({2, 2}, {10, 20, 30, 40});
  CHECK(add(x, y).values() == std::vector<double>{11, 22, 33, 44});
  CHECK(sub(y, x).values() == std::vector<double>{9, 18, 27, 36});
  CHECK(mul(x, y).values() == std::vector<double>{10, 40, 90, 160});

  Tensor s = Tensor::scalar(2.0);
  CHECK(mul(x, s).values() == std::vector<double>{2, 4, 6, 8});
  CHECK(mul(s, x).values() == std::vector<double>{2, 4, 6, 8});
  CHECK(add(s, x).values() == std::vector<double>{3, 4, 5, 6});
  CHECK(sub(s, x).values() == std::vector<double>{1, 0, -1, -2});
  CHECK(sub(x, s).values() == std::vector<double>{-1, 0, 1, 2});

  CHECK_THROWS_AS(add(x, Tensor::leaf({3}, {1, 2, 3})), DimensionError);
  CHECK_THROWS_AS(mul(x, Tensor::leaf({4}, {1, 2, 3, 4})), DimensionError);
}

TEST_CASE("activation values and gradients at zero", "[tensor]") {
  Tensor x = Tensor::leaf({1}, {0.0}, true);
  Tensor s = sigmoid(x);
  CHECK(s.item() == Approx(0.5));
  backward(s);
  CHECK(x.grad()[0] == Approx(0.25));

  Tensor x2 = Tensor::leaf({1}, {0.0}, true);
  Tensor t = tanh(x2);
  CHECK(t.item() == Approx(0.0));
  backward(t);
  CHECK(x2.grad()[0] == Approx(1.0));

  Tensor x3 = Tensor::leaf({3}, {-1.0, 0.5, 2.0});
  CHECK(relu(x3).values() == std::vector<double>{0.0, 0.5, 2.0});
}

TEST_CASE("elementwise gradients match finite differences", "[tensor]") {
  Rng rng(12);
  Tensor a = random_tensor(rng, {2, 3});
  Tensor b = random_tensor(rng, {2, 3});
  Tensor s = Tensor::leaf({1}, {0.7}, true);
  auto check = [&](auto&& f, std::vector<Tensor> params) {
    CHECK(finite_diff_check(f, params, 1e-5) < 1e-6);
  };
  check([&] { return sum_all(add(a, b)); }, {a, b});
  check([&] { return sum_all(sub(a, b)); }, {a, b});
  check([&] { return sum_all(mul(a, b)); }, {a, b});
  check([&] { return sum_all(mul(a, s)); }, {a, s});
  check([&] { return sum_all(sub(s, b)); }, {s, b});
  check([&] { return sum_all(sigmoid(a)); }, {a});
  check([&] { return sum_all(tanh(a)); }, {a});
  Tensor c = random_tensor_away_from_zero(rng, {3, 3});
  check([&] { return sum_all(relu(c)); }, {c});
}

TEST_CASE("softmax normalization and stability", "[tensor]") {
  Tensor z = Tensor::leaf({3}, {0, 0, 0});
  auto v = softmax(z).values();
  for (double x : v) CHECK(x == Approx(1.0 / 3.0).margin(1e-15));

  CHECK(softmax(Tensor::leaf({1}, {123.0})).values()[0] == 1.0);
  CHECK(softmax(Tensor::leaf({1}, {-9.0})).values()[0] == 1.0);

  Rng rng(13);
  for (int trial = 0; trial < 5; ++trial) {
    Tensor x = random_tensor(rng, {5}, false);
    auto y = softmax(x).values();
    double sum = 0.0;
    for (double e : y) {
      CHECK(e > 0.0);
      sum += e;
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
    // invariance to a constant shift
    std::vector<double> shifted = x.values();
    for (auto& e : shifted) e += 7.5;
    auto y2 = softmax(Tensor::leaf({5}, shifted)).values();
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(std::abs(y[i] - y2[i]) < 1e-12);
  }

  // huge logits survive max-subtraction
  auto big = softmax(Tensor::leaf({2}, {1000.0, 1000.0})).values();
  CHECK(big[0] == Approx(0.5));

  // rank-2 applies per row
  Tensor m = Tensor::leaf({2, 2}, {0, 0, 100, 100});
  auto mv = softmax(m).values();
  for (double e : mv) CHECK(e == Approx(0.5));

  // an empty probe cannot even be constructed
  CHECK_THROWS_AS(Tensor::leaf({0}, {}), DimensionError);
  CHECK_THROWS_AS(softmax(Tensor::leaf({1, 1, 1}, {1.0})), DimensionError);
}

TEST_CASE("softmax Jacobian matches finite differences", "[tensor]") {
  Rng rng(14);
  Tensor x = random_tensor(rng, {5});
  for (std::int64_t i = 0; i < 5; ++i) {
    double err = finite_diff_check([&] { return slice(softmax(x), 0, i, 1); }, {x}, 1e-5);
    CHECK(err < 1e-6);
  }
}

TEST_CASE("concat values, identity case, grad routing", "[tensor]") {
  Tensor a = Tensor::full({1, 256}, 1.0, true);
  Tensor b = Tensor::full({1, 256}, 2.0, true);
  Tensor c = concat({a, b}, 1);
  REQUIRE(c.shape() == Shape{1, 512});
  CHECK(c.values()[0] == 1.0);
  CHECK(c.values()[511] == 2.0);

  Tensor single = concat({a}, 0);
  CHECK(single.values() == a.values());

  backward(sum_all(c));
  for (double g : a.grad()) CHECK(g == 1.0);
  for (double g : b.grad()) CHECK(g == 1.0);

  CHECK_THROWS_AS(concat({a, Tensor::zeros({2, 255})}, 1), DimensionError);
  CHECK_THROWS_AS(concat({a, Tensor::zeros({256})}, 0), DimensionError);
  CHECK_THROWS_AS(concat({}, 0), DimensionError);
  CHECK_THROWS_AS(concat({a}, 2), DimensionError);

  // interior-axis concat on rank-3 blocks
  Tensor p = Tensor::leaf({2, 1, 2}, {1, 2, 3, 4}, true);
  Tensor q = Tensor::leaf({2, 2, 2}, {5, 6, 7, 8, 9, 10, 11, 12}, true);
  Tensor r = concat({p, q}, 1);
  REQUIRE(r.shape() == Shape{2, 3, 2});
  CHECK(r.values() == std::vector<double>{1, 2, 5, 6, 7, 8, 3, 4, 9, 10, 11, 12});
  double err = finite_diff_check([&] { return sum_all(mul(concat({p, q}, 1), concat({p, q}, 1))); },
                                 {p, q}, 1e-5);
  CHECK(err < 1e-6);
}

TEST_CASE("reductions along an axis", "[tensor]") {
  Tensor x = Tensor::full({3, 4}, 2.5);
  Tensor m = reduce_mean(x, 0);
  REQUIRE(m.shape() == Shape{4});
  for (double v : m.values()) CHECK(v == Approx(2.5));

  Tensor w = Tensor::leaf({2, 2}, {1, 2, 3, 4}, true);
  Tensor s = reduce_sum(w, 1);
  REQUIRE(s.shape() == Shape{2});
  CHECK(s.values() == std::vector<double>{3, 7});
  backward(sum_all(s));
  for (double g : w.grad()) CHECK(g == 1.0);

  // spatial map averaged over both trailing axes
  Tensor map = Tensor::full({512, 14, 14}, 0.25);
  Tensor pooled = reduce_mean(reduce_mean(map, 2), 1);
  REQUIRE(pooled.shape() == Shape{512});
  CHECK(pooled.values()[0] == Approx(0.25));
  CHECK(pooled.values()[511] == Approx(0.25));

  // rank-1 reduction keeps a [1] result
  CHECK(reduce_sum(Tensor::leaf({3}, {1, 2, 3}), 0).shape() == Shape{1});
  CHECK_THROWS_AS(reduce_sum(x, 2), DimensionError);
  CHECK_THROWS_AS(reduce_mean(x, -1), DimensionError);

  Rng rng(15);
  Tensor r = random_tensor(rng, {2, 3, 2});
  CHECK(finite_diff_check([&] { return sum_all(mul(reduce_mean(r, 1), reduce_mean(r, 1))); },
                          {r}, 1e-5) < 1e-6);
}

TEST_CASE("backward basics and accumulation semantics", "[tensor]") {
  Tensor w = Tensor::leaf({3}, {5, -2, 9}, true);
  backward(sum_all(w));
  CHECK(w.grad() == std::vector<double>{1, 1, 1});

  Tensor w2 = Tensor::leaf({2}, {1, 2}, true);
  backward(sum_all(mul(w2, w2)));
  CHECK(w2.grad()[0] == Approx(2.0));
  CHECK(w2.grad()[1] == Approx(4.0));

  // repeated backward accumulates into leaves
  backward(sum_all(mul(w2, w2)));
  CHECK(w2.grad()[0] == Approx(4.0));
  CHECK(w2.grad()[1] == Approx(8.0));

  // zero-grad restores the single-sweep result
  w2.zero_grad();
  backward(sum_all(mul(w2, w2)));
  CHECK(w2.grad()[0] == Approx(2.0));

  CHECK_THROWS_AS(backward(Tensor::leaf({2}, {1, 2}, true)), ContractError);
}

TEST_CASE("diamond-shaped graph accumulates through shared nodes", "[tensor]") {
  Tensor a = Tensor::leaf({1}, {3.0}, true);
  Tensor b = Tensor::leaf({1}, {4.0}, true);
  Tensor c = add(a, b);        // 7
  Tensor d = mul(a, c);        // 21; a feeds two consumers
  Tensor loss = add(d, c);     // 28
  backward(loss);
  // d(loss)/da = c + a + 1 = 11; d(loss)/db = a + 1 = 4
  CHECK(a.grad()[0] == Approx(11.0));
  CHECK(b.grad()[0] == Approx(4.0));
}

TEST_CASE("shape plumbing: transpose, reshape, slice", "[tensor]") {
  Tensor x = Tensor::leaf({2, 3}, {1, 2, 3, 4, 5, 6}, true);
  Tensor xt = transpose(x);
  REQUIRE(xt.shape() == Shape{3, 2});
  CHECK(xt.values() == std::vector<double>{1, 4, 2, 5, 3, 6});

  Tensor r = reshape(x, {3, 2});
  CHECK(r.values() == x.values());
  CHECK_THROWS_AS(reshape(x, {4, 2}), DimensionError);

  Tensor sl = slice(x, 1, 1, 2);
  REQUIRE(sl.shape() == Shape{2, 2});
  CHECK(sl.values() == std::vector<double>{2, 3, 5, 6});
  CHECK_THROWS_AS(slice(x, 1, 2, 2), DimensionError);
  CHECK_THROWS_AS(slice(x, 1, 0, 0), DimensionError);
  CHECK_THROWS_AS(slice(x, 3, 0, 1), DimensionError);

  Rng rng(16);
  Tensor y = random_tensor(rng, {3, 4});
  CHECK(finite_diff_check([&] { return sum_all(mul(transpose(y), transpose(y))); }, {y},
                          1e-5) < 1e-6);
  CHECK(finite_diff_check([&] { return sum_all(mul(slice(y, 0, 1, 2), slice(y, 0, 1, 2))); },
                          {y}, 1e-5) < 1e-6);
  CHECK(finite_diff_check([&] { return sum_all(mul(reshape(y, {12}), reshape(y, {12}))); },
                          {y}, 1e-5) < 1e-6);
}

TEST_CASE("scale_rows and add_bias", "[tensor]") {
  Tensor x = Tensor::leaf({2, 3}, {1, 2, 3, 4, 5, 6}, true);
  Tensor s = Tensor::leaf({2}, {2.0, -1.0}, true);
  Tensor y = scale_rows(x, s);
  CHECK(y.values() == std::vector<double>{2, 4, 6, -4, -5, -6});
  CHECK_THROWS_AS(scale_rows(x, Tensor::leaf({3}, {1, 2, 3})), DimensionError);

  Tensor b = Tensor::leaf({3}, {10, 20, 30}, true);
  Tensor z = add_bias(x, b);
  CHECK(z.values() == std::vector<double>{11, 22, 33, 14, 25, 36});
  CHECK_THROWS_AS(add_bias(x, Tensor::leaf({2}, {1, 2})), DimensionError);

  CHECK(finite_diff_check([&] { return sum_all(mul(scale_rows(x, s), scale_rows(x, s))); },
                          {x, s}, 1e-5) < 1e-6);
  CHECK(finite_diff_check([&] { return sum_all(mul(add_bias(x, b), add_bias(x, b))); },
                          {x, b}, 1e-5) < 1e-6);
}

TEST_CASE("dropout identity in eval and inverted scaling in train", "[tensor]") {
  Rng rng(17);
  Tensor x = Tensor::full({4, 8}, 3.0, true);
  Tensor ev = dropout(x, 0.5, /*train=*/false, rng);
  CHECK(ev.same_node(x));
  Tensor zr = dropout(x, 0.0, /*train=*/true, rng);
  CHECK(zr.same_node(x));

  Tensor tr = dropout(x, 0.5, /*train=*/true, rng);
  int kept = 0;
  for (double v : tr.values()) {
    CHECK((v == 0.0 || v == Approx(6.0)));
    if (v != 0.0) ++kept;
  }
  CHECK(kept > 0);
  CHECK(kept < 32);

  CHECK_THROWS_AS(dropout(x, -0.1, true, rng), ContractError);
  CHECK_THROWS_AS(dropout(x, 1.0, true, rng), ContractError);

  // gradient flows only through kept units; mask is frozen per seed
  auto rebuild = [&] {
    Rng local(99);
    return sum_all(mul(dropout(x, 0.3, true, local), dropout(x, 0.0, true, local)));
  };
  CHECK(finite_diff_check(rebuild, {x}, 1e-5) < 1e-6);
}

TEST_CASE("conv2d analytic cases", "[tensor]") {
  // center-only 3x3 kernel is the identity under same-padding
  Tensor x = Tensor::leaf({1, 3, 3, 1}, {1, 2, 3, 4, 5, 6, 7, 8, 9}, true);
  std::vector<double> kcenter(9, 0.0);
  kcenter[4] = 1.0;
  Tensor k = Tensor::leaf({3, 3, 1, 1}, kcenter);
  Tensor bias = Tensor::zeros({1});
  CHECK(conv2d(x, k, bias).values() == x.values());

  // top-left-only kernel shifts down-right with zero fill
  std::vector<double> ktl(9, 0.0);
  ktl[0] = 1.0;
  Tensor k2 = Tensor::leaf({3, 3, 1, 1}, ktl);
  CHECK(conv2d(x, k2, bias).values() ==
        std::vector<double>{0, 0, 0, 0, 1, 2, 0, 4, 5});

  // 1x1 conv is an affine map per pixel
  Tensor k3 = Tensor::leaf({1, 1, 1, 1}, {2.0});
  Tensor b3 = Tensor::leaf({1}, {0.5});
  auto v = conv2d(x, k3, b3).values();
  CHECK(v[0] == Approx(2.5));
  CHECK(v[8] == Approx(18.5));

  CHECK_THROWS_AS(conv2d(x, Tensor::zeros({3, 3, 2, 1}), bias), DimensionError);
  CHECK_THROWS_AS(conv2d(x, k, Tensor::zeros({2})), DimensionError);
}

TEST_CASE("conv and pool gradients match finite differences", "[tensor]") {
  Rng rng(18);
  Tensor x = random_tensor(rng, {2, 4, 4, 2});
  Tensor k = random_tensor(rng, {3, 3, 2, 3});
  Tensor b = random_tensor(rng, {3});
  CHECK(finite_diff_check([&] { return sum_all(mul(conv2d(x, k, b), conv2d(x, k, b))); },
                          {x, k, b}, 1e-5) < 1e-4);

  Tensor px = random_tensor_away_from_zero(rng, {1, 4, 4, 2});
  CHECK(finite_diff_check([&] { return sum_all(mul(maxpool2d(px, 2, 2), maxpool2d(px, 2, 2))); },
                          {px}, 1e-5) < 1e-6);

  Tensor x3 = random_tensor(rng, {1, 3, 3, 3, 1});
  Tensor k3 = random_tensor(rng, {3, 3, 3, 1, 2});
  Tensor b3 = random_tensor(rng, {2});
  CHECK(finite_diff_check([&] { return sum_all(mul(conv3d(x3, k3, b3), conv3d(x3, k3, b3))); },
                          {x3, k3, b3}, 1e-5) < 1e-4);

  Tensor p3 = random_tensor_away_from_zero(rng, {1, 2, 4, 4, 1});
  CHECK(finite_diff_check([&] { return sum_all(mul(maxpool3d(p3, 2, 2, 2), maxpool3d(p3, 2, 2, 2))); },
                          {p3}, 1e-5) < 1e-6);
}

TEST_CASE("pooling shapes, values and guards", "[tensor]") {
  Tensor x = Tensor::leaf({1, 2, 2, 1}, {1, 5, 3, 2}, true);
  Tensor p = maxpool2d(x, 2, 2);
  REQUIRE(p.shape() == Shape{1, 1, 1, 1});
  CHECK(p.item() == 5.0);
  backward(sum_all(p));
  CHECK(x.grad() == std::vector<double>{0, 1, 0, 0});

  CHECK_THROWS_AS(maxpool2d(x, 3, 2), DimensionError);
  CHECK_THROWS_AS(maxpool2d(x, 2, 4), DimensionError);

  Tensor g = Tensor::leaf({1, 2, 2, 3}, {1, 10, 100, 3, 30, 300, 5, 50, 500, 7, 70, 700});
  Tensor pooled = global_avg_pool2d(g);
  REQUIRE(pooled.shape() == Shape{1, 3});
  CHECK(pooled.values()[0] == Approx(4.0));
  CHECK(pooled.values()[1] == Approx(40.0));
  CHECK(pooled.values()[2] == Approx(400.0));

  Tensor c3 = Tensor::full({2, 2, 2, 2, 4}, 1.25);
  Tensor pooled3 = global_avg_pool3d(c3);
  REQUIRE(pooled3.shape() == Shape{2, 4});
  CHECK(pooled3.values()[0] == Approx(1.25));

  Tensor v3 = Tensor::leaf({1, 2, 1, 1, 1}, {4.0, 9.0});
  CHECK(maxpool3d(v3, 2, 1, 1).values() == std::vector<double>{9.0});
  CHECK_THROWS_AS(maxpool3d(v3, 3, 1, 1), DimensionError);
}

TEST_CASE("finite_diff_check oracle behaves on closed-form cases", "[tensor]") {
  Tensor x = Tensor::leaf({1}, {3.0}, true);
  auto rep = finite_diff_report([&] { return mul(x, x); }, {x}, 1e-5);
  CHECK(rep.numeric == Approx(6.0).margin(1e-6));
  CHECK(rep.max_rel_err < 1e-9);

  Tensor z = Tensor::leaf({1}, {0.0}, true);
  auto rep2 = finite_diff_report([&] { return sigmoid(z); }, {z}, 1e-5);
  CHECK(rep2.numeric == Approx(0.25).margin(1e-9));

  CHECK_THROWS_AS(finite_diff_check([&] { return mul(x, x); }, {x}, 0.0), ContractError);
  CHECK_THROWS_AS(finite_diff_check([&] { return mul(x, x); }, {x}, -1.0), ContractError);
  CHECK_THROWS_AS(finite_diff_check([&] { return mul(x, x); },
                                    {Tensor::leaf({1}, {1.0}, false)}, 1e-5),
                  ContractError);

  Tensor n = Tensor::leaf({1}, {-1.0}, true);
  CHECK_THROWS_AS(finite_diff_check(
                      [&] {
                        Tensor out = mul(n, n);
                        out.values()[0] = std::numeric_limits<double>::quiet_NaN();
                        return out;
                      },
                      {n}, 1e-5),
                  NumericError);
}

TEST_CASE("gradient sweep across ops, 5 seeds", "[tensor]") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    Tensor a = random_tensor(rng, {4, 5});
    Tensor b = random_tensor(rng, {5, 3});
    Tensor c = random_tensor(rng, {4, 3});
    Tensor s = random_tensor(rng, {4});
    Tensor bias = random_tensor(rng, {3});
    auto loss = [&] {
      Tensor h = tanh(add_bias(matmul(a, b), bias));
      Tensor g = mul(scale_rows(h, s), sigmoid(c));
      Tensor sm = softmax(reduce_sum(g, 1));
      return sum_all(mul(sm, reduce_mean(concat({g, c}, 1), 1)));
    };
    CHECK(finite_diff_check(loss, {a, b, c, s, bias}, 1e-5) < 1e-4);
  }
}

TEST_CASE("identical inputs and op sequence give bit-identical outputs", "[tensor]") {
  auto run = [] {
    Rng rng(21);
    Tensor a = random_tensor(rng, {3, 3});
    Tensor b = random_tensor(rng, {3, 3});
    Tensor out = softmax(reduce_sum(tanh(matmul(a, b)), 1));
    backward(sum_all(mul(out, out)));
    std::vector<double> all = out.values();
    all.insert(all.end(), a.grad().begin(), a.grad().end());
    return all;
  };
  auto r1 = run();
  auto r2 = run();
  REQUIRE(r1.size() == r2.size());
  CHECK(std::memcmp(r1.data(), r2.data(), r1.size() * sizeof(double)) == 0);
}
