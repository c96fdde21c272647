#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <string>
#include <vector>

#include "pcip/data/synth.hpp"
#include "pcip/data/windows.hpp"
#include "pcip/fusion/model.hpp"
#include "pcip/nn/dense.hpp"
#include "pcip/tensor/gradcheck.hpp"
#include "pcip/train/loop.hpp"

using namespace pcip;
using namespace pcip::train;
using autodiff::Tensor;
using Catch::Approx;

namespace {

fusion::ModelConfig desk_cfg(std::int64_t seq_len = 16) {
  fusion::ModelConfig c;
  c.fusion = fusion::FusionStrategy::kHybrid;
  c.visual_encoder = fusion::VisualEncoder::kPrecomputed;
  c.hidden_dim = 8;
  c.feature_dim = 8;
  c.seq_len = seq_len;
  c.dropout_rate = 0.0;
  return c;
}

std::vector<data::SampleWindow> synth_windows(std::int64_t n, std::uint64_t seed,
                                              double global_strength, double noise) {
  data::SynthConfig sc;
  sc.n_samples = n;
  sc.kind = data::FeatureKind::kVector;
  sc.track_len = 16;
  sc.feature_dim = 8;
  sc.pose_strength = 0.0;
  sc.bbox_strength = 0.0;
  sc.speed_strength = 0.0;
  sc.local_strength = 0.0;
  sc.global_strength = global_strength;
  sc.noise_sigma = noise;
  sc.seed = seed;
  auto tracks = data::synth_generate(sc);
  auto wr = data::make_windows(tracks, 16, 0.8, 1, 1000000);
  std::vector<data::SampleWindow> out;
  for (auto& w : wr.windows) {
    data::normalize_window(w, sc.frame_w, sc.frame_h);
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<std::vector<double>> snapshot(const nn::ParamMap& params) {
  std::vector<std::vector<double>> out;
  for (const auto& [name, t] : params) out.push_back(t.values());
  return out;
}

}  // namespace

TEST_CASE("binary cross-entropy matches its analytic values", "[training]") {
  auto scalar = [](double v) { return Tensor::leaf({1}, {v}); };

  SECTION("p=0.5 gives ln 2 for either label") {
    for (double y : {0.0, 1.0}) {
      const Tensor l = bce_loss(scalar(0.5), scalar(y));
      CHECK(l.values()[0] == Approx(std::log(2.0)).epsilon(1e-12));
    }
  }
  SECTION("perfect prediction costs at most 1e-11 after the clamp") {
    CHECK(bce_loss(scalar(1.0), scalar(1.0)).values()[0] <= 1e-11);
    CHECK(bce_loss(scalar(0.0), scalar(0.0)).values()[0] <= 1e-11);
  }
  SECTION("gradient at p=0.5, y=1 is -2") {
    Tensor p = Tensor::leaf({1}, {0.5}, /*requires_grad=*/true);
    Tensor l = bce_loss(p, scalar(1.0));
    autodiff::backward(l);
    CHECK(p.grad()[0] == Approx(-2.0).epsilon(1e-12));
  }
  SECTION("mean over the batch") {
    Tensor p = Tensor::leaf({4, 1}, {0.5, 0.5, 0.5, 0.5});
    Tensor y = Tensor::leaf({4, 1}, {1.0, 0.0, 1.0, 0.0});
    CHECK(bce_loss(p, y).values()[0] == Approx(std::log(2.0)).epsilon(1e-12));
  }
  SECTION("labels outside {0,1} are rejected") {
    CHECK_THROWS_AS(bce_loss(scalar(0.5), scalar(0.3)), ContractError);
    CHECK_THROWS_AS(bce_loss(scalar(0.5), scalar(-1.0)), ContractError);
  }
  SECTION("shape mismatch is rejected") {
    Tensor p = Tensor::leaf({2, 1}, {0.5, 0.5});
    CHECK_THROWS_AS(bce_loss(p, scalar(1.0)), ContractError);
  }
  SECTION("gradient agrees with finite differences away from the clamp") {
    Rng rng(11);
    std::vector<double> pv(6), yv(6);
    for (auto& v : pv) v = rng.uniform(0.05, 0.95);
    for (auto& v : yv) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
    Tensor p = Tensor::leaf({6, 1}, pv, /*requires_grad=*/true);
    Tensor y = Tensor::leaf({6, 1}, yv);
    const double err = autodiff::finite_diff_check([&]() { return bce_loss(p, y); }, {p}, 1e-5);
    CHECK(err < 1e-6);
  }
}

TEST_CASE("l2 penalty applies to the given weights only", "[training]") {
  Tensor w = Tensor::leaf({2}, {1.0, 2.0}, /*requires_grad=*/true);

  SECTION("lambda 0 gives 0") {
    CHECK(l2_penalty(w, 0.0).values()[0] == 0.0);
  }
  SECTION("w=[1,2], lambda=0.001 gives 0.005") {
    CHECK(l2_penalty(w, 0.001).values()[0] == Approx(0.005).epsilon(1e-12));
  }
  SECTION("negative lambda is rejected") {
    CHECK_THROWS_AS(l2_penalty(w, -0.1), ContractError);
  }
  SECTION("penalty shifts the weight gradient by 2*lambda*w") {
    Rng rng(3);
    nn::DenseLayer fc(3, 1, nn::Activation::kSigmoid, rng);
    Tensor x = Tensor::leaf({2, 3}, {0.4, -0.2, 0.9, -0.5, 0.3, 0.1});
    Tensor y = Tensor::leaf({2, 1}, {1.0, 0.0});
    const double lambda = 0.001;

    autodiff::backward(bce_loss(fc.forward_batch(x), y));
    const std::vector<double> plain = fc.weight().grad();
    fc.weight().zero_grad();
    fc.bias().zero_grad();

    autodiff::backward(autodiff::add(bce_loss(fc.forward_batch(x), y),
                                     l2_penalty(fc.weight(), lambda)));
    const std::vector<double> reg = fc.weight().grad();

    for (std::size_t i = 0; i < plain.size(); ++i) {
      CHECK(reg[i] - plain[i] ==
            Approx(2.0 * lambda * fc.weight().values()[i]).margin(1e-12));
    }

    // and the shift itself is what finite differences see
    fc.weight().zero_grad();
    fc.bias().zero_grad();
    const double err = autodiff::finite_diff_check(
        [&]() {
          return autodiff::add(bce_loss(fc.forward_batch(x), y),
                               l2_penalty(fc.weight(), lambda));
        },
        {fc.weight(), fc.bias()}, 1e-5);
    CHECK(err < 1e-6);
  }
}

TEST_CASE("adam updates follow the bias-corrected rule", "[training]") {
  Hyperparams hp;
  hp.learning_rate = 0.1;

  SECTION("zero gradient leaves parameters untouched") {
    Tensor w = Tensor::leaf({3}, {0.5, -1.0, 2.0}, /*requires_grad=*/true);
    nn::ParamMap params{{"w", w}};
    AdamState st = AdamState::for_params(params);
    const auto before = w.values();
    for (int i = 0; i < 5; ++i) adam_step(st, params, hp);
    CHECK(w.values() == before);
    CHECK(st.step == 5);
  }
  SECTION("first step magnitude is learning_rate times sign(grad)") {
    Tensor w = Tensor::leaf({2}, {0.7, -0.4}, /*requires_grad=*/true);
    w.grad()[0] = 0.3;
    w.grad()[1] = -0.002;
    nn::ParamMap params{{"w", w}};
    AdamState st = AdamState::for_params(params);
    adam_step(st, params, hp);
    CHECK(w.values()[0] == Approx(0.7 - hp.learning_rate).epsilon(1e-6));
    CHECK(w.values()[1] == Approx(-0.4 + hp.learning_rate).epsilon(1e-5));
  }
  SECTION("non-finite gradient names the parameter") {
    Tensor w = Tensor::leaf({2}, {0.0, 0.0}, /*requires_grad=*/true);
    w.grad()[1] = std::numeric_limits<double>::quiet_NaN();
    nn::ParamMap params{{"gru_pose.Wz", w}};
    AdamState st = AdamState::for_params(params);
    CHECK_THROWS_WITH(adam_step(st, params, hp),
                      Catch::Matchers::ContainsSubstring("gru_pose.Wz[1]"));
  }
  SECTION("misaligned state is rejected") {
    Tensor w = Tensor::leaf({2}, {0.0, 0.0}, /*requires_grad=*/true);
    nn::ParamMap params{{"w", w}};
    AdamState st;
    CHECK_THROWS_AS(adam_step(st, params, hp), ContractError);
  }
  SECTION("minimizes (w-3)^2 from 0 in 500 steps") {
    Tensor w = Tensor::leaf({1}, {0.0}, /*requires_grad=*/true);
    Tensor target = Tensor::leaf({1}, {3.0});
    nn::ParamMap params{{"w", w}};
    AdamState st = AdamState::for_params(params);
    for (int i = 0; i < 500; ++i) {
      Tensor d = autodiff::sub(w, target);
      autodiff::backward(autodiff::mul(d, d));
      adam_step(st, params, hp);
      w.zero_grad();
    }
    CHECK(std::abs(w.values()[0] - 3.0) < 1e-2);
  }
}

TEST_CASE("hyperparameter validation", "[training]") {
  Hyperparams hp;
  CHECK_NOTHROW(validate(hp));
  hp.learning_rate = 0.0;  // legal: trains as a no-op
  CHECK_NOTHROW(validate(hp));
  hp.learning_rate = -1e-3;
  CHECK_THROWS_AS(validate(hp), ContractError);
  hp = Hyperparams{};
  hp.beta1 = 1.0;
  CHECK_THROWS_AS(validate(hp), ContractError);
  hp = Hyperparams{};
  hp.beta2 = -0.1;
  CHECK_THROWS_AS(validate(hp), ContractError);
  hp = Hyperparams{};
  hp.batch_size = 0;
  CHECK_THROWS_AS(validate(hp), ContractError);
  hp = Hyperparams{};
  hp.epochs = -1;
  CHECK_THROWS_AS(validate(hp), ContractError);
  hp = Hyperparams{};
  hp.l2_lambda = -0.5;
  CHECK_THROWS_AS(validate(hp), ContractError);
}

TEST_CASE("training loop contracts and determinism", "[training]") {
  const auto ws = synth_windows(24, 91, 0.8, 0.2);
  REQUIRE(ws.size() == 24);
  const std::vector<data::SampleWindow> train_set(ws.begin(), ws.begin() + 16);
  const std::vector<data::SampleWindow> val_set(ws.begin() + 16, ws.end());

  SECTION("zero epochs: empty history, model unchanged") {
    fusion::Model m(desk_cfg(), 5);
    const auto before = snapshot(m.named_params());
    Hyperparams hp;
    hp.epochs = 0;
    const TrainHistory h = train::train(m, train_set, val_set, hp);
    CHECK(h.epochs.empty());
    CHECK(h.best_epoch == -1);
    CHECK(snapshot(m.named_params()) == before);
  }
  SECTION("empty training set is rejected") {
    fusion::Model m(desk_cfg(), 5);
    Hyperparams hp;
    CHECK_THROWS_AS(train::train(m, {}, val_set, hp), ContractError);
  }
  SECTION("lr=0 leaves parameters bit-identical") {
    fusion::Model m(desk_cfg(), 5);
    const auto before = snapshot(m.named_params());
    Hyperparams hp;
    hp.learning_rate = 0.0;
    hp.epochs = 3;
    hp.batch_size = 8;
    hp.seed = 2;
    const TrainHistory h = train::train(m, train_set, val_set, hp);
    CHECK(h.epochs.size() == 3);
    CHECK(snapshot(m.named_params()) == before);
  }
  SECTION("same seed, same data: bit-identical history") {
    Hyperparams hp;
    hp.epochs = 4;
    hp.batch_size = 8;
    hp.seed = 17;

    fusion::Model m1(desk_cfg(), 5);
    fusion::Model m2(desk_cfg(), 5);
    const TrainHistory h1 = train::train(m1, train_set, val_set, hp);
    const TrainHistory h2 = train::train(m2, train_set, val_set, hp);

    REQUIRE(h1.epochs.size() == h2.epochs.size());
    for (std::size_t i = 0; i < h1.epochs.size(); ++i) {
      CHECK(h1.epochs[i].train_loss == h2.epochs[i].train_loss);
      CHECK(h1.epochs[i].val_loss == h2.epochs[i].val_loss);
    }
    CHECK(history_csv(h1) == history_csv(h2));
    CHECK(snapshot(m1.named_params()) == snapshot(m2.named_params()));
  }
  SECTION("model is left at the best-val-loss parameters") {
    fusion::Model m(desk_cfg(), 5);
    Hyperparams hp;
    hp.epochs = 5;
    hp.batch_size = 8;
    hp.seed = 3;
    const TrainHistory h = train::train(m, train_set, val_set, hp);
    REQUIRE(h.best_epoch >= 0);
    CHECK(h.best_loss == h.epochs[static_cast<std::size_t>(h.best_epoch)].val_loss);
    for (const auto& r : h.epochs) {
      CHECK(h.best_loss <= r.val_loss);
    }
    const EvalResult ev = evaluate(m, val_set, hp.batch_size);
    CHECK(ev.loss == h.best_loss);
  }
  SECTION("history csv shape") {
    fusion::Model m(desk_cfg(), 5);
    Hyperparams hp;
    hp.epochs = 2;
    hp.batch_size = 8;
    const TrainHistory h = train::train(m, train_set, {}, hp);
    const std::string csv = history_csv(h);
    CHECK(csv.rfind("epoch,train_loss,val_loss,accuracy,auc,f1,precision,recall\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    CHECK(csv.find(",,,,,,") != std::string::npos);  // no-val rows leave cells empty
  }
}

TEST_CASE("one small optimizer step decreases the batch loss", "[training]") {
  int failures = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto ws = synth_windows(8, 40 + seed, 0.7, 0.3);
    fusion::Model m(desk_cfg(), seed);
    const fusion::BatchInputs in = fusion::make_batch(m.config(), ws);
    nn::ParamMap params = m.named_params();
    AdamState st = AdamState::for_params(params);
    Hyperparams hp;
    hp.learning_rate = 1e-6;

    const Tensor before = bce_loss(m.forward_batch(in), in.labels);
    autodiff::backward(before);
    adam_step(st, params, hp);
    for (auto& [name, t] : params) t.zero_grad();
    const Tensor after = bce_loss(m.forward_batch(in), in.labels);
    if (!(after.values()[0] < before.values()[0])) ++failures;
  }
  CHECK(failures <= 1);
}

TEST_CASE("training learns a separable synthetic set", "[training]") {
  const auto train_set = synth_windows(64, 7, 1.0, 0.1);
  REQUIRE(train_set.size() == 64);
  fusion::Model m(desk_cfg(), 1);
  Hyperparams hp;
  hp.epochs = 200;
  hp.batch_size = 16;
  hp.seed = 1;
  const TrainHistory h = train::train(m, train_set, {}, hp);
  double best = h.epochs.front().train_loss;
  for (const auto& r : h.epochs) best = std::min(best, r.train_loss);
  CHECK(best < 0.2);
  CHECK(h.wall_seconds > 0.0);
  for (const auto& r : h.epochs) CHECK(std::isfinite(r.train_loss));
}

TEST_CASE("evaluate reports mean bce and the metric set", "[training]") {
  const auto ws = synth_windows(12, 60, 0.8, 0.2);
  fusion::Model m(desk_cfg(), 9);

  CHECK_THROWS_AS(evaluate(m, {}, 4), ContractError);
  CHECK_THROWS_AS(evaluate(m, ws, 0), ContractError);

  const EvalResult ev = evaluate(m, ws, 5);
  REQUIRE(ev.scores.size() == ws.size());
  REQUIRE(ev.labels.size() == ws.size());

  // batching must not change scores or loss
  const EvalResult ev1 = evaluate(m, ws, 1);
  for (std::size_t i = 0; i < ws.size(); ++i) {
    CHECK(ev.scores[i] == Approx(ev1.scores[i]).margin(1e-12));
  }
  CHECK(ev.loss == Approx(ev1.loss).margin(1e-12));

  // loss matches a direct recomputation from the reported scores
  double acc = 0.0;
  for (std::size_t i = 0; i < ws.size(); ++i) {
    const double p = std::min(1.0 - 1e-12, std::max(1e-12, ev.scores[i]));
    acc -= ev.labels[i] == 1 ? std::log(p) : std::log1p(-p);
  }
  CHECK(ev.loss == Approx(acc / static_cast<double>(ws.size())).margin(1e-12));

  // threshold override reaches the confusion counts
  const EvalResult all_pos = evaluate(m, ws, 5, 0.0);
  CHECK(all_pos.report.fn == 0);
  CHECK(all_pos.report.tn == 0);
}
