#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "pcip/metrics/metrics.hpp"
#include "pcip/rng.hpp"

using namespace pcip;
using namespace pcip::metrics;
using Catch::Approx;

namespace {

// independent oracle: enumerate every positive/negative pair
double auc_pairs(const std::vector<double>& scores, const std::vector<int>& labels) {
  double num = 0.0;
  std::int64_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j]) num += 1.0;
      else if (scores[i] == scores[j]) num += 0.5;
    }
  }
  return num / static_cast<double>(pairs);
}

}  // namespace

TEST_CASE("confusion counts at a threshold", "[metrics]") {
  std::vector<double> scores{0.9, 0.8, 0.3, 0.2};
  std::vector<int> labels{1, 0, 1, 0};
  Confusion c = confusion(scores, labels, 0.5);
  CHECK(c.tp == 1);
  CHECK(c.fp == 1);
  CHECK(c.tn == 1);
  CHECK(c.fn == 1);

  Confusion all_pos = confusion({1.0, 1.0, 1.0}, {1, 1, 1}, 0.5);
  CHECK(all_pos.tp == 3);
  CHECK(all_pos.fp + all_pos.tn + all_pos.fn == 0);

  Confusion t0 = confusion(scores, labels, 0.0);
  CHECK(t0.tp + t0.fp == 4);
  CHECK(t0.tn + t0.fn == 0);

  // scores equal to the threshold predict positive
  Confusion edge = confusion({0.5}, {1}, 0.5);
  CHECK(edge.tp == 1);

  CHECK_THROWS_AS(confusion({0.5, 0.4}, {1}, 0.5), ContractError);
  CHECK_THROWS_AS(confusion({}, {}, 0.5), ContractError);
  CHECK_THROWS_AS(confusion({0.5}, {2}, 0.5), ContractError);
}

TEST_CASE("precision, recall, f1, accuracy from counts", "[metrics]") {
  PrfAccuracy m = prf_accuracy({1, 1, 1, 1, 0.5});
  CHECK(m.precision == Approx(0.5));
  CHECK(m.recall == Approx(0.5));
  CHECK(m.f1 == Approx(0.5));
  CHECK(m.accuracy == Approx(0.5));
  CHECK(m.precision_defined);
  CHECK(m.recall_defined);
  CHECK(m.f1_defined);

  PrfAccuracy perfect = prf_accuracy({3, 0, 2, 0, 0.5});
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);
  CHECK(perfect.f1 == 1.0);
  CHECK(perfect.accuracy == 1.0);

  // positives exist but none predicted: recall 0 and f1 0, both defined
  PrfAccuracy miss = prf_accuracy({0, 2, 3, 4, 0.5});
  CHECK(miss.recall == 0.0);
  CHECK(miss.f1 == 0.0);
  CHECK(miss.recall_defined);

  // nothing predicted positive: precision undefined, reported as 0
  PrfAccuracy nopred = prf_accuracy({0, 0, 3, 2, 0.5});
  CHECK_FALSE(nopred.precision_defined);
  CHECK(nopred.precision == 0.0);
  CHECK_FALSE(nopred.f1_defined);

  // no actual positives: recall undefined
  PrfAccuracy nopos = prf_accuracy({0, 1, 3, 0, 0.5});
  CHECK_FALSE(nopos.recall_defined);

  CHECK_THROWS_AS(prf_accuracy({0, 0, 0, 0, 0.5}), ContractError);
}

TEST_CASE("auc worked example and boundary cases", "[metrics]") {
  CHECK(auc_rank({0.9, 0.8, 0.3, 0.2}, {1, 0, 1, 0}) == 0.75);
  CHECK(auc_rank({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}) == 1.0);
  CHECK(auc_rank({0.1, 0.2, 0.8, 0.9}, {1, 1, 0, 0}) == 0.0);
  CHECK(auc_rank({0.4, 0.4, 0.4, 0.4}, {1, 0, 1, 0}) == 0.5);

  CHECK_THROWS_AS(auc_rank({0.5, 0.6}, {1, 1}), UndefinedMetricError);
  CHECK_THROWS_AS(auc_rank({0.5, 0.6}, {0, 0}), UndefinedMetricError);
  CHECK_THROWS_AS(auc_rank({0.5}, {1, 0}), ContractError);
}

TEST_CASE("auc equals brute-force pair counting exactly", "[metrics]") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const std::size_t n = 2 + rng.uniform_int(199);
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    // coarse score grid forces plenty of ties
    for (auto& s : scores) s = static_cast<double>(rng.uniform_int(11)) / 10.0;
    bool has_pos = false, has_neg = false;
    for (auto& l : labels) {
      l = rng.bernoulli(0.4) ? 1 : 0;
      (l ? has_pos : has_neg) = true;
    }
    if (!has_pos) labels[0] = 1;
    if (!has_neg) labels[n - 1] = 0;
    CHECK(auc_rank(scores, labels) == auc_pairs(scores, labels));
  }
}

TEST_CASE("auc is invariant under strictly monotone transforms", "[metrics]") {
  Rng rng(7);
  std::vector<double> scores(50);
  std::vector<int> labels(50);
  for (auto& s : scores) s = rng.uniform();
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i % 3 == 0 ? 1 : 0;
  const double base = auc_rank(scores, labels);
  std::vector<double> warped(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) warped[i] = std::exp(3.0 * scores[i] + 1.0);
  CHECK(auc_rank(warped, labels) == base);

  // complementing the labels mirrors the ranking
  std::vector<int> flipped(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) flipped[i] = 1 - labels[i];
  CHECK(auc_rank(scores, flipped) == Approx(1.0 - base).margin(1e-12));
}

TEST_CASE("evaluate_scores assembles a bounded report", "[metrics]") {
  MetricsReport r = evaluate_scores({0.9, 0.8, 0.3, 0.2}, {1, 0, 1, 0});
  CHECK(r.accuracy == Approx(0.5));
  CHECK(r.precision == Approx(0.5));
  CHECK(r.recall == Approx(0.5));
  CHECK(r.f1 == Approx(0.5));
  CHECK(r.auc == 0.75);
  CHECK(r.auc_defined);
  CHECK(r.threshold == 0.5);

  MetricsReport one_class = evaluate_scores({0.9, 0.8}, {1, 1});
  CHECK_FALSE(one_class.auc_defined);
  CHECK(one_class.auc == 0.0);
  CHECK(one_class.accuracy == 1.0);

  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 2 + rng.uniform_int(50);
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    for (auto& s : scores) s = rng.uniform();
    for (auto& l : labels) l = rng.bernoulli(0.5) ? 1 : 0;
    MetricsReport rep = evaluate_scores(scores, labels, rng.uniform());
    for (double v : {rep.accuracy, rep.auc, rep.f1, rep.precision, rep.recall}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}
