#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "pcip/errors.hpp"

namespace pcip::metrics {

struct Confusion {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t tn = 0;
  std::int64_t fn = 0;
  double threshold = 0.5;

  std::int64_t total() const { return tp + fp + tn + fn; }
};

struct PrfAccuracy {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
  // zero-denominator ratios report 0 and raise the matching flag, so
  // degenerate eval sets never hole out a results table
  bool precision_defined = true;
  bool recall_defined = true;
  bool f1_defined = true;
};

struct MetricsReport {
  double accuracy = 0.0;
  double auc = 0.0;
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
  double threshold = 0.5;
  bool auc_defined = true;
  bool precision_defined = true;
  bool recall_defined = true;
  bool f1_defined = true;
};

namespace detail {

inline void validate_pairs(const std::vector<double>& scores,
                           const std::vector<int>& labels) {
  if (scores.size() != labels.size()) {
    throw ContractError("metrics: " + std::to_string(scores.size()) + " scores vs " +
                        std::to_string(labels.size()) + " labels");
  }
  if (scores.empty()) throw ContractError("metrics: need at least one sample");
  for (int l : labels) {
    if (l != 0 && l != 1) {
      throw ContractError("metrics: labels must be 0 or 1, got " + std::to_string(l));
    }
  }
}

}  // namespace detail

/// Threshold rule: predict positive iff score >= threshold.
inline Confusion confusion(const std::vector<double>& scores,
                           const std::vector<int>& labels, double threshold = 0.5) {
  detail::validate_pairs(scores, labels);
  Confusion c;
  c.threshold = threshold;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    if (pred && labels[i] == 1) ++c.tp;
    else if (pred && labels[i] == 0) ++c.fp;
    else if (!pred && labels[i] == 0) ++c.tn;
    else ++c.fn;
  }
  return c;
}

inline PrfAccuracy prf_accuracy(const Confusion& c) {
  if (c.total() <= 0) throw ContractError("prf_accuracy: empty confusion");
  PrfAccuracy m;
  if (c.tp + c.fp > 0) {
    m.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  } else {
    m.precision_defined = false;
  }
  if (c.tp + c.fn > 0) {
    m.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  } else {
    m.recall_defined = false;
  }
  if (m.precision_defined && m.recall_defined && m.precision + m.recall > 0.0) {
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  } else if (!m.precision_defined || !m.recall_defined) {
    m.f1_defined = false;
  }
  m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  return m;
}

/// Mann-Whitney rank statistic: the probability that a uniformly random
/// positive outranks a uniformly random negative, ties counting one half.
/// Average ranks over tie blocks keep every intermediate a half-integer, so
/// the result is exact (bitwise equal to brute-force pair counting).
inline double auc_rank(const std::vector<double>& scores, const std::vector<int>& labels) {
  detail::validate_pairs(scores, labels);
  const std::int64_t n = static_cast<std::int64_t>(scores.size());
  std::int64_t n_pos = 0;
  for (int l : labels) n_pos += l;
  const std::int64_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw UndefinedMetricError("auc_rank: need both classes, got " +
                               std::to_string(n_pos) + " positives of " +
                               std::to_string(n));
  }
  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    // 1-based ranks i+1 .. j+1 share the average rank
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]] == 1) rank_sum_pos += avg_rank;
    }
    i = j + 1;
  }
  const double u = rank_sum_pos - static_cast<double>(n_pos) *
                                      (static_cast<double>(n_pos) + 1.0) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

/// Full report; AUC is flagged undefined (and reported 0) when only one class
/// is present instead of propagating auc_rank's error.
inline MetricsReport evaluate_scores(const std::vector<double>& scores,
                                     const std::vector<int>& labels,
                                     double threshold = 0.5) {
  Confusion c = confusion(scores, labels, threshold);
  PrfAccuracy m = prf_accuracy(c);
  MetricsReport r;
  r.accuracy = m.accuracy;
  r.f1 = m.f1;
  r.precision = m.precision;
  r.recall = m.recall;
  r.tp = c.tp;
  r.fp = c.fp;
  r.tn = c.tn;
  r.fn = c.fn;
  r.threshold = threshold;
  r.precision_defined = m.precision_defined;
  r.recall_defined = m.recall_defined;
  r.f1_defined = m.f1_defined;
  const bool both_classes = (c.tp + c.fn) > 0 && (c.fp + c.tn) > 0;
  if (both_classes) {
    r.auc = auc_rank(scores, labels);
  } else {
    r.auc_defined = false;
  }
  return r;
}

}  // namespace pcip::metrics
