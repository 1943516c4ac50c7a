#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "advneg/error.hpp"

namespace advneg {

// Fraction of pairs where (score >= threshold) agrees with the label. A
// score exactly at the threshold counts as a positive prediction.
inline double accuracy(const std::vector<std::pair<double, bool>>& scored_labels,
                       double threshold = 0.5) {
  if (scored_labels.empty()) throw DataError("accuracy over empty input");
  std::size_t correct = 0;
  for (const auto& [score, positive] : scored_labels) {
    if (!std::isfinite(score)) throw DataError("non-finite score");
    if ((score >= threshold) == positive) ++correct;
  }
  return static_cast<double>(correct) /
         static_cast<double>(scored_labels.size());
}

// A ranking instance reduced to what the metrics need: candidate scores and
// the positive's position.
struct ScoredRanking {
  std::vector<double> scores;
  std::size_t positive_index = 0;
};

// Rank of the positive by descending score, ties resolved against the
// positive (every tied negative counts as ranked above it). Deterministic and
// conservative.
inline std::size_t positive_rank(const ScoredRanking& inst) {
  if (inst.positive_index >= inst.scores.size()) {
    throw DataError("positive index out of range");
  }
  const double pos = inst.scores[inst.positive_index];
  if (!std::isfinite(pos)) throw DataError("non-finite score");
  std::size_t rank = 1;
  for (std::size_t i = 0; i < inst.scores.size(); ++i) {
    if (i == inst.positive_index) continue;
    if (!std::isfinite(inst.scores[i])) throw DataError("non-finite score");
    if (inst.scores[i] >= pos) ++rank;
  }
  return rank;
}

inline double recall_at_k(const std::vector<ScoredRanking>& instances,
                          std::size_t k) {
  if (instances.empty()) throw DataError("recall over empty input");
  std::size_t hits = 0;
  for (const auto& inst : instances) {
    if (positive_rank(inst) <= k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(instances.size());
}

inline double mrr(const std::vector<ScoredRanking>& instances) {
  if (instances.empty()) throw DataError("mrr over empty input");
  double total = 0.0;
  for (const auto& inst : instances) {
    total += 1.0 / static_cast<double>(positive_rank(inst));
  }
  return total / static_cast<double>(instances.size());
}

// Product-moment correlation; disengaged when either side has zero variance.
inline std::optional<double> pearson(const std::vector<double>& x,
                                     const std::vector<double>& y) {
  if (x.size() != y.size()) throw DataError("pearson over unequal lengths");
  if (x.size() < 3) throw DataError("pearson needs at least 3 points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

// Ascending ranks 1..n with ties assigned the mean of their rank range.
inline std::vector<double> average_ranks(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] < values[b];
  });
  std::vector<double> ranks(values.size(), 0.0);
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) {
      ++j;
    }
    const double mean_rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

inline std::optional<double> spearman(const std::vector<double>& x,
                                      const std::vector<double>& y) {
  if (x.size() != y.size()) throw DataError("spearman over unequal lengths");
  if (x.size() < 3) throw DataError("spearman needs at least 3 points");
  return pearson(average_ranks(x), average_ranks(y));
}

// ---------------------------------------------------------------------------
// Inter-annotator agreement.
// ---------------------------------------------------------------------------

// items x raters, missing entries allowed.
struct RatingsMatrix {
  std::size_t items = 0;
  std::size_t raters = 0;
  std::vector<std::optional<double>> cells;  // row-major

  static RatingsMatrix make(std::size_t items, std::size_t raters) {
    if (raters < 2) throw DataError("agreement metrics need >= 2 raters");
    RatingsMatrix m;
    m.items = items;
    m.raters = raters;
    m.cells.assign(items * raters, std::nullopt);
    return m;
  }

  std::optional<double>& at(std::size_t item, std::size_t rater) {
    return cells[item * raters + rater];
  }
  const std::optional<double>& at(std::size_t item, std::size_t rater) const {
    return cells[item * raters + rater];
  }
};

enum class AlphaMetric { interval, ordinal };

struct AlphaResult {
  double alpha = 0.0;
  bool low_support = false;     // only one pairable item
  std::size_t pairable_items = 0;
};

// Krippendorff's alpha via the coincidence matrix over pairable values:
// alpha = 1 - D_o / D_e. Items with fewer than two ratings are excluded.
// distinct observed values act as the categories; interval distance is
// (v - w)^2, ordinal distance uses cumulative coincidence marginals. Perfect
// agreement (D_o = 0) is exactly 1, including the degenerate D_e = 0 case.
inline AlphaResult krippendorff_alpha(const RatingsMatrix& m,
                                      AlphaMetric metric = AlphaMetric::interval) {
  if (m.raters < 2) throw DataError("agreement metrics need >= 2 raters");
  std::map<double, std::size_t> value_index;
  for (const auto& cell : m.cells) {
    if (cell) value_index.emplace(*cell, 0);
  }
  std::vector<double> values;
  for (auto& [v, idx] : value_index) {
    idx = values.size();
    values.push_back(v);
  }
  const std::size_t v = values.size();

  std::vector<double> coincidence(v * v, 0.0);
  AlphaResult out;
  for (std::size_t item = 0; item < m.items; ++item) {
    std::vector<std::size_t> present;
    for (std::size_t r = 0; r < m.raters; ++r) {
      if (m.at(item, r)) present.push_back(r);
    }
    if (present.size() < 2) continue;
    ++out.pairable_items;
    const double unit = static_cast<double>(present.size()) - 1.0;
    for (std::size_t a : present) {
      for (std::size_t b : present) {
        if (a == b) continue;
        const std::size_t ca = value_index[*m.at(item, a)];
        const std::size_t cb = value_index[*m.at(item, b)];
        coincidence[ca * v + cb] += 1.0 / unit;
      }
    }
  }
  if (out.pairable_items == 0) {
    throw DataError("no pairable ratings for Krippendorff's alpha");
  }
  out.low_support = out.pairable_items == 1;

  std::vector<double> marginals(v, 0.0);
  double n = 0.0;
  for (std::size_t c = 0; c < v; ++c) {
    for (std::size_t k = 0; k < v; ++k) marginals[c] += coincidence[c * v + k];
    n += marginals[c];
  }

  auto delta_sq = [&](std::size_t c, std::size_t k) {
    if (metric == AlphaMetric::interval) {
      const double d = values[c] - values[k];
      return d * d;
    }
    // ordinal: squared difference of cumulative marginal midpoints
    const std::size_t lo = std::min(c, k);
    const std::size_t hi = std::max(c, k);
    double sum = 0.0;
    for (std::size_t g = lo; g <= hi; ++g) sum += marginals[g];
    const double d = sum - (marginals[lo] + marginals[hi]) / 2.0;
    return d * d;
  };

  double d_o = 0.0;
  double d_e = 0.0;
  for (std::size_t c = 0; c < v; ++c) {
    for (std::size_t k = 0; k < v; ++k) {
      const double dd = delta_sq(c, k);
      d_o += coincidence[c * v + k] * dd;
      d_e += marginals[c] * marginals[k] * dd;
    }
  }
  d_o /= n;
  d_e /= n * (n - 1.0);
  if (d_e == 0.0) {
    out.alpha = d_o == 0.0 ? 1.0 : 0.0;
    return out;
  }
  out.alpha = 1.0 - d_o / d_e;
  return out;
}

enum class KappaWeights { quadratic, linear };

// Cohen's weighted kappa over category indices 0..categories-1:
// kappa = 1 - sum(w * O) / sum(w * E), quadratic weights (i-j)^2/(C-1)^2.
// Identical raters give exactly 1.0; degenerate expected disagreement with
// observed disagreement present is an error.
inline double cohen_weighted_kappa(const std::vector<int>& r1,
                                   const std::vector<int>& r2, int categories,
                                   KappaWeights weights = KappaWeights::quadratic) {
  if (r1.size() != r2.size()) throw DataError("kappa over unequal lengths");
  if (r1.empty()) throw DataError("kappa over empty input");
  if (categories < 1) throw DataError("kappa needs >= 1 category");
  const std::size_t c = static_cast<std::size_t>(categories);
  std::vector<double> observed(c * c, 0.0);
  for (std::size_t i = 0; i < r1.size(); ++i) {
    if (r1[i] < 0 || r1[i] >= categories || r2[i] < 0 || r2[i] >= categories) {
      throw DataError("rating outside the declared categories");
    }
    observed[static_cast<std::size_t>(r1[i]) * c +
             static_cast<std::size_t>(r2[i])] += 1.0;
  }
  const double n = static_cast<double>(r1.size());
  std::vector<double> row(c, 0.0), col(c, 0.0);
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      row[i] += observed[i * c + j];
      col[j] += observed[i * c + j];
    }
  }
  auto weight = [&](std::size_t i, std::size_t j) {
    if (c == 1) return 0.0;
    const double d = static_cast<double>(i) - static_cast<double>(j);
    const double span = static_cast<double>(c - 1);
    if (weights == KappaWeights::quadratic) return (d * d) / (span * span);
    return std::abs(d) / span;
  };
  double wo = 0.0, we = 0.0;
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      wo += weight(i, j) * observed[i * c + j] / n;
      we += weight(i, j) * (row[i] / n) * (col[j] / n);
    }
  }
  if (we == 0.0) {
    if (wo == 0.0) return 1.0;
    throw DataError("degenerate marginals for weighted kappa");
  }
  return 1.0 - wo / we;
}

}  // namespace advneg
