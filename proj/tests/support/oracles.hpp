#pragma once

// Independent reference implementations used as test oracles. These
// deliberately avoid the library's data structures: BM25 is evaluated from
// raw token lists with no inverted index, RAKE goes through an explicit
// co-occurrence matrix, and ranks are recomputed by sorting.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "advneg/text.hpp"

namespace oracles {

// Okapi BM25 straight from the formula: df, tf, and avgdl recomputed by
// scanning the raw documents on every call.
inline double bm25_score(const std::vector<std::vector<std::string>>& docs,
                         const std::vector<std::string>& query, std::size_t d,
                         double k1, double b) {
  const double n = static_cast<double>(docs.size());
  double total_len = 0.0;
  for (const auto& doc : docs) total_len += static_cast<double>(doc.size());
  const double avgdl = total_len / n;
  const double dl = static_cast<double>(docs[d].size());

  std::set<std::string> distinct(query.begin(), query.end());
  double score = 0.0;
  for (const auto& term : distinct) {
    double df = 0.0;
    for (const auto& doc : docs) {
      if (std::find(doc.begin(), doc.end(), term) != doc.end()) df += 1.0;
    }
    double tf = 0.0;
    for (const auto& t : docs[d]) {
      if (t == term) tf += 1.0;
    }
    if (tf == 0.0) continue;
    const double idf = std::max(0.0, std::log((n - df + 0.5) / (df + 0.5)));
    score += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dl / avgdl));
  }
  return score;
}

// Worst-case-for-the-positive rank, recomputed by sorting the scores with
// the positive placed after every tie.
inline std::size_t rank_of_positive(const std::vector<double>& scores,
                                    std::size_t positive) {
  std::vector<std::pair<double, int>> order;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    order.emplace_back(scores[i], i == positive ? 1 : 0);
  }
  // Descending score; among ties, negatives (0) before the positive (1).
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (order[r].second == 1) return r + 1;
  }
  return order.size();
}

// RAKE through the co-occurrence matrix formulation: degree(w) is the row sum
// of the word co-occurrence counts (self included), freq(w) the diagonal.
inline std::vector<std::pair<std::string, double>> rake_scores(
    const std::string& text, const advneg::StopwordSet& stopwords) {
  auto tk = advneg::tokenize(text);
  std::vector<std::vector<std::string>> phrases;
  std::vector<std::string> current;
  for (std::size_t i = 0; i <= tk.tokens.size(); ++i) {
    const bool delim = i == tk.tokens.size() ||
                       advneg::is_punct_token(tk.tokens[i]) ||
                       stopwords.contains(tk.tokens[i]);
    if (delim) {
      if (!current.empty()) {
        phrases.push_back(current);
        current.clear();
      }
    } else {
      current.push_back(tk.tokens[i]);
    }
  }

  std::map<std::string, std::map<std::string, double>> cooc;
  std::map<std::string, double> freq;
  for (const auto& phrase : phrases) {
    for (const auto& w1 : phrase) {
      freq[w1] += 1.0;
      for (const auto& w2 : phrase) cooc[w1][w2] += 1.0;
    }
  }
  // degree(w) is the row sum of the co-occurrence matrix; that equals the
  // total length of all phrase occurrences containing w.
  auto word_score = [&](const std::string& w) {
    double degree = 0.0;
    for (const auto& [other, count] : cooc[w]) degree += count;
    return degree / freq[w];
  };

  std::vector<std::pair<std::string, double>> out;
  std::set<std::string> seen;
  for (const auto& phrase : phrases) {
    std::string key = advneg::join_tokens(phrase);
    if (!seen.insert(key).second) continue;
    double score = 0.0;
    for (const auto& w : phrase) score += word_score(w);
    out.emplace_back(std::move(key), score);
  }
  return out;
}

// Chi-squared statistic against a uniform distribution over the bins.
inline double chi_square_uniform(const std::vector<std::size_t>& counts) {
  std::size_t total = 0;
  for (std::size_t c : counts) total += c;
  const double expected =
      static_cast<double>(total) / static_cast<double>(counts.size());
  double chi = 0.0;
  for (std::size_t c : counts) {
    const double d = static_cast<double>(c) - expected;
    chi += d * d / expected;
  }
  return chi;
}

}  // namespace oracles
