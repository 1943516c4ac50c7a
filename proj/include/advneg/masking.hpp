#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "advneg/error.hpp"
#include "advneg/rng.hpp"
#include "advneg/text.hpp"

namespace advneg {

enum class SpanGranularity { word, ngram, sentence };

struct MaskSpan {
  std::size_t start = 0;
  std::size_t length = 0;
  SpanGranularity granularity = SpanGranularity::word;
  std::size_t end() const { return start + length; }
};

// An utterance with blanked spans. Spans are sorted, non-overlapping and
// in-bounds; the literal segments between them are untouched, so substituting
// each blank with its original span reconstructs the source token sequence
// exactly.
struct MaskedUtterance {
  TokenizedText original;
  std::vector<MaskSpan> spans;

  std::size_t blank_count() const { return spans.size(); }
  bool meets_min_blanks() const { return spans.size() >= 2; }

  std::size_t masked_token_count() const {
    std::size_t n = 0;
    for (const auto& s : spans) n += s.length;
    return n;
  }

  // Token sequence with each blanked span collapsed to one blank marker.
  std::vector<std::string> tokens_with_blanks(
      std::string_view blank_token = "[blank]") const {
    std::vector<std::string> out;
    std::size_t i = 0;
    std::size_t span_idx = 0;
    while (i < original.tokens.size()) {
      if (span_idx < spans.size() && spans[span_idx].start == i) {
        out.emplace_back(blank_token);
        i = spans[span_idx].end();
        ++span_idx;
      } else {
        out.push_back(original.tokens[i]);
        ++i;
      }
    }
    return out;
  }

  // The original tokens under each blank, in blank order.
  std::vector<std::vector<std::string>> original_fills() const {
    std::vector<std::vector<std::string>> out;
    for (const auto& s : spans) {
      out.emplace_back(original.tokens.begin() + s.start,
                       original.tokens.begin() + s.end());
    }
    return out;
  }
};

// Literal segments verbatim, one fill spliced in per blank. An empty fill
// deletes the segment.
inline std::vector<std::string> reconstruct(
    const MaskedUtterance& masked,
    const std::vector<std::vector<std::string>>& fills) {
  if (fills.size() != masked.spans.size()) {
    throw DataError("fill count does not match blank count");
  }
  std::vector<std::string> out;
  std::size_t i = 0;
  std::size_t span_idx = 0;
  while (i < masked.original.tokens.size()) {
    if (span_idx < masked.spans.size() && masked.spans[span_idx].start == i) {
      const auto& fill = fills[span_idx];
      out.insert(out.end(), fill.begin(), fill.end());
      i = masked.spans[span_idx].end();
      ++span_idx;
    } else {
      out.push_back(masked.original.tokens[i]);
      ++i;
    }
  }
  return out;
}

struct MaskingConfig {
  double budget = 0.15;        // expected masked-token fraction
  std::size_t max_versions = 3;
  std::size_t min_maskable = 4;
  // Split of the masked mass across granularities.
  double word_share = 0.5;
  double ngram_share = 0.35;
  double sentence_share = 0.15;
  std::size_t ngram_min = 2;
  std::size_t ngram_max = 5;
  std::size_t max_attempts = 10;
};

struct MaskingOutcome {
  std::vector<MaskedUtterance> versions;  // 1..max_versions, all distinct
  std::string skip_reason;                // non-empty when versions is empty
};

namespace detail {

inline std::vector<MaskSpan> propose_spans(const TokenizedText& utt, Rng& rng,
                                           const MaskingConfig& cfg) {
  const std::size_t n = utt.tokens.size();
  std::vector<bool> masked(n, false);
  std::vector<MaskSpan> spans;

  auto try_mark = [&](std::size_t start, std::size_t len,
                      SpanGranularity g) {
    if (len == 0 || start + len > n) return;
    for (std::size_t i = start; i < start + len; ++i) {
      if (masked[i]) return;
    }
    // Never blank the whole utterance; some literal context must remain.
    std::size_t already = 0;
    for (bool b : masked) already += b ? 1 : 0;
    if (already + len >= n) return;
    for (std::size_t i = start; i < start + len; ++i) masked[i] = true;
    spans.push_back({start, len, g});
  };

  // Sentence granularity first (largest spans), then n-grams, then words.
  auto sents = sentence_ranges(utt.tokens);
  if (sents.size() > 1) {
    for (const auto& [b, e] : sents) {
      if (rng.coin(cfg.budget * cfg.sentence_share)) {
        try_mark(b, e - b, SpanGranularity::sentence);
      }
    }
  }

  const double avg_ngram =
      (static_cast<double>(cfg.ngram_min) + static_cast<double>(cfg.ngram_max)) / 2.0;
  const std::size_t attempts = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(
             static_cast<double>(n) * cfg.budget * cfg.ngram_share / avg_ngram)));
  for (std::size_t a = 0; a < attempts; ++a) {
    std::size_t len =
        cfg.ngram_min + static_cast<std::size_t>(
                            rng.below(cfg.ngram_max - cfg.ngram_min + 1));
    if (len > n) continue;
    std::size_t start = static_cast<std::size_t>(rng.below(n - len + 1));
    try_mark(start, len, SpanGranularity::ngram);
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (!masked[i] && rng.coin(cfg.budget * cfg.word_share)) {
      try_mark(i, 1, SpanGranularity::word);
    }
  }

  std::sort(spans.begin(), spans.end(),
            [](const MaskSpan& a, const MaskSpan& b) { return a.start < b.start; });
  return spans;
}

inline std::set<std::pair<std::size_t, std::size_t>> span_signature(
    const std::vector<MaskSpan>& spans) {
  std::set<std::pair<std::size_t, std::size_t>> sig;
  for (const auto& s : spans) sig.emplace(s.start, s.length);
  return sig;
}

}  // namespace detail

// Random hierarchical masking: spans at word/n-gram/sentence granularity,
// about `budget` of the tokens masked in expectation, at least two blanks per
// version. Selection resamples up to max_attempts before forcing two random
// single-word blanks.
inline MaskingOutcome random_mask(const TokenizedText& utt, Rng& rng,
                                  const MaskingConfig& cfg = {}) {
  MaskingOutcome out;
  if (utt.tokens.size() < cfg.min_maskable) {
    out.skip_reason = "utterance shorter than " +
                      std::to_string(cfg.min_maskable) + " tokens";
    return out;
  }
  std::set<std::set<std::pair<std::size_t, std::size_t>>> seen;
  for (std::size_t v = 0; v < cfg.max_versions; ++v) {
    Rng vrng = rng.fork("version" + std::to_string(v));
    std::vector<MaskSpan> spans;
    for (std::size_t attempt = 0; attempt < cfg.max_attempts; ++attempt) {
      spans = detail::propose_spans(utt, vrng, cfg);
      if (spans.size() >= 2 && seen.count(detail::span_signature(spans)) == 0) {
        break;
      }
      spans.clear();
    }
    if (spans.empty()) {
      // Forced fallback: two distinct single-token word blanks.
      auto picks = vrng.sample_indices(utt.tokens.size(), 2);
      std::sort(picks.begin(), picks.end());
      spans = {{picks[0], 1, SpanGranularity::word},
               {picks[1], 1, SpanGranularity::word}};
    }
    auto sig = detail::span_signature(spans);
    if (!seen.insert(sig).second) continue;  // duplicate version, drop
    MaskedUtterance m;
    m.original = utt;
    m.spans = std::move(spans);
    out.versions.push_back(std::move(m));
  }
  return out;
}

struct ImportanceMasked {
  MaskedUtterance masked;
  bool enough_blanks = false;  // false when fewer than two blanks resulted
};

// Masks exactly the tokens whose weight is strictly below the mean, merging
// adjacent masked tokens into one blank. Never pads to reach two blanks; the
// flag reports whether the result is usable for generation.
inline ImportanceMasked importance_mask(const TokenizedText& utt,
                                        const std::vector<double>& weights) {
  if (weights.size() != utt.tokens.size()) {
    throw DataError("importance weights are not aligned with the tokens");
  }
  ImportanceMasked out;
  out.masked.original = utt;
  if (weights.empty()) return out;
  for (double w : weights) {
    if (!std::isfinite(w)) throw DataError("importance weight is not finite");
  }
  const double mean =
      std::accumulate(weights.begin(), weights.end(), 0.0) /
      static_cast<double>(weights.size());
  std::size_t i = 0;
  while (i < weights.size()) {
    if (weights[i] < mean) {
      std::size_t j = i;
      while (j < weights.size() && weights[j] < mean) ++j;
      out.masked.spans.push_back(
          {i, j - i,
           j - i == 1 ? SpanGranularity::word : SpanGranularity::ngram});
      i = j;
    } else {
      ++i;
    }
  }
  out.enough_blanks = out.masked.meets_min_blanks();
  return out;
}

}  // namespace advneg
