#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "advneg/corpus.hpp"
#include "advneg/embedding.hpp"
#include "advneg/error.hpp"
#include "advneg/generation.hpp"
#include "advneg/infill.hpp"
#include "advneg/rng.hpp"
#include "advneg/text.hpp"

namespace advneg {

struct RakePhrase {
  std::vector<std::string> tokens;
  double score = 0.0;
  std::size_t first_pos = 0;   // token position of first occurrence
  std::string anchor;          // member word with the highest word score

  std::string text() const { return join_tokens(tokens); }
};

// RAKE keyword extraction. Candidate phrases are maximal token runs between
// stopwords/punctuation; word score is degree(w)/freq(w) where degree counts
// the total length of every candidate phrase occurrence containing w and freq
// counts w's occurrences; a phrase scores the sum of its member word scores.
// Output is descending by score, ties by first occurrence.
inline std::vector<RakePhrase> rake_extract(std::string_view text,
                                            const StopwordSet& stopwords) {
  TokenizedText tk = tokenize(text);
  std::vector<std::pair<std::vector<std::string>, std::size_t>> runs;
  std::vector<std::string> current;
  std::size_t current_start = 0;
  for (std::size_t i = 0; i <= tk.tokens.size(); ++i) {
    const bool delim = i == tk.tokens.size() || is_punct_token(tk.tokens[i]) ||
                       stopwords.contains(tk.tokens[i]);
    if (delim) {
      if (!current.empty()) {
        runs.emplace_back(std::move(current), current_start);
        current.clear();
      }
    } else {
      if (current.empty()) current_start = i;
      current.push_back(tk.tokens[i]);
    }
  }

  std::map<std::string, double> degree;
  std::map<std::string, double> freq;
  for (const auto& [run, pos] : runs) {
    for (const auto& w : run) {
      degree[w] += static_cast<double>(run.size());
      freq[w] += 1.0;
    }
  }

  std::vector<RakePhrase> phrases;
  std::set<std::string> seen;
  for (const auto& [run, pos] : runs) {
    std::string key = join_tokens(run);
    if (!seen.insert(key).second) continue;
    RakePhrase p;
    p.tokens = run;
    p.first_pos = pos;
    double best_word = -1.0;
    for (const auto& w : run) {
      const double ws = degree[w] / freq[w];
      p.score += ws;
      if (ws > best_word) {
        best_word = ws;
        p.anchor = w;
      }
    }
    phrases.push_back(std::move(p));
  }
  std::sort(phrases.begin(), phrases.end(),
            [](const RakePhrase& a, const RakePhrase& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.first_pos < b.first_pos;
            });
  return phrases;
}

// Phrases from every utterance of the context (persona lines included),
// deduplicated across utterances keeping the first occurrence.
inline std::vector<RakePhrase> rake_extract_context(
    const DialogueContext& ctx, const StopwordSet& stopwords) {
  std::vector<RakePhrase> merged;
  std::set<std::string> seen;
  std::size_t offset = 0;
  for (const auto& u : expanded_utterances(ctx)) {
    auto phrases = rake_extract(u.text, stopwords);
    std::size_t utt_len = tokenize(u.text).size();
    for (auto& p : phrases) {
      if (!seen.insert(p.text()).second) continue;
      p.first_pos += offset;
      merged.push_back(std::move(p));
    }
    offset += utt_len;
  }
  std::sort(merged.begin(), merged.end(),
            [](const RakePhrase& a, const RakePhrase& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.first_pos < b.first_pos;
            });
  return merged;
}

struct KeywordExpansion {
  std::string original;
  std::string replacement;
};

struct KeywordSet {
  std::vector<std::string> keywords;  // RAKE phrase strings
  std::vector<std::string> anchors;   // expansion anchor per keyword
  std::vector<std::optional<KeywordExpansion>> expansions;
  std::size_t n = 0;  // count actually used (1..3)
};

// n ~ Uniform{1,2,3} capped by the number of extracted phrases; the phrases
// themselves are drawn uniformly without replacement. Disengaged when the
// context yields no keywords.
inline std::optional<KeywordSet> sample_keywords(const DialogueContext& ctx,
                                                 const StopwordSet& stopwords,
                                                 Rng& rng) {
  auto phrases = rake_extract_context(ctx, stopwords);
  if (phrases.empty()) return std::nullopt;
  KeywordSet out;
  const std::size_t n = 1 + static_cast<std::size_t>(rng.below(3));
  const std::size_t take = std::min(n, phrases.size());
  auto picks = rng.sample_indices(phrases.size(), take);
  for (std::size_t i : picks) {
    out.keywords.push_back(phrases[i].text());
    out.anchors.push_back(phrases[i].anchor);
    out.expansions.emplace_back();
  }
  out.n = take;
  return out;
}

// Key-sem expansion: each keyword is independently replaced, with probability
// 0.5, by a uniform draw from the top-10 embedding neighbors of its anchor
// word. Out-of-vocabulary anchors are never replaced.
inline KeywordSet semantic_expand(const KeywordSet& ks,
                                  const EmbeddingTable& embeddings, Rng& rng,
                                  std::size_t neighbor_k = 10) {
  KeywordSet out = ks;
  for (std::size_t i = 0; i < out.keywords.size(); ++i) {
    const bool replace = rng.coin(0.5);
    if (!replace) continue;
    auto neighbors = top_k_neighbors(embeddings, out.anchors[i], neighbor_k);
    if (!neighbors || neighbors->neighbors.empty()) continue;
    const std::size_t pick =
        static_cast<std::size_t>(rng.below(neighbors->neighbors.size()));
    const std::string& replacement = neighbors->neighbors[pick].word;
    out.expansions[i] = KeywordExpansion{out.keywords[i], replacement};
    out.keywords[i] = replacement;
    out.anchors[i] = replacement;
  }
  return out;
}

enum class KeywordVariant { key_context, key_sem };

struct KeywordGenOutcome {
  std::vector<Candidate> candidates;
  std::optional<KeywordSet> keywords;
  std::string conditioning_context_id;
  std::string skip_reason;  // non-empty when the context was skipped
  std::map<std::string, std::size_t> backend_errors;
};

struct KeywordGenConfig {
  std::size_t m_out = 5;
  SamplingParams params;
};

// Keyword-guided synthesis for one context: keywords from C (expanded for
// Key-sem), generation conditioned on a random other context, m_out calls
// with distinct seeds.
inline KeywordGenOutcome keyword_generate(const DialogueContext& ctx,
                                          const SynthesisEnv& env,
                                          const GeneratorBackend& backend,
                                          KeywordVariant variant, Rng& rng,
                                          const KeywordGenConfig& cfg = {}) {
  KeywordGenOutcome out;
  Rng krng = rng.fork("keywords");
  auto ks = sample_keywords(ctx, env.stopwords, krng);
  if (!ks) {
    out.skip_reason = "no extractable keywords";
    return out;
  }
  if (variant == KeywordVariant::key_sem) {
    Rng erng = rng.fork("expand");
    ks = semantic_expand(*ks, env.embeddings, erng);
  }
  out.keywords = ks;

  Rng crng = rng.fork("crand");
  const DialogueContext& crand = pair_random_context(ctx, env.contexts, crng);
  out.conditioning_context_id = crand.id;

  for (std::size_t i = 0; i < cfg.m_out; ++i) {
    GeneratorRequest req;
    req.mode = GenerationMode::keyword;
    req.conditioning_context = context_texts(crand);
    req.keywords = ks->keywords;
    req.params = cfg.params;
    req.seed = rng.derive_seed("gen" + std::to_string(i));
    GeneratorResponse resp;
    try {
      resp = backend.generate(req);
    } catch (const BackendError& e) {
      ++out.backend_errors[BackendError::kind_name(e.kind())];
      continue;
    }
    Candidate cand;
    cand.text = resp.text;
    cand.label = CandidateLabel::adversarial_negative;
    cand.approach = variant == KeywordVariant::key_context
                        ? CandidateApproach::key_context
                        : CandidateApproach::key_sem;
    cand.source = CandidateSource::generated;
    out.candidates.push_back(std::move(cand));
  }
  return out;
}

}  // namespace advneg
