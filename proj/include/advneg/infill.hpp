#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "advneg/bm25.hpp"
#include "advneg/corpus.hpp"
#include "advneg/embedding.hpp"
#include "advneg/error.hpp"
#include "advneg/generation.hpp"
#include "advneg/masking.hpp"
#include "advneg/ngram.hpp"
#include "advneg/rng.hpp"
#include "advneg/text.hpp"

namespace advneg {

// Shared read-only inputs of the synthesis pipelines. Everything here is
// immutable and safe to share across per-context workers.
struct SynthesisEnv {
  const std::vector<DialogueContext>& contexts;
  const Bm25Index& index;
  const EmbeddingTable& embeddings;
  const StopwordSet& stopwords;
  const NGramLM& scorer;
};

struct TaggedUtterance {
  std::string text;
  CandidateSource source = CandidateSource::gold_response;
};

// The utterances mask-and-fill corrupts for one context: gold responses,
// utterances from the context itself, and retrieved responses.
struct OriginalUtteranceSet {
  std::vector<TaggedUtterance> items;
};

// Union of the three sources with exact-match dedup (normalized text).
// Priority on collision: gold over context utterance over retrieved, so a
// retrieved copy of a gold response shows up once, tagged gold.
inline OriginalUtteranceSet build_original_set(const ContextExamples& examples,
                                               const DialogueContext& ctx,
                                               const Bm25Index& index,
                                               std::size_t k_retrieved,
                                               const StopwordSet& stopwords) {
  OriginalUtteranceSet out;
  std::set<std::string> seen;
  auto push = [&](const std::string& text, CandidateSource source) {
    std::string norm = normalize_text(text);
    if (norm.empty()) return;
    if (!seen.insert(norm).second) return;
    out.items.push_back({text, source});
  };
  std::vector<std::string> golds;
  for (const auto& p : examples.positives) {
    golds.push_back(p.text);
    push(p.text, CandidateSource::gold_response);
  }
  for (const auto& u : expanded_utterances(ctx)) {
    push(u.text, CandidateSource::context_utterance);
  }
  if (k_retrieved > 0) {
    auto retrieved = index.top_k(ctx, k_retrieved, golds, stopwords);
    for (const auto& hit : retrieved.hits) {
      push(index.doc(hit.doc).text, CandidateSource::retrieved);
    }
  }
  return out;
}

struct SemanticsConstraints {
  TokenConstraints constraints;
  bool degenerate = false;  // no blanks: nothing to constrain
};

// False-negative prevention, substitution-semantics half: ban every token
// that was blanked out, and penalize the top-10 embedding neighbors of each
// blanked content word by a factor of 100. Multi-token neighbor entries are
// penalized token by token.
inline SemanticsConstraints semantics_filter_constraints(
    const MaskedUtterance& masked, const EmbeddingTable& embeddings,
    const StopwordSet& stopwords, std::size_t neighbor_k = 10,
    double penalty = 100.0) {
  SemanticsConstraints out;
  if (masked.spans.empty()) {
    out.degenerate = true;
    return out;
  }
  std::vector<std::string> blanked;
  for (const auto& fill : masked.original_fills()) {
    for (const auto& t : fill) blanked.push_back(t);
  }
  for (const auto& t : blanked) out.constraints.ban(t);
  for (const auto& t : content_words(blanked, stopwords)) {
    auto neighbors = top_k_neighbors(embeddings, t, neighbor_k);
    if (!neighbors) continue;
    for (const auto& n : neighbors->neighbors) {
      for (const auto& piece : tokenize(n.word).tokens) {
        if (out.constraints.is_banned(piece)) continue;
        out.constraints.penalize(piece, penalty);
      }
    }
  }
  return out;
}

enum class FilterVerdictKind { pass, original_too_short, too_similar, gold_collision };

struct FilterVerdict {
  FilterVerdictKind kind = FilterVerdictKind::pass;
  std::string detail;
  bool passed() const { return kind == FilterVerdictKind::pass; }
};

inline const char* verdict_name(FilterVerdictKind k) {
  switch (k) {
    case FilterVerdictKind::pass: return "pass";
    case FilterVerdictKind::original_too_short: return "original_too_short";
    case FilterVerdictKind::too_similar: return "too_similar";
    case FilterVerdictKind::gold_collision: return "gold_collision";
  }
  return "?";
}

// False-negative prevention, degree-of-substitution half. Fails the original
// outright when it has fewer than 2 content words; fails the generated text
// when the multiset symmetric difference of content words against the
// original is smaller than 2.
inline FilterVerdict degree_filter(const TokenizedText& original,
                                   const TokenizedText& generated,
                                   const StopwordSet& stopwords) {
  auto orig_content = content_words(original.tokens, stopwords);
  if (orig_content.size() < 2) {
    return {FilterVerdictKind::original_too_short,
            "original has " + std::to_string(orig_content.size()) +
                " content words"};
  }
  auto gen_content = content_words(generated.tokens, stopwords);
  auto ca = token_counts(orig_content);
  auto cb = token_counts(gen_content);
  std::size_t sym_diff = 0;
  for (const auto& [w, c] : ca) {
    auto it = cb.find(w);
    const std::size_t other = it == cb.end() ? 0 : it->second;
    sym_diff += c > other ? c - other : other - c;
  }
  for (const auto& [w, c] : cb) {
    if (ca.find(w) == ca.end()) sym_diff += c;
  }
  if (sym_diff < 2) {
    return {FilterVerdictKind::too_similar,
            "content-word symmetric difference is " + std::to_string(sym_diff)};
  }
  return {};
}

// One generated infill with everything needed to audit it: the masked source,
// the fills, the constraints it was generated under, and per-filter verdicts.
struct InfillCandidate {
  std::string text;
  TaggedUtterance origin;
  MaskedUtterance masked;
  std::vector<std::vector<std::string>> fills;
  TokenConstraints constraints;
  std::string conditioning_context_id;
  double fluency = 0.0;
  std::vector<FilterVerdict> verdicts;

  bool accepted() const {
    for (const auto& v : verdicts) {
      if (!v.passed()) return false;
    }
    return true;
  }
};

struct MaskAndFillConfig {
  std::size_t m_out = 5;
  std::size_t k_retrieved = 5;
  std::size_t variations = 4;  // infill variations per masked version
  MaskingConfig masking;
  SamplingParams params;
  // One C_rand per (context, original utterance) pair by default; false pins
  // a single C_rand for the whole context.
  bool crand_per_utterance = true;
};

struct FilterStats {
  std::map<std::string, std::size_t> counts;
  void bump(const std::string& key) { ++counts[key]; }
};

struct MaskAndFillOutcome {
  std::vector<Candidate> selected;      // up to m_out, fluency-ranked
  std::vector<InfillCandidate> pool;    // every generated candidate, audited
  bool shortfall = false;
  FilterStats stats;
};

namespace detail {

inline std::set<ErrorCategory> error_tags_for(CandidateSource source) {
  switch (source) {
    case CandidateSource::gold_response:
      return {ErrorCategory::cont, ErrorCategory::ent};
    case CandidateSource::context_utterance:
      return {ErrorCategory::speaker, ErrorCategory::follow};
    case CandidateSource::retrieved:
      return {ErrorCategory::follow, ErrorCategory::strat};
    default:
      return {};
  }
}

}  // namespace detail

// The mask-and-fill pipeline for one context: corrupt each original
// utterance by masking spans and infilling them against a random conditioning
// context, drop probable false negatives, rank survivors by LM fluency and
// keep the top m_out as adversarial negatives.
inline MaskAndFillOutcome mask_and_fill(const ContextExamples& examples,
                                        const DialogueContext& ctx,
                                        const SynthesisEnv& env,
                                        const GeneratorBackend& backend,
                                        Rng& rng,
                                        const MaskAndFillConfig& cfg = {}) {
  MaskAndFillOutcome out;

  std::set<std::multiset<std::string>> gold_content;
  for (const auto& p : examples.positives) {
    auto content = content_words(tokenize(p.text).tokens, env.stopwords);
    gold_content.insert(
        std::multiset<std::string>(content.begin(), content.end()));
  }

  OriginalUtteranceSet originals = build_original_set(
      examples, ctx, env.index, cfg.k_retrieved, env.stopwords);
  if (originals.items.empty()) {
    out.shortfall = true;
    out.stats.bump("no_originals");
    return out;
  }

  const DialogueContext* shared_crand = nullptr;
  if (!cfg.crand_per_utterance) {
    Rng crng = rng.fork("crand");
    shared_crand = &pair_random_context(ctx, env.contexts, crng);
  }

  for (std::size_t u = 0; u < originals.items.size(); ++u) {
    const auto& origin = originals.items[u];
    TokenizedText source = tokenize(origin.text);
    if (content_words(source.tokens, env.stopwords).size() < 2) {
      out.stats.bump("original_too_short");
      continue;
    }
    Rng urng = rng.fork("utt" + std::to_string(u));
    Rng mask_rng = urng.fork("mask");
    MaskingOutcome masks = random_mask(source, mask_rng, cfg.masking);
    if (masks.versions.empty()) {
      out.stats.bump("unmaskable");
      continue;
    }
    const DialogueContext* crand = shared_crand;
    if (cfg.crand_per_utterance) {
      Rng crng = urng.fork("crand");
      crand = &pair_random_context(ctx, env.contexts, crng);
    }
    for (std::size_t v = 0; v < masks.versions.size(); ++v) {
      const MaskedUtterance& masked = masks.versions[v];
      SemanticsConstraints sem = semantics_filter_constraints(
          masked, env.embeddings, env.stopwords);
      for (std::size_t i = 0; i < cfg.variations; ++i) {
        GeneratorRequest req;
        req.mode = GenerationMode::infill;
        req.conditioning_context = context_texts(*crand);
        req.masked = masked;
        req.params = cfg.params;
        req.constraints = sem.constraints;
        req.seed = urng.derive_seed("v" + std::to_string(v) + "i" +
                                    std::to_string(i));
        GeneratorResponse resp;
        try {
          resp = backend.generate(req);
        } catch (const BackendError& e) {
          out.stats.bump(std::string("backend_") +
                         BackendError::kind_name(e.kind()));
          continue;
        }
        InfillCandidate cand;
        cand.origin = origin;
        cand.masked = masked;
        cand.fills = resp.fills;
        cand.constraints = sem.constraints;
        cand.conditioning_context_id = crand->id;
        auto tokens = reconstruct(masked, resp.fills);
        cand.text = join_tokens(tokens);
        TokenizedText generated = tokenize(cand.text);
        cand.verdicts.push_back(
            degree_filter(source, generated, env.stopwords));
        auto gen_content = content_words(generated.tokens, env.stopwords);
        if (gold_content.count(std::multiset<std::string>(
                gen_content.begin(), gen_content.end())) > 0) {
          cand.verdicts.push_back({FilterVerdictKind::gold_collision,
                                   "matches a gold response's content words"});
        }
        cand.fluency = env.scorer.score(tokens).mean_logprob;
        std::string stat = "accepted";
        for (const auto& verdict : cand.verdicts) {
          if (!verdict.passed()) {
            stat = verdict_name(verdict.kind);
            break;
          }
        }
        out.stats.bump(stat);
        out.pool.push_back(std::move(cand));
      }
    }
  }

  // Global per-context ranking by fluency; duplicates keep their best copy.
  std::vector<const InfillCandidate*> survivors;
  for (const auto& c : out.pool) {
    if (c.accepted()) survivors.push_back(&c);
  }
  std::sort(survivors.begin(), survivors.end(),
            [](const InfillCandidate* a, const InfillCandidate* b) {
              if (a->fluency != b->fluency) return a->fluency > b->fluency;
              return a->text < b->text;
            });
  std::set<std::string> emitted;
  for (const auto* c : survivors) {
    if (out.selected.size() >= cfg.m_out) break;
    if (!emitted.insert(normalize_text(c->text)).second) continue;
    Candidate cand;
    cand.text = c->text;
    cand.label = CandidateLabel::adversarial_negative;
    cand.approach = CandidateApproach::mask_and_fill;
    cand.source = c->origin.source;
    cand.error_tags = detail::error_tags_for(c->origin.source);
    out.selected.push_back(std::move(cand));
  }
  out.shortfall = out.selected.size() < cfg.m_out;
  return out;
}

}  // namespace advneg
