#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "advneg/bm25.hpp"
#include "advneg/corpus.hpp"
#include "advneg/digest.hpp"
#include "advneg/embedding.hpp"
#include "advneg/error.hpp"
#include "advneg/generation.hpp"
#include "advneg/infill.hpp"
#include "advneg/keywords.hpp"
#include "advneg/metrics.hpp"
#include "advneg/negatives.hpp"
#include "advneg/ngram.hpp"
#include "advneg/remote.hpp"
#include "advneg/rng.hpp"
#include "advneg/scoring.hpp"
#include "advneg/text.hpp"

namespace advneg {

#ifndef ADVNEG_VERSION
#define ADVNEG_VERSION "dev"
#endif

inline const char* tool_version() { return ADVNEG_VERSION; }

// ---------------------------------------------------------------------------
// Configuration.
// ---------------------------------------------------------------------------

enum class DatasetKind { contexts, dialogues };
enum class BackendKind { fallback, remote };

struct PipelineConfig {
  std::uint64_t seed = 42;
  std::string run_dir = "run";
  std::size_t workers = 1;

  DatasetKind dataset_kind = DatasetKind::contexts;
  std::string contexts_path;
  std::string candidates_path;  // optional for dialogues datasets
  std::size_t pairs_per_dialogue = 2;
  std::string stopwords_path;
  std::string embeddings_path;  // required by mask_and_fill/key_sem/semi_hard
  std::string lexicons_dir;     // required by token_subs
  std::string ratings_path;     // optional

  std::vector<CandidateApproach> approaches = {
      CandidateApproach::mask_and_fill, CandidateApproach::bm25,
      CandidateApproach::random};
  std::vector<RankingProtocol> protocols = {RankingProtocol::dd_adversarial,
                                            RankingProtocol::dd_random};

  double bm25_k1 = 1.2;
  double bm25_b = 0.75;
  std::size_t k_retrieved = 5;

  std::size_t lm_order = 3;
  double lm_smoothing = 0.01;

  MaskingConfig masking;
  SamplingParams sampling;
  std::size_t m_out = 5;
  std::size_t variations = 4;
  bool crand_per_utterance = true;

  double semi_hard_alpha = 0.07;
  std::size_t semi_hard_pool_cap = 512;

  std::size_t per_side = 5;  // approach + random negatives per train set

  ScorerKind scorer = ScorerKind::bow_cosine;
  double accuracy_threshold = 0.5;

  BackendKind backend = BackendKind::fallback;
  RemoteConfig remote;

  void validate() const {
    if (contexts_path.empty()) throw ConfigError("data.contexts is required");
    if (stopwords_path.empty()) throw ConfigError("data.stopwords is required");
    if (dataset_kind == DatasetKind::contexts && candidates_path.empty()) {
      throw ConfigError("data.candidates is required for a contexts dataset");
    }
    if (pairs_per_dialogue < 1) {
      throw ConfigError("data.pairs_per_dialogue must be >= 1");
    }
    if (workers < 1) throw ConfigError("workers must be >= 1");
    if (!(bm25_k1 > 0.0)) throw ConfigError("bm25.k1 must be > 0");
    if (bm25_b < 0.0 || bm25_b > 1.0) throw ConfigError("bm25.b must be in [0, 1]");
    if (lm_order < 1) throw ConfigError("lm.order must be >= 1");
    if (!(lm_smoothing > 0.0)) throw ConfigError("lm.smoothing_k must be > 0");
    if (!(masking.budget > 0.0) || masking.budget >= 1.0) {
      throw ConfigError("masking.budget must be in (0, 1)");
    }
    if (masking.max_versions < 1) {
      throw ConfigError("masking.max_versions must be >= 1");
    }
    sampling.validate();
    if (m_out < 1) throw ConfigError("synthesis.m_out must be >= 1");
    if (variations < 1) throw ConfigError("synthesis.variations must be >= 1");
    if (semi_hard_alpha < 0.0) throw ConfigError("semi_hard.alpha must be >= 0");
    if (per_side < 1) throw ConfigError("assembly.per_side must be >= 1");
    if (approaches.empty()) throw ConfigError("approaches must be non-empty");
    for (auto a : approaches) {
      switch (a) {
        case CandidateApproach::mask_and_fill:
        case CandidateApproach::key_sem:
        case CandidateApproach::semi_hard:
          if (embeddings_path.empty()) {
            throw ConfigError(std::string(names::of(a)) +
                              " requires data.embeddings");
          }
          break;
        case CandidateApproach::token_subs:
          if (lexicons_dir.empty()) {
            throw ConfigError("token_subs requires data.lexicons");
          }
          break;
        case CandidateApproach::key_context:
        case CandidateApproach::bm25:
        case CandidateApproach::random:
          break;
        default:
          throw ConfigError(std::string("approach '") + names::of(a) +
                            "' cannot be synthesized");
      }
    }
    if (backend == BackendKind::remote && remote.endpoint.empty()) {
      throw ConfigError("backend.endpoint is required for a remote backend");
    }
  }
};

namespace detail {

inline void require_object(const nlohmann::json& j, const char* where) {
  if (!j.is_object()) {
    throw ConfigError(std::string("config section '") + where +
                      "' must be an object");
  }
}

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value for '") + key +
                      "': " + e.what());
  }
}

}  // namespace detail

inline PipelineConfig config_from_json(const nlohmann::json& j) {
  detail::require_object(j, "<root>");
  PipelineConfig cfg;
  cfg.seed = detail::get_or<std::uint64_t>(j, "seed", cfg.seed);
  cfg.run_dir = detail::get_or<std::string>(j, "run_dir", cfg.run_dir);
  cfg.workers = detail::get_or<std::size_t>(j, "workers", cfg.workers);

  if (j.contains("data")) {
    const auto& d = j.at("data");
    detail::require_object(d, "data");
    const std::string kind = detail::get_or<std::string>(d, "kind", "contexts");
    if (kind == "contexts") {
      cfg.dataset_kind = DatasetKind::contexts;
    } else if (kind == "dialogues") {
      cfg.dataset_kind = DatasetKind::dialogues;
    } else {
      throw ConfigError("data.kind must be 'contexts' or 'dialogues'");
    }
    cfg.contexts_path = detail::get_or<std::string>(d, "contexts", "");
    cfg.candidates_path = detail::get_or<std::string>(d, "candidates", "");
    cfg.pairs_per_dialogue = detail::get_or<std::size_t>(
        d, "pairs_per_dialogue", cfg.pairs_per_dialogue);
    cfg.stopwords_path = detail::get_or<std::string>(d, "stopwords", "");
    cfg.embeddings_path = detail::get_or<std::string>(d, "embeddings", "");
    cfg.lexicons_dir = detail::get_or<std::string>(d, "lexicons", "");
    cfg.ratings_path = detail::get_or<std::string>(d, "ratings", "");
  }

  if (j.contains("approaches")) {
    cfg.approaches.clear();
    for (const auto& a : j.at("approaches")) {
      auto parsed = names::parse<CandidateApproach>(a.get<std::string>());
      if (!parsed) {
        throw ConfigError("unknown approach '" + a.get<std::string>() + "'");
      }
      cfg.approaches.push_back(*parsed);
    }
  }
  if (j.contains("protocols")) {
    cfg.protocols.clear();
    for (const auto& p : j.at("protocols")) {
      auto parsed = parse_protocol(p.get<std::string>());
      if (!parsed) {
        throw ConfigError("unknown protocol '" + p.get<std::string>() + "'");
      }
      cfg.protocols.push_back(*parsed);
    }
  }

  if (j.contains("bm25")) {
    const auto& b = j.at("bm25");
    detail::require_object(b, "bm25");
    cfg.bm25_k1 = detail::get_or<double>(b, "k1", cfg.bm25_k1);
    cfg.bm25_b = detail::get_or<double>(b, "b", cfg.bm25_b);
    cfg.k_retrieved = detail::get_or<std::size_t>(b, "k_retrieved", cfg.k_retrieved);
  }
  if (j.contains("lm")) {
    const auto& l = j.at("lm");
    detail::require_object(l, "lm");
    cfg.lm_order = detail::get_or<std::size_t>(l, "order", cfg.lm_order);
    cfg.lm_smoothing = detail::get_or<double>(l, "smoothing_k", cfg.lm_smoothing);
  }
  if (j.contains("masking")) {
    const auto& m = j.at("masking");
    detail::require_object(m, "masking");
    cfg.masking.budget = detail::get_or<double>(m, "budget", cfg.masking.budget);
    cfg.masking.max_versions =
        detail::get_or<std::size_t>(m, "max_versions", cfg.masking.max_versions);
    cfg.masking.min_maskable =
        detail::get_or<std::size_t>(m, "min_maskable", cfg.masking.min_maskable);
  }
  if (j.contains("sampling")) {
    const auto& s = j.at("sampling");
    detail::require_object(s, "sampling");
    cfg.sampling.temperature =
        detail::get_or<double>(s, "temperature", cfg.sampling.temperature);
    cfg.sampling.top_p = detail::get_or<double>(s, "top_p", cfg.sampling.top_p);
    cfg.sampling.min_len =
        detail::get_or<std::size_t>(s, "min_len", cfg.sampling.min_len);
    cfg.sampling.max_len =
        detail::get_or<std::size_t>(s, "max_len", cfg.sampling.max_len);
  }
  if (j.contains("synthesis")) {
    const auto& s = j.at("synthesis");
    detail::require_object(s, "synthesis");
    cfg.m_out = detail::get_or<std::size_t>(s, "m_out", cfg.m_out);
    cfg.variations = detail::get_or<std::size_t>(s, "variations", cfg.variations);
    cfg.crand_per_utterance =
        detail::get_or<bool>(s, "crand_per_utterance", cfg.crand_per_utterance);
  }
  if (j.contains("semi_hard")) {
    const auto& s = j.at("semi_hard");
    detail::require_object(s, "semi_hard");
    cfg.semi_hard_alpha = detail::get_or<double>(s, "alpha", cfg.semi_hard_alpha);
    cfg.semi_hard_pool_cap =
        detail::get_or<std::size_t>(s, "pool_cap", cfg.semi_hard_pool_cap);
  }
  if (j.contains("assembly")) {
    const auto& a = j.at("assembly");
    detail::require_object(a, "assembly");
    cfg.per_side = detail::get_or<std::size_t>(a, "per_side", cfg.per_side);
  }
  if (j.contains("scorer")) {
    const auto& s = j.at("scorer");
    detail::require_object(s, "scorer");
    const std::string kind =
        detail::get_or<std::string>(s, "kind", scorer_name(cfg.scorer));
    auto parsed = parse_scorer(kind);
    if (!parsed) throw ConfigError("unknown scorer '" + kind + "'");
    cfg.scorer = *parsed;
    cfg.accuracy_threshold =
        detail::get_or<double>(s, "threshold", cfg.accuracy_threshold);
  }
  if (j.contains("backend")) {
    const auto& b = j.at("backend");
    detail::require_object(b, "backend");
    const std::string kind = detail::get_or<std::string>(b, "kind", "fallback");
    if (kind == "fallback") {
      cfg.backend = BackendKind::fallback;
    } else if (kind == "remote") {
      cfg.backend = BackendKind::remote;
    } else {
      throw ConfigError("backend.kind must be 'fallback' or 'remote'");
    }
    cfg.remote.endpoint = detail::get_or<std::string>(b, "endpoint", "");
    cfg.remote.timeout_ms =
        detail::get_or<int>(b, "timeout_ms", cfg.remote.timeout_ms);
    cfg.remote.max_in_flight =
        detail::get_or<int>(b, "max_in_flight", cfg.remote.max_in_flight);
  }
  return cfg;
}

// Environment overrides are limited to paths and the backend endpoint.
inline void apply_env_overrides(PipelineConfig& cfg) {
  auto maybe = [](const char* name) -> std::optional<std::string> {
    const char* v = std::getenv(name);
    if (v == nullptr || *v == '\0') return std::nullopt;
    return std::string(v);
  };
  if (auto v = maybe("ADVNEG_CONTEXTS")) cfg.contexts_path = *v;
  if (auto v = maybe("ADVNEG_CANDIDATES")) cfg.candidates_path = *v;
  if (auto v = maybe("ADVNEG_STOPWORDS")) cfg.stopwords_path = *v;
  if (auto v = maybe("ADVNEG_EMBEDDINGS")) cfg.embeddings_path = *v;
  if (auto v = maybe("ADVNEG_LEXICONS")) cfg.lexicons_dir = *v;
  if (auto v = maybe("ADVNEG_RATINGS")) cfg.ratings_path = *v;
  if (auto v = maybe("ADVNEG_RUN_DIR")) cfg.run_dir = *v;
  if (auto v = maybe("ADVNEG_ENDPOINT")) cfg.remote.endpoint = *v;
}

inline PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  PipelineConfig cfg = config_from_json(j);
  apply_env_overrides(cfg);
  return cfg;
}

inline nlohmann::json config_to_json(const PipelineConfig& cfg) {
  nlohmann::json j;
  j["seed"] = cfg.seed;
  j["run_dir"] = cfg.run_dir;
  j["workers"] = cfg.workers;
  j["data"] = {
      {"kind", cfg.dataset_kind == DatasetKind::contexts ? "contexts" : "dialogues"},
      {"contexts", cfg.contexts_path},
      {"candidates", cfg.candidates_path},
      {"pairs_per_dialogue", cfg.pairs_per_dialogue},
      {"stopwords", cfg.stopwords_path},
      {"embeddings", cfg.embeddings_path},
      {"lexicons", cfg.lexicons_dir},
      {"ratings", cfg.ratings_path}};
  j["approaches"] = nlohmann::json::array();
  for (auto a : cfg.approaches) j["approaches"].push_back(names::of(a));
  j["protocols"] = nlohmann::json::array();
  for (auto p : cfg.protocols) j["protocols"].push_back(protocol_name(p));
  j["bm25"] = {{"k1", cfg.bm25_k1}, {"b", cfg.bm25_b}, {"k_retrieved", cfg.k_retrieved}};
  j["lm"] = {{"order", cfg.lm_order}, {"smoothing_k", cfg.lm_smoothing}};
  j["masking"] = {{"budget", cfg.masking.budget},
                  {"max_versions", cfg.masking.max_versions},
                  {"min_maskable", cfg.masking.min_maskable}};
  j["sampling"] = {{"temperature", cfg.sampling.temperature},
                   {"top_p", cfg.sampling.top_p},
                   {"min_len", cfg.sampling.min_len},
                   {"max_len", cfg.sampling.max_len}};
  j["synthesis"] = {{"m_out", cfg.m_out},
                    {"variations", cfg.variations},
                    {"crand_per_utterance", cfg.crand_per_utterance}};
  j["semi_hard"] = {{"alpha", cfg.semi_hard_alpha},
                    {"pool_cap", cfg.semi_hard_pool_cap}};
  j["assembly"] = {{"per_side", cfg.per_side}};
  j["scorer"] = {{"kind", scorer_name(cfg.scorer)},
                 {"threshold", cfg.accuracy_threshold}};
  j["backend"] = {{"kind", cfg.backend == BackendKind::fallback ? "fallback" : "remote"},
                  {"endpoint", cfg.remote.endpoint},
                  {"timeout_ms", cfg.remote.timeout_ms},
                  {"max_in_flight", cfg.remote.max_in_flight}};
  return j;
}

// ---------------------------------------------------------------------------
// Dataset loading and shared stage state.
// ---------------------------------------------------------------------------

struct Dataset {
  std::vector<DialogueContext> contexts;
  std::vector<ContextExamples> examples;  // aligned with contexts
  std::vector<PoolResponse> pool;         // every positive response
  std::unordered_map<std::string, const DialogueContext*> by_id;
  nlohmann::json ingest_stats;
};

inline Dataset load_dataset(const PipelineConfig& cfg) {
  Dataset ds;
  auto loaded = load_contexts(cfg.contexts_path);
  nlohmann::json rejects = nlohmann::json::array();
  for (const auto& r : loaded.rejects) {
    rejects.push_back({{"line", r.line}, {"reason", r.reason}});
  }

  std::vector<CandidateRecord> records;
  if (cfg.dataset_kind == DatasetKind::contexts) {
    ds.contexts = std::move(loaded.contexts);
    auto cand = load_candidates(cfg.candidates_path);
    for (const auto& r : cand.rejects) {
      rejects.push_back({{"line", r.line}, {"reason", r.reason}});
    }
    records = std::move(cand.records);
  } else {
    // Each input record is a whole dialogue; sample context/response pairs.
    std::size_t shortfalls = 0;
    for (const auto& dialogue : loaded.contexts) {
      Rng rng = derive_rng(cfg.seed, dialogue.id, "pairs");
      auto sampled = sample_context_pairs(dialogue, cfg.pairs_per_dialogue, rng);
      if (sampled.shortfall) ++shortfalls;
      for (auto& pair : sampled.pairs) {
        records.push_back({pair.context.id, pair.gold});
        ds.contexts.push_back(std::move(pair.context));
      }
    }
    ds.ingest_stats["pair_shortfalls"] = shortfalls;
    if (!cfg.candidates_path.empty()) {
      auto cand = load_candidates(cfg.candidates_path);
      for (const auto& r : cand.rejects) {
        rejects.push_back({{"line", r.line}, {"reason", r.reason}});
      }
      for (auto& r : cand.records) records.push_back(std::move(r));
    }
  }

  auto grouped = group_examples(ds.contexts, records);
  for (const auto& o : grouped.orphans) {
    rejects.push_back({{"line", o.line}, {"reason", o.reason}});
  }
  ds.examples = std::move(grouped.examples);
  for (std::size_t i = 0; i < ds.contexts.size(); ++i) {
    ds.by_id[ds.contexts[i].id] = &ds.contexts[i];
    for (const auto& p : ds.examples[i].positives) {
      ds.pool.push_back({ds.contexts[i].id, p.text});
    }
  }
  if (ds.contexts.empty()) throw DataError("dataset contains no contexts");
  ds.ingest_stats["contexts"] = ds.contexts.size();
  ds.ingest_stats["pool_responses"] = ds.pool.size();
  ds.ingest_stats["rejects"] = rejects;
  return ds;
}

inline NGramLM train_pool_lm(const Dataset& ds, const PipelineConfig& cfg) {
  NGramLM lm(cfg.lm_order, cfg.lm_smoothing);
  for (const auto& entry : ds.pool) {
    lm.add_sentence(tokenize(entry.text).tokens);
  }
  if (!lm.trained()) throw DataError("no responses available to train the LM");
  return lm;
}

inline std::unique_ptr<GeneratorBackend> make_backend(
    const PipelineConfig& cfg, std::shared_ptr<const NGramLM> lm) {
  if (cfg.backend == BackendKind::remote) {
    return std::make_unique<RemoteBackend>(cfg.remote);
  }
  return std::make_unique<FallbackBackend>(std::move(lm));
}

namespace detail {

template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto body = [&]() {
    while (true) {
      std::size_t i = next.fetch_add(1);
      if (i >= n) break;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t count = std::min(workers, n);
  pool.reserve(count);
  for (std::size_t w = 0; w < count; ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Synthesis stage.
// ---------------------------------------------------------------------------

struct ContextSynthesis {
  std::vector<CandidateRecord> records;
  nlohmann::json provenance;
};

struct ApproachSynthesis {
  std::vector<CandidateRecord> records;
  std::vector<nlohmann::json> provenance;  // one record per context
  nlohmann::json stats;
};

namespace detail {

inline std::set<ErrorCategory> token_subs_tags(TransformationKind kind) {
  switch (kind) {
    case TransformationKind::pronoun_swap: return {ErrorCategory::ent};
    case TransformationKind::entity_swap: return {ErrorCategory::ent};
    case TransformationKind::number_swap: return {ErrorCategory::time};
    case TransformationKind::negation: return {ErrorCategory::cont};
    case TransformationKind::noise: return {ErrorCategory::lang};
  }
  return {};
}

inline ContextSynthesis synthesize_context(
    CandidateApproach approach, const DialogueContext& ctx,
    const ContextExamples& examples, const SynthesisEnv& env,
    const std::vector<PoolResponse>& pool, const GeneratorBackend& backend,
    const Lexicons* lexicons, const PipelineConfig& cfg) {
  ContextSynthesis out;
  out.provenance["context_id"] = ctx.id;
  Rng rng = derive_rng(cfg.seed, ctx.id, names::of(approach));

  auto emit = [&](Candidate c) { out.records.push_back({ctx.id, std::move(c)}); };

  switch (approach) {
    case CandidateApproach::mask_and_fill: {
      MaskAndFillConfig mf;
      mf.m_out = cfg.m_out;
      mf.k_retrieved = cfg.k_retrieved;
      mf.variations = cfg.variations;
      mf.masking = cfg.masking;
      mf.params = cfg.sampling;
      mf.crand_per_utterance = cfg.crand_per_utterance;
      auto outcome = mask_and_fill(examples, ctx, env, backend, rng, mf);
      for (auto& c : outcome.selected) emit(std::move(c));
      out.provenance["shortfall"] = outcome.shortfall;
      nlohmann::json stats;
      for (const auto& [k, v] : outcome.stats.counts) stats[k] = v;
      out.provenance["filter_stats"] = stats;
      break;
    }
    case CandidateApproach::key_context:
    case CandidateApproach::key_sem: {
      KeywordGenConfig kc;
      kc.m_out = cfg.m_out;
      kc.params = cfg.sampling;
      const auto variant = approach == CandidateApproach::key_context
                               ? KeywordVariant::key_context
                               : KeywordVariant::key_sem;
      auto outcome = keyword_generate(ctx, env, backend, variant, rng, kc);
      for (auto& c : outcome.candidates) emit(std::move(c));
      out.provenance["shortfall"] = outcome.candidates.size() < cfg.m_out;
      if (!outcome.skip_reason.empty()) {
        out.provenance["skip_reason"] = outcome.skip_reason;
      }
      if (outcome.keywords) {
        out.provenance["keywords"] = outcome.keywords->keywords;
        nlohmann::json expanded = nlohmann::json::array();
        for (const auto& e : outcome.keywords->expansions) {
          if (e) expanded.push_back({e->original, e->replacement});
        }
        out.provenance["expanded"] = expanded;
        out.provenance["conditioning_context_id"] =
            outcome.conditioning_context_id;
      }
      break;
    }
    case CandidateApproach::bm25: {
      std::vector<std::string> golds;
      for (const auto& p : examples.positives) golds.push_back(p.text);
      auto result = env.index.top_k(ctx, cfg.m_out, golds, env.stopwords);
      for (const auto& hit : result.hits) {
        Candidate c;
        c.text = env.index.doc(hit.doc).text;
        c.label = CandidateLabel::adversarial_negative;
        c.approach = CandidateApproach::bm25;
        c.source = CandidateSource::retrieved;
        emit(std::move(c));
      }
      out.provenance["shortfall"] = result.hits.size() < cfg.m_out;
      out.provenance["all_zero_scores"] = result.all_zero;
      break;
    }
    case CandidateApproach::token_subs: {
      std::vector<TransformationKind> kinds = {
          TransformationKind::pronoun_swap, TransformationKind::entity_swap,
          TransformationKind::number_swap, TransformationKind::negation,
          TransformationKind::noise};
      std::size_t skipped = 0;
      for (std::size_t p = 0; p < examples.positives.size(); ++p) {
        if (out.records.size() >= cfg.m_out) break;
        Rng prng = rng.fork("pos" + std::to_string(p));
        auto order = kinds;
        prng.shuffle(order);
        bool applied = false;
        for (auto kind : order) {
          auto text = token_subs(examples.positives[p].text, kind, prng,
                                 *lexicons);
          if (!text) continue;
          Candidate c;
          c.text = *text;
          c.label = CandidateLabel::adversarial_negative;
          c.approach = CandidateApproach::token_subs;
          c.source = CandidateSource::gold_response;
          c.error_tags = token_subs_tags(kind);
          emit(std::move(c));
          applied = true;
          break;
        }
        if (!applied) ++skipped;
      }
      out.provenance["shortfall"] = out.records.size() < cfg.m_out;
      out.provenance["skipped_positives"] = skipped;
      break;
    }
    case CandidateApproach::semi_hard: {
      if (examples.positives.empty()) {
        out.provenance["skip_reason"] = "no positive response";
        out.provenance["shortfall"] = true;
        break;
      }
      auto ctx_content = content_words(context_tokens(ctx), env.stopwords);
      auto ctx_vec = sentence_vector(env.embeddings, ctx_content);
      auto pos_tokens = tokenize(examples.positives.front().text).tokens;
      auto pos_vec = sentence_vector(
          env.embeddings, content_words(pos_tokens, env.stopwords));
      std::vector<std::size_t> eligible;
      for (std::size_t i = 0; i < pool.size(); ++i) {
        if (pool[i].context_id != ctx.id) eligible.push_back(i);
      }
      if (eligible.size() > cfg.semi_hard_pool_cap) {
        auto picks =
            rng.sample_indices(eligible.size(), cfg.semi_hard_pool_cap);
        std::sort(picks.begin(), picks.end());
        std::vector<std::size_t> capped;
        for (std::size_t i : picks) capped.push_back(eligible[i]);
        eligible = std::move(capped);
      }
      std::vector<EmbeddedCandidate> candidates;
      for (std::size_t i : eligible) {
        EmbeddedCandidate ec;
        ec.candidate.text = pool[i].text;
        ec.candidate.label = CandidateLabel::adversarial_negative;
        ec.candidate.approach = CandidateApproach::semi_hard;
        ec.candidate.source = CandidateSource::corpus_sample;
        ec.vec = sentence_vector(env.embeddings,
                                 content_words(tokenize(pool[i].text).tokens,
                                               env.stopwords))
                     .vec;
        candidates.push_back(std::move(ec));
      }
      auto result = semi_hard_select(ctx_vec.vec, pos_vec.vec, candidates,
                                     cfg.semi_hard_alpha, cfg.m_out);
      for (auto& entry : result.selected) emit(std::move(entry.candidate));
      out.provenance["positive_similarity"] = result.positive_similarity;
      out.provenance["backfilled"] = result.backfilled;
      out.provenance["shortfall"] = result.shortfall;
      break;
    }
    case CandidateApproach::random: {
      for (auto& c : draw_random_negatives(examples, pool, rng, cfg.m_out)) {
        emit(std::move(c));
      }
      out.provenance["shortfall"] = false;
      break;
    }
    default:
      throw ConfigError(std::string("approach '") + names::of(approach) +
                        "' cannot be synthesized");
  }
  return out;
}

}  // namespace detail

inline ApproachSynthesis synthesize_approach(CandidateApproach approach,
                                             const Dataset& ds,
                                             const SynthesisEnv& env,
                                             const GeneratorBackend& backend,
                                             const Lexicons* lexicons,
                                             const PipelineConfig& cfg) {
  std::vector<ContextSynthesis> slots(ds.contexts.size());
  detail::parallel_for(ds.contexts.size(), cfg.workers, [&](std::size_t i) {
    try {
      slots[i] = detail::synthesize_context(approach, ds.contexts[i],
                                            ds.examples[i], env, ds.pool,
                                            backend, lexicons, cfg);
    } catch (const Error& e) {
      // Per-context isolation: the pipeline continues, the failure is logged.
      slots[i].records.clear();
      slots[i].provenance = {{"context_id", ds.contexts[i].id},
                             {"error", e.what()},
                             {"shortfall", true}};
    }
  });
  ApproachSynthesis out;
  std::size_t shortfalls = 0;
  std::size_t errors = 0;
  for (auto& slot : slots) {
    for (auto& r : slot.records) out.records.push_back(std::move(r));
    if (slot.provenance.value("shortfall", false)) ++shortfalls;
    if (slot.provenance.contains("error")) ++errors;
    out.provenance.push_back(std::move(slot.provenance));
  }
  out.stats["approach"] = names::of(approach);
  out.stats["candidates"] = out.records.size();
  out.stats["shortfall_contexts"] = shortfalls;
  out.stats["error_contexts"] = errors;
  return out;
}

// ---------------------------------------------------------------------------
// Assembly and test-set construction, with the exhaustive protocol checks.
// ---------------------------------------------------------------------------

inline nlohmann::json negative_set_to_json(const NegativeSet& s) {
  nlohmann::json j;
  j["context_id"] = s.context_id;
  j["approach"] = names::of(s.approach);
  j["augmented"] = s.augmented;
  j["shortfall"] = s.shortfall;
  j["negatives"] = nlohmann::json::array();
  for (const auto& c : s.combined()) {
    j["negatives"].push_back(candidate_body_json(c));
  }
  return j;
}

inline void check_train_set(const NegativeSet& s, std::size_t per_side) {
  if (s.random_negatives.size() != per_side) {
    throw DataError("train set for " + s.context_id + " has " +
                    std::to_string(s.random_negatives.size()) +
                    " random negatives, expected " + std::to_string(per_side));
  }
  if (!s.shortfall && s.approach_negatives.size() != per_side) {
    throw DataError("train set for " + s.context_id +
                    " is not flagged but has " +
                    std::to_string(s.approach_negatives.size()) +
                    " approach negatives");
  }
  if (s.shortfall && s.approach_negatives.size() >= per_side) {
    throw DataError("train set for " + s.context_id +
                    " is flagged shortfall with a full approach side");
  }
}

inline void check_instances(const std::vector<RankingInstance>& instances,
                            RankingProtocol protocol) {
  for (const auto& inst : instances) {
    std::size_t positives = 0;
    for (const auto& c : inst.candidates) {
      if (c.label == CandidateLabel::positive) ++positives;
    }
    if (positives != 1 ||
        inst.candidates[inst.positive_index].label != CandidateLabel::positive) {
      throw DataError("instance for " + inst.context_id +
                      " must contain exactly one positive");
    }
    if (protocol == RankingProtocol::dd_adversarial ||
        protocol == RankingProtocol::dd_random) {
      if (inst.candidates.size() != 6) {
        throw DataError("dd instance for " + inst.context_id + " has n=" +
                        std::to_string(inst.candidates.size()) +
                        ", expected 6");
      }
    } else {
      if (inst.candidates.size() != 10) {
        throw DataError("pc instance for " + inst.context_id + " has n=" +
                        std::to_string(inst.candidates.size()) +
                        ", expected 10");
      }
      if (protocol == RankingProtocol::pc_adversarial) {
        std::size_t inserted = 0;
        std::size_t randoms = 0;
        for (const auto& c : inst.candidates) {
          if (c.approach == CandidateApproach::context_insertion) ++inserted;
          if (c.label == CandidateLabel::random_negative) ++randoms;
        }
        if (inserted != 1 || randoms != 8) {
          throw DataError("pc adversarial instance for " + inst.context_id +
                          " must be {1 gold, 1 context utterance, 8 randoms}");
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Run manifest.
// ---------------------------------------------------------------------------

struct OutputRecord {
  std::string path;  // relative to the run dir
  std::string digest;
  std::size_t records = 0;
};

struct StageRecord {
  std::string name;
  double duration_ms = 0.0;
  nlohmann::json stats;
  std::vector<OutputRecord> outputs;
};

struct RunManifest {
  std::string version;
  std::uint64_t seed = 0;
  nlohmann::json config;
  std::vector<StageRecord> stages;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["tool"] = "advneg";
    j["version"] = version;
    j["seed"] = seed;
    j["config"] = config;
    j["stages"] = nlohmann::json::array();
    for (const auto& s : stages) {
      nlohmann::json stage;
      stage["name"] = s.name;
      stage["duration_ms"] = s.duration_ms;
      stage["stats"] = s.stats;
      stage["outputs"] = nlohmann::json::array();
      for (const auto& o : s.outputs) {
        stage["outputs"].push_back({{"path", o.path},
                                    {"digest", o.digest},
                                    {"records", o.records}});
      }
      j["stages"].push_back(stage);
    }
    return j;
  }
};

namespace detail {

class StageTimer {
 public:
  StageTimer(RunManifest& manifest, std::string name)
      : manifest_(manifest), started_(std::chrono::steady_clock::now()) {
    stage_.name = std::move(name);
  }
  ~StageTimer() {
    stage_.duration_ms = std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - started_)
                             .count();
    manifest_.stages.push_back(std::move(stage_));
  }
  StageRecord& stage() { return stage_; }

 private:
  RunManifest& manifest_;
  StageRecord stage_;
  std::chrono::steady_clock::time_point started_;
};

inline void write_lines_file(const std::filesystem::path& run_dir,
                             const std::string& rel_path,
                             const std::vector<std::string>& lines,
                             StageRecord& stage) {
  const auto full = run_dir / rel_path;
  std::filesystem::create_directories(full.parent_path());
  {
    std::ofstream out(full, std::ios::binary);
    if (!out) throw DataError("cannot write " + full.string());
    for (const auto& line : lines) out << line << '\n';
  }
  stage.outputs.push_back({rel_path, file_digest(full.string()), lines.size()});
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Report.
// ---------------------------------------------------------------------------

struct ReportRow {
  std::string test_set;  // instance file stem, e.g. dd_adversarial_bm25
  std::string approach;
  bool adversarial = true;
  EvaluationSummary summary;
};

inline std::string format_report(
    const std::vector<ReportRow>& rows,
    const std::vector<std::pair<std::string, CorrelationSummary>>& correlations,
    const std::optional<AlphaResult>& agreement_alpha,
    const std::optional<double>& agreement_kappa) {
  std::ostringstream out;
  auto fixed4 = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return std::string(buf);
  };
  auto section = [&](bool adversarial) {
    out << (adversarial ? "Adversarial test sets" : "Random test sets") << "\n";
    out << "  " << std::string(70, '-') << "\n  ";
    char head[128];
    std::snprintf(head, sizeof(head), "%-24s %-10s %-9s %-8s %-8s", "approach",
                  "instances", "accuracy", "R@1", "MRR");
    out << head << "\n";
    for (const auto& row : rows) {
      if (row.adversarial != adversarial) continue;
      char line[160];
      std::snprintf(line, sizeof(line), "%-24s %-10zu %-9s %-8s %-8s",
                    row.approach.c_str(), row.summary.instances,
                    fixed4(row.summary.accuracy).c_str(),
                    fixed4(row.summary.recall_at_1).c_str(),
                    fixed4(row.summary.mean_reciprocal_rank).c_str());
      out << "  " << line << "\n";
    }
    out << "\n";
  };
  out << "advneg evaluation report\n";
  out << "========================\n\n";
  section(true);
  section(false);
  if (!correlations.empty()) {
    out << "Correlation with human ratings\n";
    out << "  " << std::string(70, '-') << "\n";
    for (const auto& [name, corr] : correlations) {
      out << "  " << name << ": items=" << corr.items << " pearson="
          << (corr.pearson_r ? fixed4(*corr.pearson_r) : std::string("undef"))
          << " spearman="
          << (corr.spearman_r ? fixed4(*corr.spearman_r) : std::string("undef"))
          << "\n";
    }
    if (agreement_alpha) {
      out << "  krippendorff_alpha(interval)=" << fixed4(agreement_alpha->alpha)
          << " pairable_items=" << agreement_alpha->pairable_items
          << (agreement_alpha->low_support ? " (low support)" : "") << "\n";
    }
    if (agreement_kappa) {
      out << "  cohen_weighted_kappa(quadratic)=" << fixed4(*agreement_kappa)
          << "\n";
    }
    out << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// The composite run.
// ---------------------------------------------------------------------------

inline RunManifest run(const PipelineConfig& cfg) {
  cfg.validate();
  namespace fs = std::filesystem;
  const fs::path run_dir(cfg.run_dir);
  fs::create_directories(run_dir / "candidates");
  fs::create_directories(run_dir / "instances");
  fs::create_directories(run_dir / "scores");

  RunManifest manifest;
  manifest.version = tool_version();
  manifest.seed = cfg.seed;
  manifest.config = config_to_json(cfg);

  // --- ingest -------------------------------------------------------------
  Dataset ds = [&] {
    detail::StageTimer timer(manifest, "ingest");
    Dataset d = load_dataset(cfg);
    timer.stage().stats = d.ingest_stats;
    return d;
  }();

  const StopwordSet stopwords = StopwordSet::load(cfg.stopwords_path);
  EmbeddingTable embeddings;
  if (!cfg.embeddings_path.empty()) {
    embeddings = EmbeddingTable::load(cfg.embeddings_path);
  }
  std::optional<Lexicons> lexicons;
  if (!cfg.lexicons_dir.empty()) {
    lexicons = Lexicons::load(cfg.lexicons_dir);
    // Harvest corpus entities for the entity_swap pool.
    std::set<std::string> entities(lexicons->entities.begin(),
                                   lexicons->entities.end());
    for (const auto& entry : ds.pool) {
      for (auto& e : detect_entities(entry.text)) entities.insert(std::move(e));
    }
    lexicons->entities.assign(entities.begin(), entities.end());
  }

  // --- retrieve ------------------------------------------------------------
  Bm25Index index = [&] {
    detail::StageTimer timer(manifest, "retrieve");
    std::vector<Bm25Doc> docs;
    docs.reserve(ds.pool.size());
    for (const auto& entry : ds.pool) {
      docs.push_back({entry.text, entry.context_id});
    }
    Bm25Index idx = Bm25Index::build(std::move(docs), cfg.bm25_k1, cfg.bm25_b);
    std::ostringstream dump;
    idx.save(dump);
    std::vector<std::string> lines;
    std::string line;
    std::istringstream read(dump.str());
    while (std::getline(read, line)) lines.push_back(line);
    detail::write_lines_file(run_dir, "bm25_index.jsonl", lines, timer.stage());
    timer.stage().stats = {{"documents", idx.num_docs()},
                           {"avgdl", idx.avgdl()}};
    return idx;
  }();

  // --- language model ------------------------------------------------------
  auto lm = std::make_shared<NGramLM>([&] {
    detail::StageTimer timer(manifest, "language_model");
    NGramLM model = train_pool_lm(ds, cfg);
    timer.stage().stats = {{"order", model.order()},
                           {"vocabulary", model.vocab_size()}};
    return model;
  }());

  std::unique_ptr<GeneratorBackend> backend = make_backend(cfg, lm);
  SynthesisEnv env{ds.contexts, index, embeddings, stopwords, *lm};

  // --- synthesize -----------------------------------------------------------
  std::map<CandidateApproach, std::vector<CandidateRecord>> synthesized;
  for (auto approach : cfg.approaches) {
    detail::StageTimer timer(manifest,
                             std::string("synthesize:") + names::of(approach));
    auto result = synthesize_approach(
        approach, ds, env, *backend,
        lexicons ? &*lexicons : nullptr, cfg);
    std::vector<std::string> lines;
    for (const auto& r : result.records) {
      lines.push_back(candidate_to_json(r).dump());
    }
    detail::write_lines_file(
        run_dir, std::string("candidates/") + names::of(approach) + ".jsonl",
        lines, timer.stage());
    std::vector<std::string> prov_lines;
    for (const auto& p : result.provenance) prov_lines.push_back(p.dump());
    detail::write_lines_file(
        run_dir,
        std::string("candidates/") + names::of(approach) + ".provenance.jsonl",
        prov_lines, timer.stage());
    timer.stage().stats = result.stats;
    synthesized[approach] = std::move(result.records);
  }

  // --- assemble -------------------------------------------------------------
  {
    detail::StageTimer timer(manifest, "assemble");
    std::size_t checked = 0;
    for (auto approach : cfg.approaches) {
      std::unordered_map<std::string, std::vector<Candidate>> by_ctx;
      for (const auto& r : synthesized[approach]) {
        by_ctx[r.context_id].push_back(r.candidate);
      }
      std::vector<std::string> lines;
      for (std::size_t i = 0; i < ds.contexts.size(); ++i) {
        Rng rng = derive_rng(cfg.seed, ds.contexts[i].id,
                             std::string("assemble:") + names::of(approach));
        auto it = by_ctx.find(ds.contexts[i].id);
        const std::vector<Candidate> empty;
        NegativeSet set = assemble_train_set(
            ds.examples[i], approach, it == by_ctx.end() ? empty : it->second,
            ds.pool, rng, cfg.per_side);
        check_train_set(set, cfg.per_side);
        ++checked;
        lines.push_back(negative_set_to_json(set).dump());
      }
      detail::write_lines_file(
          run_dir, std::string("candidates/train_") + names::of(approach) + ".jsonl",
          lines, timer.stage());
    }
    timer.stage().stats = {{"train_sets_checked", checked}};
  }

  // --- test sets ------------------------------------------------------------
  std::vector<std::pair<std::string, std::vector<RankingInstance>>> testsets;
  {
    detail::StageTimer timer(manifest, "testset");
    nlohmann::json skip_stats = nlohmann::json::object();
    Rng testset_rng = derive_rng(cfg.seed, "corpus", "testset");
    auto add_testset = [&](const std::string& stem,
                           std::vector<ContextExamples> examples,
                           RankingProtocol protocol) {
      auto built = build_ranking_instances(examples, ds.by_id, protocol,
                                           testset_rng, ds.pool, cfg.per_side);
      check_instances(built.instances, protocol);
      std::vector<std::string> lines;
      for (const auto& inst : built.instances) {
        lines.push_back(instance_to_json(inst).dump());
      }
      detail::write_lines_file(run_dir, "instances/" + stem + ".jsonl", lines,
                               timer.stage());
      skip_stats[stem] = built.report.skipped.size();
      testsets.emplace_back(stem, std::move(built.instances));
    };

    for (auto protocol : cfg.protocols) {
      if (protocol == RankingProtocol::dd_adversarial) {
        for (auto approach : cfg.approaches) {
          if (approach == CandidateApproach::random) continue;
          std::unordered_map<std::string, std::vector<Candidate>> by_ctx;
          for (const auto& r : synthesized[approach]) {
            by_ctx[r.context_id].push_back(r.candidate);
          }
          std::vector<ContextExamples> views;
          for (std::size_t i = 0; i < ds.contexts.size(); ++i) {
            ContextExamples view;
            view.context_id = ds.contexts[i].id;
            view.positives = ds.examples[i].positives;
            auto it = by_ctx.find(ds.contexts[i].id);
            if (it != by_ctx.end()) view.negatives = it->second;
            views.push_back(std::move(view));
          }
          add_testset(std::string("dd_adversarial_") + names::of(approach),
                      std::move(views), protocol);
        }
      } else if (protocol == RankingProtocol::dd_random) {
        auto it = synthesized.find(CandidateApproach::random);
        if (it == synthesized.end()) {
          skip_stats["dd_random"] = "random approach not synthesized";
          continue;
        }
        std::unordered_map<std::string, std::vector<Candidate>> by_ctx;
        for (const auto& r : it->second) {
          by_ctx[r.context_id].push_back(r.candidate);
        }
        std::vector<ContextExamples> views;
        for (std::size_t i = 0; i < ds.contexts.size(); ++i) {
          ContextExamples view;
          view.context_id = ds.contexts[i].id;
          view.positives = ds.examples[i].positives;
          auto cit = by_ctx.find(ds.contexts[i].id);
          if (cit != by_ctx.end()) view.negatives = cit->second;
          views.push_back(std::move(view));
        }
        add_testset("dd_random", std::move(views), protocol);
      } else {
        add_testset(protocol_name(protocol), ds.examples, protocol);
      }
    }
    timer.stage().stats = {{"skipped", skip_stats}};
  }

  // --- score ----------------------------------------------------------------
  std::vector<std::pair<std::string, std::vector<ScoreRecord>>> score_sets;
  {
    detail::StageTimer timer(manifest, "score");
    for (const auto& [stem, instances] : testsets) {
      auto records = score_instances(instances, ds.by_id, cfg.scorer,
                                     stopwords, lm.get());
      std::vector<std::string> lines;
      std::ostringstream tmp;
      write_scores(tmp, records);
      std::string line;
      std::istringstream read(tmp.str());
      while (std::getline(read, line)) lines.push_back(line);
      const std::string rel = std::string("scores/") + scorer_name(cfg.scorer) +
                              "__" + stem + ".jsonl";
      detail::write_lines_file(run_dir, rel, lines, timer.stage());
      score_sets.emplace_back(stem, std::move(records));
    }
    timer.stage().stats = {{"scorer", scorer_name(cfg.scorer)}};
  }

  // --- evaluate + report ------------------------------------------------------
  {
    detail::StageTimer timer(manifest, "report");
    std::vector<ReportRow> rows;
    for (std::size_t i = 0; i < testsets.size(); ++i) {
      const auto& [stem, instances] = testsets[i];
      if (instances.empty()) continue;
      ReportRow row;
      row.test_set = stem;
      row.adversarial = stem.find("random") == std::string::npos;
      row.approach = stem;
      const std::string adv_prefix = "dd_adversarial_";
      if (stem.rfind(adv_prefix, 0) == 0) {
        row.approach = stem.substr(adv_prefix.size());
      }
      row.summary = evaluate_instances(instances, score_sets[i].second,
                                       cfg.accuracy_threshold);
      rows.push_back(std::move(row));
    }
    std::vector<std::pair<std::string, CorrelationSummary>> correlations;
    std::optional<AlphaResult> alpha;
    std::optional<double> kappa;
    if (!cfg.ratings_path.empty()) {
      auto ratings = build_ratings_matrix(load_ratings(cfg.ratings_path));
      for (std::size_t i = 0; i < testsets.size(); ++i) {
        correlations.emplace_back(
            testsets[i].first,
            correlate_with_ratings(score_sets[i].second, ratings));
      }
      alpha = krippendorff_alpha(ratings.matrix);
      // Weighted kappa needs categorical ratings from exactly two raters on
      // shared items; computed when every rating is integral.
      if (ratings.rater_ids.size() == 2) {
        std::vector<int> r1, r2;
        bool integral = true;
        int max_cat = 0;
        for (std::size_t item = 0; item < ratings.item_ids.size(); ++item) {
          const auto& a = ratings.matrix.at(item, 0);
          const auto& b = ratings.matrix.at(item, 1);
          if (!a || !b) continue;
          if (*a != std::floor(*a) || *b != std::floor(*b)) {
            integral = false;
            break;
          }
          r1.push_back(static_cast<int>(*a));
          r2.push_back(static_cast<int>(*b));
          max_cat = std::max({max_cat, static_cast<int>(*a), static_cast<int>(*b)});
        }
        if (integral && !r1.empty()) {
          kappa = cohen_weighted_kappa(r1, r2, max_cat + 1);
        }
      }
    }
    const std::string report = format_report(rows, correlations, alpha, kappa);
    const auto path = run_dir / "report.txt";
    {
      std::ofstream out(path, std::ios::binary);
      if (!out) throw DataError("cannot write " + path.string());
      out << report;
    }
    timer.stage().outputs.push_back(
        {"report.txt", file_digest(path.string()), rows.size()});
  }

  // --- manifest (written last) -----------------------------------------------
  {
    const auto path = run_dir / "manifest.json";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << manifest.to_json().dump(2) << '\n';
  }
  return manifest;
}

}  // namespace advneg
