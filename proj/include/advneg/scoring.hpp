#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "advneg/corpus.hpp"
#include "advneg/error.hpp"
#include "advneg/metrics.hpp"
#include "advneg/negatives.hpp"
#include "advneg/ngram.hpp"
#include "advneg/text.hpp"

namespace advneg {

// Diagnostic response scorers. bow_cosine is the deliberately naive
// content-similarity scorer that adversarial negatives are designed to fool;
// lm_fluency ranks by language-model score alone.
enum class ScorerKind { bow_cosine, jaccard, lm_fluency };

inline const char* scorer_name(ScorerKind k) {
  switch (k) {
    case ScorerKind::bow_cosine: return "bow_cosine";
    case ScorerKind::jaccard: return "jaccard";
    case ScorerKind::lm_fluency: return "lm_fluency";
  }
  return "?";
}

inline std::optional<ScorerKind> parse_scorer(std::string_view s) {
  for (ScorerKind k : {ScorerKind::bow_cosine, ScorerKind::jaccard,
                       ScorerKind::lm_fluency}) {
    if (s == scorer_name(k)) return k;
  }
  return std::nullopt;
}

inline double score_response(ScorerKind kind, const DialogueContext& ctx,
                             const std::string& response,
                             const StopwordSet& stopwords,
                             const NGramLM* lm = nullptr) {
  const auto response_tokens = tokenize(response).tokens;
  switch (kind) {
    case ScorerKind::bow_cosine: {
      auto ctx_content = content_words(context_tokens(ctx), stopwords);
      auto resp_content = content_words(response_tokens, stopwords);
      return bow_cosine(ctx_content, resp_content).value_or(0.0);
    }
    case ScorerKind::jaccard: {
      auto ctx_content = content_words(context_tokens(ctx), stopwords);
      auto resp_content = content_words(response_tokens, stopwords);
      return jaccard_overlap(ctx_content, resp_content).value_or(0.0);
    }
    case ScorerKind::lm_fluency: {
      if (lm == nullptr) throw ConfigError("lm_fluency scorer needs a model");
      return lm->score(response_tokens).mean_logprob;
    }
  }
  throw ConfigError("unknown scorer");
}

struct ScoreRecord {
  std::string context_id;
  std::size_t candidate_index = 0;
  double score = 0.0;
};

inline void write_scores(std::ostream& out,
                         const std::vector<ScoreRecord>& records) {
  for (const auto& r : records) {
    nlohmann::json j;
    j["context_id"] = r.context_id;
    j["candidate_index"] = r.candidate_index;
    j["score"] = r.score;
    out << j.dump() << '\n';
  }
}

inline std::vector<ScoreRecord> load_scores(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open score file: " + path);
  std::vector<ScoreRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      nlohmann::json j = nlohmann::json::parse(line);
      out.push_back({j.at("context_id").get<std::string>(),
                     j.at("candidate_index").get<std::size_t>(),
                     j.at("score").get<double>()});
    } catch (const nlohmann::json::exception& e) {
      throw DataError("bad score record at line " + std::to_string(line_no) +
                      ": " + e.what());
    }
  }
  return out;
}

inline std::vector<RankingInstance> load_instances(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open instance file: " + path);
  std::vector<RankingInstance> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(instance_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("bad instance at line " + std::to_string(line_no) + ": " +
                      e.what());
    }
  }
  return out;
}

inline void write_instances(std::ostream& out,
                            const std::vector<RankingInstance>& instances) {
  for (const auto& inst : instances) out << instance_to_json(inst).dump() << '\n';
}

// Scores an instance file with one scorer; records are emitted in instance
// order, one per candidate.
inline std::vector<ScoreRecord> score_instances(
    const std::vector<RankingInstance>& instances,
    const std::unordered_map<std::string, const DialogueContext*>& contexts,
    ScorerKind scorer, const StopwordSet& stopwords,
    const NGramLM* lm = nullptr) {
  std::vector<ScoreRecord> out;
  for (const auto& inst : instances) {
    auto it = contexts.find(inst.context_id);
    if (it == contexts.end()) {
      throw DataError("instance references unknown context '" +
                      inst.context_id + "'");
    }
    for (std::size_t i = 0; i < inst.candidates.size(); ++i) {
      out.push_back({inst.context_id, i,
                     score_response(scorer, *it->second,
                                    inst.candidates[i].text, stopwords, lm)});
    }
  }
  return out;
}

struct EvaluationSummary {
  std::size_t instances = 0;
  double accuracy = 0.0;
  double recall_at_1 = 0.0;
  double recall_at_2 = 0.0;
  double mean_reciprocal_rank = 0.0;
};

// Joins an instance list with its score records and computes the
// classification + ranking metrics.
inline EvaluationSummary evaluate_instances(
    const std::vector<RankingInstance>& instances,
    const std::vector<ScoreRecord>& scores, double threshold = 0.5) {
  std::map<std::pair<std::string, std::size_t>, double> by_key;
  for (const auto& s : scores) {
    by_key[{s.context_id, s.candidate_index}] = s.score;
  }
  std::vector<ScoredRanking> rankings;
  std::vector<std::pair<double, bool>> pairs;
  for (const auto& inst : instances) {
    ScoredRanking r;
    r.positive_index = inst.positive_index;
    for (std::size_t i = 0; i < inst.candidates.size(); ++i) {
      auto it = by_key.find({inst.context_id, i});
      if (it == by_key.end()) {
        throw DataError("missing score for context '" + inst.context_id +
                        "' candidate " + std::to_string(i));
      }
      r.scores.push_back(it->second);
      pairs.emplace_back(it->second,
                         inst.candidates[i].label == CandidateLabel::positive);
    }
    rankings.push_back(std::move(r));
  }
  if (rankings.empty()) throw DataError("no instances to evaluate");
  EvaluationSummary out;
  out.instances = rankings.size();
  out.accuracy = accuracy(pairs, threshold);
  out.recall_at_1 = recall_at_k(rankings, 1);
  out.recall_at_2 = recall_at_k(rankings, 2);
  out.mean_reciprocal_rank = mrr(rankings);
  return out;
}

// ---------------------------------------------------------------------------
// Human ratings.
// ---------------------------------------------------------------------------

struct RatingRecord {
  std::string item_id;  // "<context_id>#<candidate_index>"
  std::string rater_id;
  double rating = 0.0;
};

struct RatingsData {
  RatingsMatrix matrix;
  std::vector<std::string> item_ids;   // row order
  std::vector<std::string> rater_ids;  // column order
};

inline std::vector<RatingRecord> load_ratings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open ratings file: " + path);
  std::vector<RatingRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      nlohmann::json j = nlohmann::json::parse(line);
      out.push_back({j.at("item_id").get<std::string>(),
                     j.at("rater_id").get<std::string>(),
                     j.at("rating").get<double>()});
    } catch (const nlohmann::json::exception& e) {
      throw DataError("bad rating at line " + std::to_string(line_no) + ": " +
                      e.what());
    }
  }
  return out;
}

inline RatingsData build_ratings_matrix(const std::vector<RatingRecord>& records) {
  std::set<std::string> items, raters;
  for (const auto& r : records) {
    items.insert(r.item_id);
    raters.insert(r.rater_id);
  }
  RatingsData out;
  out.item_ids.assign(items.begin(), items.end());
  out.rater_ids.assign(raters.begin(), raters.end());
  out.matrix = RatingsMatrix::make(out.item_ids.size(), out.rater_ids.size());
  std::unordered_map<std::string, std::size_t> item_index, rater_index;
  for (std::size_t i = 0; i < out.item_ids.size(); ++i) {
    item_index[out.item_ids[i]] = i;
  }
  for (std::size_t i = 0; i < out.rater_ids.size(); ++i) {
    rater_index[out.rater_ids[i]] = i;
  }
  for (const auto& r : records) {
    out.matrix.at(item_index[r.item_id], rater_index[r.rater_id]) = r.rating;
  }
  return out;
}

struct CorrelationSummary {
  std::size_t items = 0;
  std::optional<double> pearson_r;
  std::optional<double> spearman_r;
};

// Correlation of scores with mean human ratings over the common items.
// Item ids are "<context_id>#<candidate_index>".
inline CorrelationSummary correlate_with_ratings(
    const std::vector<ScoreRecord>& scores, const RatingsData& ratings) {
  std::unordered_map<std::string, double> score_by_item;
  for (const auto& s : scores) {
    score_by_item[s.context_id + "#" + std::to_string(s.candidate_index)] =
        s.score;
  }
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < ratings.item_ids.size(); ++i) {
    auto it = score_by_item.find(ratings.item_ids[i]);
    if (it == score_by_item.end()) continue;
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t r = 0; r < ratings.rater_ids.size(); ++r) {
      if (ratings.matrix.at(i, r)) {
        sum += *ratings.matrix.at(i, r);
        ++n;
      }
    }
    if (n == 0) continue;
    xs.push_back(it->second);
    ys.push_back(sum / static_cast<double>(n));
  }
  if (xs.size() < 3) {
    throw DataError("ratings and scores share too few items (" +
                    std::to_string(xs.size()) + ")");
  }
  CorrelationSummary out;
  out.items = xs.size();
  out.pearson_r = pearson(xs, ys);
  out.spearman_r = spearman(xs, ys);
  return out;
}

}  // namespace advneg
