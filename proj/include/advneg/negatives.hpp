#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "advneg/corpus.hpp"
#include "advneg/embedding.hpp"
#include "advneg/error.hpp"
#include "advneg/rng.hpp"
#include "advneg/text.hpp"

namespace advneg {

enum class TransformationKind {
  pronoun_swap,
  entity_swap,
  number_swap,
  negation,
  noise,
};

inline const char* transformation_name(TransformationKind k) {
  switch (k) {
    case TransformationKind::pronoun_swap: return "pronoun_swap";
    case TransformationKind::entity_swap: return "entity_swap";
    case TransformationKind::number_swap: return "number_swap";
    case TransformationKind::negation: return "negation";
    case TransformationKind::noise: return "noise";
  }
  return "?";
}

// Word lists backing the rule-based transformations. File layout: one token
// per line; pronoun classes come from every pronouns_*.txt in the directory.
struct Lexicons {
  std::vector<std::vector<std::string>> pronoun_classes;
  std::vector<std::string> auxiliaries;
  std::vector<std::string> number_words;
  std::vector<std::string> entities;  // gazetteer + corpus-harvested

  static std::vector<std::string> read_word_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open lexicon file: " + path);
    std::vector<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
      while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) {
        line.pop_back();
      }
      if (line.empty() || line[0] == '#') continue;
      words.push_back(line);
    }
    return words;
  }

  static Lexicons load(const std::string& dir) {
    namespace fs = std::filesystem;
    Lexicons lex;
    std::vector<std::string> pronoun_files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      const std::string name = entry.path().filename().string();
      if (name.rfind("pronouns_", 0) == 0) {
        pronoun_files.push_back(entry.path().string());
      }
    }
    std::sort(pronoun_files.begin(), pronoun_files.end());
    for (const auto& f : pronoun_files) {
      auto words = read_word_file(f);
      if (!words.empty()) lex.pronoun_classes.push_back(std::move(words));
    }
    lex.auxiliaries = read_word_file((fs::path(dir) / "auxiliaries.txt").string());
    lex.number_words =
        read_word_file((fs::path(dir) / "number_words.txt").string());
    const auto entities = fs::path(dir) / "entities.txt";
    if (fs::exists(entities)) {
      lex.entities = read_word_file(entities.string());
    }
    if (lex.pronoun_classes.empty() || lex.auxiliaries.empty() ||
        lex.number_words.empty()) {
      throw DataError("lexicon directory is missing required word lists: " + dir);
    }
    return lex;
  }
};

// Capitalized tokens that are not sentence-initial; the usual cheap entity
// heuristic. Useful for harvesting an entity pool from corpus responses.
inline std::vector<std::string> detect_entities(const std::string& text) {
  TokenizedText tk = tokenize(text);
  std::vector<std::string> out;
  bool sentence_start = true;
  for (std::size_t i = 0; i < tk.tokens.size(); ++i) {
    const std::string& tok = tk.tokens[i];
    if (is_punct_token(tok)) {
      if (tok == "." || tok == "!" || tok == "?") sentence_start = true;
      continue;
    }
    const char first = text[tk.offsets[i].begin];
    if (!sentence_start && first >= 'A' && first <= 'Z') {
      std::string cap = tok;
      cap[0] = static_cast<char>(cap[0] - 'a' + 'A');
      out.push_back(cap);
    }
    sentence_start = false;
  }
  return out;
}

namespace detail {

inline bool starts_upper(const std::string& text, const TokenSpan& span) {
  const char c = text[span.begin];
  return c >= 'A' && c <= 'Z';
}

inline std::string match_case(const std::string& text, const TokenSpan& span,
                              std::string replacement) {
  if (!replacement.empty() && starts_upper(text, span) &&
      replacement[0] >= 'a' && replacement[0] <= 'z') {
    replacement[0] = static_cast<char>(replacement[0] - 'a' + 'A');
  }
  return replacement;
}

inline std::string replace_span(const std::string& text, const TokenSpan& span,
                                const std::string& replacement) {
  return text.substr(0, span.begin) + replacement + text.substr(span.end());
}

inline std::string delete_span(const std::string& text, std::size_t begin,
                               std::size_t end) {
  // Also drop one neighbouring space so "a  b" doesn't appear.
  if (begin > 0 && text[begin - 1] == ' ') {
    --begin;
  } else if (end < text.size() && text[end] == ' ') {
    ++end;
  }
  return text.substr(0, begin) + text.substr(end);
}

inline std::string insert_after(const std::string& text, const TokenSpan& span,
                                const std::string& words) {
  return text.substr(0, span.end()) + " " + words + text.substr(span.end());
}

inline bool all_digits(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (c < '0' || c > '9') return false;
  }
  return true;
}

// Contracted negated auxiliaries as the tokenizer sees them: the stem before
// "'t" plus the base form it restores to.
inline const std::map<std::string, std::string>& negation_stems() {
  static const std::map<std::string, std::string> stems = {
      {"don", "do"},       {"doesn", "does"},   {"didn", "did"},
      {"isn", "is"},       {"aren", "are"},     {"wasn", "was"},
      {"weren", "were"},   {"hasn", "has"},     {"haven", "have"},
      {"hadn", "had"},     {"can", "can"},      {"couldn", "could"},
      {"won", "will"},     {"wouldn", "would"}, {"shan", "shall"},
      {"shouldn", "should"}, {"mightn", "might"}, {"mustn", "must"},
      {"needn", "need"}};
  return stems;
}

}  // namespace detail

// One rule-based transformation applied to a response. Returns the edited
// text, or nullopt when the rule has no applicable site (a skip, not an
// error). Edits are applied to the raw string through the token offsets, so
// the rest of the response, including its casing, is untouched.
inline std::optional<std::string> token_subs(const std::string& response,
                                             TransformationKind kind, Rng& rng,
                                             const Lexicons& lexicons) {
  TokenizedText tk = tokenize(response);
  if (tk.tokens.empty()) return std::nullopt;

  switch (kind) {
    case TransformationKind::pronoun_swap: {
      std::vector<std::pair<std::size_t, std::size_t>> sites;  // token, class
      for (std::size_t i = 0; i < tk.tokens.size(); ++i) {
        for (std::size_t c = 0; c < lexicons.pronoun_classes.size(); ++c) {
          const auto& cls = lexicons.pronoun_classes[c];
          if (cls.size() < 2) continue;
          if (std::find(cls.begin(), cls.end(), tk.tokens[i]) != cls.end()) {
            sites.emplace_back(i, c);
            break;
          }
        }
      }
      if (sites.empty()) return std::nullopt;
      auto [site, cls_idx] = sites[rng.below(sites.size())];
      const auto& cls = lexicons.pronoun_classes[cls_idx];
      std::vector<std::string> others;
      for (const auto& p : cls) {
        if (p != tk.tokens[site]) others.push_back(p);
      }
      const std::string& pick = others[rng.below(others.size())];
      return detail::replace_span(
          response, tk.offsets[site],
          detail::match_case(response, tk.offsets[site], pick));
    }

    case TransformationKind::entity_swap: {
      std::unordered_set<std::string> gazetteer;
      for (const auto& e : lexicons.entities) {
        std::string lower = e;
        for (char& c : lower) c = detail::ascii_lower(c);
        gazetteer.insert(lower);
      }
      std::vector<std::size_t> sites;
      bool sentence_start = true;
      for (std::size_t i = 0; i < tk.tokens.size(); ++i) {
        const std::string& tok = tk.tokens[i];
        if (is_punct_token(tok)) {
          if (tok == "." || tok == "!" || tok == "?") sentence_start = true;
          continue;
        }
        const bool capitalized =
            !sentence_start && detail::starts_upper(response, tk.offsets[i]);
        if (capitalized || gazetteer.count(tok) > 0) sites.push_back(i);
        sentence_start = false;
      }
      if (sites.empty() || lexicons.entities.empty()) return std::nullopt;
      const std::size_t site = sites[rng.below(sites.size())];
      std::vector<std::string> pool;
      for (const auto& e : lexicons.entities) {
        std::string lower = e;
        for (char& c : lower) c = detail::ascii_lower(c);
        if (lower != tk.tokens[site]) pool.push_back(e);
      }
      if (pool.empty()) return std::nullopt;
      return detail::replace_span(response, tk.offsets[site],
                                  pool[rng.below(pool.size())]);
    }

    case TransformationKind::number_swap: {
      std::vector<std::size_t> digit_sites;
      std::vector<std::size_t> word_sites;
      for (std::size_t i = 0; i < tk.tokens.size(); ++i) {
        if (detail::all_digits(tk.tokens[i])) {
          digit_sites.push_back(i);
        } else if (std::find(lexicons.number_words.begin(),
                             lexicons.number_words.end(),
                             tk.tokens[i]) != lexicons.number_words.end()) {
          word_sites.push_back(i);
        }
      }
      if (digit_sites.empty() && word_sites.empty()) return std::nullopt;
      const bool use_digits =
          !digit_sites.empty() &&
          (word_sites.empty() || rng.coin(0.5));
      if (use_digits) {
        const std::size_t site = digit_sites[rng.below(digit_sites.size())];
        const std::string& original = tk.tokens[site];
        const std::size_t digits = original.size();
        std::string replacement;
        do {
          replacement.clear();
          for (std::size_t d = 0; d < digits; ++d) {
            const char lo = (d == 0 && digits > 1) ? '1' : '0';
            replacement.push_back(
                static_cast<char>(lo + rng.below(static_cast<std::uint64_t>('9' - lo + 1))));
          }
        } while (replacement == original);
        return detail::replace_span(response, tk.offsets[site], replacement);
      }
      const std::size_t site = word_sites[rng.below(word_sites.size())];
      std::vector<std::string> pool;
      for (const auto& w : lexicons.number_words) {
        if (w != tk.tokens[site]) pool.push_back(w);
      }
      if (pool.empty()) return std::nullopt;
      return detail::replace_span(
          response, tk.offsets[site],
          detail::match_case(response, tk.offsets[site],
                             pool[rng.below(pool.size())]));
    }

    case TransformationKind::negation: {
      const auto& stems = detail::negation_stems();
      for (std::size_t i = 0; i < tk.tokens.size(); ++i) {
        const std::string& tok = tk.tokens[i];
        const bool followed_by_nt = i + 2 < tk.tokens.size() &&
                                    tk.tokens[i + 1] == "'" &&
                                    tk.tokens[i + 2] == "t";
        auto stem = stems.find(tok);
        if (stem != stems.end() && followed_by_nt) {
          // "can't" -> "can" / "don't" -> "do": drop the contraction.
          std::string base =
              detail::match_case(response, tk.offsets[i], stem->second);
          std::string text = response.substr(0, tk.offsets[i].begin) + base +
                             response.substr(tk.offsets[i + 2].end());
          return text;
        }
        const bool is_aux =
            std::find(lexicons.auxiliaries.begin(), lexicons.auxiliaries.end(),
                      tok) != lexicons.auxiliaries.end();
        if (!is_aux) continue;
        if (i + 1 < tk.tokens.size() && tk.tokens[i + 1] == "not") {
          return detail::delete_span(response, tk.offsets[i + 1].begin,
                                     tk.offsets[i + 1].end());
        }
        return detail::insert_after(response, tk.offsets[i], "not");
      }
      return std::nullopt;
    }

    case TransformationKind::noise: {
      const std::size_t site = rng.below(tk.tokens.size());
      const bool duplicate = tk.tokens.size() == 1 || rng.coin(0.5);
      if (duplicate) {
        return detail::insert_after(
            response, tk.offsets[site],
            response.substr(tk.offsets[site].begin, tk.offsets[site].length));
      }
      return detail::delete_span(response, tk.offsets[site].begin,
                                 tk.offsets[site].end());
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Semi-hard selection.
// ---------------------------------------------------------------------------

struct EmbeddedCandidate {
  Candidate candidate;
  std::vector<double> vec;
};

struct SemiHardEntry {
  Candidate candidate;
  double similarity = 0.0;
  bool backfill = false;  // taken from below the window
};

struct SemiHardResult {
  std::vector<SemiHardEntry> selected;
  double positive_similarity = 0.0;
  bool backfilled = false;
  bool shortfall = false;
};

// Negatives whose context similarity falls in [s_pos - alpha, s_pos):
// nearly as related as the positive, but never more. When the window yields
// fewer than m, the nearest candidates below the window back-fill, flagged.
// Candidates at or above s_pos never qualify.
inline SemiHardResult semi_hard_select(const std::vector<double>& context_vec,
                                       const std::vector<double>& positive_vec,
                                       const std::vector<EmbeddedCandidate>& pool,
                                       double alpha = 0.07, std::size_t m = 5) {
  if (pool.empty()) throw DataError("semi-hard selection needs a candidate pool");
  if (alpha < 0.0) throw ConfigError("alpha must be >= 0");
  SemiHardResult out;
  out.positive_similarity = cosine(context_vec, positive_vec);
  const double lo = out.positive_similarity - alpha;

  std::vector<std::pair<double, std::size_t>> in_window;
  std::vector<std::pair<double, std::size_t>> below;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const double sim = cosine(context_vec, pool[i].vec);
    if (sim >= lo && sim < out.positive_similarity) {
      in_window.emplace_back(sim, i);
    } else if (sim < lo) {
      below.emplace_back(sim, i);
    }
  }
  auto by_sim_desc = [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  };
  std::sort(in_window.begin(), in_window.end(), by_sim_desc);
  std::sort(below.begin(), below.end(), by_sim_desc);

  for (const auto& [sim, i] : in_window) {
    if (out.selected.size() >= m) break;
    out.selected.push_back({pool[i].candidate, sim, false});
  }
  for (const auto& [sim, i] : below) {
    if (out.selected.size() >= m) break;
    out.selected.push_back({pool[i].candidate, sim, true});
    out.backfilled = true;
  }
  out.shortfall = out.selected.size() < m;
  return out;
}

// ---------------------------------------------------------------------------
// Negative-set assembly and ranking instances.
// ---------------------------------------------------------------------------

struct NegativeSet {
  std::string context_id;
  CandidateApproach approach = CandidateApproach::random;
  std::vector<Candidate> approach_negatives;  // up to per_side
  std::vector<Candidate> random_negatives;    // exactly per_side
  bool augmented = false;
  bool shortfall = false;

  std::vector<Candidate> combined() const {
    std::vector<Candidate> out = approach_negatives;
    out.insert(out.end(), random_negatives.begin(), random_negatives.end());
    return out;
  }
};

// Random-negative pool entry: a positive response owned by some context.
struct PoolResponse {
  std::string context_id;
  std::string text;
};

namespace detail {

inline Candidate make_random_negative(const std::string& text) {
  Candidate c;
  c.text = text;
  c.label = CandidateLabel::random_negative;
  c.approach = CandidateApproach::random;
  c.source = CandidateSource::corpus_sample;
  return c;
}

// Draw `count` distinct-text responses from other contexts, excluding any
// text that matches a gold response of this context.
inline std::vector<Candidate> draw_random_negatives(
    const ContextExamples& examples, const std::vector<PoolResponse>& pool,
    Rng& rng, std::size_t count) {
  std::unordered_set<std::string> gold_norm;
  for (const auto& p : examples.positives) {
    gold_norm.insert(normalize_text(p.text));
  }
  std::vector<Candidate> out;
  std::unordered_set<std::string> used;
  auto order = rng.sample_indices(pool.size(), pool.size());
  for (std::size_t i : order) {
    if (out.size() >= count) break;
    const auto& entry = pool[i];
    if (entry.context_id == examples.context_id) continue;
    std::string norm = normalize_text(entry.text);
    if (gold_norm.count(norm) > 0) continue;
    if (!used.insert(norm).second) continue;
    out.push_back(make_random_negative(entry.text));
  }
  if (out.size() < count) {
    throw DataError("random pool too small for " + std::to_string(count) +
                    " distinct negatives (context " + examples.context_id + ")");
  }
  return out;
}

}  // namespace detail

// Train-set assembly: 5 approach negatives (uniform subsample when more, all
// plus a shortfall flag when fewer) augmented with 5 random negatives drawn
// from other contexts' positives.
inline NegativeSet assemble_train_set(const ContextExamples& examples,
                                      CandidateApproach approach,
                                      const std::vector<Candidate>& approach_candidates,
                                      const std::vector<PoolResponse>& random_pool,
                                      Rng& rng, std::size_t per_side = 5) {
  NegativeSet out;
  out.context_id = examples.context_id;
  out.approach = approach;
  if (approach_candidates.size() > per_side) {
    auto picks = rng.sample_indices(approach_candidates.size(), per_side);
    std::sort(picks.begin(), picks.end());
    for (std::size_t i : picks) {
      out.approach_negatives.push_back(approach_candidates[i]);
    }
  } else {
    out.approach_negatives = approach_candidates;
    out.shortfall = approach_candidates.size() < per_side;
  }
  out.random_negatives =
      detail::draw_random_negatives(examples, random_pool, rng, per_side);
  out.augmented = true;
  return out;
}

enum class RankingProtocol { dd_adversarial, dd_random, pc_adversarial, pc_random };

inline const char* protocol_name(RankingProtocol p) {
  switch (p) {
    case RankingProtocol::dd_adversarial: return "dd_adversarial";
    case RankingProtocol::dd_random: return "dd_random";
    case RankingProtocol::pc_adversarial: return "pc_adversarial";
    case RankingProtocol::pc_random: return "pc_random";
  }
  return "?";
}

inline std::optional<RankingProtocol> parse_protocol(std::string_view s) {
  for (RankingProtocol p :
       {RankingProtocol::dd_adversarial, RankingProtocol::dd_random,
        RankingProtocol::pc_adversarial, RankingProtocol::pc_random}) {
    if (s == protocol_name(p)) return p;
  }
  return std::nullopt;
}

struct RankingInstance {
  std::string context_id;
  std::vector<Candidate> candidates;
  std::size_t positive_index = 0;
  RankingProtocol protocol = RankingProtocol::dd_adversarial;
};

inline nlohmann::json instance_to_json(const RankingInstance& inst) {
  nlohmann::json j;
  j["context_id"] = inst.context_id;
  j["candidates"] = nlohmann::json::array();
  for (const auto& c : inst.candidates) {
    j["candidates"].push_back(candidate_body_json(c));
  }
  j["positive_index"] = inst.positive_index;
  j["protocol"] = protocol_name(inst.protocol);
  return j;
}

inline RankingInstance instance_from_json(const nlohmann::json& j) {
  RankingInstance inst;
  inst.context_id = j.at("context_id").get<std::string>();
  for (const auto& c : j.at("candidates")) {
    inst.candidates.push_back(detail::candidate_from_json(c));
  }
  inst.positive_index = j.at("positive_index").get<std::size_t>();
  auto protocol = parse_protocol(j.at("protocol").get<std::string>());
  if (!protocol) throw DataError("unknown ranking protocol");
  inst.protocol = *protocol;
  std::size_t positives = 0;
  for (const auto& c : inst.candidates) {
    if (c.label == CandidateLabel::positive) ++positives;
  }
  if (positives != 1 || inst.positive_index >= inst.candidates.size() ||
      inst.candidates[inst.positive_index].label != CandidateLabel::positive) {
    throw DataError("ranking instance must have exactly one positive");
  }
  return inst;
}

// PersonaChat adversarial construction: the gold response, one uniformly
// chosen utterance from the dialogue context (tagged C-speaker), and n-2
// distinct random negatives, shuffled.
inline RankingInstance build_pc_adversarial(const DialogueContext& ctx,
                                            const ContextExamples& examples,
                                            const std::vector<PoolResponse>& pool,
                                            Rng& rng, std::size_t n = 10) {
  if (examples.positives.empty()) {
    throw DataError("context " + ctx.id + " has no gold response");
  }
  if (ctx.utterances.empty()) {
    throw DataError("context " + ctx.id + " has no utterances");
  }
  if (n < 3) throw ConfigError("pc adversarial instances need n >= 3");
  RankingInstance inst;
  inst.context_id = ctx.id;
  inst.protocol = RankingProtocol::pc_adversarial;

  Candidate gold = examples.positives.front();
  gold.label = CandidateLabel::positive;

  const auto& utt =
      ctx.utterances[rng.below(ctx.utterances.size())];
  Candidate inserted;
  inserted.text = utt.text;
  inserted.label = CandidateLabel::adversarial_negative;
  inserted.approach = CandidateApproach::context_insertion;
  inserted.source = CandidateSource::context_utterance;
  inserted.error_tags = {ErrorCategory::speaker};

  inst.candidates.push_back(std::move(gold));
  inst.candidates.push_back(std::move(inserted));
  for (auto& c : detail::draw_random_negatives(examples, pool, rng, n - 2)) {
    inst.candidates.push_back(std::move(c));
  }
  rng.shuffle(inst.candidates);
  for (std::size_t i = 0; i < inst.candidates.size(); ++i) {
    if (inst.candidates[i].label == CandidateLabel::positive) {
      inst.positive_index = i;
      break;
    }
  }
  return inst;
}

struct InstanceBuildReport {
  std::size_t built = 0;
  std::vector<std::pair<std::string, std::string>> skipped;  // context, reason
};

struct InstanceBuild {
  std::vector<RankingInstance> instances;
  InstanceBuildReport report;
};

// DailyDialog-style protocols pair one positive with exactly 5 negatives of
// the protocol's type (n = 6); PersonaChat protocols build n = 10 candidate
// sets. Contexts lacking the required material are skipped with a report.
inline InstanceBuild build_ranking_instances(
    const std::vector<ContextExamples>& examples,
    const std::unordered_map<std::string, const DialogueContext*>& contexts,
    RankingProtocol protocol, Rng& base_rng,
    const std::vector<PoolResponse>& pool = {}, std::size_t negatives_per_instance = 5) {
  InstanceBuild out;
  for (const auto& ex : examples) {
    Rng rng = base_rng.fork("inst:" + ex.context_id);
    try {
      if (ex.positives.empty()) throw DataError("no positive response");
      if (protocol == RankingProtocol::dd_adversarial ||
          protocol == RankingProtocol::dd_random) {
        const CandidateLabel want = protocol == RankingProtocol::dd_adversarial
                                        ? CandidateLabel::adversarial_negative
                                        : CandidateLabel::random_negative;
        std::vector<Candidate> negatives;
        for (const auto& c : ex.negatives) {
          if (c.label == want) negatives.push_back(c);
        }
        if (negatives.size() < negatives_per_instance) {
          throw DataError("only " + std::to_string(negatives.size()) + " " +
                          names::of(want) + " candidates");
        }
        if (negatives.size() > negatives_per_instance) {
          auto picks =
              rng.sample_indices(negatives.size(), negatives_per_instance);
          std::sort(picks.begin(), picks.end());
          std::vector<Candidate> chosen;
          for (std::size_t i : picks) chosen.push_back(negatives[i]);
          negatives = std::move(chosen);
        }
        RankingInstance inst;
        inst.context_id = ex.context_id;
        inst.protocol = protocol;
        inst.candidates.push_back(
            ex.positives[rng.below(ex.positives.size())]);
        for (auto& n : negatives) inst.candidates.push_back(std::move(n));
        rng.shuffle(inst.candidates);
        for (std::size_t i = 0; i < inst.candidates.size(); ++i) {
          if (inst.candidates[i].label == CandidateLabel::positive) {
            inst.positive_index = i;
            break;
          }
        }
        out.instances.push_back(std::move(inst));
      } else if (protocol == RankingProtocol::pc_adversarial) {
        auto it = contexts.find(ex.context_id);
        if (it == contexts.end()) throw DataError("context not found");
        out.instances.push_back(
            build_pc_adversarial(*it->second, ex, pool, rng));
      } else {  // pc_random: gold + 9 random negatives
        RankingInstance inst;
        inst.context_id = ex.context_id;
        inst.protocol = protocol;
        inst.candidates.push_back(ex.positives.front());
        for (auto& c : detail::draw_random_negatives(ex, pool, rng, 9)) {
          inst.candidates.push_back(std::move(c));
        }
        rng.shuffle(inst.candidates);
        for (std::size_t i = 0; i < inst.candidates.size(); ++i) {
          if (inst.candidates[i].label == CandidateLabel::positive) {
            inst.positive_index = i;
            break;
          }
        }
        out.instances.push_back(std::move(inst));
      }
      ++out.report.built;
    } catch (const DataError& e) {
      out.report.skipped.emplace_back(ex.context_id, e.what());
    }
  }
  return out;
}

}  // namespace advneg
