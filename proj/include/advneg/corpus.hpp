#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "advneg/error.hpp"
#include "advneg/rng.hpp"
#include "advneg/text.hpp"

namespace advneg {

enum class Split { train, validation, test };

enum class CandidateLabel { positive, random_negative, adversarial_negative };

enum class CandidateApproach {
  human,
  random,
  semi_hard,
  token_subs,
  bm25,
  mask_and_fill,
  key_context,
  key_sem,
  gold,
  context_insertion,
};

enum class CandidateSource {
  gold_response,
  context_utterance,
  retrieved,
  generated,
  corpus_sample,
};

// The seven error categories tagged onto adversarial candidates.
enum class ErrorCategory { ent, time, cont, speaker, follow, strat, lang };

namespace names {

inline const char* of(Split v) {
  switch (v) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "?";
}

inline const char* of(CandidateLabel v) {
  switch (v) {
    case CandidateLabel::positive: return "positive";
    case CandidateLabel::random_negative: return "random_negative";
    case CandidateLabel::adversarial_negative: return "adversarial_negative";
  }
  return "?";
}

inline const char* of(CandidateApproach v) {
  switch (v) {
    case CandidateApproach::human: return "human";
    case CandidateApproach::random: return "random";
    case CandidateApproach::semi_hard: return "semi_hard";
    case CandidateApproach::token_subs: return "token_subs";
    case CandidateApproach::bm25: return "bm25";
    case CandidateApproach::mask_and_fill: return "mask_and_fill";
    case CandidateApproach::key_context: return "key_context";
    case CandidateApproach::key_sem: return "key_sem";
    case CandidateApproach::gold: return "gold";
    case CandidateApproach::context_insertion: return "context_insertion";
  }
  return "?";
}

inline const char* of(CandidateSource v) {
  switch (v) {
    case CandidateSource::gold_response: return "gold_response";
    case CandidateSource::context_utterance: return "context_utterance";
    case CandidateSource::retrieved: return "retrieved";
    case CandidateSource::generated: return "generated";
    case CandidateSource::corpus_sample: return "corpus_sample";
  }
  return "?";
}

inline const char* of(ErrorCategory v) {
  switch (v) {
    case ErrorCategory::ent: return "C-ent";
    case ErrorCategory::time: return "C-time";
    case ErrorCategory::cont: return "C-cont";
    case ErrorCategory::speaker: return "C-speaker";
    case ErrorCategory::follow: return "C-follow";
    case ErrorCategory::strat: return "C-strat";
    case ErrorCategory::lang: return "C-lang";
  }
  return "?";
}

template <typename E>
std::optional<E> parse(std::string_view s);

template <>
inline std::optional<Split> parse<Split>(std::string_view s) {
  for (Split v : {Split::train, Split::validation, Split::test}) {
    if (s == of(v)) return v;
  }
  return std::nullopt;
}

template <>
inline std::optional<CandidateLabel> parse<CandidateLabel>(std::string_view s) {
  for (CandidateLabel v :
       {CandidateLabel::positive, CandidateLabel::random_negative,
        CandidateLabel::adversarial_negative}) {
    if (s == of(v)) return v;
  }
  return std::nullopt;
}

template <>
inline std::optional<CandidateApproach> parse<CandidateApproach>(
    std::string_view s) {
  for (CandidateApproach v :
       {CandidateApproach::human, CandidateApproach::random,
        CandidateApproach::semi_hard, CandidateApproach::token_subs,
        CandidateApproach::bm25, CandidateApproach::mask_and_fill,
        CandidateApproach::key_context, CandidateApproach::key_sem,
        CandidateApproach::gold, CandidateApproach::context_insertion}) {
    if (s == of(v)) return v;
  }
  return std::nullopt;
}

template <>
inline std::optional<CandidateSource> parse<CandidateSource>(
    std::string_view s) {
  for (CandidateSource v :
       {CandidateSource::gold_response, CandidateSource::context_utterance,
        CandidateSource::retrieved, CandidateSource::generated,
        CandidateSource::corpus_sample}) {
    if (s == of(v)) return v;
  }
  return std::nullopt;
}

template <>
inline std::optional<ErrorCategory> parse<ErrorCategory>(std::string_view s) {
  for (ErrorCategory v :
       {ErrorCategory::ent, ErrorCategory::time, ErrorCategory::cont,
        ErrorCategory::speaker, ErrorCategory::follow, ErrorCategory::strat,
        ErrorCategory::lang}) {
    if (s == of(v)) return v;
  }
  return std::nullopt;
}

}  // namespace names

struct Utterance {
  int speaker = 0;  // 0/1 alternating
  std::string text;
};

struct DialogueContext {
  std::string id;
  Split split = Split::train;
  std::vector<std::string> persona;  // optional, empty when absent
  std::vector<Utterance> utterances;
};

struct Candidate {
  std::string text;
  CandidateLabel label = CandidateLabel::positive;
  CandidateApproach approach = CandidateApproach::gold;
  CandidateSource source = CandidateSource::gold_response;
  std::set<ErrorCategory> error_tags;
};

struct CandidateRecord {
  std::string context_id;
  Candidate candidate;
};

struct ContextExamples {
  std::string context_id;
  std::vector<Candidate> positives;
  std::vector<Candidate> negatives;
};

// Persona lines become pseudo-utterances prepended to the dialogue turns. The
// stored context is never mutated, so repeated expansion cannot duplicate the
// persona. Persona speaker index is 0 by convention.
inline std::vector<Utterance> expanded_utterances(const DialogueContext& ctx) {
  std::vector<Utterance> out;
  out.reserve(ctx.persona.size() + ctx.utterances.size());
  for (const auto& line : ctx.persona) out.push_back({0, line});
  for (const auto& u : ctx.utterances) out.push_back(u);
  return out;
}

inline std::vector<std::string> context_texts(const DialogueContext& ctx) {
  std::vector<std::string> out;
  for (const auto& u : expanded_utterances(ctx)) out.push_back(u.text);
  return out;
}

inline std::vector<std::string> context_tokens(const DialogueContext& ctx) {
  std::vector<std::string> out;
  for (const auto& u : expanded_utterances(ctx)) {
    auto tk = tokenize(u.text);
    out.insert(out.end(), tk.tokens.begin(), tk.tokens.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON Lines ingestion. Record-level problems are collected into a rejection
// report; only file-level problems throw.
// ---------------------------------------------------------------------------

enum class CorpusFormat { jsonl, json_array };

struct RejectedRecord {
  std::size_t line = 0;  // 1-based; element index for json_array
  std::string reason;
};

struct ContextsLoad {
  std::vector<DialogueContext> contexts;
  std::vector<RejectedRecord> rejects;
};

struct CandidatesLoad {
  std::vector<CandidateRecord> records;
  std::vector<RejectedRecord> rejects;
};

namespace detail {

inline std::string trimmed(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_ascii_space(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && is_ascii_space(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline DialogueContext context_from_json(const nlohmann::json& j) {
  DialogueContext ctx;
  if (!j.is_object()) throw DataError("record is not an object");
  if (!j.contains("id") || !j.at("id").is_string()) {
    throw DataError("missing string field 'id'");
  }
  ctx.id = j.at("id").get<std::string>();
  if (ctx.id.empty()) throw DataError("empty id");
  if (!j.contains("split") || !j.at("split").is_string()) {
    throw DataError("missing string field 'split'");
  }
  auto split = names::parse<Split>(j.at("split").get<std::string>());
  if (!split) throw DataError("unknown split value");
  ctx.split = *split;
  if (j.contains("persona")) {
    if (!j.at("persona").is_array()) throw DataError("persona must be a list");
    for (const auto& p : j.at("persona")) {
      if (!p.is_string()) throw DataError("persona entries must be strings");
      ctx.persona.push_back(p.get<std::string>());
    }
  }
  if (!j.contains("utterances") || !j.at("utterances").is_array()) {
    throw DataError("missing list field 'utterances'");
  }
  for (const auto& u : j.at("utterances")) {
    if (!u.is_object() || !u.contains("speaker") || !u.contains("text")) {
      throw DataError("utterance must carry 'speaker' and 'text'");
    }
    int speaker = u.at("speaker").get<int>();
    if (speaker != 0 && speaker != 1) throw DataError("speaker must be 0 or 1");
    std::string text = u.at("text").get<std::string>();
    if (trimmed(text).empty()) throw DataError("utterance text is empty");
    ctx.utterances.push_back({speaker, text});
  }
  if (ctx.utterances.empty()) throw DataError("empty utterance list");
  return ctx;
}

inline Candidate candidate_from_json(const nlohmann::json& j) {
  Candidate c;
  if (!j.is_object()) throw DataError("record is not an object");
  for (const char* field : {"text", "label", "approach", "source"}) {
    if (!j.contains(field) || !j.at(field).is_string()) {
      throw DataError(std::string("missing string field '") + field + "'");
    }
  }
  c.text = j.at("text").get<std::string>();
  if (trimmed(c.text).empty()) throw DataError("candidate text is empty");
  auto label = names::parse<CandidateLabel>(j.at("label").get<std::string>());
  if (!label) throw DataError("unknown label value");
  c.label = *label;
  auto approach =
      names::parse<CandidateApproach>(j.at("approach").get<std::string>());
  if (!approach) throw DataError("unknown approach value");
  c.approach = *approach;
  auto source =
      names::parse<CandidateSource>(j.at("source").get<std::string>());
  if (!source) throw DataError("unknown source value");
  c.source = *source;
  if (j.contains("error_tags")) {
    if (!j.at("error_tags").is_array()) {
      throw DataError("error_tags must be a list");
    }
    for (const auto& t : j.at("error_tags")) {
      auto tag = names::parse<ErrorCategory>(t.get<std::string>());
      if (!tag) throw DataError("unknown error tag");
      c.error_tags.insert(*tag);
    }
  }
  if (!c.error_tags.empty() &&
      c.label != CandidateLabel::adversarial_negative) {
    throw DataError("error_tags are only valid on adversarial negatives");
  }
  return c;
}

template <typename Fn>
void for_each_record(const std::string& path, CorpusFormat format, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  if (format == CorpusFormat::jsonl) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (trimmed(line).empty()) continue;
      fn(line_no, line);
    }
  } else {
    std::stringstream buf;
    buf << in.rdbuf();
    nlohmann::json arr;
    try {
      arr = nlohmann::json::parse(buf.str());
    } catch (const nlohmann::json::exception& e) {
      throw DataError("invalid JSON array file " + path + ": " + e.what());
    }
    if (!arr.is_array()) throw DataError("expected a JSON array in " + path);
    for (std::size_t i = 0; i < arr.size(); ++i) fn(i + 1, arr[i].dump());
  }
}

}  // namespace detail

inline ContextsLoad load_contexts(const std::string& path,
                                  CorpusFormat format = CorpusFormat::jsonl) {
  ContextsLoad out;
  std::unordered_set<std::string> seen;
  detail::for_each_record(path, format,
                          [&](std::size_t line_no, const std::string& raw) {
    try {
      nlohmann::json j = nlohmann::json::parse(raw);
      DialogueContext ctx = detail::context_from_json(j);
      if (!seen.insert(ctx.id).second) {
        throw DataError("duplicate id '" + ctx.id + "'");
      }
      out.contexts.push_back(std::move(ctx));
    } catch (const nlohmann::json::exception& e) {
      out.rejects.push_back({line_no, std::string("parse error: ") + e.what()});
    } catch (const DataError& e) {
      out.rejects.push_back({line_no, e.what()});
    }
  });
  return out;
}

inline CandidatesLoad load_candidates(const std::string& path,
                                      CorpusFormat format = CorpusFormat::jsonl) {
  CandidatesLoad out;
  detail::for_each_record(path, format,
                          [&](std::size_t line_no, const std::string& raw) {
    try {
      nlohmann::json j = nlohmann::json::parse(raw);
      Candidate c = detail::candidate_from_json(j);
      if (!j.contains("context_id") || !j.at("context_id").is_string()) {
        throw DataError("missing string field 'context_id'");
      }
      std::string ctx_id = j.at("context_id").get<std::string>();
      if (ctx_id.empty()) throw DataError("empty context_id");
      out.records.push_back({std::move(ctx_id), std::move(c)});
    } catch (const nlohmann::json::exception& e) {
      out.rejects.push_back({line_no, std::string("parse error: ") + e.what()});
    } catch (const DataError& e) {
      out.rejects.push_back({line_no, e.what()});
    }
  });
  return out;
}

inline nlohmann::json context_to_json(const DialogueContext& ctx) {
  nlohmann::json j;
  j["id"] = ctx.id;
  j["split"] = names::of(ctx.split);
  if (!ctx.persona.empty()) j["persona"] = ctx.persona;
  j["utterances"] = nlohmann::json::array();
  for (const auto& u : ctx.utterances) {
    j["utterances"].push_back({{"speaker", u.speaker}, {"text", u.text}});
  }
  return j;
}

inline nlohmann::json candidate_body_json(const Candidate& c) {
  nlohmann::json j;
  j["text"] = c.text;
  j["label"] = names::of(c.label);
  j["approach"] = names::of(c.approach);
  j["source"] = names::of(c.source);
  j["error_tags"] = nlohmann::json::array();
  for (auto tag : c.error_tags) j["error_tags"].push_back(names::of(tag));
  return j;
}

inline nlohmann::json candidate_to_json(const CandidateRecord& rec) {
  nlohmann::json j = candidate_body_json(rec.candidate);
  j["context_id"] = rec.context_id;
  return j;
}

// Canonical serialization: one compact JSON object per line, keys in
// alphabetical order, LF endings. Loading and re-writing a canonically
// formatted file is byte-identical.
inline void write_contexts(std::ostream& out,
                           const std::vector<DialogueContext>& contexts) {
  for (const auto& c : contexts) out << context_to_json(c).dump() << '\n';
}

inline void write_candidates(std::ostream& out,
                             const std::vector<CandidateRecord>& records) {
  for (const auto& r : records) out << candidate_to_json(r).dump() << '\n';
}

struct ExamplesIndex {
  std::vector<ContextExamples> examples;  // in context order
  std::vector<RejectedRecord> orphans;    // candidates with unknown context_id
};

inline ExamplesIndex group_examples(
    const std::vector<DialogueContext>& contexts,
    const std::vector<CandidateRecord>& records) {
  ExamplesIndex out;
  std::unordered_map<std::string, std::size_t> index;
  out.examples.reserve(contexts.size());
  for (const auto& ctx : contexts) {
    index[ctx.id] = out.examples.size();
    out.examples.push_back({ctx.id, {}, {}});
  }
  std::size_t rec_no = 0;
  for (const auto& rec : records) {
    ++rec_no;
    auto it = index.find(rec.context_id);
    if (it == index.end()) {
      out.orphans.push_back(
          {rec_no, "candidate references unknown context '" + rec.context_id + "'"});
      continue;
    }
    auto& ex = out.examples[it->second];
    if (rec.candidate.label == CandidateLabel::positive) {
      ex.positives.push_back(rec.candidate);
    } else {
      ex.negatives.push_back(rec.candidate);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Context sampling.
// ---------------------------------------------------------------------------

struct SampledPair {
  DialogueContext context;  // strict prefix of the dialogue
  Candidate gold;           // the utterance right after the prefix
};

struct SampledPairs {
  std::vector<SampledPair> pairs;
  bool shortfall = false;  // dialogue was too short for the requested count
};

// Splits a full dialogue into (context, gold response) pairs at k distinct
// positions. A dialogue of h utterances has h-1 usable split points.
inline SampledPairs sample_context_pairs(const DialogueContext& dialogue,
                                         std::size_t k, Rng& rng) {
  SampledPairs out;
  if (dialogue.utterances.size() < 2) {
    out.shortfall = k > 0;
    return out;
  }
  const std::size_t points = dialogue.utterances.size() - 1;
  const std::size_t take = std::min(k, points);
  out.shortfall = take < k;
  auto picks = rng.sample_indices(points, take);
  std::sort(picks.begin(), picks.end());
  for (std::size_t p : picks) {
    const std::size_t response_at = p + 1;
    SampledPair pair;
    pair.context.id = dialogue.id + "#p" + std::to_string(response_at);
    pair.context.split = dialogue.split;
    pair.context.persona = dialogue.persona;
    pair.context.utterances.assign(dialogue.utterances.begin(),
                                   dialogue.utterances.begin() + response_at);
    pair.gold.text = dialogue.utterances[response_at].text;
    pair.gold.label = CandidateLabel::positive;
    pair.gold.approach = CandidateApproach::gold;
    pair.gold.source = CandidateSource::gold_response;
    out.pairs.push_back(std::move(pair));
  }
  return out;
}

// Uniform draw of a different context (by id) for C_rand conditioning.
inline const DialogueContext& pair_random_context(
    const DialogueContext& ctx, const std::vector<DialogueContext>& corpus,
    Rng& rng) {
  std::size_t others = 0;
  for (const auto& c : corpus) {
    if (c.id != ctx.id) ++others;
  }
  if (others == 0) {
    throw DataError("no other context available for random conditioning");
  }
  std::size_t pick = static_cast<std::size_t>(rng.below(others));
  for (const auto& c : corpus) {
    if (c.id == ctx.id) continue;
    if (pick == 0) return c;
    --pick;
  }
  throw DataError("unreachable: random context selection");
}

}  // namespace advneg
