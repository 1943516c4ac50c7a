#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "advneg/error.hpp"
#include "advneg/masking.hpp"
#include "advneg/ngram.hpp"
#include "advneg/rng.hpp"
#include "advneg/sampling.hpp"
#include "advneg/text.hpp"

namespace advneg {

// Special tokens of the generator serialization. These strings are part of
// the wire contract and must match byte for byte.
namespace tok {
inline constexpr std::string_view context = "[context]";
inline constexpr std::string_view eot = "[eot]";
inline constexpr std::string_view response = "[response]";
inline constexpr std::string_view blank = "[blank]";
inline constexpr std::string_view infill = "[infill]";
inline constexpr std::string_view answer = "[answer]";
inline constexpr std::string_view keywords = "[keywords]";
inline constexpr std::string_view sep = "[sep]";
}  // namespace tok

enum class GenerationMode { infill, keyword };

inline const char* mode_name(GenerationMode m) {
  return m == GenerationMode::infill ? "infill" : "keyword";
}

struct GeneratorRequest {
  GenerationMode mode = GenerationMode::infill;
  // C_rand at synthesis time: the conditioning utterance texts, oldest first.
  std::vector<std::string> conditioning_context;
  MaskedUtterance masked;             // infill payload
  std::vector<std::string> keywords;  // keyword payload
  SamplingParams params;
  TokenConstraints constraints;
  std::uint64_t seed = 0;

  void validate() const {
    params.validate();
    if (conditioning_context.empty()) {
      throw DataError("generator request needs a conditioning context");
    }
    if (mode == GenerationMode::infill) {
      if (masked.spans.empty()) {
        throw DataError("infill request carries no blanks");
      }
    } else {
      if (keywords.empty()) {
        throw DataError("keyword request carries no keywords");
      }
    }
  }
};

struct GeneratorResponse {
  std::vector<std::vector<std::string>> fills;  // infill mode, one per blank
  std::string text;                             // keyword mode
  std::string backend_id;
  double latency_ms = 0.0;
};

// Token serialization of a request.
//   infill:  [context] C1 [eot] ... [eot] Ch [response] r-with-blanks [infill]
//   keyword: [context] C1 [eot] ... [eot] Ch [keywords] K1 [sep] ... [sep] Kn
//            [response]
// Utterances and keywords are rendered through the tokenizer, [eot]/[sep]
// separate consecutive items (h-1 and n-1 occurrences).
inline std::string serialize_request(const GeneratorRequest& req) {
  req.validate();
  std::vector<std::string> parts;
  parts.emplace_back(tok::context);
  bool first = true;
  for (const auto& utt : req.conditioning_context) {
    if (!first) parts.emplace_back(tok::eot);
    first = false;
    for (auto& t : tokenize(utt).tokens) parts.push_back(std::move(t));
  }
  if (req.mode == GenerationMode::infill) {
    parts.emplace_back(tok::response);
    for (auto& t : req.masked.tokens_with_blanks(tok::blank)) {
      parts.push_back(std::move(t));
    }
    parts.emplace_back(tok::infill);
  } else {
    parts.emplace_back(tok::keywords);
    first = true;
    for (const auto& kw : req.keywords) {
      if (!first) parts.emplace_back(tok::sep);
      first = false;
      for (auto& t : tokenize(kw).tokens) parts.push_back(std::move(t));
    }
    parts.emplace_back(tok::response);
  }
  return join_tokens(parts);
}

class GeneratorBackend {
 public:
  virtual ~GeneratorBackend() = default;
  virtual std::string id() const = 0;
  virtual GeneratorResponse generate(const GeneratorRequest& req) const = 0;
};

// Desk-scale stand-in for the neural infilling/keyword generators: the
// n-gram LM does the sampling, conditioned by priming its context window with
// the request content. Pure and deterministic given the request seed.
class FallbackBackend final : public GeneratorBackend {
 public:
  explicit FallbackBackend(std::shared_ptr<const NGramLM> lm,
                           std::size_t max_fill_tokens = 5)
      : lm_(std::move(lm)), max_fill_tokens_(max_fill_tokens) {
    if (!lm_ || !lm_->trained()) {
      throw ConfigError("fallback backend needs a trained language model");
    }
  }

  std::string id() const override { return "fallback-ngram"; }

  GeneratorResponse generate(const GeneratorRequest& req) const override {
    req.validate();
    const auto started = std::chrono::steady_clock::now();
    GeneratorResponse resp;
    resp.backend_id = id();
    Rng rng(req.seed);

    std::vector<std::string> conditioning;
    for (const auto& utt : req.conditioning_context) {
      auto tk = tokenize(utt);
      conditioning.insert(conditioning.end(), tk.tokens.begin(),
                          tk.tokens.end());
    }

    if (req.mode == GenerationMode::infill) {
      resp.fills = infill(req, conditioning, rng);
    } else {
      resp.text = keyword_guided(req, conditioning, rng);
    }
    resp.latency_ms =
        std::chrono::duration<double, std::milli>(
            std::chrono::steady_clock::now() - started)
            .count();
    return resp;
  }

 private:
  // Each blank gets an n-gram of 1..max_fill_tokens tokens sampled with the
  // LM window primed by the conditioning tokens plus the partially filled
  // response up to that blank.
  std::vector<std::vector<std::string>> infill(
      const GeneratorRequest& req, const std::vector<std::string>& conditioning,
      Rng& rng) const {
    std::vector<std::vector<std::string>> fills;
    const auto& masked = req.masked;
    for (std::size_t b = 0; b < masked.spans.size(); ++b) {
      std::vector<std::string> window = conditioning;
      std::size_t i = 0;
      for (std::size_t s = 0; s < b; ++s) {
        for (; i < masked.spans[s].start; ++i) {
          window.push_back(masked.original.tokens[i]);
        }
        window.insert(window.end(), fills[s].begin(), fills[s].end());
        i = masked.spans[s].end();
      }
      for (; i < masked.spans[b].start; ++i) {
        window.push_back(masked.original.tokens[i]);
      }
      SamplingParams fill_params = req.params;
      fill_params.min_len = 1;
      fill_params.max_len = max_fill_tokens_;
      Rng brng = rng.fork("blank" + std::to_string(b));
      fills.push_back(
          lm_->sample(brng, fill_params, req.constraints, window));
    }
    return fills;
  }

  // Keyword-guided stitching: sampled connective spans around the forced
  // keyword tokens, then a sampled tail until min_len is met. Keywords that
  // contain banned tokens are dropped rather than force-violating the ban.
  std::string keyword_guided(const GeneratorRequest& req,
                             const std::vector<std::string>& conditioning,
                             Rng& rng) const {
    std::vector<std::vector<std::string>> keyword_tokens;
    for (const auto& kw : req.keywords) {
      auto tk = tokenize(kw);
      bool banned = false;
      for (const auto& t : tk.tokens) {
        if (req.constraints.is_banned(t)) banned = true;
      }
      if (!banned && !tk.tokens.empty()) keyword_tokens.push_back(tk.tokens);
    }

    std::vector<std::string> window = conditioning;
    std::vector<std::string> out;
    auto emit = [&](const std::vector<std::string>& tokens) {
      for (const auto& t : tokens) {
        if (out.size() >= req.params.max_len) break;
        out.push_back(t);
        window.push_back(t);
      }
    };

    for (std::size_t k = 0; k < keyword_tokens.size(); ++k) {
      const std::size_t gap = static_cast<std::size_t>(rng.below(3));
      if (gap > 0 && out.size() + gap + keyword_tokens[k].size() <
                         req.params.max_len) {
        SamplingParams gap_params = req.params;
        gap_params.min_len = gap;
        gap_params.max_len = gap;
        Rng grng = rng.fork("gap" + std::to_string(k));
        emit(lm_->sample(grng, gap_params, req.constraints, window));
      }
      emit(keyword_tokens[k]);
    }
    if (out.size() < req.params.min_len) {
      SamplingParams tail = req.params;
      tail.min_len = req.params.min_len - out.size();
      tail.max_len = std::max(tail.min_len,
                              std::min(req.params.max_len - out.size(),
                                       tail.min_len + 3));
      Rng trng = rng.fork("tail");
      emit(lm_->sample(trng, tail, req.constraints, window));
    }
    return join_tokens(out);
  }

  std::shared_ptr<const NGramLM> lm_;
  std::size_t max_fill_tokens_;
};

}  // namespace advneg
