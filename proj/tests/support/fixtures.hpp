#pragma once

// Deterministic synthetic dialogue corpus for tests. Contexts are grouped in
// topical clusters so content-similarity effects are measurable: utterances
// and gold responses of a context share its topic vocabulary, while other
// contexts live on other topics.

#include <cstdint>
#include <string>
#include <vector>

#include "advneg/corpus.hpp"
#include "advneg/embedding.hpp"
#include "advneg/ngram.hpp"
#include "advneg/rng.hpp"
#include "advneg/text.hpp"

namespace fixtures {

struct Topic {
  std::string name;
  std::vector<std::string> words;
};

inline const std::vector<Topic>& topics() {
  static const std::vector<Topic> t = {
      {"hotel",
       {"hotel", "room", "stay", "service", "breakfast", "lobby", "booking",
        "suite", "reception", "pool"}},
      {"food",
       {"pasta", "kitchen", "recipe", "dinner", "sauce", "chef", "oven",
        "garlic", "flavor", "restaurant"}},
      {"travel",
       {"train", "ticket", "airport", "luggage", "passport", "flight",
        "journey", "station", "vacation", "tour"}},
      {"music",
       {"concert", "guitar", "band", "song", "melody", "album", "piano",
        "singer", "stage", "chorus"}},
      {"sports",
       {"match", "football", "team", "coach", "goal", "stadium", "player",
        "training", "league", "tournament"}},
      {"work",
       {"office", "meeting", "project", "deadline", "manager", "report",
        "salary", "colleague", "client", "presentation"}},
      {"weather",
       {"rain", "storm", "sunshine", "forecast", "cloud", "temperature",
        "umbrella", "wind", "snow", "season"}},
      {"school",
       {"teacher", "homework", "classroom", "lesson", "exam", "student",
        "library", "notebook", "semester", "grade"}},
      {"shopping",
       {"market", "price", "discount", "store", "wallet", "cashier",
        "receipt", "bargain", "groceries", "brand"}},
      {"health",
       {"doctor", "medicine", "hospital", "fever", "appointment", "nurse",
        "symptom", "pharmacy", "checkup", "clinic"}}};
  return t;
}

inline std::string make_sentence(const Topic& topic, advneg::Rng& rng) {
  static const std::vector<std::string> patterns = {
      "do you like the %A at the %B ?",
      "i really enjoyed the %A and the %B yesterday .",
      "the %A near the %B was wonderful .",
      "can we talk about the %A before the %B ?",
      "my %A needs the new %B today .",
      "what happened to the %A and the %B last week ?",
      "we should visit the %A after the %B .",
      "everyone admired the %A inside the %B ."};
  const std::string& pattern = patterns[rng.below(patterns.size())];
  const std::string& a = topic.words[rng.below(topic.words.size())];
  std::string b = topic.words[rng.below(topic.words.size())];
  while (b == a) b = topic.words[rng.below(topic.words.size())];
  std::string out;
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    if (pattern[i] == '%' && i + 1 < pattern.size()) {
      out += pattern[i + 1] == 'A' ? a : b;
      ++i;
    } else {
      out += pattern[i];
    }
  }
  return out;
}

struct FixtureCorpus {
  std::vector<advneg::DialogueContext> contexts;
  std::vector<advneg::CandidateRecord> gold_records;  // 5 positives/context
};

inline FixtureCorpus make_corpus(std::size_t n_contexts, std::uint64_t seed) {
  FixtureCorpus out;
  const auto& banks = topics();
  for (std::size_t i = 0; i < n_contexts; ++i) {
    const Topic& topic = banks[i % banks.size()];
    advneg::Rng rng(advneg::derive_rng(seed, "fixture" + std::to_string(i),
                                       "corpus")
                        .key());
    advneg::DialogueContext ctx;
    char id[16];
    std::snprintf(id, sizeof(id), "ctx%03zu", i);
    ctx.id = id;
    ctx.split = advneg::Split::train;
    const std::size_t turns = 3 + rng.below(2);
    for (std::size_t u = 0; u < turns; ++u) {
      ctx.utterances.push_back(
          {static_cast<int>(u % 2), make_sentence(topic, rng)});
    }
    for (std::size_t p = 0; p < 5; ++p) {
      advneg::Candidate gold;
      gold.text = make_sentence(topic, rng);
      gold.label = advneg::CandidateLabel::positive;
      gold.approach = advneg::CandidateApproach::gold;
      gold.source = advneg::CandidateSource::gold_response;
      out.gold_records.push_back({ctx.id, gold});
    }
    out.contexts.push_back(std::move(ctx));
  }
  return out;
}

// Topic-clustered word vectors: a dominant axis per topic plus deterministic
// per-word jitter, so a word's nearest neighbors are its topic mates.
inline advneg::EmbeddingTable make_embeddings() {
  advneg::EmbeddingTable table;
  const auto& banks = topics();
  const std::size_t dim = banks.size() + 2;
  for (std::size_t t = 0; t < banks.size(); ++t) {
    for (const auto& word : banks[t].words) {
      std::vector<double> vec(dim, 0.0);
      vec[t] = 1.0;
      advneg::Rng jitter(advneg::detail::fnv1a(0x9E3779B97F4A7C15ULL, word));
      vec[banks.size()] = 0.25 * jitter.next_double();
      vec[banks.size() + 1] = 0.25 * jitter.next_double();
      table.add(word, std::move(vec));
    }
  }
  return table;
}

inline advneg::NGramLM train_lm(const FixtureCorpus& corpus,
                                std::size_t order = 3, double k = 0.01) {
  advneg::NGramLM lm(order, k);
  for (const auto& rec : corpus.gold_records) {
    lm.add_sentence(advneg::tokenize(rec.candidate.text).tokens);
  }
  for (const auto& ctx : corpus.contexts) {
    for (const auto& u : ctx.utterances) {
      lm.add_sentence(advneg::tokenize(u.text).tokens);
    }
  }
  return lm;
}

inline advneg::StopwordSet stopwords() {
  return advneg::StopwordSet::load(std::string(ADVNEG_DATA_DIR) +
                                   "/stopwords_en.txt");
}

}  // namespace fixtures
