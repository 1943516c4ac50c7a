#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "advneg/corpus.hpp"
#include "advneg/error.hpp"
#include "advneg/text.hpp"

namespace advneg {

struct Bm25Doc {
  std::string text;
  std::string context_id;  // owning context
};

struct Bm25Hit {
  std::size_t doc = 0;
  double score = 0.0;
};

struct Bm25Result {
  std::vector<Bm25Hit> hits;
  bool all_zero = false;  // no query term matched anything
};

// Okapi BM25 over an inverted index of corpus responses.
//
//   score(q, d) = sum over distinct q terms of
//                 idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl/avgdl))
//   idf(t)      = max(0, ln((N - df + 0.5) / (df + 0.5)))
//
// Documents are tokenized with the shared tokenizer and indexed as-is; the
// document length is the full token count. Queries are built from content
// words by the caller. Immutable after build; concurrent queries are safe.
class Bm25Index {
 public:
  static Bm25Index build(std::vector<Bm25Doc> docs, double k1 = 1.2,
                         double b = 0.75) {
    if (docs.empty()) throw DataError("cannot build BM25 index with no docs");
    Bm25Index index;
    index.k1_ = k1;
    index.b_ = b;
    index.docs_ = std::move(docs);
    index.doc_len_.resize(index.docs_.size());
    double total_len = 0.0;
    for (std::size_t d = 0; d < index.docs_.size(); ++d) {
      auto tk = tokenize(index.docs_[d].text);
      index.doc_len_[d] = static_cast<double>(tk.tokens.size());
      total_len += index.doc_len_[d];
      std::map<std::string, std::uint32_t> tf;
      for (const auto& t : tk.tokens) ++tf[t];
      for (const auto& [term, count] : tf) {
        index.postings_[term].emplace_back(static_cast<std::uint32_t>(d),
                                           count);
      }
    }
    index.avgdl_ = total_len / static_cast<double>(index.docs_.size());
    return index;
  }

  double k1() const { return k1_; }
  double b() const { return b_; }
  double avgdl() const { return avgdl_; }
  std::size_t num_docs() const { return docs_.size(); }
  const Bm25Doc& doc(std::size_t d) const { return docs_[d]; }

  const std::vector<std::pair<std::uint32_t, std::uint32_t>>* postings(
      std::string_view term) const {
    auto it = postings_.find(std::string(term));
    return it == postings_.end() ? nullptr : &it->second;
  }

  double idf(std::string_view term) const {
    const auto* plist = postings(term);
    const double df = plist ? static_cast<double>(plist->size()) : 0.0;
    const double n = static_cast<double>(docs_.size());
    return std::max(0.0, std::log((n - df + 0.5) / (df + 0.5)));
  }

  double score(const std::vector<std::string>& query_terms,
               std::size_t d) const {
    std::set<std::string> distinct(query_terms.begin(), query_terms.end());
    double total = 0.0;
    for (const auto& term : distinct) {
      const auto* plist = postings(term);
      if (plist == nullptr) continue;
      auto it = std::lower_bound(
          plist->begin(), plist->end(), static_cast<std::uint32_t>(d),
          [](const auto& e, std::uint32_t doc) { return e.first < doc; });
      if (it == plist->end() || it->first != d) continue;
      total += term_score(term, it->second, d);
    }
    return total;
  }

  // Query = content words of all context utterances (persona included).
  // Excluded before truncation: documents owned by the query context and
  // documents whose normalized text equals any normalized gold text.
  Bm25Result top_k(const DialogueContext& ctx, std::size_t k,
                   const std::vector<std::string>& exclude_gold,
                   const StopwordSet& stopwords) const {
    std::vector<std::string> query =
        content_words(context_tokens(ctx), stopwords);
    return top_k_terms(query, k, ctx.id, exclude_gold);
  }

  Bm25Result top_k_terms(const std::vector<std::string>& query_terms,
                         std::size_t k, const std::string& own_context_id,
                         const std::vector<std::string>& exclude_gold) const {
    std::unordered_set<std::string> gold_norm;
    for (const auto& g : exclude_gold) gold_norm.insert(normalize_text(g));

    std::vector<double> scores(docs_.size(), 0.0);
    std::set<std::string> distinct(query_terms.begin(), query_terms.end());
    for (const auto& term : distinct) {
      const auto* plist = postings(term);
      if (plist == nullptr) continue;
      for (const auto& [d, tf] : *plist) {
        scores[d] += term_score(term, tf, d);
      }
    }

    std::vector<std::size_t> order;
    order.reserve(docs_.size());
    for (std::size_t d = 0; d < docs_.size(); ++d) {
      if (docs_[d].context_id == own_context_id) continue;
      if (gold_norm.count(normalize_text(docs_[d].text)) > 0) continue;
      order.push_back(d);
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (scores[a] != scores[b]) return scores[a] > scores[b];
      return a < b;  // stable tie-break by doc id
    });
    if (order.size() > k) order.resize(k);

    Bm25Result out;
    out.all_zero = true;
    for (std::size_t d : order) {
      out.hits.push_back({d, scores[d]});
      if (scores[d] > 0.0) out.all_zero = false;
    }
    return out;
  }

  // Versioned dump: a JSON header line followed by one JSON doc per line.
  // Loading rebuilds the postings, which is deterministic.
  void save(std::ostream& out) const {
    nlohmann::json header;
    header["format"] = "advneg.bm25";
    header["version"] = 1;
    header["k1"] = k1_;
    header["b"] = b_;
    out << header.dump() << '\n';
    for (const auto& d : docs_) {
      nlohmann::json j;
      j["context_id"] = d.context_id;
      j["text"] = d.text;
      out << j.dump() << '\n';
    }
  }

  static Bm25Index load(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty BM25 index dump");
    nlohmann::json header;
    try {
      header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("bad BM25 index header: ") + e.what());
    }
    if (header.value("format", "") != "advneg.bm25" ||
        header.value("version", 0) != 1) {
      throw DataError("unsupported BM25 index format");
    }
    std::vector<Bm25Doc> docs;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("bad BM25 index record: ") + e.what());
      }
      docs.push_back({j.at("text").get<std::string>(),
                      j.at("context_id").get<std::string>()});
    }
    return build(std::move(docs), header.at("k1").get<double>(),
                 header.at("b").get<double>());
  }

 private:
  double term_score(const std::string& term, std::uint32_t tf,
                    std::size_t d) const {
    const double f = static_cast<double>(tf);
    const double norm = k1_ * (1.0 - b_ + b_ * doc_len_[d] / avgdl_);
    return idf(term) * f * (k1_ + 1.0) / (f + norm);
  }

  double k1_ = 1.2;
  double b_ = 0.75;
  std::vector<Bm25Doc> docs_;
  std::vector<double> doc_len_;
  double avgdl_ = 0.0;
  std::unordered_map<std::string,
                     std::vector<std::pair<std::uint32_t, std::uint32_t>>>
      postings_;
};

}  // namespace advneg
