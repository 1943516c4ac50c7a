#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "advneg/error.hpp"
#include "advneg/text.hpp"

namespace advneg {

// Static word-vector table (GloVe-style). Immutable after load; lookups for
// unknown words are explicitly absent rather than silently zero.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;

  void add(const std::string& word, std::vector<double> vec) {
    if (vec.empty()) throw DataError("embedding vector must be non-empty");
    if (dim_ == 0) dim_ = vec.size();
    if (vec.size() != dim_) {
      throw DataError("embedding dimension mismatch for '" + word + "'");
    }
    auto [it, inserted] = index_.emplace(word, words_.size());
    if (!inserted) throw DataError("duplicate embedding entry '" + word + "'");
    words_.push_back(word);
    vectors_.push_back(std::move(vec));
  }

  std::size_t dimension() const { return dim_; }
  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }

  bool contains(std::string_view word) const {
    return index_.count(std::string(word)) > 0;
  }

  const std::vector<double>* find(std::string_view word) const {
    auto it = index_.find(std::string(word));
    if (it == index_.end()) return nullptr;
    return &vectors_[it->second];
  }

  // Whitespace-separated text, one "word v1 .. vd" per line. A first line of
  // exactly two integers is treated as a "vocab_size dim" header.
  static EmbeddingTable load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open embedding file: " + path);
    EmbeddingTable table;
    std::string line;
    std::size_t line_no = 0;
    bool first = true;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      std::istringstream ss(line);
      std::vector<std::string> fields;
      std::string f;
      while (ss >> f) fields.push_back(f);
      if (fields.empty()) continue;
      if (first && fields.size() == 2 && looks_integral(fields[0]) &&
          looks_integral(fields[1])) {
        first = false;
        continue;  // header line
      }
      first = false;
      if (fields.size() < 2) {
        throw DataError("embedding line " + std::to_string(line_no) +
                        " has no vector components");
      }
      std::vector<double> vec;
      vec.reserve(fields.size() - 1);
      for (std::size_t i = 1; i < fields.size(); ++i) {
        try {
          vec.push_back(std::stod(fields[i]));
        } catch (const std::exception&) {
          throw DataError("bad float on embedding line " +
                          std::to_string(line_no));
        }
      }
      table.add(fields[0], std::move(vec));
    }
    if (table.size() == 0) throw DataError("embedding file is empty: " + path);
    return table;
  }

 private:
  static bool looks_integral(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s) {
      if (c < '0' || c > '9') return false;
    }
    return true;
  }

  std::size_t dim_ = 0;
  std::vector<std::string> words_;
  std::vector<std::vector<double>> vectors_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline double cosine(const std::vector<double>& a,
                     const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

struct Neighbor {
  std::string word;
  double similarity;
};

struct NeighborList {
  std::vector<Neighbor> neighbors;  // cosine descending, ties lexicographic
  bool short_of_k = false;          // vocabulary smaller than requested k
};

// Brute-force scan over the vocabulary; absent (nullopt) for queries outside
// the table.
inline std::optional<NeighborList> top_k_neighbors(const EmbeddingTable& table,
                                                   std::string_view word,
                                                   std::size_t k = 10) {
  const std::vector<double>* query = table.find(word);
  if (query == nullptr) return std::nullopt;
  std::vector<Neighbor> all;
  all.reserve(table.size());
  for (const auto& w : table.words()) {
    if (w == word) continue;
    all.push_back({w, cosine(*query, *table.find(w))});
  }
  std::sort(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.word < b.word;
  });
  NeighborList out;
  out.short_of_k = all.size() < k;
  if (all.size() > k) all.resize(k);
  out.neighbors = std::move(all);
  return out;
}

struct SentenceVector {
  std::vector<double> vec;
  bool covered = false;  // true when at least one token was in-vocabulary
};

// Mean of the in-vocabulary token vectors; the usual cheap sentence
// representation for similarity windows.
inline SentenceVector sentence_vector(const EmbeddingTable& table,
                                      const std::vector<std::string>& tokens) {
  SentenceVector out;
  out.vec.assign(table.dimension(), 0.0);
  std::size_t hits = 0;
  for (const auto& t : tokens) {
    const auto* v = table.find(t);
    if (v == nullptr) continue;
    for (std::size_t i = 0; i < v->size(); ++i) out.vec[i] += (*v)[i];
    ++hits;
  }
  if (hits > 0) {
    for (double& x : out.vec) x /= static_cast<double>(hits);
    out.covered = true;
  }
  return out;
}

}  // namespace advneg
