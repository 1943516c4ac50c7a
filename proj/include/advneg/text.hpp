#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "advneg/error.hpp"

namespace advneg {

struct TokenSpan {
  std::size_t begin = 0;
  std::size_t length = 0;
  std::size_t end() const { return begin + length; }
};

// Lowercased tokens plus byte spans into the source string. Every character
// outside a span is whitespace, and each span lowercases to its token, so the
// source is recoverable (modulo case) from the offsets.
struct TokenizedText {
  std::vector<std::string> tokens;
  std::vector<TokenSpan> offsets;

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }
};

namespace detail {

inline bool is_ascii_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' ||
         c == '\f';
}

// Word characters: ASCII alphanumerics and any non-ASCII byte, so multi-byte
// UTF-8 sequences stay glued together. Everything else (ASCII punctuation)
// becomes a single-character token.
inline bool is_word_char(unsigned char c) {
  return std::isalnum(c) != 0 || c >= 0x80;
}

inline char ascii_lower(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

}  // namespace detail

inline TokenizedText tokenize(std::string_view text) {
  TokenizedText out;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    unsigned char c = static_cast<unsigned char>(text[i]);
    if (detail::is_ascii_space(c)) {
      ++i;
      continue;
    }
    if (detail::is_word_char(c)) {
      std::size_t start = i;
      while (i < n &&
             detail::is_word_char(static_cast<unsigned char>(text[i]))) {
        ++i;
      }
      std::string tok(text.substr(start, i - start));
      for (char& ch : tok) ch = detail::ascii_lower(ch);
      out.tokens.push_back(std::move(tok));
      out.offsets.push_back({start, i - start});
    } else {
      out.tokens.emplace_back(1, text[i]);
      out.offsets.push_back({i, 1});
      ++i;
    }
  }
  return out;
}

inline bool is_punct_token(std::string_view tok) {
  if (tok.empty()) return false;
  for (unsigned char c : tok) {
    if (detail::is_word_char(c) || detail::is_ascii_space(c)) return false;
  }
  return true;
}

class StopwordSet {
 public:
  StopwordSet() = default;

  static StopwordSet from_words(const std::vector<std::string>& words) {
    StopwordSet s;
    for (const auto& w : words) s.insert(w);
    if (s.words_.empty()) throw DataError("stopword set must be non-empty");
    return s;
  }

  // One word per line; '#' lines and blanks ignored.
  static StopwordSet load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open stopword file: " + path);
    StopwordSet s;
    std::string line;
    while (std::getline(in, line)) {
      while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) {
        line.pop_back();
      }
      if (line.empty() || line[0] == '#') continue;
      s.insert(line);
    }
    if (s.words_.empty()) throw DataError("stopword file is empty: " + path);
    return s;
  }

  bool contains(std::string_view word) const {
    std::string lower(word);
    for (char& c : lower) c = detail::ascii_lower(c);
    return words_.count(lower) > 0;
  }

  std::size_t size() const { return words_.size(); }

 private:
  void insert(const std::string& w) {
    std::string lower(w);
    for (char& c : lower) c = detail::ascii_lower(c);
    words_.insert(lower);
  }

  std::unordered_set<std::string> words_;
};

// Order-preserving removal of stopwords and pure-punctuation tokens.
inline std::vector<std::string> content_words(
    const std::vector<std::string>& tokens, const StopwordSet& stopwords) {
  std::vector<std::string> out;
  for (const auto& t : tokens) {
    if (is_punct_token(t)) continue;
    if (stopwords.contains(t)) continue;
    out.push_back(t);
  }
  return out;
}

// Half-open [begin, end) token ranges; a sentence ends after a run of
// terminal punctuation (. ! ?).
inline std::vector<std::pair<std::size_t, std::size_t>> sentence_ranges(
    const std::vector<std::string>& tokens) {
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  std::size_t start = 0;
  const auto is_terminal = [](const std::string& t) {
    return t == "." || t == "!" || t == "?";
  };
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (is_terminal(tokens[i]) &&
        (i + 1 == tokens.size() || !is_terminal(tokens[i + 1]))) {
      ranges.emplace_back(start, i + 1);
      start = i + 1;
    }
  }
  if (start < tokens.size()) ranges.emplace_back(start, tokens.size());
  return ranges;
}

inline std::map<std::string, std::size_t> token_counts(
    const std::vector<std::string>& tokens) {
  std::map<std::string, std::size_t> counts;
  for (const auto& t : tokens) ++counts[t];
  return counts;
}

// Cosine over bag-of-words count vectors. Disengaged when both sides are
// empty (the value is undefined there); callers usually treat that as 0.
inline std::optional<double> bow_cosine(const std::vector<std::string>& a,
                                        const std::vector<std::string>& b) {
  if (a.empty() && b.empty()) return std::nullopt;
  auto ca = token_counts(a);
  auto cb = token_counts(b);
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [w, c] : ca) {
    na += static_cast<double>(c) * static_cast<double>(c);
    auto it = cb.find(w);
    if (it != cb.end()) dot += static_cast<double>(c) * static_cast<double>(it->second);
  }
  for (const auto& [w, c] : cb) {
    nb += static_cast<double>(c) * static_cast<double>(c);
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

// Jaccard over the sets of distinct tokens; symmetric in its arguments.
inline std::optional<double> jaccard_overlap(const std::vector<std::string>& a,
                                             const std::vector<std::string>& b) {
  if (a.empty() && b.empty()) return std::nullopt;
  std::set<std::string> sa(a.begin(), a.end());
  std::set<std::string> sb(b.begin(), b.end());
  std::size_t inter = 0;
  for (const auto& w : sa) inter += sb.count(w);
  std::size_t uni = sa.size() + sb.size() - inter;
  if (uni == 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

// Canonical form used for exact-match dedup and gold removal: lowercase,
// punctuation stripped, whitespace collapsed to single spaces.
inline std::string normalize_text(std::string_view text) {
  TokenizedText tk = tokenize(text);
  std::string out;
  for (const auto& t : tk.tokens) {
    if (is_punct_token(t)) continue;
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

inline std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

}  // namespace advneg
