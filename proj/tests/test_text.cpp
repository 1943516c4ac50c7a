#include <catch2/catch_amalgamated.hpp>

#include <string>
#include <vector>

#include "advneg/rng.hpp"
#include "advneg/text.hpp"
#include "support/fixtures.hpp"

using namespace advneg;

TEST_CASE("tokenize lowercases and splits punctuation", "[text]") {
  auto tk = tokenize("I enjoyed a lot!");
  CHECK(tk.tokens == std::vector<std::string>{"i", "enjoyed", "a", "lot", "!"});
}

TEST_CASE("tokenize of empty text is empty", "[text]") {
  CHECK(tokenize("").tokens.empty());
  CHECK(tokenize("   \t\n").tokens.empty());
}

TEST_CASE("apostrophes split into their own tokens", "[text]") {
  auto tk = tokenize("Don't stop");
  CHECK(tk.tokens == std::vector<std::string>{"don", "'", "t", "stop"});
}

TEST_CASE("offsets index the source string", "[text]") {
  const std::string src = "  Hello,   World! ";
  auto tk = tokenize(src);
  REQUIRE(tk.tokens.size() == tk.offsets.size());
  for (std::size_t i = 0; i < tk.tokens.size(); ++i) {
    std::string piece = src.substr(tk.offsets[i].begin, tk.offsets[i].length);
    for (char& c : piece) c = detail::ascii_lower(c);
    CHECK(piece == tk.tokens[i]);
    if (i > 0) CHECK(tk.offsets[i].begin >= tk.offsets[i - 1].end());
  }
}

TEST_CASE("tokenize round trip over fuzzed unicode strings", "[text]") {
  Rng rng = derive_rng(123, "fuzz", "tokenize");
  const std::vector<std::string> pieces = {
      "hello", "WORLD", "don't", "42",  "...",  "caf\xc3\xa9",
      "\xe6\x97\xa5\xe6\x9c\xac", "x,y", "!?",   " ",    "\t",
      "it's", "A1b2",  "--",    "\xc3\xbc" "ber"};
  for (int trial = 0; trial < 300; ++trial) {
    std::string src;
    const std::size_t n = 1 + rng.below(8);
    for (std::size_t i = 0; i < n; ++i) {
      src += pieces[rng.below(pieces.size())];
      if (rng.coin(0.7)) src += ' ';
    }
    auto tk = tokenize(src);
    // Every span lowercases to its token; all characters outside spans are
    // whitespace; spans are strictly increasing.
    std::vector<bool> covered(src.size(), false);
    for (std::size_t i = 0; i < tk.tokens.size(); ++i) {
      std::string piece = src.substr(tk.offsets[i].begin, tk.offsets[i].length);
      for (char& c : piece) c = detail::ascii_lower(c);
      REQUIRE(piece == tk.tokens[i]);
      if (i > 0) REQUIRE(tk.offsets[i].begin >= tk.offsets[i - 1].end());
      for (std::size_t b = tk.offsets[i].begin; b < tk.offsets[i].end(); ++b) {
        covered[b] = true;
      }
    }
    for (std::size_t b = 0; b < src.size(); ++b) {
      if (!covered[b]) {
        REQUIRE(detail::is_ascii_space(static_cast<unsigned char>(src[b])));
      }
    }
  }
}

TEST_CASE("content_words removes stopwords and punctuation", "[text]") {
  auto sw = fixtures::stopwords();
  CHECK(content_words({"thank", "you", "."}, sw) ==
        std::vector<std::string>{"thank"});
  CHECK(content_words({}, sw).empty());
  CHECK(content_words({"the", "a", "of"}, sw).empty());
}

TEST_CASE("content_words preserves order", "[text]") {
  auto sw = fixtures::stopwords();
  CHECK(content_words({"red", "the", "apples", "!", "fresh"}, sw) ==
        std::vector<std::string>{"red", "apples", "fresh"});
}

TEST_CASE("sentence ranges split on terminal punctuation", "[text]") {
  auto tk = tokenize("I came. I saw! Did I win?");
  auto ranges = sentence_ranges(tk.tokens);
  REQUIRE(ranges.size() == 3);
  CHECK(ranges[0] == std::pair<std::size_t, std::size_t>{0, 3});
  CHECK(ranges[1] == std::pair<std::size_t, std::size_t>{3, 6});
  CHECK(ranges[2] == std::pair<std::size_t, std::size_t>{6, 10});
}

TEST_CASE("bow_cosine basics", "[text]") {
  const std::vector<std::string> a = {"enjoyed", "stay", "hotel"};
  CHECK(bow_cosine(a, a) == 1.0);
  CHECK(bow_cosine(a, {"marriage", "wedding"}) == 0.0);
  CHECK_FALSE(bow_cosine({}, {}).has_value());
  CHECK(bow_cosine(a, {}).value() == 0.0);
}

TEST_CASE("bow_cosine matches hand computation", "[text]") {
  // a = {red, apples, fresh, pie}, b = {red, apples, tart, pie}
  // dot = 3, |a| = |b| = 2 -> cosine = 0.75
  const std::vector<std::string> a = {"red", "apples", "fresh", "pie"};
  const std::vector<std::string> b = {"red", "apples", "tart", "pie"};
  CHECK_THAT(bow_cosine(a, b).value(),
             Catch::Matchers::WithinAbs(3.0 / 4.0, 1e-12));
}

TEST_CASE("jaccard overlap is symmetric and bounded", "[text]") {
  const std::vector<std::string> a = {"red", "apples", "fresh"};
  const std::vector<std::string> b = {"red", "pie"};
  auto ab = jaccard_overlap(a, b).value();
  auto ba = jaccard_overlap(b, a).value();
  CHECK(ab == ba);
  CHECK_THAT(ab, Catch::Matchers::WithinAbs(1.0 / 4.0, 1e-12));
  CHECK(jaccard_overlap(a, a).value() == 1.0);
  CHECK_FALSE(jaccard_overlap({}, {}).has_value());
}

TEST_CASE("normalize_text strips punctuation and case", "[text]") {
  CHECK(normalize_text("  Hello,   WORLD!! ") == "hello world");
  CHECK(normalize_text("!!!") == "");
}
