#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "advneg/embedding.hpp"
#include "advneg/rng.hpp"
#include "support/fixtures.hpp"

using namespace advneg;
namespace fs = std::filesystem;

namespace {

EmbeddingTable tiny_table() {
  EmbeddingTable t;
  t.add("sun", {1.0, 0.0, 0.0});
  t.add("star", {1.0, 0.0, 0.0});  // duplicate direction of "sun"
  t.add("moon", {0.8, 0.6, 0.0});
  t.add("cheese", {0.0, 0.0, 1.0});
  t.add("cracker", {0.1, 0.0, 0.9});
  return t;
}

}  // namespace

TEST_CASE("duplicate vector ranks first with cosine 1", "[embedding]") {
  auto t = tiny_table();
  auto result = top_k_neighbors(t, "sun", 2);
  REQUIRE(result.has_value());
  REQUIRE(result->neighbors.size() == 2);
  CHECK(result->neighbors[0].word == "star");
  CHECK_THAT(result->neighbors[0].similarity,
             Catch::Matchers::WithinAbs(1.0, 1e-12));
}

TEST_CASE("neighbor order matches brute force cosine", "[embedding]") {
  auto t = tiny_table();
  auto result = top_k_neighbors(t, "cracker", 4);
  REQUIRE(result.has_value());
  // Brute force by hand over the other four entries.
  std::vector<std::pair<std::string, double>> expected;
  const auto* q = t.find("cracker");
  for (const auto& w : t.words()) {
    if (w == "cracker") continue;
    expected.emplace_back(w, cosine(*q, *t.find(w)));
  }
  std::sort(expected.begin(), expected.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  REQUIRE(result->neighbors.size() == expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    CHECK(result->neighbors[i].word == expected[i].first);
    CHECK_THAT(result->neighbors[i].similarity,
               Catch::Matchers::WithinAbs(expected[i].second, 1e-12));
  }
}

TEST_CASE("neighbor queries equal brute force on random tables", "[embedding]") {
  Rng rng = derive_rng(31, "emb", "prop");
  for (int trial = 0; trial < 20; ++trial) {
    EmbeddingTable t;
    const std::size_t vocab = 3 + rng.below(10);
    const std::size_t dim = 2 + rng.below(4);
    for (std::size_t w = 0; w < vocab; ++w) {
      std::vector<double> vec(dim);
      for (auto& x : vec) x = rng.next_double() * 2.0 - 1.0;
      t.add("w" + std::to_string(w), std::move(vec));
    }
    for (const auto& query : t.words()) {
      auto result = top_k_neighbors(t, query, 5);
      REQUIRE(result.has_value());
      std::vector<std::pair<double, std::string>> brute;
      for (const auto& w : t.words()) {
        if (w == query) continue;
        brute.emplace_back(cosine(*t.find(query), *t.find(w)), w);
      }
      std::sort(brute.begin(), brute.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
      });
      const std::size_t k = std::min<std::size_t>(5, brute.size());
      REQUIRE(result->neighbors.size() == k);
      for (std::size_t i = 0; i < k; ++i) {
        CHECK(result->neighbors[i].word == brute[i].second);
      }
    }
  }
}

TEST_CASE("out of vocabulary queries are explicitly absent", "[embedding]") {
  auto t = tiny_table();
  CHECK_FALSE(top_k_neighbors(t, "galaxy", 3).has_value());
}

TEST_CASE("k beyond the vocabulary is flagged short", "[embedding]") {
  auto t = tiny_table();
  auto result = top_k_neighbors(t, "sun", 50);
  REQUIRE(result.has_value());
  CHECK(result->short_of_k);
  CHECK(result->neighbors.size() == 4);
}

TEST_CASE("embedding files load with and without header", "[embedding]") {
  fs::path dir = fs::path(ADVNEG_TEST_TMP) / "embedding";
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "plain.txt");
    out << "alpha 1.0 0.0\nbeta 0.0 1.0\n";
  }
  {
    std::ofstream out(dir / "header.txt");
    out << "2 2\nalpha 1.0 0.0\nbeta 0.0 1.0\n";
  }
  auto plain = EmbeddingTable::load((dir / "plain.txt").string());
  auto header = EmbeddingTable::load((dir / "header.txt").string());
  CHECK(plain.size() == 2);
  CHECK(header.size() == 2);
  CHECK(plain.dimension() == 2);
  CHECK(header.dimension() == 2);
  CHECK(plain.contains("alpha"));
  CHECK_FALSE(plain.contains("gamma"));
}

TEST_CASE("dimension mismatches are data errors", "[embedding]") {
  fs::path dir = fs::path(ADVNEG_TEST_TMP) / "embedding";
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "bad.txt");
    out << "alpha 1.0 0.0\nbeta 0.0\n";
  }
  CHECK_THROWS_AS(EmbeddingTable::load((dir / "bad.txt").string()), DataError);
}

TEST_CASE("sentence vectors average in-vocabulary words", "[embedding]") {
  auto t = tiny_table();
  auto sv = sentence_vector(t, {"sun", "cheese"});
  CHECK(sv.covered);
  CHECK_THAT(sv.vec[0], Catch::Matchers::WithinAbs(0.5, 1e-12));
  CHECK_THAT(sv.vec[2], Catch::Matchers::WithinAbs(0.5, 1e-12));
  auto missing = sentence_vector(t, {"galaxy"});
  CHECK_FALSE(missing.covered);
}

TEST_CASE("fixture embeddings cluster by topic", "[embedding]") {
  auto t = fixtures::make_embeddings();
  auto result = top_k_neighbors(t, "hotel", 9);
  REQUIRE(result.has_value());
  const auto& topic = fixtures::topics()[0].words;
  for (const auto& n : result->neighbors) {
    CHECK(std::find(topic.begin(), topic.end(), n.word) != topic.end());
  }
}
