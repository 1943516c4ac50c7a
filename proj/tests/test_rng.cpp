#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <vector>

#include "advneg/rng.hpp"

using namespace advneg;

namespace {

std::vector<std::uint64_t> first_draws(Rng rng, std::size_t n) {
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(rng.next_u64());
  return out;
}

}  // namespace

TEST_CASE("identical scopes replay identical streams", "[rng]") {
  auto a = first_draws(derive_rng(42, "c1", "masking"), 16);
  auto b = first_draws(derive_rng(42, "c1", "masking"), 16);
  CHECK(a == b);
}

TEST_CASE("distinct stages give distinct streams", "[rng]") {
  auto a = first_draws(derive_rng(42, "c1", "masking"), 8);
  auto b = first_draws(derive_rng(42, "c1", "infill"), 8);
  CHECK(a != b);
  CHECK(a.front() != b.front());
}

TEST_CASE("distinct seeds give distinct streams", "[rng]") {
  auto a = first_draws(derive_rng(42, "c1", "masking"), 8);
  auto b = first_draws(derive_rng(43, "c1", "masking"), 8);
  CHECK(a != b);
}

TEST_CASE("field separators prevent scope collisions", "[rng]") {
  auto a = first_draws(derive_rng(1, "ab", "c"), 4);
  auto b = first_draws(derive_rng(1, "a", "bc"), 4);
  CHECK(a != b);
}

TEST_CASE("below stays inside its bound and covers it", "[rng]") {
  Rng rng = derive_rng(7, "c", "below");
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    auto v = rng.below(7);
    REQUIRE(v < 7);
    seen.insert(v);
  }
  CHECK(seen.size() == 7);
}

TEST_CASE("next_double is in the unit interval", "[rng]") {
  Rng rng = derive_rng(7, "c", "double");
  for (int i = 0; i < 1000; ++i) {
    const double d = rng.next_double();
    REQUIRE(d >= 0.0);
    REQUIRE(d < 1.0);
  }
}

TEST_CASE("sample_indices draws distinct indices", "[rng]") {
  Rng rng = derive_rng(11, "c", "sample");
  for (int trial = 0; trial < 50; ++trial) {
    auto picks = rng.sample_indices(10, 4);
    REQUIRE(picks.size() == 4);
    std::set<std::size_t> unique(picks.begin(), picks.end());
    CHECK(unique.size() == 4);
    for (auto p : picks) CHECK(p < 10);
  }
  CHECK(rng.sample_indices(3, 10).size() == 3);
}

TEST_CASE("forks are pure functions of key and label", "[rng]") {
  Rng rng = derive_rng(5, "ctx", "stage");
  rng.next_u64();  // consuming the parent must not disturb forks
  auto a = first_draws(rng.fork("x"), 4);
  rng.next_u64();
  auto b = first_draws(rng.fork("x"), 4);
  CHECK(a == b);
  CHECK(first_draws(rng.fork("y"), 4) != a);
}

TEST_CASE("shuffle permutes deterministically", "[rng]") {
  std::vector<int> v1 = {1, 2, 3, 4, 5, 6, 7, 8};
  std::vector<int> v2 = v1;
  Rng a = derive_rng(9, "c", "shuffle");
  Rng b = derive_rng(9, "c", "shuffle");
  a.shuffle(v1);
  b.shuffle(v2);
  CHECK(v1 == v2);
  std::vector<int> sorted = v1;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8});
}
