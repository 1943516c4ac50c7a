#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace advneg {

namespace detail {

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a(std::uint64_t h, std::string_view bytes) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a_u64(std::uint64_t h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (i * 8)) & 0xFF;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace detail

// Counter-based random stream (splitmix64 output function). The key is fixed
// at construction and every draw advances a counter, so a stream is a pure
// function of its key: identical (seed, context_id, stage) scopes replay the
// same values regardless of thread schedule or call order elsewhere.
class Rng {
 public:
  explicit Rng(std::uint64_t key) : key_(key) {}

  std::uint64_t key() const { return key_; }

  std::uint64_t next_u64() {
    counter_ += 0x9E3779B97F4A7C15ULL;
    return detail::mix64(key_ + counter_);
  }

  // Uniform in [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in [0, n). Multiply-shift reduction; the bias of ~n/2^64 is far
  // below anything our statistical tests can resolve.
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  bool coin(double p) { return next_double() < p; }

  template <typename T>
  const T& pick(const std::vector<T>& items) {
    return items[below(items.size())];
  }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      using std::swap;
      swap(items[i - 1], items[j]);
    }
  }

  // k distinct indices from [0, n), in draw order (partial Fisher-Yates).
  std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k) {
    if (k > n) k = n;
    std::vector<std::size_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    std::vector<std::size_t> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
      std::size_t j = i + static_cast<std::size_t>(below(n - i));
      std::swap(pool[i], pool[j]);
      out.push_back(pool[i]);
    }
    return out;
  }

  // Child stream derived from the key and a label only; forking never
  // consumes from or depends on the parent's counter. Same label -> same
  // child stream, so callers embed indices in labels where needed.
  Rng fork(std::string_view label) const {
    std::uint64_t h = detail::fnv1a_u64(0xCBF29CE484222325ULL, key_);
    h = detail::fnv1a(h, "\x1f");
    h = detail::fnv1a(h, label);
    return Rng(detail::mix64(h));
  }

  std::uint64_t derive_seed(std::string_view label) const {
    return fork(label).key();
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Scope derivation for pipeline stages: one stream per
// (global_seed, context_id, stage_name) triple. Field separators keep
// ("ab","c") and ("a","bc") distinct.
inline Rng derive_rng(std::uint64_t global_seed, std::string_view context_id,
                      std::string_view stage_name) {
  std::uint64_t h = detail::fnv1a_u64(0xCBF29CE484222325ULL, global_seed);
  h = detail::fnv1a(h, "\x1f");
  h = detail::fnv1a(h, context_id);
  h = detail::fnv1a(h, "\x1f");
  h = detail::fnv1a(h, stage_name);
  return Rng(detail::mix64(h));
}

}  // namespace advneg
