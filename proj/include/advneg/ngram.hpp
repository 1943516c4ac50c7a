#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "advneg/error.hpp"
#include "advneg/rng.hpp"
#include "advneg/sampling.hpp"

namespace advneg {

// Fixed-order n-gram language model with add-k smoothing over a closed
// vocabulary. Serves two roles: a fluency scorer (mean log-probability per
// token) and the sampling core of the fallback generation backend.
//
// The event space for every conditioning context is {trained words} + UNK +
// EOT; with add-k smoothing the conditional probabilities over that support
// sum to 1 exactly. BOS only ever appears on the conditioning side.
class NGramLM {
 public:
  explicit NGramLM(std::size_t order = 3, double smoothing_k = 0.01)
      : order_(order), k_(smoothing_k) {
    if (order_ < 1) throw ConfigError("n-gram order must be >= 1");
    if (!(k_ > 0.0)) throw ConfigError("smoothing constant must be > 0");
    id_of_.reserve(1024);
  }

  std::size_t order() const { return order_; }
  double smoothing() const { return k_; }
  std::size_t vocab_size() const { return words_.size(); }
  bool trained() const { return sentences_ > 0; }

  void add_sentence(const std::vector<std::string>& tokens) {
    std::vector<std::uint32_t> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(intern(t));
    std::vector<std::uint32_t> window(order_ > 1 ? order_ - 1 : 0, kBos);
    for (std::size_t i = 0; i <= ids.size(); ++i) {
      const std::uint32_t target = (i < ids.size()) ? ids[i] : kEot;
      auto& slot = table_[window];
      ++slot.counts[target];
      ++slot.total;
      if (!window.empty()) {
        window.erase(window.begin());
        window.push_back(target);
      }
    }
    ++sentences_;
  }

  struct Scored {
    double mean_logprob = 0.0;
    bool empty_input = false;
  };

  // Mean natural-log probability per predicted position, end-of-text symbol
  // included, so variable-length sequences are comparable. Unknown tokens map
  // to UNK. Empty input scores a defined neutral 0 with a flag.
  Scored score(const std::vector<std::string>& tokens) const {
    require_trained();
    if (tokens.empty()) return {0.0, true};
    std::vector<std::uint32_t> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(lookup(t));
    std::vector<std::uint32_t> window(order_ > 1 ? order_ - 1 : 0, kBos);
    double total = 0.0;
    for (std::size_t i = 0; i <= ids.size(); ++i) {
      const std::uint32_t target = (i < ids.size()) ? ids[i] : kEot;
      total += std::log(prob(find_slot(window), target));
      if (!window.empty()) {
        window.erase(window.begin());
        window.push_back(target);
      }
    }
    return {total / static_cast<double>(ids.size() + 1), false};
  }

  // Smoothed conditional distribution for a context, keyed by surface token
  // ("<eot>"/"<unk>" for the specials). Exposed so tests can check the
  // normalization invariant on any context sampling visits.
  std::map<std::string, double> conditional(
      const std::vector<std::string>& context) const {
    require_trained();
    auto window = make_window(context);
    const ContextCounts* slot = find_slot(window);
    std::map<std::string, double> dist;
    for (std::uint32_t id = kFirstWord;
         id < kFirstWord + static_cast<std::uint32_t>(words_.size()); ++id) {
      dist[words_[id - kFirstWord]] = prob(slot, id);
    }
    dist["<eot>"] = prob(slot, kEot);
    dist["<unk>"] = prob(slot, kUnk);
    return dist;
  }

  // Constrained nucleus sampling. Pipeline per step: smoothed conditional ->
  // drop banned (and UNK) -> divide penalized -> temperature -> renormalize ->
  // nucleus cut at top_p -> draw. EOT is withheld until min_len and the walk
  // stops at max_len, so output length lands in [min_len, max_len].
  std::vector<std::string> sample(
      Rng& rng, const SamplingParams& params, const TokenConstraints& constraints,
      const std::vector<std::string>& conditioning = {}) const {
    require_trained();
    params.validate();
    std::vector<std::uint32_t> banned_ids;
    std::vector<std::pair<std::uint32_t, double>> penalty_ids;
    for (const auto& b : constraints.banned()) {
      auto it = id_of_.find(b);
      if (it != id_of_.end()) banned_ids.push_back(it->second);
    }
    for (const auto& [tok, factor] : constraints.penalized()) {
      auto it = id_of_.find(tok);
      if (it != id_of_.end()) penalty_ids.emplace_back(it->second, factor);
    }
    std::sort(banned_ids.begin(), banned_ids.end());

    auto window = make_window(conditioning);
    std::vector<std::string> out;
    std::vector<std::pair<std::uint32_t, double>> weights;
    while (out.size() < params.max_len) {
      const bool allow_eot = out.size() >= params.min_len;
      const ContextCounts* slot = find_slot(window);
      weights.clear();
      for (std::uint32_t id = kFirstWord;
           id < kFirstWord + static_cast<std::uint32_t>(words_.size()); ++id) {
        if (std::binary_search(banned_ids.begin(), banned_ids.end(), id)) {
          continue;
        }
        weights.emplace_back(id, prob(slot, id));
      }
      if (allow_eot) weights.emplace_back(kEot, prob(slot, kEot));
      for (const auto& [id, factor] : penalty_ids) {
        for (auto& w : weights) {
          if (w.first == id) w.second /= factor;
        }
      }
      if (weights.empty()) {
        throw BackendError(BackendError::Kind::unsatisfiable_constraints,
                           "token constraints eliminate the entire vocabulary");
      }
      double sum = 0.0;
      for (auto& w : weights) {
        w.second = std::pow(w.second, 1.0 / params.temperature);
        sum += w.second;
      }
      for (auto& w : weights) w.second /= sum;
      std::sort(weights.begin(), weights.end(),
                [](const auto& a, const auto& b) {
                  if (a.second != b.second) return a.second > b.second;
                  return a.first < b.first;
                });
      std::size_t nucleus = 0;
      double cum = 0.0;
      for (; nucleus < weights.size(); ++nucleus) {
        cum += weights[nucleus].second;
        if (cum >= params.top_p) {
          ++nucleus;
          break;
        }
      }
      if (nucleus == 0 || nucleus > weights.size()) nucleus = weights.size();
      double mass = 0.0;
      for (std::size_t i = 0; i < nucleus; ++i) mass += weights[i].second;
      double u = rng.next_double() * mass;
      std::uint32_t chosen = weights[nucleus - 1].first;
      for (std::size_t i = 0; i < nucleus; ++i) {
        u -= weights[i].second;
        if (u < 0.0) {
          chosen = weights[i].first;
          break;
        }
      }
      if (chosen == kEot) break;
      out.push_back(words_[chosen - kFirstWord]);
      if (!window.empty()) {
        window.erase(window.begin());
        window.push_back(chosen);
      }
    }
    return out;
  }

 private:
  static constexpr std::uint32_t kUnk = 0;
  static constexpr std::uint32_t kBos = 1;
  static constexpr std::uint32_t kEot = 2;
  static constexpr std::uint32_t kFirstWord = 3;

  struct ContextCounts {
    std::map<std::uint32_t, std::uint32_t> counts;
    std::uint64_t total = 0;
  };

  struct WindowHash {
    std::size_t operator()(const std::vector<std::uint32_t>& v) const {
      std::uint64_t h = 0xCBF29CE484222325ULL;
      for (std::uint32_t x : v) {
        h ^= x;
        h *= 0x100000001B3ULL;
        h = detail::mix64(h);
      }
      return static_cast<std::size_t>(h);
    }
  };

  void require_trained() const {
    if (!trained()) throw DataError("n-gram model has no training data");
  }

  std::uint32_t intern(const std::string& token) {
    auto it = id_of_.find(token);
    if (it != id_of_.end()) return it->second;
    std::uint32_t id = kFirstWord + static_cast<std::uint32_t>(words_.size());
    words_.push_back(token);
    id_of_.emplace(token, id);
    return id;
  }

  std::uint32_t lookup(const std::string& token) const {
    auto it = id_of_.find(token);
    return it == id_of_.end() ? kUnk : it->second;
  }

  std::vector<std::uint32_t> make_window(
      const std::vector<std::string>& conditioning) const {
    std::vector<std::uint32_t> window(order_ > 1 ? order_ - 1 : 0, kBos);
    for (const auto& t : conditioning) {
      if (window.empty()) break;
      window.erase(window.begin());
      window.push_back(lookup(t));
    }
    return window;
  }

  // Event-space size: all trained words plus UNK and EOT.
  double support_size() const {
    return static_cast<double>(words_.size() + 2);
  }

  const ContextCounts* find_slot(
      const std::vector<std::uint32_t>& window) const {
    auto it = table_.find(window);
    return it == table_.end() ? nullptr : &it->second;
  }

  double prob(const ContextCounts* slot, std::uint32_t target) const {
    double count = 0.0;
    double total = 0.0;
    if (slot != nullptr) {
      total = static_cast<double>(slot->total);
      auto cit = slot->counts.find(target);
      if (cit != slot->counts.end()) count = static_cast<double>(cit->second);
    }
    return (count + k_) / (total + k_ * support_size());
  }

  std::size_t order_;
  double k_;
  std::size_t sentences_ = 0;
  std::vector<std::string> words_;  // id - kFirstWord -> token
  std::unordered_map<std::string, std::uint32_t> id_of_;
  std::unordered_map<std::vector<std::uint32_t>, ContextCounts, WindowHash>
      table_;
};

}  // namespace advneg
