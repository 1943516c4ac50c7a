#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>

#include "advneg/error.hpp"

namespace advneg {

struct SamplingParams {
  double temperature = 0.9;
  double top_p = 0.9;
  std::size_t min_len = 5;
  std::size_t max_len = 40;

  void validate() const {
    if (!(temperature > 0.0)) throw ConfigError("temperature must be > 0");
    if (!(top_p > 0.0) || top_p > 1.0) {
      throw ConfigError("top_p must be in (0, 1]");
    }
    if (min_len < 1) throw ConfigError("min_len must be >= 1");
    if (min_len > max_len) throw ConfigError("min_len must be <= max_len");
  }
};

// Hard bans plus soft penalties. A banned token can never be sampled; a
// penalized token keeps its unnormalized probability divided by the factor
// before renormalization. Ban wins over penalty, so the two sets are kept
// disjoint.
class TokenConstraints {
 public:
  void ban(std::string_view token) {
    std::string t(token);
    penalized_.erase(t);
    banned_.insert(std::move(t));
  }

  void penalize(std::string_view token, double factor = 100.0) {
    if (!(factor > 1.0)) throw ConfigError("penalty factor must be > 1");
    std::string t(token);
    if (banned_.count(t) > 0) return;  // ban dominates
    auto [it, inserted] = penalized_.emplace(std::move(t), factor);
    if (!inserted && factor > it->second) it->second = factor;
  }

  bool is_banned(std::string_view token) const {
    return banned_.count(std::string(token)) > 0;
  }

  double penalty_factor(std::string_view token) const {
    auto it = penalized_.find(std::string(token));
    return it == penalized_.end() ? 1.0 : it->second;
  }

  bool empty() const { return banned_.empty() && penalized_.empty(); }
  const std::set<std::string>& banned() const { return banned_; }
  const std::map<std::string, double>& penalized() const { return penalized_; }

 private:
  std::set<std::string> banned_;
  std::map<std::string, double> penalized_;
};

}  // namespace advneg
