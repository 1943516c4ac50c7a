#pragma once

#include <atomic>
#include <chrono>
#include <memory>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "advneg/error.hpp"
#include "advneg/generation.hpp"

namespace advneg {

struct RemoteConfig {
  std::string endpoint;  // e.g. http://127.0.0.1:8080/generate
  int timeout_ms = 30000;
  int max_in_flight = 4;
};

// Wire record for a generation request. Kept in one place so the client and
// any stub servers in tests agree on the schema.
inline nlohmann::json request_to_wire(const GeneratorRequest& req,
                                      int num_return = 1) {
  nlohmann::json j;
  j["mode"] = mode_name(req.mode);
  j["serialized"] = serialize_request(req);
  j["params"] = {{"temperature", req.params.temperature},
                 {"top_p", req.params.top_p},
                 {"min_len", req.params.min_len},
                 {"max_len", req.params.max_len}};
  nlohmann::json banned = nlohmann::json::array();
  for (const auto& b : req.constraints.banned()) banned.push_back(b);
  nlohmann::json penalized = nlohmann::json::array();
  for (const auto& [token, factor] : req.constraints.penalized()) {
    penalized.push_back({token, factor});
  }
  j["constraints"] = {{"banned", banned}, {"penalized", penalized}};
  j["seed"] = req.seed;
  j["num_return"] = num_return;
  return j;
}

struct RemoteResult {
  bool ok = false;
  GeneratorResponse response;
  BackendError::Kind error_kind = BackendError::Kind::unreachable;
  std::string error;
};

// HTTP client for an external generation service. Responses are validated
// against the request invariants (fill count, bans); a violating backend is
// rejected with a typed error instead of being passed through.
class RemoteBackend final : public GeneratorBackend {
 public:
  explicit RemoteBackend(RemoteConfig config) : config_(std::move(config)) {
    parse_endpoint();
  }

  std::string id() const override { return "remote:" + config_.endpoint; }

  GeneratorResponse generate(const GeneratorRequest& req) const override {
    req.validate();
    const auto started = std::chrono::steady_clock::now();

    httplib::Client client(base_);
    client.set_connection_timeout(0, config_.timeout_ms * 1000LL);
    client.set_read_timeout(0, config_.timeout_ms * 1000LL);
    client.set_write_timeout(0, config_.timeout_ms * 1000LL);

    auto res = client.Post(path_, request_to_wire(req).dump(),
                           "application/json");
    if (!res) {
      const auto err = res.error();
      if (err == httplib::Error::ConnectionTimeout ||
          err == httplib::Error::Read || err == httplib::Error::Write) {
        throw BackendError(BackendError::Kind::timeout,
                           "backend timed out: " + httplib::to_string(err));
      }
      throw BackendError(BackendError::Kind::unreachable,
                         "backend unreachable: " + httplib::to_string(err));
    }
    if (res->status != 200) {
      throw BackendError(
          BackendError::Kind::malformed_response,
          "backend returned HTTP " + std::to_string(res->status));
    }

    GeneratorResponse out = parse_response(req, res->body);
    out.backend_id = id();
    out.latency_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - started)
                         .count();
    return out;
  }

  // Issues requests with at most max_in_flight concurrent connections.
  // Results are positional, so callers keep deterministic downstream order.
  std::vector<RemoteResult> generate_batch(
      const std::vector<GeneratorRequest>& requests) const {
    std::vector<RemoteResult> results(requests.size());
    const int workers = std::max(
        1, std::min<int>(config_.max_in_flight,
                         static_cast<int>(requests.size())));
    std::atomic<std::size_t> next{0};
    auto run = [&]() {
      while (true) {
        std::size_t i = next.fetch_add(1);
        if (i >= requests.size()) break;
        try {
          results[i].response = generate(requests[i]);
          results[i].ok = true;
        } catch (const BackendError& e) {
          results[i].error_kind = e.kind();
          results[i].error = e.what();
        }
      }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(run);
    for (auto& t : pool) t.join();
    return results;
  }

 private:
  void parse_endpoint() {
    const std::string& url = config_.endpoint;
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
      throw ConfigError("endpoint must be an http URL: " + url);
    }
    auto path_begin = url.find('/', scheme_end + 3);
    if (path_begin == std::string::npos) {
      base_ = url;
      path_ = "/";
    } else {
      base_ = url.substr(0, path_begin);
      path_ = url.substr(path_begin);
    }
  }

  GeneratorResponse parse_response(const GeneratorRequest& req,
                                   const std::string& body) const {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
      throw BackendError(BackendError::Kind::malformed_response,
                         std::string("response is not JSON: ") + e.what());
    }
    GeneratorResponse out;
    if (req.mode == GenerationMode::infill) {
      if (!j.contains("fills") || !j.at("fills").is_array()) {
        throw BackendError(BackendError::Kind::malformed_response,
                           "infill response lacks a 'fills' list");
      }
      for (const auto& fill : j.at("fills")) {
        if (!fill.is_array()) {
          throw BackendError(BackendError::Kind::malformed_response,
                             "each fill must be a token list");
        }
        std::vector<std::string> tokens;
        for (const auto& t : fill) {
          if (!t.is_string()) {
            throw BackendError(BackendError::Kind::malformed_response,
                               "fill tokens must be strings");
          }
          tokens.push_back(t.get<std::string>());
        }
        out.fills.push_back(std::move(tokens));
      }
      if (out.fills.size() != req.masked.spans.size()) {
        throw BackendError(
            BackendError::Kind::malformed_response,
            "backend returned " + std::to_string(out.fills.size()) +
                " fills for " + std::to_string(req.masked.spans.size()) +
                " blanks");
      }
      for (const auto& fill : out.fills) {
        for (const auto& t : fill) {
          if (req.constraints.is_banned(t)) {
            throw BackendError(BackendError::Kind::constraint_violation,
                               "backend emitted banned token '" + t + "'");
          }
        }
      }
    } else {
      if (!j.contains("text") || !j.at("text").is_string()) {
        throw BackendError(BackendError::Kind::malformed_response,
                           "keyword response lacks a 'text' string");
      }
      out.text = j.at("text").get<std::string>();
      for (const auto& t : tokenize(out.text).tokens) {
        if (req.constraints.is_banned(t)) {
          throw BackendError(BackendError::Kind::constraint_violation,
                             "backend emitted banned token '" + t + "'");
        }
      }
    }
    return out;
  }

  RemoteConfig config_;
  std::string base_;
  std::string path_;
};

}  // namespace advneg
