#pragma once

// HTTP summarizer backend. Define CPPHTTPLIB_OPENSSL_SUPPORT (and link
// OpenSSL) before including this header to reach https endpoints.

#include <chrono>
#include <regex>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "fraudgraph/common.hpp"
#include "fraudgraph/summary.hpp"

namespace fraudgraph {

struct RemoteConfig {
  std::string url;  // scheme://host[:port]/path
  std::string auth_token;
  std::string model = "forensic-analyst";
  int timeout_seconds = 60;
  int max_retries = 3;
  int backoff_initial_ms = 250;
};

struct ParsedUrl {
  std::string scheme_host_port;
  std::string path;
};

inline ParsedUrl parse_endpoint_url(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) throw ConfigError("invalid remote summarizer url '" + url + "'");
  return {m[1].str(), m[2].matched ? m[2].str() : std::string("/")};
}

// Wire format: POST {model, prompt, max_tokens, temperature, logprobs}
//              -> {text, token_logprobs?}
inline std::string encode_completion_request(const CompletionRequest& req) {
  return nlohmann::json{{"model", req.model},
                        {"prompt", req.prompt},
                        {"max_tokens", req.max_tokens},
                        {"temperature", req.temperature},
                        {"logprobs", req.logprobs}}
      .dump();
}

inline Completion decode_completion_response(const std::string& body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed summarizer response: ") + e.what());
  }
  if (!j.is_object() || !j.contains("text") || !j["text"].is_string())
    throw DataError("summarizer response lacks a text field");
  Completion c;
  c.text = j["text"].get<std::string>();
  if (j.contains("token_logprobs") && !j["token_logprobs"].is_null())
    c.token_logprobs = j["token_logprobs"].get<std::vector<double>>();
  return c;
}

class RemoteSummarizer : public Summarizer {
 public:
  explicit RemoteSummarizer(RemoteConfig cfg) : cfg_(std::move(cfg)), url_(parse_endpoint_url(cfg_.url)) {
    if (cfg_.max_retries < 0) throw ConfigError("max_retries must be >= 0");
  }

  Completion complete(const CompletionRequest& in) override {
    CompletionRequest req = in;
    if (req.model.empty()) req.model = cfg_.model;
    const std::string body = encode_completion_request(req);
    std::string last_error;
    int delay_ms = cfg_.backoff_initial_ms;
    const int attempts = cfg_.max_retries + 1;
    for (int attempt = 1; attempt <= attempts; ++attempt) {
      httplib::Client cli(url_.scheme_host_port);
      cli.set_connection_timeout(cfg_.timeout_seconds, 0);
      cli.set_read_timeout(cfg_.timeout_seconds, 0);
      cli.set_write_timeout(cfg_.timeout_seconds, 0);
      httplib::Headers headers;
      if (!cfg_.auth_token.empty()) headers.emplace("Authorization", "Bearer " + cfg_.auth_token);
      auto res = cli.Post(url_.path, headers, body, "application/json");
      if (res && res->status == 200) {
        try {
          return decode_completion_response(res->body);
        } catch (const DataError& e) {
          last_error = e.what();
        }
      } else if (res) {
        last_error = "HTTP " + std::to_string(res->status);
        if (res->status >= 400 && res->status < 500 && res->status != 408 && res->status != 429)
          throw BackendError(last_error, attempt);
      } else {
        last_error = httplib::to_string(res.error());
      }
      if (attempt < attempts) {
        std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
        delay_ms *= 2;
      }
    }
    throw BackendError(last_error, attempts);
  }

  std::string tag() const override { return "remote"; }

 private:
  RemoteConfig cfg_;
  ParsedUrl url_;
};

}  // namespace fraudgraph
