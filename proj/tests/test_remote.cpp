#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include "fraudgraph/remote.hpp"

using namespace fraudgraph;

namespace {

// Local endpoint whose first `failures` requests answer with `fail_status`.
class LocalServer {
 public:
  explicit LocalServer(int failures = 0, int fail_status = 503) : failures_(failures), fail_status_(fail_status) {
    svr_.Post("/v1/complete", [this](const httplib::Request& req, httplib::Response& res) {
      const int n = ++hits;
      last_auth = req.get_header_value("Authorization");
      last_body = req.body;
      if (n <= failures_) {
        res.status = fail_status_;
        return;
      }
      auto j = nlohmann::json::parse(req.body);
      nlohmann::json out{{"text", "Echo " + j["model"].get<std::string>() + "."}};
      if (j["logprobs"].get<bool>()) out["token_logprobs"] = {-0.1, -0.2};
      res.set_content(out.dump(), "application/json");
    });
    svr_.Post("/garbage", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("{not json", "application/json");
    });
    port_ = svr_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { svr_.listen_after_bind(); });
    svr_.wait_until_ready();
  }
  ~LocalServer() {
    svr_.stop();
    thread_.join();
  }

  std::string url(const std::string& path = "/v1/complete") const {
    return "http://127.0.0.1:" + std::to_string(port_) + path;
  }

  std::atomic<int> hits{0};
  std::string last_auth, last_body;

 private:
  httplib::Server svr_;
  int port_ = 0;
  std::thread thread_;
  int failures_, fail_status_;
};

RemoteConfig config_for(const std::string& url) {
  RemoteConfig c;
  c.url = url;
  c.timeout_seconds = 5;
  c.backoff_initial_ms = 1;
  return c;
}

}  // namespace

TEST(RemoteSummarizer, Success) {
  LocalServer srv;
  auto cfg = config_for(srv.url());
  cfg.auth_token = "secret";
  RemoteSummarizer r(cfg);
  auto c = r.complete({"", "prompt text", 64, 0.0, true});
  EXPECT_EQ(c.text, "Echo forensic-analyst.");
  ASSERT_TRUE(c.token_logprobs);
  EXPECT_EQ(c.token_logprobs->size(), 2u);
  EXPECT_EQ(srv.hits.load(), 1);
  EXPECT_EQ(srv.last_auth, "Bearer secret");
  auto body = nlohmann::json::parse(srv.last_body);
  EXPECT_EQ(body["prompt"], "prompt text");
  EXPECT_EQ(body["max_tokens"], 64);
  EXPECT_FALSE(r.complete({"m", "p", 8, 0.0, false}).token_logprobs);
  EXPECT_EQ(r.tag(), "remote");
}

TEST(RemoteSummarizer, RetriesTransientFailures) {
  LocalServer srv(2, 503);
  RemoteSummarizer r(config_for(srv.url()));
  auto c = r.complete({"m", "p", 8, 0.0, false});
  EXPECT_EQ(c.text, "Echo m.");
  EXPECT_EQ(srv.hits.load(), 3);
}

TEST(RemoteSummarizer, GivesUpAfterRetryBudget) {
  LocalServer srv(100, 500);
  auto cfg = config_for(srv.url());
  cfg.max_retries = 2;
  RemoteSummarizer r(cfg);
  try {
    r.complete({"m", "p", 8, 0.0, false});
    FAIL() << "expected BackendError";
  } catch (const BackendError& e) {
    EXPECT_EQ(e.attempts(), 3);
    EXPECT_NE(std::string(e.what()).find("HTTP 500"), std::string::npos);
  }
  EXPECT_EQ(srv.hits.load(), 3);
}

TEST(RemoteSummarizer, ClientErrorIsNotRetried) {
  LocalServer srv(100, 401);
  RemoteSummarizer r(config_for(srv.url()));
  try {
    r.complete({"m", "p", 8, 0.0, false});
    FAIL() << "expected BackendError";
  } catch (const BackendError& e) {
    EXPECT_EQ(e.attempts(), 1);
  }
  EXPECT_EQ(srv.hits.load(), 1);
}

TEST(RemoteSummarizer, RateLimitIsRetried) {
  LocalServer srv(1, 429);
  RemoteSummarizer r(config_for(srv.url()));
  EXPECT_EQ(r.complete({"m", "p", 8, 0.0, false}).text, "Echo m.");
  EXPECT_EQ(srv.hits.load(), 2);
}

TEST(RemoteSummarizer, MalformedResponse) {
  LocalServer srv;
  auto cfg = config_for(srv.url("/garbage"));
  cfg.max_retries = 0;
  RemoteSummarizer r(cfg);
  EXPECT_THROW(r.complete({"m", "p", 8, 0.0, false}), BackendError);
  EXPECT_THROW(decode_completion_response("{\"other\": 1}"), DataError);
  EXPECT_THROW(decode_completion_response("[]"), DataError);
}

TEST(RemoteSummarizer, UnreachableEndpoint) {
  auto cfg = config_for("http://127.0.0.1:1/x");
  cfg.max_retries = 1;
  cfg.timeout_seconds = 1;
  RemoteSummarizer r(cfg);
  try {
    r.complete({"m", "p", 8, 0.0, false});
    FAIL() << "expected BackendError";
  } catch (const BackendError& e) {
    EXPECT_EQ(e.attempts(), 2);
  }
}

TEST(RemoteSummarizer, ConfigValidation) {
  EXPECT_THROW(RemoteSummarizer(config_for("ftp://host/x")), ConfigError);
  EXPECT_THROW(RemoteSummarizer(config_for("not a url")), ConfigError);
  auto cfg = config_for("http://localhost:8080");
  cfg.max_retries = -1;
  EXPECT_THROW(RemoteSummarizer{cfg}, ConfigError);
  auto u = parse_endpoint_url("https://api.example.com:8443/v1/complete");
  EXPECT_EQ(u.scheme_host_port, "https://api.example.com:8443");
  EXPECT_EQ(u.path, "/v1/complete");
  EXPECT_EQ(parse_endpoint_url("http://h").path, "/");
}
