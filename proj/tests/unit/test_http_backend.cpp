// Copyright 2026 The Contrastive Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <atomic>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>

#include "test_support.hpp"

namespace contrastive {
namespace {

/// In-process model server answering with the stub's closed forms.
class FakeServer {
 public:
  explicit FakeServer(int busy_first = 0) : busy_left_(busy_first) {
    server_.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"status":"ok","model_names":["fake-infill","fake-lm"]})", "application/json");
    });
    server_.Post("/infill", [this](const httplib::Request& req, httplib::Response& res) {
      if (busy(res)) return;
      const auto r = wire::parse_infill_request(wire::Json::parse(req.body));
      last_prompt_ = r.prompt;
      res.set_content(wire::infill_response(stub_.infill(r)).dump(), "application/json");
    });
    server_.Post("/logprob", [this](const httplib::Request& req, httplib::Response& res) {
      if (busy(res)) return;
      ++logprob_posts_;
      const auto j = wire::Json::parse(req.body);
      if (j.contains("texts")) {
        std::vector<std::string> texts = j["texts"].get<std::vector<std::string>>();
        res.set_content(wire::logprob_batch_response(stub_.sequence_logprob_batch(texts)).dump(), "application/json");
      } else {
        res.set_content(wire::logprob_result(stub_.sequence_logprob(j["text"].get<std::string>())).dump(),
                        "application/json");
      }
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }

  [[nodiscard]] std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  [[nodiscard]] int logprob_posts() const { return logprob_posts_.load(); }
  [[nodiscard]] std::string last_prompt() const { return last_prompt_; }

 private:
  bool busy(httplib::Response& res) {
    if (busy_left_.fetch_sub(1) > 0) {
      res.status = 503;
      return true;
    }
    return false;
  }

  StubBackend stub_{StubOptions{{"salty"}}};
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> busy_left_;
  std::atomic<int> logprob_posts_{0};
  std::string last_prompt_;
};

HttpOptions fast(const std::string& url) {
  HttpOptions o;
  o.url = url;
  o.backoff_ms = 5;
  o.request_timeout_ms = 2000;
  o.connect_timeout_ms = 500;
  return o;
}

TEST(HttpBackend, HealthzAndIdentity) {
  FakeServer server;
  HttpBackend b(fast(server.url()));
  EXPECT_NO_THROW(b.check_ready());
  EXPECT_NE(b.identity().find("fake-infill,fake-lm"), std::string::npos);
}

TEST(HttpBackend, InfillContractTwoBlanks) {
  FakeServer server;
  HttpBackend b(fast(server.url()));
  InfillRequest req;
  req.prompt = "Fields are " + std::string(kBlank) + " while forests are " + std::string(kBlank);
  req.top_k_return = 2;
  const auto resp = b.infill(req);
  ASSERT_EQ(resp.candidates.size(), 2u);
  for (const auto& c : resp.candidates) {
    ASSERT_EQ(c.fills.size(), 2u);
    for (const auto& f : c.fills) EXPECT_FALSE(f.empty());
  }
  EXPECT_EQ(server.last_prompt(), req.prompt);
}

TEST(HttpBackend, BatchedAgreesWithSingle) {
  FakeServer server;
  HttpOptions o = fast(server.url());
  o.batch_size = 2;
  HttpBackend b(o);
  const std::vector<std::string> texts = {"a b c", "peanuts are salty", "one", "salty salty salty", "x y"};
  const auto batch = b.sequence_logprob_batch(texts);
  EXPECT_EQ(server.logprob_posts(), 3);
  ASSERT_EQ(batch.size(), texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const auto single = b.sequence_logprob(texts[i]);
    EXPECT_NEAR(batch[i].total_logprob, single.total_logprob, 1e-6);
    EXPECT_EQ(batch[i].token_count, single.token_count);
  }
  EXPECT_DOUBLE_EQ(batch[1].total_logprob, -3.1);
}

TEST(HttpBackend, RetriesOnBusy) {
  FakeServer server(2);
  HttpBackend b(fast(server.url()));
  EXPECT_EQ(b.sequence_logprob("a b c").token_count, 3u);
}

TEST(HttpBackend, GivesUpAfterRetries) {
  FakeServer server(100);
  HttpOptions o = fast(server.url());
  o.retries = 1;
  HttpBackend b(o);
  EXPECT_THROW(b.sequence_logprob("a b c"), TransportError);
}

TEST(HttpBackend, ServerDownIsTransportError) {
  int port = 0;
  {
    httplib::Server s;
    port = s.bind_to_any_port("127.0.0.1");
  }
  HttpOptions o = fast("http://127.0.0.1:" + std::to_string(port));
  o.retries = 1;
  HttpBackend b(o);
  EXPECT_THROW(b.check_ready(), TransportError);
  EXPECT_THROW(b.sequence_logprob("a"), TransportError);
}

TEST(HttpBackend, RejectsMalformedResponses) {
  httplib::Server s;
  s.Post("/logprob", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"total_logprob":-1.0,"token_count":0})", "application/json");
  });
  s.Post("/infill", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("not json", "application/json");
  });
  const int port = s.bind_to_any_port("127.0.0.1");
  std::thread t([&] { s.listen_after_bind(); });
  s.wait_until_ready();
  HttpBackend b(fast("http://127.0.0.1:" + std::to_string(port)));
  EXPECT_THROW(b.sequence_logprob("a"), ProtocolError);
  InfillRequest req;
  req.prompt = std::string(kBlank);
  EXPECT_THROW(b.infill(req), ProtocolError);
  s.stop();
  t.join();
}

TEST(HttpBackend, UrlValidation) {
  EXPECT_THROW(HttpBackend(fast("localhost:80")), ConfigError);
  EXPECT_THROW(HttpBackend(fast("http://host:1/path")), ConfigError);
  EXPECT_NO_THROW(HttpBackend(fast("http://host:1/")));
}

}  // namespace
}  // namespace contrastive
