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

// HTTP client for the model server (POST /infill, POST /logprob,
// GET /healthz). Requests are idempotent, so transport failures and 503
// responses are retried with exponential backoff.

#pragma once

#include <algorithm>
#include <chrono>
#include <mutex>
#include <semaphore>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "contrastive/common.hpp"
#include "contrastive/lm_backend.hpp"

namespace contrastive {

struct HttpOptions {
  std::string url;  // http://host:port
  int connect_timeout_ms = 2000;
  int request_timeout_ms = 60000;
  int retries = 3;
  int backoff_ms = 100;
  std::size_t batch_size = 16;
  std::ptrdiff_t max_in_flight = 8;
};

class HttpBackend final : public LmBackend {
 public:
  explicit HttpBackend(HttpOptions options)
      : options_(std::move(options)), in_flight_(std::max<std::ptrdiff_t>(1, options_.max_in_flight)) {
    const std::string_view url = options_.url;
    if (url.rfind("http://", 0) != 0) throw ConfigError("backend url must start with http://: " + options_.url);
    auto rest = url.substr(7);
    while (!rest.empty() && rest.back() == '/') rest.remove_suffix(1);
    if (rest.empty() || rest.find('/') != std::string_view::npos) {
      throw ConfigError("backend url must be http://host:port: " + options_.url);
    }
    host_port_ = std::string(rest);
    if (options_.batch_size == 0) options_.batch_size = 1;
  }

  [[nodiscard]] std::string identity() const override {
    std::lock_guard lock(mu_);
    return "http:" + host_port_ + (model_names_.empty() ? "" : "|" + model_names_);
  }

  InfillResponse infill(const InfillRequest& request) const override {
    validate(request);
    const auto body = post("/infill", wire::infill_request(request).dump());
    InfillResponse resp = wire::parse_infill_response(body);
    validate(resp, request.n_blanks(), request.top_k_return);
    return resp;
  }

  LogprobResponse sequence_logprob(std::string_view text) const override {
    if (text::trim(text).empty()) throw std::invalid_argument("sequence_logprob: empty text");
    const auto body = post("/logprob", wire::logprob_request(text).dump());
    LogprobResponse r = wire::parse_logprob_result(body);
    validate(r);
    return r;
  }

  /// Coalesces up to batch_size texts per HTTP call; order preserved.
  std::vector<LogprobResponse> sequence_logprob_batch(std::span<const std::string> texts) const override {
    std::vector<LogprobResponse> out;
    out.reserve(texts.size());
    for (std::size_t i = 0; i < texts.size(); i += options_.batch_size) {
      const auto chunk = texts.subspan(i, std::min(options_.batch_size, texts.size() - i));
      for (const auto& t : chunk) {
        if (text::trim(t).empty()) throw std::invalid_argument("sequence_logprob: empty text");
      }
      const auto body = post("/logprob", wire::logprob_batch_request(chunk).dump());
      for (auto& r : wire::parse_logprob_batch_response(body, chunk.size())) {
        validate(r);
        out.push_back(r);
      }
    }
    return out;
  }

  void check_ready() const override {
    const auto body = request_with_retry([&](httplib::Client& cli) { return cli.Get("/healthz"); }, "/healthz");
    std::string names;
    if (body.contains("model_names") && body["model_names"].is_array()) {
      for (const auto& n : body["model_names"]) {
        if (!names.empty()) names += ",";
        names += n.is_string() ? n.get<std::string>() : n.dump();
      }
    }
    std::lock_guard lock(mu_);
    model_names_ = names;
  }

  [[nodiscard]] const HttpOptions& options() const { return options_; }

 private:
  wire::Json post(const std::string& path, const std::string& payload) const {
    return request_with_retry(
        [&](httplib::Client& cli) { return cli.Post(path, payload, "application/json"); }, path);
  }

  template <typename Call>
  wire::Json request_with_retry(Call&& call, const std::string& path) const {
    std::string last_error;
    for (int attempt = 0; attempt <= options_.retries; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(options_.backoff_ms << (attempt - 1)));
      }
      httplib::Result res;
      {
        in_flight_.acquire();
        httplib::Client cli("http://" + host_port_);
        cli.set_connection_timeout(std::chrono::milliseconds(options_.connect_timeout_ms));
        cli.set_read_timeout(std::chrono::milliseconds(options_.request_timeout_ms));
        cli.set_write_timeout(std::chrono::milliseconds(options_.request_timeout_ms));
        res = call(cli);
        in_flight_.release();
      }
      if (!res) {
        last_error = path + ": " + httplib::to_string(res.error());
        spdlog::warn("backend {} attempt {} failed: {}", host_port_, attempt + 1, last_error);
        continue;
      }
      if (res->status == 503) {
        last_error = path + ": server busy (503)";
        spdlog::warn("backend {} attempt {}: {}", host_port_, attempt + 1, last_error);
        continue;
      }
      if (res->status != 200) {
        throw ProtocolError(path + ": HTTP " + std::to_string(res->status) + ": " + res->body);
      }
      try {
        return wire::Json::parse(res->body);
      } catch (const wire::Json::parse_error& e) {
        throw ProtocolError(path + ": response is not valid JSON: " + e.what());
      }
    }
    throw TransportError("backend " + host_port_ + " unavailable after " + std::to_string(options_.retries + 1) +
                         " attempts: " + last_error);
  }

  HttpOptions options_;
  std::string host_port_;
  mutable std::counting_semaphore<> in_flight_;
  mutable std::mutex mu_;
  mutable std::string model_names_;
};

}  // namespace contrastive
