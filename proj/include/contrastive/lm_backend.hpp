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

// Language-model backend contract: blank infilling and sequence scoring.
// Log-probabilities are natural-log throughout.

#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "contrastive/common.hpp"

namespace contrastive {

struct InfillRequest {
  std::string prompt;
  std::size_t max_fill_tokens = 20;
  std::size_t beam_size = 200;
  std::size_t top_k_return = 1;

  [[nodiscard]] std::size_t n_blanks() const { return text::count_occurrences(prompt, kBlank); }
};

/// Throws std::invalid_argument when a request breaks its invariants.
inline void validate(const InfillRequest& r) {
  if (r.n_blanks() == 0) throw std::invalid_argument("infill request has no blank markers");
  if (r.max_fill_tokens == 0) throw std::invalid_argument("max_fill_tokens must be positive");
  if (r.beam_size == 0) throw std::invalid_argument("beam_size must be positive");
  if (r.top_k_return == 0) throw std::invalid_argument("top_k_return must be positive");
  if (r.top_k_return > r.beam_size) throw std::invalid_argument("top_k_return exceeds beam_size");
}

struct FillCandidate {
  std::vector<std::string> fills;
  double score = 0.0;
  bool operator==(const FillCandidate&) const = default;
};

struct InfillResponse {
  std::vector<FillCandidate> candidates;
  bool operator==(const InfillResponse&) const = default;
};

struct LogprobResponse {
  double total_logprob = 0.0;
  std::size_t token_count = 1;
  bool truncated = false;
  bool operator==(const LogprobResponse&) const = default;
};

/// Rejects (never repairs) a response that breaks the contract for a request
/// with `n_blanks` blanks asking for at most `top_k` candidates.
inline void validate(const InfillResponse& r, std::size_t n_blanks, std::size_t top_k) {
  if (r.candidates.empty()) throw EmptyGenerationError("infill returned no candidates");
  if (r.candidates.size() > top_k) {
    throw ProtocolError("infill returned " + std::to_string(r.candidates.size()) + " candidates, asked for " +
                        std::to_string(top_k));
  }
  for (std::size_t i = 0; i < r.candidates.size(); ++i) {
    const auto& c = r.candidates[i];
    if (!std::isfinite(c.score)) throw ProtocolError("infill candidate score is not finite");
    if (c.fills.size() != n_blanks) {
      throw ProtocolError("infill candidate has " + std::to_string(c.fills.size()) + " fills, expected " +
                          std::to_string(n_blanks));
    }
    for (const auto& f : c.fills) {
      if (f.find(kBlank) != std::string::npos) throw ProtocolError("infill fill contains a blank marker");
    }
    if (i > 0 && c.score > r.candidates[i - 1].score) throw ProtocolError("infill candidates not sorted by score");
  }
}

inline void validate(const LogprobResponse& r) {
  if (r.token_count < 1) throw ProtocolError("logprob token_count must be >= 1");
  if (!std::isfinite(r.total_logprob)) throw ProtocolError("logprob total is not finite");
  if (r.total_logprob > 0.0) throw ProtocolError("logprob total is positive");
}

/// Backend interface. Implementations must be safe to call concurrently.
class LmBackend {
 public:
  virtual ~LmBackend() = default;

  /// Stable description of the model(s) behind this backend; part of cache keys.
  [[nodiscard]] virtual std::string identity() const = 0;

  virtual InfillResponse infill(const InfillRequest& request) const = 0;

  virtual LogprobResponse sequence_logprob(std::string_view text) const = 0;

  /// Order-preserving batch scoring. The default scores one text at a time.
  virtual std::vector<LogprobResponse> sequence_logprob_batch(std::span<const std::string> texts) const {
    std::vector<LogprobResponse> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(sequence_logprob(t));
    return out;
  }

  /// Whether sequence scores can rank candidate fillers (used for picking a
  /// neutral pronoun). The stub cannot.
  [[nodiscard]] virtual bool supports_candidate_scoring() const { return true; }

  [[nodiscard]] virtual bool deterministic() const { return true; }

  /// Throws BackendError when the backend cannot serve requests.
  virtual void check_ready() const {}
};

// ---------------------------------------------------------------------------
// Wire format shared with the model server. Field order is fixed.

namespace wire {

using Json = nlohmann::ordered_json;

inline Json infill_request(const InfillRequest& r) {
  Json j;
  j["prompt"] = r.prompt;
  j["n_blanks"] = r.n_blanks();
  j["max_fill_tokens"] = r.max_fill_tokens;
  j["beam_size"] = r.beam_size;
  j["top_k_return"] = r.top_k_return;
  return j;
}

inline InfillRequest parse_infill_request(const Json& j) {
  try {
    InfillRequest r;
    r.prompt = j.at("prompt").get<std::string>();
    r.max_fill_tokens = j.at("max_fill_tokens").get<std::size_t>();
    r.beam_size = j.at("beam_size").get<std::size_t>();
    r.top_k_return = j.at("top_k_return").get<std::size_t>();
    if (j.at("n_blanks").get<std::size_t>() != r.n_blanks()) throw ProtocolError("n_blanks does not match prompt");
    return r;
  } catch (const Json::exception& e) {
    throw ProtocolError(std::string("malformed infill request: ") + e.what());
  }
}

inline Json infill_response(const InfillResponse& r) {
  Json cands = Json::array();
  for (const auto& c : r.candidates) {
    Json cj;
    cj["fills"] = c.fills;
    cj["score"] = c.score;
    cands.push_back(std::move(cj));
  }
  Json j;
  j["candidates"] = std::move(cands);
  return j;
}

inline InfillResponse parse_infill_response(const Json& j) {
  try {
    InfillResponse r;
    for (const auto& c : j.at("candidates")) {
      FillCandidate fc;
      for (const auto& f : c.at("fills")) fc.fills.push_back(f.get<std::string>());
      fc.score = c.at("score").get<double>();
      r.candidates.push_back(std::move(fc));
    }
    return r;
  } catch (const Json::exception& e) {
    throw ProtocolError(std::string("malformed infill response: ") + e.what());
  }
}

inline Json logprob_request(std::string_view text) {
  Json j;
  j["text"] = std::string(text);
  return j;
}

inline Json logprob_batch_request(std::span<const std::string> texts) {
  Json j;
  j["texts"] = Json::array();
  for (const auto& t : texts) j["texts"].push_back(t);
  return j;
}

inline Json logprob_result(const LogprobResponse& r) {
  Json j;
  j["total_logprob"] = r.total_logprob;
  j["token_count"] = r.token_count;
  if (r.truncated) j["truncated"] = true;
  return j;
}

inline Json logprob_batch_response(std::span<const LogprobResponse> rs) {
  Json j;
  j["results"] = Json::array();
  for (const auto& r : rs) j["results"].push_back(logprob_result(r));
  return j;
}

inline LogprobResponse parse_logprob_result(const Json& j) {
  try {
    LogprobResponse r;
    r.total_logprob = j.at("total_logprob").get<double>();
    const auto& tc = j.at("token_count");
    if (!tc.is_number_integer()) throw ProtocolError("token_count must be an integer");
    const auto n = tc.get<long long>();
    if (n < 1) throw ProtocolError("logprob token_count must be >= 1");
    r.token_count = static_cast<std::size_t>(n);
    r.truncated = j.value("truncated", false);
    return r;
  } catch (const Json::exception& e) {
    throw ProtocolError(std::string("malformed logprob response: ") + e.what());
  }
}

inline std::vector<LogprobResponse> parse_logprob_batch_response(const Json& j, std::size_t expected) {
  try {
    std::vector<LogprobResponse> out;
    for (const auto& r : j.at("results")) out.push_back(parse_logprob_result(r));
    if (out.size() != expected) {
      throw ProtocolError("batched logprob returned " + std::to_string(out.size()) + " results for " +
                          std::to_string(expected) + " texts");
    }
    return out;
  } catch (const Json::exception& e) {
    throw ProtocolError(std::string("malformed batched logprob response: ") + e.what());
  }
}

}  // namespace wire
}  // namespace contrastive
