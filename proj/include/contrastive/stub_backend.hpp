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

#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "contrastive/common.hpp"
#include "contrastive/hash.hpp"
#include "contrastive/lm_backend.hpp"

namespace contrastive {

struct StubOptions {
  /// Marker words or phrases. Each occurrence (case-insensitive, whole words,
  /// punctuation ignored) lowers the total log-probability by marker_weight.
  std::vector<std::string> markers;
  double marker_weight = 0.1;
};

/// Deterministic backend with closed-form outputs.
///
///   sequence_logprob(t) = ( -W - marker_weight * M , W )
///
/// where W is the number of whitespace-separated words and M the number of
/// marker occurrences. Infill fills blank i with "<prefix>_<word>", word being
/// the nearest non-function word before the blank, lowercased. Candidate r uses
/// prefix alpha, beta, gamma, delta and scores -(r + 1).
class StubBackend final : public LmBackend {
 public:
  static constexpr std::array<std::string_view, 4> kPrefixes = {"alpha", "beta", "gamma", "delta"};

  explicit StubBackend(StubOptions options = {}) : options_(std::move(options)) {
    for (const auto& m : options_.markers) {
      auto words = text::split_words(m);
      std::vector<std::string> norm;
      for (const auto& w : words) norm.push_back(text::normalize_token(w));
      if (!norm.empty()) marker_tokens_.push_back(std::move(norm));
    }
  }

  [[nodiscard]] std::string identity() const override {
    std::string id = "stub:v1:w=" + std::to_string(options_.marker_weight);
    for (const auto& m : options_.markers) id += "|" + text::to_lower(m);
    return id;
  }

  InfillResponse infill(const InfillRequest& request) const override {
    ++infill_calls_;
    validate(request);
    const auto heads = blank_heads(request.prompt);
    const std::size_t n = std::min({request.top_k_return, request.beam_size, kPrefixes.size()});
    InfillResponse resp;
    for (std::size_t r = 0; r < n; ++r) {
      FillCandidate c;
      for (const auto& h : heads) c.fills.push_back(std::string(kPrefixes[r]) + "_" + h);
      c.score = -static_cast<double>(r + 1);
      resp.candidates.push_back(std::move(c));
    }
    return resp;
  }

  LogprobResponse sequence_logprob(std::string_view text) const override {
    ++logprob_calls_;
    const auto words = text::split_words(text);
    if (words.empty()) throw std::invalid_argument("sequence_logprob: empty text");
    std::vector<std::string> norm;
    norm.reserve(words.size());
    for (const auto& w : words) norm.push_back(text::normalize_token(w));
    const auto m = static_cast<double>(marker_count(norm));
    return {-static_cast<double>(words.size()) - options_.marker_weight * m, words.size(), false};
  }

  [[nodiscard]] bool supports_candidate_scoring() const override { return false; }

  [[nodiscard]] std::size_t infill_calls() const { return infill_calls_.load(); }
  [[nodiscard]] std::size_t logprob_calls() const { return logprob_calls_.load(); }
  [[nodiscard]] const StubOptions& options() const { return options_; }

  /// Nearest preceding content word for every blank marker in the prompt.
  static std::vector<std::string> blank_heads(std::string_view prompt) {
    static const std::unordered_set<std::string> function_words = {
        "a",     "an",      "and",    "are",   "as",     "away",   "be",     "because", "but",
        "by",    "can",     "can't",  "cannot", "cause", "causes", "closer", "defined", "do",
        "does",  "doesn't", "for",    "from",  "has",    "have",   "however", "in",     "is",
        "it",    "like",    "likes",  "longer", "made",  "means",  "not",    "of",      "or",
        "prefer", "prefers", "results", "since", "takes", "than",  "the",    "think",   "thinks",
        "to",    "used",    "was",    "were",  "while",  "farther", "happened", "time", "exists"};
    std::vector<std::string> heads;
    std::vector<std::string> seen;  // normalized content words so far
    std::size_t pos = 0;
    while (pos <= prompt.size()) {
      const auto next = prompt.find(kBlank, pos);
      const auto chunk = prompt.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos);
      for (const auto& w : text::split_words(chunk)) {
        auto n = text::normalize_token(w);
        if (!n.empty() && !function_words.count(n)) seen.push_back(std::move(n));
      }
      if (next == std::string_view::npos) break;
      heads.push_back(seen.empty() ? std::string("blank") : seen.back());
      pos = next + kBlank.size();
    }
    return heads;
  }

 private:
  std::size_t marker_count(const std::vector<std::string>& words) const {
    std::size_t count = 0;
    for (const auto& marker : marker_tokens_) {
      if (marker.size() > words.size()) continue;
      for (std::size_t i = 0; i + marker.size() <= words.size(); ++i) {
        if (std::equal(marker.begin(), marker.end(), words.begin() + static_cast<std::ptrdiff_t>(i))) ++count;
      }
    }
    return count;
  }

  StubOptions options_;
  std::vector<std::vector<std::string>> marker_tokens_;
  mutable std::atomic<std::size_t> infill_calls_{0};
  mutable std::atomic<std::size_t> logprob_calls_{0};
};

}  // namespace contrastive
