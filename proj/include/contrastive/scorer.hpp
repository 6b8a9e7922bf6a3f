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

// Task-model scoring.
//
//   phi(c, a, e) = log P_LM(c_a + " " + e) / k     k = token count of the text
//   zero-shot:    argmax_a  sum_j phi(c, a, e_j)    (ties -> first answer)
//   marginal:     P(a) = sum_j exp(phi(c, a, e_j)) / Z

#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "contrastive/common.hpp"
#include "contrastive/lm_backend.hpp"

namespace contrastive {

enum class ScoringMode { ContextOnly, ZeroShot, Flipped, Abstracted };

inline std::string_view to_string(ScoringMode m) {
  switch (m) {
    case ScoringMode::ContextOnly: return "context-only";
    case ScoringMode::ZeroShot: return "zeroshot";
    case ScoringMode::Flipped: return "flipped";
    case ScoringMode::Abstracted: return "abstracted";
  }
  return "?";
}

/// phi values for one instance: rows are answers, columns explanations.
struct ScoreMatrix {
  std::string instance_id;
  std::array<std::vector<double>, 2> phi;
  std::vector<std::string> explanation_ids;
  std::array<std::vector<std::size_t>, 2> token_counts;

  [[nodiscard]] std::size_t n() const { return explanation_ids.size(); }
};

inline void validate(const ScoreMatrix& m) {
  const std::size_t n = m.n();
  if (n == 0) throw std::invalid_argument(m.instance_id + ": score matrix has no explanations");
  for (std::size_t r = 0; r < 2; ++r) {
    if (m.phi[r].size() != n) throw std::invalid_argument(m.instance_id + ": ragged score matrix");
    for (double v : m.phi[r]) {
      if (!std::isfinite(v)) throw std::invalid_argument(m.instance_id + ": non-finite phi");
    }
  }
}

struct Prediction {
  std::string instance_id;
  Answer chosen = Answer::first;
  std::array<double, 2> aggregate{};
  std::array<double, 2> marginal{};
  ScoringMode mode = ScoringMode::ZeroShot;
  std::optional<Answer> gold;

  [[nodiscard]] double margin() const { return aggregate[0] - aggregate[1]; }
};

/// Length-normalized score of one backend response.
inline double normalized_score(const LogprobResponse& r) {
  validate(r);
  const double v = r.total_logprob / static_cast<double>(r.token_count);
  if (!std::isfinite(v)) throw ProtocolError("normalized score is not finite");
  return v;
}

/// Text the task model scores for (c_a, e).
inline std::string scored_text(std::string_view c_a, std::string_view explanation) {
  if (explanation.empty()) return std::string(c_a);
  std::string s(c_a);
  s += ' ';
  s += explanation;
  return s;
}

inline double phi(std::string_view c_a, std::string_view explanation, const LmBackend& backend) {
  if (text::trim(c_a).empty()) throw std::invalid_argument("phi: empty context");
  return normalized_score(backend.sequence_logprob(scored_text(c_a, explanation)));
}

inline double context_only_score(std::string_view c_a, const LmBackend& backend) {
  if (text::trim(c_a).empty()) throw std::invalid_argument("context_only_score: empty context");
  return normalized_score(backend.sequence_logprob(c_a));
}

/// Fills a ScoreMatrix with one batched backend call (answer-major order).
inline ScoreMatrix score_matrix(std::string_view instance_id, const std::array<std::string, 2>& contexts,
                                std::span<const std::string> explanation_texts,
                                std::span<const std::string> explanation_ids, const LmBackend& backend) {
  if (explanation_texts.size() != explanation_ids.size()) throw std::invalid_argument("score_matrix: id count");
  ScoreMatrix m;
  m.instance_id = std::string(instance_id);
  m.explanation_ids.assign(explanation_ids.begin(), explanation_ids.end());
  std::vector<std::string> texts;
  texts.reserve(2 * explanation_texts.size());
  for (std::size_t r = 0; r < 2; ++r) {
    for (const auto& e : explanation_texts) texts.push_back(scored_text(contexts[r], e));
  }
  const auto responses = backend.sequence_logprob_batch(texts);
  if (responses.size() != texts.size()) throw ProtocolError("batched logprob size mismatch");
  const std::size_t n = explanation_texts.size();
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t j = 0; j < n; ++j) {
      const auto& resp = responses[r * n + j];
      m.phi[r].push_back(normalized_score(resp));
      m.token_counts[r].push_back(resp.token_count);
    }
  }
  validate(m);
  return m;
}

/// Stable two-way softmax over log-sum-exp of each row.
inline std::array<double, 2> marginal_prob(const ScoreMatrix& m) {
  validate(m);
  double mx = -std::numeric_limits<double>::infinity();
  for (const auto& row : m.phi) {
    for (double v : row) mx = std::max(mx, v);
  }
  std::array<double, 2> s{};
  for (std::size_t r = 0; r < 2; ++r) {
    for (double v : m.phi[r]) s[r] += std::exp(v - mx);
  }
  const double z = s[0] + s[1];
  return {s[0] / z, s[1] / z};
}

inline Answer argmax_first_on_tie(const std::array<double, 2>& v) {
  return v[1] > v[0] ? Answer::second : Answer::first;
}

inline Prediction aggregate_zero_shot(const ScoreMatrix& m, ScoringMode mode = ScoringMode::ZeroShot) {
  validate(m);
  Prediction p;
  p.instance_id = m.instance_id;
  p.mode = mode;
  for (std::size_t r = 0; r < 2; ++r) p.aggregate[r] = std::accumulate(m.phi[r].begin(), m.phi[r].end(), 0.0);
  p.chosen = argmax_first_on_tie(p.aggregate);
  p.marginal = marginal_prob(m);
  return p;
}

/// Context-only prediction from the two per-answer scores.
inline Prediction predict_context_only(std::string_view instance_id, double score1, double score2) {
  ScoreMatrix m;
  m.instance_id = std::string(instance_id);
  m.phi = {std::vector<double>{score1}, std::vector<double>{score2}};
  m.explanation_ids = {""};
  m.token_counts = {std::vector<std::size_t>{1}, std::vector<std::size_t>{1}};
  return aggregate_zero_shot(m, ScoringMode::ContextOnly);
}

/// -log P(gold). Throws std::invalid_argument when gold is unknown.
inline double cross_entropy(const std::array<double, 2>& marginal, std::optional<Answer> gold) {
  if (!gold) throw std::invalid_argument("cross_entropy: gold answer unknown");
  return -std::log(marginal[row(*gold)]);
}

inline double mean_cross_entropy(std::span<const double> losses) {
  if (losses.empty()) throw std::invalid_argument("mean_cross_entropy: no losses");
  return std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(losses.size());
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::ordered_json to_json(const ScoreMatrix& m) {
  nlohmann::ordered_json j;
  j["instance_id"] = m.instance_id;
  j["explanation_ids"] = m.explanation_ids;
  j["phi"] = {m.phi[0], m.phi[1]};
  j["token_counts"] = {m.token_counts[0], m.token_counts[1]};
  return j;
}

inline nlohmann::ordered_json to_json(const Prediction& p) {
  nlohmann::ordered_json j;
  j["id"] = p.instance_id;
  j["mode"] = to_string(p.mode);
  j["chosen"] = to_int(p.chosen);
  j["gold"] = p.gold ? nlohmann::ordered_json(to_int(*p.gold)) : nlohmann::ordered_json(nullptr);
  j["aggregate"] = p.aggregate;
  j["marginal"] = p.marginal;
  return j;
}

}  // namespace contrastive
