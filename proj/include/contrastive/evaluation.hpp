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

// Experiment driver: load -> filter -> customize -> explain -> score ->
// aggregate, per instance, on a bounded worker pool. Results are reduced in
// instance-id order so reports do not depend on scheduling.

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "contrastive/cache.hpp"
#include "contrastive/common.hpp"
#include "contrastive/dataset.hpp"
#include "contrastive/explainer.hpp"
#include "contrastive/hash.hpp"
#include "contrastive/http_backend.hpp"
#include "contrastive/lm_backend.hpp"
#include "contrastive/scorer.hpp"
#include "contrastive/stub_backend.hpp"
#include "contrastive/template_engine.hpp"

namespace contrastive {

using Json = nlohmann::ordered_json;

enum class AbstractionMode { None, Full, AfterExplanation };

inline std::string_view to_string(AbstractionMode m) {
  switch (m) {
    case AbstractionMode::None: return "none";
    case AbstractionMode::Full: return "full";
    case AbstractionMode::AfterExplanation: return "after-explanation";
  }
  return "?";
}

struct RunConfig {
  TaskKind task = TaskKind::winogrande;
  std::filesystem::path data;
  std::optional<std::filesystem::path> labels;
  std::filesystem::path templates;
  std::string backend = "stub";  // "stub" or http://host:port
  ScoringMode mode = ScoringMode::ZeroShot;
  AbstractionMode abstraction = AbstractionMode::None;
  std::uint64_t seed = 0;
  std::size_t top_k = 1;
  std::filesystem::path out;
  std::optional<std::filesystem::path> cache;
  std::size_t workers = 1;
  StubOptions stub;
  HttpOptions http;
};

/// Rejects inconsistent mode/abstraction combinations before any I/O.
inline void validate(const RunConfig& c) {
  if (c.top_k == 0) throw ConfigError("top-k must be at least 1");
  if (c.workers == 0) throw ConfigError("workers must be at least 1");
  if (c.backend != "stub" && c.backend.rfind("http://", 0) != 0) {
    throw ConfigError("backend must be 'stub' or an http:// url: " + c.backend);
  }
  switch (c.mode) {
    case ScoringMode::ContextOnly:
      if (c.abstraction == AbstractionMode::AfterExplanation) {
        throw ConfigError("context-only scoring has no explanation to abstract after");
      }
      break;
    case ScoringMode::ZeroShot:
    case ScoringMode::Flipped:
      if (c.abstraction != AbstractionMode::None) {
        throw ConfigError(std::string(to_string(c.mode)) + " mode does not take an abstraction setting");
      }
      break;
    case ScoringMode::Abstracted:
      if (c.abstraction == AbstractionMode::None) throw ConfigError("abstracted mode needs full or after-explanation");
      break;
  }
}

/// CLI mode names.
inline std::pair<ScoringMode, AbstractionMode> parse_mode(std::string_view s) {
  if (s == "context-only") return {ScoringMode::ContextOnly, AbstractionMode::None};
  if (s == "zeroshot") return {ScoringMode::ZeroShot, AbstractionMode::None};
  if (s == "flip") return {ScoringMode::Flipped, AbstractionMode::None};
  if (s == "abstract-full") return {ScoringMode::Abstracted, AbstractionMode::Full};
  if (s == "abstract-after") return {ScoringMode::Abstracted, AbstractionMode::AfterExplanation};
  throw ConfigError("unknown mode: " + std::string(s));
}

// ---------------------------------------------------------------------------
// Per-instance evaluation

struct EvalSettings {
  ScoringMode mode = ScoringMode::ZeroShot;
  AbstractionMode abstraction = AbstractionMode::None;
  std::uint64_t seed = 0;
  GenerationOptions generation;
};

enum class FailureKind { Data, Backend, Other };

inline std::string_view to_string(FailureKind k) {
  switch (k) {
    case FailureKind::Data: return "data";
    case FailureKind::Backend: return "backend";
    case FailureKind::Other: return "other";
  }
  return "?";
}

struct InstanceFailure {
  std::string id;
  FailureKind kind = FailureKind::Other;
  std::string message;
};

struct InstanceResult {
  std::string id;
  std::optional<Prediction> prediction;
  std::optional<ScoreMatrix> matrix;
  std::optional<InstanceFailure> failure;
  std::size_t n_skipped_templates = 0;
  Json instance;  // resolved audit record
  Json trace;
};

namespace detail {

inline Json skipped_record(std::string_view template_id, std::string_view reason) {
  Json j;
  j["template_id"] = template_id;
  j["reason"] = reason;
  return j;
}

inline InstanceFeatures features_of(const Instance& in, const PersonDetector& detector) {
  InstanceFeatures f;
  f.task_kind = in.task_kind;
  f.has_person_entity = in.has_person.value_or(detector.has_person(in.context, in.a1, in.a2));
  f.answer_numbers = {detect_number(in.a1), detect_number(in.a2)};
  return f;
}

inline void score_explained(const Instance& in, const Contexts& ctx, std::span<const Template> templates,
                            const LmBackend& backend, const EvalSettings& s, InstanceResult& r) {
  const bool full = s.abstraction == AbstractionMode::Full;
  const bool masked_scoring = s.abstraction != AbstractionMode::None;
  const std::string explainer_context = full ? mask_answers(ctx.c_a0, in.a1, in.a2) : ctx.c_a0;
  const std::string ea1 = full ? std::string(kMask1) : in.a1;
  const std::string ea2 = full ? std::string(kMask2) : in.a2;

  std::vector<Explanation> explanations;
  Json skipped = Json::array();
  for (const auto& t : templates) {
    std::mt19937_64 rng(derive_seed(s.seed, in.id, t.id));
    GenerationOutcome g = generate_explanations(in.id, explainer_context, ea1, ea2, t, backend, rng, s.generation);
    if (g.skipped) {
      skipped.push_back(skipped_record(t.id, *g.skipped));
      continue;
    }
    for (auto& e : g.explanations) {
      if (s.mode == ScoringMode::Flipped) {
        try {
          e = flip_explanation(e);
        } catch (const std::invalid_argument& ex) {
          skipped.push_back(skipped_record(e.id(), ex.what()));
          continue;
        }
      } else if (s.abstraction == AbstractionMode::AfterExplanation) {
        e = abstract_explanation(e);
      } else if (full) {
        e.variant = Variant::Abstracted;
      }
      explanations.push_back(std::move(e));
    }
  }
  r.n_skipped_templates = skipped.size();
  r.trace["skipped"] = skipped;

  std::array<std::string, 2> scored = {ctx.c_a1, ctx.c_a2};
  if (masked_scoring) {
    for (auto& c : scored) c = mask_answers(c, in.a1, in.a2);
  }
  r.trace["explainer_context"] = explainer_context;
  r.trace["scored_contexts"] = scored;
  Json ej = Json::array();
  for (const auto& e : explanations) ej.push_back(to_json(e));
  r.trace["explanations"] = ej;
  if (explanations.empty()) throw DataError(in.id + ": no explanations survived generation");

  std::vector<std::string> texts;
  std::vector<std::string> ids;
  for (const auto& e : explanations) {
    texts.push_back(e.text);
    ids.push_back(e.id());
  }
  ScoreMatrix m = score_matrix(in.id, scored, texts, ids, backend);
  r.trace["scores"] = to_json(m);
  r.prediction = aggregate_zero_shot(m, s.mode);
  r.matrix = std::move(m);
}

}  // namespace detail

/// Runs one instance. Never throws; failures land in the result.
inline InstanceResult evaluate_instance(const Instance& input, std::span<const Template> catalog,
                                        const LmBackend& backend, const PersonDetector& detector,
                                        const EvalSettings& s) {
  InstanceResult r;
  r.id = input.id;
  r.trace["id"] = input.id;
  r.trace["task"] = to_string(input.task_kind);
  r.trace["mode"] = to_string(s.mode);
  r.trace["abstraction"] = to_string(s.abstraction);
  try {
    Instance in = input;
    if (!in.neutral_answer) in.neutral_answer = select_neutral_pronoun(in, backend);
    r.instance = to_json(in);
    const Contexts ctx = build_contexts(in);
    r.trace["c_a0"] = ctx.c_a0;

    if (s.mode == ScoringMode::ContextOnly) {
      std::array<std::string, 2> scored = {ctx.c_a1, ctx.c_a2};
      if (s.abstraction == AbstractionMode::Full) {
        for (auto& c : scored) c = mask_answers(c, in.a1, in.a2);
      }
      r.trace["scored_contexts"] = scored;
      ScoreMatrix m = score_matrix(in.id, scored, std::vector<std::string>{""}, std::vector<std::string>{""}, backend);
      r.trace["scores"] = to_json(m);
      r.prediction = aggregate_zero_shot(m, ScoringMode::ContextOnly);
      r.matrix = std::move(m);
    } else {
      const InstanceFeatures f = detail::features_of(in, detector);
      const auto kept = filter_templates(catalog, f);
      Json ids = Json::array();
      for (const auto& t : kept) ids.push_back(t.id);
      r.trace["has_person"] = f.has_person_entity;
      r.trace["templates"] = ids;
      detail::score_explained(in, ctx, kept, backend, s, r);
    }
    r.prediction->gold = in.gold;
    r.trace["prediction"] = to_json(*r.prediction);
  } catch (const BackendError& e) {
    r.failure = InstanceFailure{input.id, FailureKind::Backend, e.what()};
  } catch (const DataError& e) {
    r.failure = InstanceFailure{input.id, FailureKind::Data, e.what()};
  } catch (const std::invalid_argument& e) {
    r.failure = InstanceFailure{input.id, FailureKind::Data, e.what()};
  } catch (const std::exception& e) {
    r.failure = InstanceFailure{input.id, FailureKind::Other, e.what()};
  }
  if (r.failure) {
    r.prediction.reset();
    r.matrix.reset();
    r.trace["error"] = {{"kind", to_string(r.failure->kind)}, {"message", r.failure->message}};
    if (r.instance.is_null()) r.instance = to_json(input);
  }
  return r;
}

/// Evaluates instances on `workers` threads; output sorted by instance id.
inline std::vector<InstanceResult> evaluate_all(std::span<const Instance> instances, std::span<const Template> catalog,
                                                const LmBackend& backend, const PersonDetector& detector,
                                                const EvalSettings& s, std::size_t workers = 1) {
  std::vector<InstanceResult> results(instances.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next.fetch_add(1); i < instances.size(); i = next.fetch_add(1)) {
      results[i] = evaluate_instance(instances[i], catalog, backend, detector, s);
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(1, instances.size()));
  if (n_threads == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(work);
  }
  std::stable_sort(results.begin(), results.end(),
                   [](const InstanceResult& a, const InstanceResult& b) { return a.id < b.id; });
  return results;
}

// ---------------------------------------------------------------------------
// CommonsenseQA aggregation

struct PairOutcome {
  std::size_t i = 0;
  std::size_t j = 0;
  Answer chosen = Answer::first;
  std::array<double, 2> marginal{};
};

namespace detail {

/// Pairs sorted into lexicographic order, checked to cover every i < j once.
inline std::vector<PairOutcome> checked_pairs(std::span<const PairOutcome> pairs, std::size_t n_choices) {
  if (n_choices < 2) throw DataError("need at least 2 choices");
  std::vector<PairOutcome> sorted(pairs.begin(), pairs.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const PairOutcome& a, const PairOutcome& b) { return std::pair(a.i, a.j) < std::pair(b.i, b.j); });
  std::size_t k = 0;
  for (std::size_t i = 0; i < n_choices; ++i) {
    for (std::size_t j = i + 1; j < n_choices; ++j, ++k) {
      if (k >= sorted.size() || sorted[k].i != i || sorted[k].j != j) {
        throw DataError("missing or duplicate pair (" + std::to_string(i) + "," + std::to_string(j) + ")");
      }
    }
  }
  if (k != sorted.size()) throw DataError("unexpected extra pairs");
  return sorted;
}

inline std::size_t pair_winner(const PairOutcome& p) { return p.chosen == Answer::first ? p.i : p.j; }

}  // namespace detail

/// Most pairwise wins; ties go to the lower choice index.
inline std::size_t csqa_vote(std::span<const PairOutcome> pairs, std::size_t n_choices) {
  const auto sorted = detail::checked_pairs(pairs, n_choices);
  std::vector<std::size_t> votes(n_choices, 0);
  for (const auto& p : sorted) ++votes[detail::pair_winner(p)];
  return static_cast<std::size_t>(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

/// Winner of the pair whose marginals differ most. Ties go to the lower pair
/// index, then the lower choice index within the pair.
inline std::size_t csqa_max_margin(std::span<const PairOutcome> pairs, std::size_t n_choices) {
  const auto sorted = detail::checked_pairs(pairs, n_choices);
  std::size_t best = 0;
  double best_margin = -1.0;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    const double m = std::abs(sorted[k].marginal[0] - sorted[k].marginal[1]);
    if (m > best_margin) {
      best_margin = m;
      best = k;
    }
  }
  const auto& p = sorted[best];
  return p.marginal[1] > p.marginal[0] ? p.j : p.i;
}

struct CsqaDecision {
  std::string id;
  std::size_t n_choices = 0;
  std::optional<std::size_t> gold;
  std::size_t vote = 0;
  std::size_t max_margin = 0;
};

struct CsqaSummary {
  std::vector<CsqaDecision> decisions;
  std::vector<InstanceFailure> failures;
  std::optional<double> vote_accuracy;
  std::optional<double> max_margin_accuracy;
};

// ---------------------------------------------------------------------------
// Reports

struct Report {
  TaskKind task = TaskKind::winogrande;
  ScoringMode mode = ScoringMode::ZeroShot;
  AbstractionMode abstraction = AbstractionMode::None;
  std::size_t n_instances = 0;
  std::vector<Prediction> predictions;  // sorted by id
  std::vector<ScoreMatrix> matrices;
  std::vector<InstanceFailure> failures;
  std::vector<RecordError> load_errors;
  std::optional<double> accuracy;
  std::optional<double> mean_cross_entropy;
  std::size_t n_skipped_templates = 0;
  std::string fingerprint;
  double wall_seconds = 0.0;
  std::optional<CsqaSummary> csqa;
};

/// Reduces sorted per-instance results. Throws when every instance failed.
inline Report assemble_report(std::span<const InstanceResult> results, ScoringMode mode,
                              AbstractionMode abstraction) {
  Report rep;
  rep.mode = mode;
  rep.abstraction = abstraction;
  rep.n_instances = results.size();
  std::size_t n_gold = 0;
  std::size_t n_correct = 0;
  std::vector<double> losses;
  for (const auto& r : results) {
    rep.n_skipped_templates += r.n_skipped_templates;
    if (r.failure) {
      rep.failures.push_back(*r.failure);
      continue;
    }
    const Prediction& p = *r.prediction;
    rep.predictions.push_back(p);
    rep.matrices.push_back(*r.matrix);
    if (p.gold) {
      ++n_gold;
      n_correct += p.chosen == *p.gold ? 1 : 0;
      losses.push_back(cross_entropy(p.marginal, p.gold));
    }
  }
  if (!results.empty() && rep.predictions.empty()) {
    const auto& f = rep.failures.front();
    const std::string msg = "all " + std::to_string(results.size()) + " instances failed; first: " + f.id + ": " +
                            f.message;
    const bool any_backend = std::any_of(rep.failures.begin(), rep.failures.end(),
                                         [](const InstanceFailure& x) { return x.kind == FailureKind::Backend; });
    if (any_backend) throw BackendError(msg);
    throw DataError(msg);
  }
  if (n_gold > 0) {
    rep.accuracy = static_cast<double>(n_correct) / static_cast<double>(n_gold);
    rep.mean_cross_entropy = contrastive::mean_cross_entropy(losses);
  }
  return rep;
}

/// Groups pair predictions by parent question and applies Vote and
/// Maximum-Margin.
inline CsqaSummary aggregate_csqa(std::span<const MultiChoiceInstance> questions,
                                  std::span<const InstanceResult> pair_results) {
  std::map<std::string, const InstanceResult*> by_id;
  for (const auto& r : pair_results) by_id[r.id] = &r;
  CsqaSummary s;
  std::size_t n_gold = 0;
  std::size_t vote_ok = 0;
  std::size_t mm_ok = 0;
  for (const auto& q : questions) {
    std::vector<PairOutcome> pairs;
    std::optional<std::string> problem;
    for (std::size_t i = 0; i < q.choices.size() && !problem; ++i) {
      for (std::size_t j = i + 1; j < q.choices.size(); ++j) {
        const std::string pid = q.id + "/" + std::to_string(i) + "-" + std::to_string(j);
        const auto it = by_id.find(pid);
        if (it == by_id.end() || !it->second->prediction) {
          problem = "pair " + pid + " has no prediction";
          break;
        }
        const Prediction& p = *it->second->prediction;
        pairs.push_back({i, j, p.chosen, p.marginal});
      }
    }
    if (problem) {
      s.failures.push_back({q.id, FailureKind::Data, *problem});
      continue;
    }
    CsqaDecision d{q.id, q.choices.size(), q.gold, csqa_vote(pairs, q.choices.size()),
                   csqa_max_margin(pairs, q.choices.size())};
    if (d.gold) {
      ++n_gold;
      vote_ok += d.vote == *d.gold ? 1 : 0;
      mm_ok += d.max_margin == *d.gold ? 1 : 0;
    }
    s.decisions.push_back(d);
  }
  std::sort(s.decisions.begin(), s.decisions.end(),
            [](const CsqaDecision& a, const CsqaDecision& b) { return a.id < b.id; });
  if (n_gold > 0) {
    s.vote_accuracy = static_cast<double>(vote_ok) / static_cast<double>(n_gold);
    s.max_margin_accuracy = static_cast<double>(mm_ok) / static_cast<double>(n_gold);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Flip evaluation

/// 100 * (original - flipped) / original. nullopt when original is 0.
inline std::optional<double> relative_drop_percent(double acc_original, double acc_flipped) {
  if (acc_original <= 0.0) return std::nullopt;
  return 100.0 * (acc_original - acc_flipped) / acc_original;
}

struct FlipDrop {
  std::optional<double> acc_original;
  std::optional<double> acc_flipped;
  std::optional<double> relative_percent;
  std::optional<double> absolute_points;
  std::size_t n_compared = 0;
  std::size_t n_nonzero_margin = 0;
  double flip_rate = 0.0;               // over all compared instances
  double flip_rate_nonzero_margin = 0.0;  // over instances whose original margin is nonzero
};

inline FlipDrop flip_drop(const Report& original, const Report& flipped) {
  if (original.mode != ScoringMode::ZeroShot || flipped.mode != ScoringMode::Flipped) {
    throw std::invalid_argument("flip_drop expects a zeroshot report and a flipped report");
  }
  if (original.predictions.size() != flipped.predictions.size()) {
    throw DataError("flip_drop: reports cover different instance sets");
  }
  FlipDrop d;
  std::size_t flips = 0;
  std::size_t flips_nonzero = 0;
  for (std::size_t k = 0; k < original.predictions.size(); ++k) {
    const auto& a = original.predictions[k];
    const auto& b = flipped.predictions[k];
    if (a.instance_id != b.instance_id) throw DataError("flip_drop: reports cover different instance sets");
    const bool changed = a.chosen != b.chosen;
    flips += changed ? 1 : 0;
    if (a.margin() != 0.0) {
      ++d.n_nonzero_margin;
      flips_nonzero += changed ? 1 : 0;
    }
  }
  d.n_compared = original.predictions.size();
  if (d.n_compared > 0) d.flip_rate = static_cast<double>(flips) / static_cast<double>(d.n_compared);
  if (d.n_nonzero_margin > 0) {
    d.flip_rate_nonzero_margin = static_cast<double>(flips_nonzero) / static_cast<double>(d.n_nonzero_margin);
  }
  d.acc_original = original.accuracy;
  d.acc_flipped = flipped.accuracy;
  if (original.accuracy && flipped.accuracy) {
    d.relative_percent = relative_drop_percent(*original.accuracy, *flipped.accuracy);
    d.absolute_points = 100.0 * (*original.accuracy - *flipped.accuracy);
  }
  return d;
}

// ---------------------------------------------------------------------------
// Serialization

namespace detail {

inline Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

inline Json failure_json(const InstanceFailure& f) {
  Json j;
  j["type"] = "failure";
  j["id"] = f.id;
  j["kind"] = to_string(f.kind);
  j["message"] = f.message;
  return j;
}

}  // namespace detail

inline Json summary_json(const Report& r) {
  Json j;
  j["type"] = "summary";
  j["task"] = to_string(r.task);
  j["mode"] = to_string(r.mode);
  j["abstraction"] = to_string(r.abstraction);
  j["n_instances"] = r.n_instances;
  j["n_predicted"] = r.predictions.size();
  j["n_failed"] = r.failures.size();
  j["n_load_errors"] = r.load_errors.size();
  j["accuracy"] = detail::optional_number(r.accuracy);
  j["mean_cross_entropy"] = detail::optional_number(r.mean_cross_entropy);
  j["n_skipped_templates"] = r.n_skipped_templates;
  j["fingerprint"] = r.fingerprint;
  if (r.csqa) {
    j["csqa_vote_accuracy"] = detail::optional_number(r.csqa->vote_accuracy);
    j["csqa_max_margin_accuracy"] = detail::optional_number(r.csqa->max_margin_accuracy);
  }
  return j;
}

inline Json to_json(const FlipDrop& d) {
  Json j;
  j["type"] = "flip_drop";
  j["acc_original"] = detail::optional_number(d.acc_original);
  j["acc_flipped"] = detail::optional_number(d.acc_flipped);
  j["relative_percent"] = detail::optional_number(d.relative_percent);
  j["absolute_points"] = detail::optional_number(d.absolute_points);
  j["n_compared"] = d.n_compared;
  j["n_nonzero_margin"] = d.n_nonzero_margin;
  j["flip_rate"] = d.flip_rate;
  j["flip_rate_nonzero_margin"] = d.flip_rate_nonzero_margin;
  return j;
}

/// Machine-readable report: summary line, then predictions, failures and
/// CSQA decisions, one record per line.
inline std::string report_jsonl(const Report& r) {
  std::string out = summary_json(r).dump() + "\n";
  for (const auto& p : r.predictions) {
    Json j;
    j["type"] = "prediction";
    const Json fields = to_json(p);
    for (const auto& [k, v] : fields.items()) j[k] = v;
    out += j.dump() + "\n";
  }
  for (const auto& f : r.failures) out += detail::failure_json(f).dump() + "\n";
  for (const auto& e : r.load_errors) {
    Json j;
    j["type"] = "load_error";
    j["line"] = e.line;
    j["message"] = e.message;
    out += j.dump() + "\n";
  }
  if (r.csqa) {
    for (const auto& d : r.csqa->decisions) {
      Json j;
      j["type"] = "csqa";
      j["id"] = d.id;
      j["n_choices"] = d.n_choices;
      j["gold"] = d.gold ? Json(*d.gold) : Json(nullptr);
      j["vote"] = d.vote;
      j["max_margin"] = d.max_margin;
      out += j.dump() + "\n";
    }
    for (const auto& f : r.csqa->failures) out += detail::failure_json(f).dump() + "\n";
  }
  return out;
}

inline std::string format_accuracy(const std::optional<double>& a) {
  return a ? fmt::format("{:.4f}", *a) : std::string("n/a");
}

/// Human-readable table.
inline std::string report_text(const Report& r) {
  std::string out;
  out += fmt::format("task        {}\n", to_string(r.task));
  out += fmt::format("mode        {}\n", to_string(r.mode));
  out += fmt::format("abstraction {}\n", to_string(r.abstraction));
  out += fmt::format("instances   {} ({} predicted, {} failed, {} load errors)\n", r.n_instances,
                     r.predictions.size(), r.failures.size(), r.load_errors.size());
  out += fmt::format("accuracy    {}\n", format_accuracy(r.accuracy));
  out += fmt::format("mean CE     {}\n", format_accuracy(r.mean_cross_entropy));
  out += fmt::format("skipped     {} template generations\n", r.n_skipped_templates);
  if (r.csqa) {
    out += fmt::format("csqa vote   {}\n", format_accuracy(r.csqa->vote_accuracy));
    out += fmt::format("csqa mm     {}\n", format_accuracy(r.csqa->max_margin_accuracy));
  }
  out += fmt::format("fingerprint {}\n\n", r.fingerprint);
  out += fmt::format("{:<32} {:>6} {:>4} {:>12} {:>12} {:>8}\n", "id", "chosen", "gold", "agg1", "agg2", "P(a1)");
  for (const auto& p : r.predictions) {
    out += fmt::format("{:<32} {:>6} {:>4} {:>12.4f} {:>12.4f} {:>8.4f}\n", p.instance_id, to_int(p.chosen),
                       p.gold ? std::to_string(to_int(*p.gold)) : "-", p.aggregate[0], p.aggregate[1],
                       p.marginal[0]);
  }
  for (const auto& f : r.failures) out += fmt::format("{:<32} FAILED ({}) {}\n", f.id, to_string(f.kind), f.message);
  return out;
}

// ---------------------------------------------------------------------------
// Top-level run

namespace detail {

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, std::string_view bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << bytes;
}

}  // namespace detail

inline std::vector<Template> load_catalog(const std::filesystem::path& path) {
  auto templates = parse_catalog(detail::read_file(path));
  if (templates.empty()) throw DataError(path.string() + ": catalog has no templates");
  return templates;
}

struct TaskData {
  std::vector<Instance> instances;
  std::vector<MultiChoiceInstance> questions;  // CSQA only
  LoadReport load_report;
};

inline TaskData load_task(const RunConfig& c) {
  TaskData d;
  switch (c.task) {
    case TaskKind::wsc:
    case TaskKind::winogrande:
    case TaskKind::winogender: {
      auto loaded = load_winograd_family(c.data, c.task);
      d.instances = std::move(loaded.instances);
      d.load_report = std::move(loaded.report);
      break;
    }
    case TaskKind::piqa: {
      auto loaded = load_piqa(c.data, c.labels);
      d.instances = std::move(loaded.instances);
      d.load_report = std::move(loaded.report);
      break;
    }
    case TaskKind::csqa_pair: {
      auto loaded = load_csqa(c.data);
      d.questions = std::move(loaded.instances);
      d.load_report = std::move(loaded.report);
      for (const auto& q : d.questions) {
        for (auto& p : expand_pairwise(q)) d.instances.push_back(std::move(p));
      }
      break;
    }
  }
  return d;
}

/// Hash of everything that determines the predictions: task, mode, seed,
/// top-k, backend identity and the bytes of data, labels and catalog.
inline std::string config_fingerprint(const RunConfig& c, std::string_view backend_identity,
                                      std::span<const Template> catalog) {
  Json j;
  j["task"] = to_string(c.task);
  j["mode"] = to_string(c.mode);
  j["abstraction"] = to_string(c.abstraction);
  j["seed"] = c.seed;
  j["top_k"] = c.top_k;
  j["backend"] = backend_identity;
  j["data"] = sha256_hex(detail::read_file(c.data));
  j["labels"] = c.labels ? Json(sha256_hex(detail::read_file(*c.labels))) : Json(nullptr);
  j["catalog"] = catalog_hash(catalog);
  return sha256_hex(j.dump());
}

/// Backend described by a RunConfig, optionally behind a response cache.
class BackendStack {
 public:
  explicit BackendStack(const RunConfig& c) {
    if (c.backend == "stub") {
      base_ = std::make_unique<StubBackend>(c.stub);
    } else {
      HttpOptions opts = c.http;
      opts.url = c.backend;
      base_ = std::make_unique<HttpBackend>(opts);
    }
    base_->check_ready();
    if (c.cache) {
      cache_ = std::make_unique<ResponseCache>(*c.cache);
      caching_ = std::make_unique<CachingBackend>(*base_, *cache_, c.seed);
    }
  }

  [[nodiscard]] const LmBackend& get() const { return caching_ ? *caching_ : *base_; }
  [[nodiscard]] const CachingBackend* caching() const { return caching_.get(); }

 private:
  std::unique_ptr<LmBackend> base_;
  std::unique_ptr<ResponseCache> cache_;
  std::unique_ptr<CachingBackend> caching_;
};

struct RunOutput {
  Report report;
  std::vector<InstanceResult> results;
};

/// Runs with an explicit backend. Writes nothing.
inline RunOutput run_with_backend(const RunConfig& c, const LmBackend& backend,
                                  const PersonDetector& detector = HeuristicPersonDetector{}) {
  validate(c);
  const auto start = std::chrono::steady_clock::now();
  const auto catalog = load_catalog(c.templates);
  TaskData data = load_task(c);
  EvalSettings s;
  s.mode = c.mode;
  s.abstraction = c.abstraction;
  s.seed = c.seed;
  s.generation.top_k_return = c.top_k;
  RunOutput out;
  out.results = evaluate_all(data.instances, catalog, backend, detector, s, c.workers);
  out.report = assemble_report(out.results, c.mode, c.abstraction);
  out.report.task = c.task;
  out.report.load_errors = data.load_report.errors;
  out.report.fingerprint = config_fingerprint(c, backend.identity(), catalog);
  if (c.task == TaskKind::csqa_pair) out.report.csqa = aggregate_csqa(data.questions, out.results);
  out.report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

/// Writes report.jsonl, report.txt, trace.jsonl and instances.jsonl (all
/// deterministic) plus timing.json (wall-clock, not deterministic).
inline void write_outputs(const std::filesystem::path& dir, const RunOutput& o, const Json& extra_timing = {}) {
  std::filesystem::create_directories(dir);
  detail::write_file(dir / "report.jsonl", report_jsonl(o.report));
  detail::write_file(dir / "report.txt", report_text(o.report));
  std::string trace;
  std::string instances;
  for (const auto& r : o.results) {
    trace += r.trace.dump() + "\n";
    instances += r.instance.dump() + "\n";
  }
  detail::write_file(dir / "trace.jsonl", trace);
  detail::write_file(dir / "instances.jsonl", instances);
  Json t;
  t["wall_seconds"] = o.report.wall_seconds;
  t["n_instances"] = o.report.n_instances;
  if (o.report.wall_seconds > 0) t["instances_per_second"] = o.report.n_instances / o.report.wall_seconds;
  for (auto& [k, v] : extra_timing.items()) t[k] = v;
  detail::write_file(dir / "timing.json", t.dump(2) + "\n");
}

/// Full run: build the backend, evaluate, write outputs under c.out.
inline RunOutput run(const RunConfig& c) {
  validate(c);
  if (c.out.empty()) throw ConfigError("output directory is required");
  BackendStack stack(c);
  RunOutput o = run_with_backend(c, stack.get());
  Json extra;
  if (const auto* cb = stack.caching()) {
    extra["cache_hits"] = cb->hits();
    extra["cache_misses"] = cb->misses();
  }
  write_outputs(c.out, o, extra);
  spdlog::info("{} {}: accuracy {} over {} instances ({} failed)", to_string(c.task), to_string(c.mode),
               format_accuracy(o.report.accuracy), o.report.n_instances, o.report.failures.size());
  return o;
}

}  // namespace contrastive
