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

// Explanation generation: the neutral context is prepended to a customized
// template, the infiller completes the blanks, and the result is realized as
// text with the answer positions tracked. Flipped and abstracted variants are
// derived from those positions.

#pragma once

#include <algorithm>
#include <optional>
#include <random>
#include <stdexcept>
#include <tuple>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "contrastive/common.hpp"
#include "contrastive/dataset.hpp"
#include "contrastive/hash.hpp"
#include "contrastive/lm_backend.hpp"
#include "contrastive/template_engine.hpp"

namespace contrastive {

enum class Variant { Original, Flipped, Abstracted };

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Original: return "original";
    case Variant::Flipped: return "flipped";
    case Variant::Abstracted: return "abstracted";
  }
  return "?";
}

inline constexpr std::string_view kMask1 = "<mask1>";
inline constexpr std::string_view kMask2 = "<mask2>";

struct Explanation {
  std::string instance_id;
  std::string template_id;
  /// Rank of the fill candidate used (0 = best).
  std::size_t rank = 0;
  std::string a1;
  std::string a2;
  std::string text;
  std::vector<std::string> fills;
  std::vector<AnswerSpan> answer_spans;
  std::vector<BlankMarker> fill_spans;
  SlotAssignment slot_assignment;
  Variant variant = Variant::Original;
  /// Infilling prompt; empty when the template has no blanks.
  std::string prompt;

  [[nodiscard]] std::string id() const { return rank == 0 ? template_id : template_id + "#" + std::to_string(rank); }

  [[nodiscard]] std::string_view surface(Answer a) const { return a == Answer::first ? a1 : a2; }
};

struct GenerationOptions {
  std::size_t top_k_return = 1;
  std::size_t beam_size = 200;
  std::size_t max_fill_tokens = 20;
};

/// Explanations for one (instance, template); `skipped` is set instead when
/// the infiller produced nothing usable.
struct GenerationOutcome {
  std::vector<Explanation> explanations;
  std::optional<std::string> skipped;
};

/// Core generation over explicit strings. `neutral_context` is the explainer
/// context; a1/a2 are written into the answer slots in an order drawn from rng.
template <std::uniform_random_bit_generator G>
GenerationOutcome generate_explanations(std::string_view instance_id, std::string_view neutral_context,
                                        std::string_view a1, std::string_view a2, const Template& t,
                                        const LmBackend& backend, G& rng, const GenerationOptions& opts = {}) {
  const CustomizedPrompt custom = customize(t, a1, a2, rng);
  auto realize = [&](std::vector<std::string> fills, std::size_t rank, std::string prompt) {
    Rendered r = render(t, custom.slot_assignment, a1, a2, fills);
    Explanation e;
    e.instance_id = std::string(instance_id);
    e.template_id = t.id;
    e.rank = rank;
    e.a1 = std::string(a1);
    e.a2 = std::string(a2);
    e.text = std::move(r.text);
    e.fills = std::move(fills);
    e.answer_spans = std::move(r.answer_spans);
    e.fill_spans = std::move(r.blank_markers);
    e.slot_assignment = custom.slot_assignment;
    e.prompt = std::move(prompt);
    return e;
  };

  GenerationOutcome out;
  if (custom.blank_markers.empty()) {
    out.explanations.push_back(realize({}, 0, ""));
    return out;
  }
  InfillRequest req;
  req.prompt = text::normalize_space(neutral_context) + " " + custom.text;
  req.top_k_return = opts.top_k_return;
  req.beam_size = std::max(opts.beam_size, opts.top_k_return);
  req.max_fill_tokens = opts.max_fill_tokens;
  InfillResponse resp;
  try {
    resp = backend.infill(req);
  } catch (const EmptyGenerationError& e) {
    out.skipped = e.what();
    return out;
  }
  for (std::size_t r = 0; r < resp.candidates.size(); ++r) {
    std::vector<std::string> fills;
    for (const auto& f : resp.candidates[r].fills) fills.push_back(text::normalize_space(f));
    out.explanations.push_back(realize(std::move(fills), r, req.prompt));
  }
  return out;
}

/// Generates from an instance: explainer context c_a0, answers a1/a2, slot
/// order seeded from (global_seed, instance id, template id).
inline GenerationOutcome generate_explanation(const Instance& in, const Template& t, const LmBackend& backend,
                                              std::uint64_t global_seed, const GenerationOptions& opts = {}) {
  const Contexts ctx = build_contexts(in);
  std::mt19937_64 rng(derive_seed(global_seed, in.id, t.id));
  return generate_explanations(in.id, ctx.c_a0, in.a1, in.a2, t, backend, rng, opts);
}

// ---------------------------------------------------------------------------
// Span-based rewriting

namespace detail {

struct Piece {
  std::size_t start;
  std::size_t end;
  bool is_answer;
  std::size_t index;  // into answer_spans or fill_spans
};

inline std::vector<Piece> ordered_pieces(const Explanation& e) {
  std::vector<Piece> pieces;
  for (std::size_t i = 0; i < e.answer_spans.size(); ++i) {
    pieces.push_back({e.answer_spans[i].start, e.answer_spans[i].end, true, i});
  }
  for (std::size_t i = 0; i < e.fill_spans.size(); ++i) {
    pieces.push_back({e.fill_spans[i].start, e.fill_spans[i].end, false, i});
  }
  std::sort(pieces.begin(), pieces.end(), [](const Piece& a, const Piece& b) { return a.start < b.start; });
  return pieces;
}

/// Rebuilds e.text replacing each answer span via `answer_text(span)` and each
/// gap/fill via `other_text(substring)`; offsets are recomputed.
template <typename AnswerFn, typename OtherFn>
Explanation rewrite(const Explanation& e, AnswerFn&& answer_text, OtherFn&& other_text) {
  Explanation out = e;
  out.text.clear();
  std::size_t cursor = 0;
  for (const auto& p : ordered_pieces(e)) {
    out.text += other_text(std::string_view(e.text).substr(cursor, p.start - cursor));
    const std::size_t start = out.text.size();
    if (p.is_answer) {
      const auto& span = e.answer_spans[p.index];
      auto [surface, answer, capitalized] = answer_text(span, p.start == 0);
      out.text += surface;
      out.answer_spans[p.index] = {answer, start, out.text.size(), capitalized};
    } else {
      out.text += other_text(std::string_view(e.text).substr(p.start, p.end - p.start));
      out.fill_spans[p.index] = {e.fill_spans[p.index].index, start, out.text.size()};
    }
    cursor = p.end;
  }
  out.text += other_text(std::string_view(e.text).substr(cursor));
  return out;
}

}  // namespace detail

/// Swaps the answers' surface strings at their recorded spans. Fills are left
/// as they are, even if they mention an answer. Flipping twice restores the
/// original text.
inline Explanation flip_explanation(const Explanation& e) {
  if (e.variant == Variant::Abstracted) throw std::invalid_argument("cannot flip an abstracted explanation");
  bool has1 = false;
  bool has2 = false;
  for (const auto& s : e.answer_spans) (s.answer == Answer::first ? has1 : has2) = true;
  if (!has1 || !has2) throw std::invalid_argument(e.id() + ": explanation lacks spans for both answers");
  Explanation out = detail::rewrite(
      e,
      [&](const AnswerSpan& span, bool opens) {
        const Answer swapped = other(span.answer);
        const std::string_view raw = e.surface(swapped);
        std::string surface = opens ? text::capitalize_first(raw) : std::string(raw);
        const bool capitalized = opens && !raw.empty() && text::upper(raw[0]) != raw[0];
        return std::tuple{surface, swapped, capitalized};
      },
      [](std::string_view s) { return std::string(s); });
  out.slot_assignment = e.slot_assignment.swapped();
  out.variant = e.variant == Variant::Original ? Variant::Flipped : Variant::Original;
  return out;
}

/// Replaces every occurrence of a1 with <mask1> and a2 with <mask2>, matching
/// case-insensitively; at each position the longer answer is tried first.
inline std::string mask_answers(std::string_view s, std::string_view a1, std::string_view a2) {
  struct Target {
    std::string_view needle;
    std::string_view mask;
  };
  std::vector<Target> targets = {{a1, kMask1}, {a2, kMask2}};
  std::stable_sort(targets.begin(), targets.end(),
                   [](const Target& x, const Target& y) { return x.needle.size() > y.needle.size(); });
  std::string out;
  std::size_t i = 0;
  while (i < s.size()) {
    bool matched = false;
    for (const auto& t : targets) {
      if (t.needle.empty() || i + t.needle.size() > s.size()) continue;
      if (text::iequals(s.substr(i, t.needle.size()), t.needle)) {
        out += t.mask;
        i += t.needle.size();
        matched = true;
        break;
      }
    }
    if (!matched) out += s[i++];
  }
  return out;
}

struct AbstractPair {
  std::string context;
  std::optional<std::string> explanation;
};

/// Masks both answers in a context and, optionally, an explanation text.
inline AbstractPair abstract_pair(std::string_view context_text, std::optional<std::string_view> explanation_text,
                                  std::string_view a1, std::string_view a2) {
  AbstractPair out{mask_answers(context_text, a1, a2), std::nullopt};
  if (explanation_text) out.explanation = mask_answers(*explanation_text, a1, a2);
  return out;
}

/// Explanation with answers masked everywhere: slot spans become the mask
/// tokens and fills are masked too.
inline Explanation abstract_explanation(const Explanation& e) {
  Explanation out = detail::rewrite(
      e,
      [&](const AnswerSpan& span, bool) {
        return std::tuple{std::string(span.answer == Answer::first ? kMask1 : kMask2), span.answer, false};
      },
      [&](std::string_view s) { return mask_answers(s, e.a1, e.a2); });
  for (auto& f : out.fills) f = mask_answers(f, e.a1, e.a2);
  // An answer spanning a piece boundary would survive piecewise masking.
  const std::string whole = mask_answers(out.text, e.a1, e.a2);
  if (whole != out.text) {
    out.text = whole;
    out.answer_spans.clear();
    out.fill_spans.clear();
  }
  out.a1 = std::string(kMask1);
  out.a2 = std::string(kMask2);
  out.variant = Variant::Abstracted;
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::ordered_json to_json(const Explanation& e) {
  nlohmann::ordered_json j;
  j["instance_id"] = e.instance_id;
  j["template_id"] = e.template_id;
  j["rank"] = e.rank;
  j["variant"] = to_string(e.variant);
  j["text"] = e.text;
  j["fills"] = e.fills;
  j["a1"] = e.a1;
  j["a2"] = e.a2;
  j["slot_assignment"] = {{"P", to_int(e.slot_assignment.p)}, {"Q", to_int(e.slot_assignment.q)}};
  auto spans = nlohmann::ordered_json::array();
  for (const auto& s : e.answer_spans) spans.push_back({to_int(s.answer), s.start, s.end, s.capitalized});
  j["answer_spans"] = std::move(spans);
  auto fills = nlohmann::ordered_json::array();
  for (const auto& f : e.fill_spans) fills.push_back({f.index, f.start, f.end});
  j["fill_spans"] = std::move(fills);
  j["prompt"] = e.prompt;
  return j;
}

inline Explanation explanation_from_json(const nlohmann::ordered_json& j) {
  try {
    Explanation e;
    e.instance_id = j.at("instance_id").get<std::string>();
    e.template_id = j.at("template_id").get<std::string>();
    e.rank = j.at("rank").get<std::size_t>();
    const auto v = j.at("variant").get<std::string>();
    e.variant = v == "flipped" ? Variant::Flipped : v == "abstracted" ? Variant::Abstracted : Variant::Original;
    e.text = j.at("text").get<std::string>();
    e.fills = j.at("fills").get<std::vector<std::string>>();
    e.a1 = j.at("a1").get<std::string>();
    e.a2 = j.at("a2").get<std::string>();
    auto ans = [](long long n) {
      auto a = answer_from_int(n);
      if (!a) throw DataError("answer index must be 1 or 2");
      return *a;
    };
    e.slot_assignment = {ans(j.at("slot_assignment").at("P").get<long long>()),
                         ans(j.at("slot_assignment").at("Q").get<long long>())};
    for (const auto& s : j.at("answer_spans")) {
      e.answer_spans.push_back({ans(s.at(0).get<long long>()), s.at(1).get<std::size_t>(), s.at(2).get<std::size_t>(),
                                s.at(3).get<bool>()});
    }
    for (const auto& f : j.at("fill_spans")) {
      e.fill_spans.push_back({f.at(0).get<std::size_t>(), f.at(1).get<std::size_t>(), f.at(2).get<std::size_t>()});
    }
    e.prompt = j.at("prompt").get<std::string>();
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw DataError(std::string("malformed explanation record: ") + ex.what());
  }
}

}  // namespace contrastive
