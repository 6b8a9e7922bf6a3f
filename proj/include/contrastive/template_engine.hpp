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

// Contrastive template catalog: parsing, per-instance filtering and
// customization of a template to a concrete pair of answers.
//
// A pattern is written with three markers: {P} and {Q} are the two answer
// slots, {_} is a blank for the infilling model. Everything else is literal.

#pragma once

#include <algorithm>
#include <array>
#include <concepts>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "contrastive/common.hpp"
#include "contrastive/hash.hpp"
#include "contrastive/lexicon.hpp"

namespace contrastive {

enum class Category {
  Temporal,
  PersonalCharacteristics,
  ObjectCharacteristic,
  Spatial,
  Usecase,
  Causes,
  Miscellaneous
};

inline constexpr std::array<Category, 7> kAllCategories = {
    Category::Temporal, Category::PersonalCharacteristics, Category::ObjectCharacteristic,
    Category::Spatial,  Category::Usecase,                 Category::Causes,
    Category::Miscellaneous};

inline std::string_view to_string(Category c) {
  switch (c) {
    case Category::Temporal: return "Temporal";
    case Category::PersonalCharacteristics: return "PersonalCharacteristics";
    case Category::ObjectCharacteristic: return "ObjectCharacteristic";
    case Category::Spatial: return "Spatial";
    case Category::Usecase: return "Usecase";
    case Category::Causes: return "Causes";
    case Category::Miscellaneous: return "Miscellaneous";
  }
  return "?";
}

inline std::optional<Category> parse_category(std::string_view s) {
  for (Category c : kAllCategories) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

enum class Slot { P, Q };
enum class Number { Singular, Plural };
enum class Agreement { Singular, Plural, Either };

inline std::string_view to_string(Number n) { return n == Number::Singular ? "singular" : "plural"; }

namespace segment {
struct Literal {
  std::string text;
  bool operator==(const Literal&) const = default;
};
struct AnswerSlot {
  Slot slot;
  bool operator==(const AnswerSlot&) const = default;
};
struct Blank {
  std::size_t index;
  bool operator==(const Blank&) const = default;
};
}  // namespace segment

using Segment = std::variant<segment::Literal, segment::AnswerSlot, segment::Blank>;

struct Template {
  std::string id;
  Category category = Category::Miscellaneous;
  std::vector<Segment> pattern;
  bool requires_person = false;
  /// Dropped for WSC-family instances that mention a PERSON entity.
  bool person_excluded = false;
  std::vector<TaskKind> applicable_tasks;
  /// Grammatical number each slot's surrounding literal demands, indexed by Slot.
  std::array<Agreement, 2> agreement{Agreement::Either, Agreement::Either};

  [[nodiscard]] std::size_t blank_count() const {
    std::size_t n = 0;
    for (const auto& s : pattern) n += std::holds_alternative<segment::Blank>(s) ? 1 : 0;
    return n;
  }

  [[nodiscard]] bool applies_to(TaskKind kind) const {
    return std::find(applicable_tasks.begin(), applicable_tasks.end(), kind) != applicable_tasks.end();
  }

  [[nodiscard]] Agreement agreement_of(Slot s) const { return agreement[s == Slot::P ? 0 : 1]; }
};

// ---------------------------------------------------------------------------
// Pattern parsing

namespace detail {

inline Agreement agreement_from_word(std::string_view word) {
  static const std::unordered_set<std::string> singular = {"is", "has", "was", "does", "doesn't"};
  static const std::unordered_set<std::string> plural = {"are", "have", "were", "do", "don't"};
  const std::string w = text::normalize_token(word);
  if (singular.count(w)) return Agreement::Singular;
  if (plural.count(w)) return Agreement::Plural;
  return Agreement::Either;
}

/// Agreement of each slot from the first word of the literal right after it.
inline std::array<Agreement, 2> derive_agreement(const std::vector<Segment>& pattern) {
  std::array<Agreement, 2> out{Agreement::Either, Agreement::Either};
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    const auto* slot = std::get_if<segment::AnswerSlot>(&pattern[i]);
    if (!slot || i + 1 >= pattern.size()) continue;
    const auto* lit = std::get_if<segment::Literal>(&pattern[i + 1]);
    if (!lit) continue;
    const auto words = text::split_words(lit->text);
    if (words.empty()) continue;
    auto& a = out[slot->slot == Slot::P ? 0 : 1];
    if (a == Agreement::Either) a = agreement_from_word(words.front());
  }
  return out;
}

}  // namespace detail

/// Splits a pattern string into segments. Throws ParseError (line 0) on an
/// unknown or unbalanced marker, or when either answer slot is missing.
inline std::vector<Segment> parse_pattern(std::string_view pattern, std::size_t line = 0) {
  std::vector<Segment> out;
  std::string literal;
  std::size_t blanks = 0;
  bool has_p = false;
  bool has_q = false;
  auto flush = [&] {
    if (!literal.empty()) out.emplace_back(segment::Literal{std::move(literal)});
    literal.clear();
  };
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    const char c = pattern[i];
    if (c == '}') throw ParseError(line, "pattern", "unbalanced '}' at offset " + std::to_string(i));
    if (c != '{') {
      literal += c;
      continue;
    }
    const auto close = pattern.find('}', i);
    const auto next_open = pattern.find('{', i + 1);
    if (close == std::string_view::npos || (next_open != std::string_view::npos && next_open < close)) {
      throw ParseError(line, "pattern", "unbalanced '{' at offset " + std::to_string(i));
    }
    const auto marker = pattern.substr(i + 1, close - i - 1);
    flush();
    if (marker == "P") {
      out.emplace_back(segment::AnswerSlot{Slot::P});
      has_p = true;
    } else if (marker == "Q") {
      out.emplace_back(segment::AnswerSlot{Slot::Q});
      has_q = true;
    } else if (marker == "_") {
      out.emplace_back(segment::Blank{blanks++});
    } else {
      throw ParseError(line, "pattern", "unknown marker {" + std::string(marker) + "}");
    }
    i = close;
  }
  flush();
  if (!has_p || !has_q) throw ParseError(line, "pattern", "pattern needs both {P} and {Q}");
  return out;
}

inline std::string pattern_to_string(const std::vector<Segment>& pattern) {
  std::string out;
  for (const auto& seg : pattern) {
    std::visit(
        [&](const auto& s) {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, segment::Literal>) {
            out += s.text;
          } else if constexpr (std::is_same_v<T, segment::AnswerSlot>) {
            out += s.slot == Slot::P ? "{P}" : "{Q}";
          } else {
            out += "{_}";
          }
        },
        seg);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Catalog file

namespace detail {

inline std::vector<TaskKind> parse_task_list(std::string_view list, std::size_t line) {
  std::vector<TaskKind> out;
  std::stringstream ss{std::string(list)};
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto name = text::trim(item);
    if (name.empty()) continue;
    auto kind = parse_task_kind(name);
    if (!kind) throw ParseError(line, "tasks", "unknown task kind '" + std::string(name) + "'");
    if (std::find(out.begin(), out.end(), *kind) == out.end()) out.push_back(*kind);
  }
  if (out.empty()) throw ParseError(line, "tasks", "empty task list");
  return out;
}

inline bool default_person_excluded(Category c) {
  return c == Category::Temporal || c == Category::Usecase;
}

inline std::string require_string(const nlohmann::json& j, const char* field, std::size_t line) {
  if (!j.contains(field)) throw ParseError(line, field, "missing");
  if (!j[field].is_string()) throw ParseError(line, field, "expected a string");
  return j[field].get<std::string>();
}

}  // namespace detail

/// One catalog record per line (JSON object). Blank lines and lines starting
/// with '#' are ignored.
inline Template parse_catalog_entry(std::string_view line_text, std::size_t line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(line, "record", std::string("invalid record: ") + e.what());
  }
  if (!j.is_object()) throw ParseError(line, "record", "expected an object");

  Template t;
  t.id = detail::require_string(j, "id", line);
  if (t.id.empty()) throw ParseError(line, "id", "empty");

  const auto cat = detail::require_string(j, "category", line);
  const auto parsed = parse_category(cat);
  if (!parsed) throw ParseError(line, "category", "unknown category '" + cat + "'");
  t.category = *parsed;

  t.pattern = parse_pattern(detail::require_string(j, "pattern", line), line);

  if (!j.contains("requires_person") || !j["requires_person"].is_boolean()) {
    throw ParseError(line, "requires_person", "expected true/false");
  }
  t.requires_person = j["requires_person"].get<bool>();
  t.person_excluded = detail::default_person_excluded(t.category);
  if (j.contains("person_excluded")) {
    if (!j["person_excluded"].is_boolean()) throw ParseError(line, "person_excluded", "expected true/false");
    t.person_excluded = j["person_excluded"].get<bool>();
  }
  t.applicable_tasks = detail::parse_task_list(detail::require_string(j, "tasks", line), line);
  t.agreement = detail::derive_agreement(t.pattern);
  return t;
}

inline std::vector<Template> parse_catalog(std::string_view catalog_text) {
  std::vector<Template> out;
  std::set<std::string> ids;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= catalog_text.size()) {
    auto end = catalog_text.find('\n', pos);
    if (end == std::string_view::npos) end = catalog_text.size();
    const auto line = text::trim(catalog_text.substr(pos, end - pos));
    ++line_no;
    pos = end + 1;
    if (line.empty() || line.front() == '#') continue;
    Template t = parse_catalog_entry(line, line_no);
    if (!ids.insert(t.id).second) throw ParseError(line_no, "id", "duplicate id '" + t.id + "'");
    out.push_back(std::move(t));
  }
  return out;
}

inline std::string serialize_catalog_entry(const Template& t) {
  nlohmann::ordered_json j;
  j["id"] = t.id;
  j["category"] = to_string(t.category);
  j["pattern"] = pattern_to_string(t.pattern);
  j["requires_person"] = t.requires_person;
  if (t.person_excluded != detail::default_person_excluded(t.category)) j["person_excluded"] = t.person_excluded;
  std::vector<std::string> tasks;
  for (TaskKind k : t.applicable_tasks) tasks.emplace_back(to_string(k));
  j["tasks"] = text::join(tasks, ",");
  return j.dump();
}

inline std::string serialize_catalog(std::span<const Template> templates) {
  std::string out;
  for (const auto& t : templates) {
    out += serialize_catalog_entry(t);
    out += '\n';
  }
  return out;
}

/// Hash of the catalog as parsed (insensitive to comments and blank lines).
inline std::string catalog_hash(std::span<const Template> templates) {
  return sha256_hex(serialize_catalog(templates));
}

// ---------------------------------------------------------------------------
// Number and person detection

struct NumberLexicon {
  std::unordered_set<std::string> irregular_plurals = lexicon::irregular_plurals();
  std::unordered_set<std::string> singular_exceptions = lexicon::singular_exceptions();
  std::unordered_set<std::string> mass_nouns = lexicon::mass_nouns();
};

inline const NumberLexicon& default_number_lexicon() {
  static const NumberLexicon lex;
  return lex;
}

/// Grammatical number of a noun phrase, judged on its last word.
inline Number detect_number(std::string_view answer, const NumberLexicon& lex = default_number_lexicon()) {
  const auto words = text::split_words(answer);
  if (words.empty()) return Number::Singular;
  const std::string head = text::normalize_token(words.back());
  if (head.empty()) return Number::Singular;
  if (lex.irregular_plurals.count(head)) return Number::Plural;
  if (lex.mass_nouns.count(head) || lex.singular_exceptions.count(head)) return Number::Singular;
  if (lexicon::first_names().count(head)) return Number::Singular;
  auto ends_with = [&](std::string_view suffix) {
    return head.size() > suffix.size() && head.compare(head.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  if (ends_with("men") && !lexicon::men_singulars().count(head)) return Number::Plural;
  if (ends_with("ss") || ends_with("us") || ends_with("is") || head.back() != 's' || head.size() < 3) {
    return Number::Singular;
  }
  return Number::Plural;
}

/// Decides whether an instance talks about people.
class PersonDetector {
 public:
  virtual ~PersonDetector() = default;
  [[nodiscard]] virtual bool has_person(std::string_view context, std::string_view a1,
                                        std::string_view a2) const = 0;
};

/// Capitalized first name from the bundled list in either answer, or an
/// answer used as the subject of likes/said/thinks in the context.
class HeuristicPersonDetector final : public PersonDetector {
 public:
  [[nodiscard]] bool has_person(std::string_view context, std::string_view a1,
                                std::string_view a2) const override {
    return answer_has_person(context, a1) || answer_has_person(context, a2);
  }

 private:
  static bool answer_has_person(std::string_view context, std::string_view answer) {
    for (const auto& w : text::split_words(answer)) {
      if (!w.empty() && std::isupper(static_cast<unsigned char>(w[0])) &&
          lexicon::first_names().count(text::normalize_token(w))) {
        return true;
      }
    }
    if (text::trim(answer).empty()) return false;
    const std::string ctx = text::to_lower(context);
    const std::string ans = text::to_lower(text::trim(answer));
    for (const char* verb : {" likes", " said", " thinks"}) {
      if (ctx.find(ans + verb) != std::string::npos) return true;
    }
    return false;
  }
};

// ---------------------------------------------------------------------------
// Filtering

struct InstanceFeatures {
  TaskKind task_kind = TaskKind::wsc;
  bool has_person_entity = false;
  std::pair<Number, Number> answer_numbers{Number::Singular, Number::Singular};
};

/// True when a slot's demanded number disagrees with an answer that could be
/// placed in it. Slot order is randomized later, so either answer may land in
/// either slot.
inline bool number_conflict(const Template& t, std::pair<Number, Number> numbers) {
  for (Slot s : {Slot::P, Slot::Q}) {
    const Agreement a = t.agreement_of(s);
    if (a == Agreement::Either) continue;
    const Number need = a == Agreement::Singular ? Number::Singular : Number::Plural;
    if (numbers.first != need || numbers.second != need) return true;
  }
  return false;
}

inline bool keep_template(const Template& t, const InstanceFeatures& f) {
  if (!t.applies_to(f.task_kind)) return false;
  if (number_conflict(t, f.answer_numbers)) return false;
  const bool personal = t.requires_person || t.category == Category::PersonalCharacteristics;
  if (f.task_kind == TaskKind::piqa && personal) return false;
  if (is_wsc_family(f.task_kind)) {
    if (!f.has_person_entity && personal) return false;
    if (f.has_person_entity && t.person_excluded) return false;
  }
  return true;
}

/// Templates usable for an instance, in catalog order.
inline std::vector<Template> filter_templates(std::span<const Template> templates, const InstanceFeatures& f) {
  std::vector<Template> out;
  for (const auto& t : templates) {
    if (keep_template(t, f)) out.push_back(t);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Customization

/// Which answer went into which slot.
struct SlotAssignment {
  Answer p = Answer::first;
  Answer q = Answer::second;

  [[nodiscard]] Answer answer_for(Slot s) const { return s == Slot::P ? p : q; }
  [[nodiscard]] SlotAssignment swapped() const { return {q, p}; }
  bool operator==(const SlotAssignment&) const = default;
};

/// Where one answer's surface string sits in a rendered text.
struct AnswerSpan {
  Answer answer = Answer::first;
  std::size_t start = 0;
  std::size_t end = 0;
  /// First character was uppercased because the span opens the sentence.
  bool capitalized = false;
  bool operator==(const AnswerSpan&) const = default;
};

struct BlankMarker {
  std::size_t index = 0;
  std::size_t start = 0;
  std::size_t end = 0;
  bool operator==(const BlankMarker&) const = default;
};

struct CustomizedPrompt {
  std::string template_id;
  std::string text;
  SlotAssignment slot_assignment;
  std::vector<AnswerSpan> answer_spans;
  std::vector<BlankMarker> blank_markers;
};

/// Text rendered from a pattern together with the offsets of what was put in.
struct Rendered {
  std::string text;
  std::vector<AnswerSpan> answer_spans;
  std::vector<BlankMarker> blank_markers;
};

/// Renders a pattern. With an empty `fills` blanks stay as kBlank markers;
/// otherwise fills[i] is written into blank i and recorded as a blank span.
inline Rendered render(const Template& t, SlotAssignment assignment, std::string_view a1,
                       std::string_view a2, std::span<const std::string> fills = {}) {
  if (!fills.empty() && fills.size() != t.blank_count()) {
    throw std::invalid_argument("render: " + std::to_string(fills.size()) + " fills for " +
                                std::to_string(t.blank_count()) + " blanks in " + t.id);
  }
  Rendered r;
  for (std::size_t i = 0; i < t.pattern.size(); ++i) {
    const auto& seg = t.pattern[i];
    if (const auto* lit = std::get_if<segment::Literal>(&seg)) {
      r.text += lit->text;
    } else if (const auto* slot = std::get_if<segment::AnswerSlot>(&seg)) {
      const Answer a = assignment.answer_for(slot->slot);
      const std::string_view surface = a == Answer::first ? a1 : a2;
      const bool opens = i == 0;
      const std::size_t start = r.text.size();
      r.text += opens ? text::capitalize_first(surface) : std::string(surface);
      const bool changed = opens && !surface.empty() && text::upper(surface[0]) != surface[0];
      r.answer_spans.push_back({a, start, r.text.size(), changed});
    } else {
      const auto& blank = std::get<segment::Blank>(seg);
      const std::size_t start = r.text.size();
      r.text += fills.empty() ? std::string(kBlank) : fills[blank.index];
      r.blank_markers.push_back({blank.index, start, r.text.size()});
    }
  }
  return r;
}

/// Fills the P and Q slots with a1/a2 in an order drawn from rng.
template <std::uniform_random_bit_generator G>
CustomizedPrompt customize(const Template& t, std::string_view a1, std::string_view a2, G& rng) {
  const bool swap = (rng() & 1U) != 0;
  const SlotAssignment assignment = swap ? SlotAssignment{Answer::second, Answer::first} : SlotAssignment{};
  Rendered r = render(t, assignment, a1, a2);
  return {t.id, std::move(r.text), assignment, std::move(r.answer_spans), std::move(r.blank_markers)};
}

}  // namespace contrastive
