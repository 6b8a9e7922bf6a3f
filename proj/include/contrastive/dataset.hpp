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

// Dataset adapters. Every task is reduced to an Instance: a context with one
// placeholder, two answers, and a neutral answer that favours neither.

#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "contrastive/common.hpp"
#include "contrastive/lm_backend.hpp"

namespace contrastive {

struct Instance {
  std::string id;
  TaskKind task_kind = TaskKind::winogrande;
  /// Contains kBlank exactly once.
  std::string context;
  std::string a1;
  std::string a2;
  std::optional<Answer> gold;
  /// Unset until resolved (Winogrande needs select_neutral_pronoun).
  std::optional<std::string> neutral_answer;
  /// Explicit answer to "does this instance mention a person", if the data says.
  std::optional<bool> has_person;
  /// Source record fields, kept verbatim. CSQA pairs also record the pair.
  nlohmann::ordered_json meta = nlohmann::ordered_json::object();
};

struct MultiChoiceInstance {
  std::string id;
  std::string question;
  std::vector<std::string> choices;
  std::optional<std::size_t> gold;
};

struct RecordError {
  std::size_t line = 0;
  std::string message;
};

struct LoadReport {
  std::size_t records = 0;
  std::size_t loaded = 0;
  std::vector<RecordError> errors;
};

template <typename T>
struct Loaded {
  std::vector<T> instances;
  LoadReport report;
};

/// Throws DataError if an instance breaks its invariants.
inline void validate(const Instance& in) {
  if (text::count_occurrences(in.context, kBlank) != 1) {
    throw DataError(in.id + ": context must contain exactly one placeholder");
  }
  if (text::trim(in.a1).empty() || text::trim(in.a2).empty()) throw DataError(in.id + ": empty answer");
  if (in.a1 == in.a2) throw DataError(in.id + ": answers are identical");
}

struct Contexts {
  std::string c_a0;
  std::string c_a1;
  std::string c_a2;

  [[nodiscard]] const std::string& for_answer(Answer a) const { return a == Answer::first ? c_a1 : c_a2; }
};

/// Substitutes `answer` for the placeholder. An answer that opens the
/// sentence gets its first letter uppercased.
inline std::string substitute(std::string_view context, std::string_view answer) {
  const auto pos = context.find(kBlank);
  if (pos == std::string_view::npos) throw DataError("context has no placeholder");
  std::string filled(context.substr(0, pos));
  const bool opens = text::trim(filled).empty();
  filled += opens ? text::capitalize_first(answer) : std::string(answer);
  filled += context.substr(pos + kBlank.size());
  return text::normalize_space(filled);
}

inline Contexts build_contexts(const Instance& in) {
  if (!in.neutral_answer) throw DataError(in.id + ": neutral answer not resolved");
  return {substitute(in.context, *in.neutral_answer), substitute(in.context, in.a1), substitute(in.context, in.a2)};
}

/// Context as shown to people: placeholder rendered as "_".
inline std::string display_context(std::string_view context) { return text::replace_all(context, kBlank, "_"); }

// ---------------------------------------------------------------------------
// Line-delimited record reading

namespace detail {

template <typename Fn>
LoadReport for_each_record(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  LoadReport report;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    ++report.records;
    try {
      const auto j = nlohmann::ordered_json::parse(line);
      if (!j.is_object()) throw DataError("record is not an object");
      fn(j, line_no);
      ++report.loaded;
    } catch (const nlohmann::json::exception& e) {
      report.errors.push_back({line_no, e.what()});
    } catch (const DataError& e) {
      report.errors.push_back({line_no, e.what()});
    }
  }
  return report;
}

inline std::string field_string(const nlohmann::ordered_json& j, const char* name) {
  if (!j.contains(name)) throw DataError(std::string("missing field '") + name + "'");
  const auto& v = j[name];
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number()) return v.dump();
  throw DataError(std::string("field '") + name + "' must be a string");
}

inline std::string record_id(const nlohmann::ordered_json& j, TaskKind kind, std::size_t line) {
  for (const char* k : {"qID", "id", "idx"}) {
    if (j.contains(k) && (j[k].is_string() || j[k].is_number())) {
      return j[k].is_string() ? j[k].get<std::string>() : j[k].dump();
    }
  }
  return std::string(to_string(kind)) + "-" + std::to_string(line);
}

/// Gold from "answer"/"label": 1/2 (string or number). Empty means unknown.
inline std::optional<Answer> binary_gold(const nlohmann::ordered_json& j) {
  for (const char* k : {"answer", "label"}) {
    if (!j.contains(k) || j[k].is_null()) continue;
    const auto& v = j[k];
    long long n = 0;
    if (v.is_number_integer()) {
      n = v.get<long long>();
    } else if (v.is_string()) {
      const std::string raw = v.get<std::string>();
      const auto s = text::trim(raw);
      if (s.empty()) return std::nullopt;
      try {
        n = std::stoll(std::string(s));
      } catch (const std::exception&) {
        throw DataError(std::string("field '") + k + "' is not 1 or 2");
      }
    } else {
      throw DataError(std::string("field '") + k + "' is not 1 or 2");
    }
    auto a = answer_from_int(n);
    if (!a) throw DataError(std::string("field '") + k + "' is not 1 or 2");
    return a;
  }
  return std::nullopt;
}

inline void finish_or_throw(const LoadReport& report, std::size_t n, const std::filesystem::path& path) {
  for (const auto& e : report.errors) spdlog::warn("{}:{}: {}", path.string(), e.line, e.message);
  if (n == 0) throw DataError(path.string() + ": no valid records (" + std::to_string(report.errors.size()) + " rejected)");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// WSC / Winogrande / Winogender

/// Records carry sentence, option1, option2 and an optional answer (1 or 2).
/// Winogrande marks the answer position with "_"; WSC and Winogender wrap the
/// ambiguous pronoun in square brackets, e.g. "because [they] feared violence".
inline Loaded<Instance> load_winograd_family(const std::filesystem::path& path, TaskKind kind) {
  if (!is_wsc_family(kind)) throw ConfigError("load_winograd_family: not a WSC-family task");
  Loaded<Instance> out;
  out.report = detail::for_each_record(path, [&](const nlohmann::ordered_json& j, std::size_t line) {
    Instance in;
    in.id = detail::record_id(j, kind, line);
    in.task_kind = kind;
    const std::string sentence = detail::field_string(j, "sentence");
    in.a1 = std::string(text::trim(detail::field_string(j, "option1")));
    in.a2 = std::string(text::trim(detail::field_string(j, "option2")));
    in.gold = detail::binary_gold(j);
    if (kind == TaskKind::winogrande) {
      if (text::count_occurrences(sentence, "_") != 1) throw DataError("sentence must contain exactly one '_'");
      in.context = text::replace_all(sentence, "_", kBlank);
    } else {
      const auto open = sentence.find('[');
      const auto close = sentence.find(']');
      if (open == std::string::npos || close == std::string::npos || close < open ||
          sentence.find('[', open + 1) != std::string::npos) {
        throw DataError("sentence must mark exactly one pronoun as [pronoun]");
      }
      const auto pronoun = text::trim(std::string_view(sentence).substr(open + 1, close - open - 1));
      if (pronoun.empty()) throw DataError("empty pronoun marker");
      in.neutral_answer = std::string(pronoun);
      in.context = sentence.substr(0, open) + std::string(kBlank) + sentence.substr(close + 1);
    }
    in.context = text::normalize_space(in.context);
    if (j.contains("has_person") && j["has_person"].is_boolean()) in.has_person = j["has_person"].get<bool>();
    in.meta = j;
    validate(in);
    out.instances.push_back(std::move(in));
  });
  detail::finish_or_throw(out.report, out.instances.size(), path);
  return out;
}

inline constexpr std::array<std::string_view, 7> kNeutralPronouns = {"he", "she", "it", "they", "him", "her", "them"};

/// Pronoun whose substitution the backend scores highest; ties go to the
/// lexicographically first pronoun. Backends that cannot rank candidates, and
/// failing backends, yield "they".
inline std::string select_neutral_pronoun(const Instance& in, const LmBackend& backend) {
  if (!backend.supports_candidate_scoring()) return "they";
  try {
    std::vector<std::string> texts;
    for (auto p : kNeutralPronouns) texts.push_back(substitute(in.context, p));
    const auto scores = backend.sequence_logprob_batch(texts);
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (!best || scores[i].total_logprob > scores[*best].total_logprob ||
          (scores[i].total_logprob == scores[*best].total_logprob && kNeutralPronouns[i] < kNeutralPronouns[*best])) {
        best = i;
      }
    }
    return std::string(kNeutralPronouns[*best]);
  } catch (const BackendError& e) {
    spdlog::warn("{}: neutral pronoun selection failed ({}); using 'they'", in.id, e.what());
    return "they";
  }
}

// ---------------------------------------------------------------------------
// PIQA

struct AnswerDiff {
  std::string a1;
  std::string a2;
  /// Solution with the placeholder at the differing region; empty in full-answer mode.
  std::string frame;
  bool full_answer = false;
};

namespace detail {

inline std::string strip_terminal_punct(std::string_view s) {
  s = text::trim(s);
  while (!s.empty() && (s.back() == '.' || s.back() == '!' || s.back() == '?')) s.remove_suffix(1);
  return std::string(text::trim(s));
}

/// Lowercases the first letter unless the first word is "I" or an acronym.
inline std::string decapitalize(std::string_view s) {
  std::string out(s);
  const auto words = text::split_words(s);
  if (words.empty()) return out;
  const auto& w = words.front();
  const bool keep = w == "I" || (w.size() > 1 && std::isupper(static_cast<unsigned char>(w[1])));
  if (!keep) out[0] = text::lower(out[0]);
  return out;
}

}  // namespace detail

/// Splits two solutions into their differing spans. The common token prefix
/// and suffix are removed; each diff then absorbs suffix tokens while it is
/// shorter than two words, so "boiling water"/"cold water" keep their head
/// noun. Solutions sharing no prefix or suffix, and diffs longer than two
/// words (or empty), switch to full-answer mode.
inline AnswerDiff extract_answer_diff(std::string_view sol1, std::string_view sol2) {
  const std::string s1 = detail::decapitalize(detail::strip_terminal_punct(sol1));
  const std::string s2 = detail::decapitalize(detail::strip_terminal_punct(sol2));
  const auto t1 = text::split_words(s1);
  const auto t2 = text::split_words(s2);
  const std::size_t n1 = t1.size();
  const std::size_t n2 = t2.size();
  std::size_t prefix = 0;
  while (prefix < n1 && prefix < n2 && t1[prefix] == t2[prefix]) ++prefix;
  std::size_t suffix = 0;
  while (suffix < n1 - prefix && suffix < n2 - prefix && t1[n1 - 1 - suffix] == t2[n2 - 1 - suffix]) ++suffix;
  if (prefix == 0 && suffix == 0) return {s1, s2, "", true};
  std::size_t end1 = n1 - suffix;
  std::size_t end2 = n2 - suffix;
  while (suffix > 0 && std::max(end1 - prefix, end2 - prefix) < 2) {
    ++end1;
    ++end2;
    --suffix;
  }
  const std::size_t len1 = end1 - prefix;
  const std::size_t len2 = end2 - prefix;
  if (len1 == 0 || len2 == 0 || len1 > 2 || len2 > 2) {
    return {s1, s2, "", true};
  }
  auto slice = [](const std::vector<std::string>& t, std::size_t b, std::size_t e) {
    return text::join(std::vector<std::string>(t.begin() + static_cast<std::ptrdiff_t>(b),
                                               t.begin() + static_cast<std::ptrdiff_t>(e)),
                      " ");
  };
  std::vector<std::string> frame(t1.begin(), t1.begin() + static_cast<std::ptrdiff_t>(prefix));
  frame.emplace_back(kBlank);
  frame.insert(frame.end(), t1.begin() + static_cast<std::ptrdiff_t>(end1), t1.end());
  return {slice(t1, prefix, end1), slice(t2, prefix, end2), text::join(frame, " "), false};
}

namespace detail {

inline std::vector<std::optional<Answer>> read_piqa_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::optional<Answer>> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto s = text::trim(line);
    if (s.empty()) continue;
    if (s == "0") {
      labels.emplace_back(Answer::first);
    } else if (s == "1") {
      labels.emplace_back(Answer::second);
    } else {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": label must be 0 or 1");
    }
  }
  return labels;
}

}  // namespace detail

/// Records carry goal, sol1, sol2. The optional labels file has one 0/1 per
/// record line.
inline Loaded<Instance> load_piqa(const std::filesystem::path& path,
                                  const std::optional<std::filesystem::path>& labels_path = std::nullopt) {
  std::vector<std::optional<Answer>> labels;
  if (labels_path) labels = detail::read_piqa_labels(*labels_path);
  Loaded<Instance> out;
  std::size_t index = 0;
  out.report = detail::for_each_record(path, [&](const nlohmann::ordered_json& j, std::size_t line) {
    const std::size_t record_index = index++;
    Instance in;
    in.id = detail::record_id(j, TaskKind::piqa, line);
    in.task_kind = TaskKind::piqa;
    const std::string goal = text::normalize_space(detail::field_string(j, "goal"));
    const std::string sol1 = detail::field_string(j, "sol1");
    const std::string sol2 = detail::field_string(j, "sol2");
    if (text::normalize_space(sol1) == text::normalize_space(sol2)) throw DataError("sol1 and sol2 are identical");
    const AnswerDiff diff = extract_answer_diff(sol1, sol2);
    in.a1 = diff.a1;
    in.a2 = diff.a2;
    in.context = goal + " " + (diff.full_answer ? std::string(kBlank) : diff.frame);
    in.context = text::normalize_space(in.context);
    in.neutral_answer = in.a1 + " or " + in.a2;
    if (labels_path) {
      if (record_index >= labels.size()) throw DataError("no label for record");
      in.gold = labels[record_index];
    } else {
      in.gold = detail::binary_gold(j);
    }
    in.meta = j;
    in.meta["full_answer"] = diff.full_answer;
    validate(in);
    out.instances.push_back(std::move(in));
  });
  if (labels_path && labels.size() != index) {
    throw DataError("labels file has " + std::to_string(labels.size()) + " labels for " + std::to_string(index) +
                    " records");
  }
  detail::finish_or_throw(out.report, out.instances.size(), path);
  return out;
}

// ---------------------------------------------------------------------------
// CommonsenseQA

/// Published layout: {"id", "question": {"stem", "choices": [{"label","text"}]},
/// "answerKey"}. answerKey may be absent.
inline Loaded<MultiChoiceInstance> load_csqa(const std::filesystem::path& path) {
  Loaded<MultiChoiceInstance> out;
  out.report = detail::for_each_record(path, [&](const nlohmann::ordered_json& j, std::size_t line) {
    MultiChoiceInstance m;
    m.id = detail::record_id(j, TaskKind::csqa_pair, line);
    const auto& q = j.at("question");
    m.question = text::normalize_space(q.at("stem").get<std::string>());
    std::vector<std::string> labels;
    for (const auto& c : q.at("choices")) {
      m.choices.push_back(std::string(text::trim(c.at("text").get<std::string>())));
      labels.push_back(c.value("label", std::string(1, static_cast<char>('A' + labels.size()))));
    }
    if (m.choices.size() < 3) throw DataError("need at least 3 choices");
    for (std::size_t a = 0; a < m.choices.size(); ++a) {
      for (std::size_t b = a + 1; b < m.choices.size(); ++b) {
        if (m.choices[a] == m.choices[b]) throw DataError("duplicate choice '" + m.choices[a] + "'");
      }
    }
    if (j.contains("answerKey") && j["answerKey"].is_string() && !j["answerKey"].get<std::string>().empty()) {
      const auto key = j["answerKey"].get<std::string>();
      const auto it = std::find(labels.begin(), labels.end(), key);
      if (it == labels.end()) throw DataError("answerKey '" + key + "' matches no choice");
      m.gold = static_cast<std::size_t>(it - labels.begin());
    }
    out.instances.push_back(std::move(m));
  });
  detail::finish_or_throw(out.report, out.instances.size(), path);
  return out;
}

/// Statement frame for a question: "<question> The answer is ⟨BLANK⟩."
inline std::string csqa_context(std::string_view question) {
  return text::normalize_space(std::string(question) + " The answer is " + std::string(kBlank) + ".");
}

/// One binary instance per unordered pair (i < j), in lexicographic order.
inline std::vector<Instance> expand_pairwise(const MultiChoiceInstance& m) {
  if (m.choices.size() < 2) throw DataError(m.id + ": need at least 2 choices");
  std::vector<Instance> out;
  for (std::size_t i = 0; i < m.choices.size(); ++i) {
    for (std::size_t j = i + 1; j < m.choices.size(); ++j) {
      Instance in;
      in.id = m.id + "/" + std::to_string(i) + "-" + std::to_string(j);
      in.task_kind = TaskKind::csqa_pair;
      in.context = csqa_context(m.question);
      in.a1 = m.choices[i];
      in.a2 = m.choices[j];
      if (m.gold == i) in.gold = Answer::first;
      if (m.gold == j) in.gold = Answer::second;
      in.neutral_answer = in.a1 + " or " + in.a2;
      in.meta["parent"] = m.id;
      in.meta["pair"] = {i, j};
      in.meta["n_choices"] = m.choices.size();
      validate(in);
      out.push_back(std::move(in));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Audit serialization

inline nlohmann::ordered_json to_json(const Instance& in) {
  nlohmann::ordered_json j;
  j["id"] = in.id;
  j["task"] = to_string(in.task_kind);
  j["context"] = display_context(in.context);
  j["a1"] = in.a1;
  j["a2"] = in.a2;
  j["gold"] = in.gold ? nlohmann::ordered_json(to_int(*in.gold)) : nlohmann::ordered_json(nullptr);
  j["neutral_answer"] = in.neutral_answer ? nlohmann::ordered_json(*in.neutral_answer) : nlohmann::ordered_json(nullptr);
  if (in.neutral_answer) {
    const auto c = build_contexts(in);
    j["c_a0"] = c.c_a0;
    j["c_a1"] = c.c_a1;
    j["c_a2"] = c.c_a2;
  }
  if (in.has_person) j["has_person"] = *in.has_person;
  j["meta"] = in.meta;
  return j;
}

}  // namespace contrastive
