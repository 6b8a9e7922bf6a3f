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
#include <cctype>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace contrastive {

/// Reserved placeholder token. Used both for the answer position in a task
/// context and for blanks an infilling model has to complete.
inline constexpr std::string_view kBlank = "\xE2\x9F\xA8" "BLANK" "\xE2\x9F\xA9";  // ⟨BLANK⟩

// ---------------------------------------------------------------------------
// Errors. Each family maps onto one CLI exit code.

/// Malformed input data (catalog, dataset, trace files).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Catalog entry that fails to parse; carries the 1-based line and field.
class ParseError : public DataError {
 public:
  ParseError(std::size_t line, std::string field, const std::string& what)
      : DataError("line " + std::to_string(line) + ", field '" + field + "': " + what),
        line_(line),
        field_(std::move(field)) {}

  [[nodiscard]] std::size_t line() const noexcept { return line_; }
  [[nodiscard]] const std::string& field() const noexcept { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

/// Anything that goes wrong talking to a language-model backend.
class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unreachable server, refused connection, timeout. Safe to retry.
class TransportError : public BackendError {
 public:
  using BackendError::BackendError;
};

/// Response that violates the wire schema or a response-type invariant.
class ProtocolError : public BackendError {
 public:
  using BackendError::BackendError;
};

/// The infiller produced no candidate for a prompt.
class EmptyGenerationError : public BackendError {
 public:
  using BackendError::BackendError;
};

/// Invalid configuration or flag combination.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Task kinds

enum class TaskKind { wsc, winogrande, winogender, piqa, csqa_pair };

inline constexpr std::array<TaskKind, 5> kAllTaskKinds = {
    TaskKind::wsc, TaskKind::winogrande, TaskKind::winogender, TaskKind::piqa, TaskKind::csqa_pair};

inline std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::wsc: return "wsc";
    case TaskKind::winogrande: return "winogrande";
    case TaskKind::winogender: return "winogender";
    case TaskKind::piqa: return "piqa";
    case TaskKind::csqa_pair: return "csqa";
  }
  return "?";
}

inline std::optional<TaskKind> parse_task_kind(std::string_view s) {
  if (s == "wsc") return TaskKind::wsc;
  if (s == "winogrande") return TaskKind::winogrande;
  if (s == "winogender") return TaskKind::winogender;
  if (s == "piqa") return TaskKind::piqa;
  if (s == "csqa" || s == "csqa_pair") return TaskKind::csqa_pair;
  return std::nullopt;
}

/// WSC, Winogrande and Winogender share the pronoun-resolution filtering rules.
inline bool is_wsc_family(TaskKind kind) {
  return kind == TaskKind::wsc || kind == TaskKind::winogrande || kind == TaskKind::winogender;
}

// ---------------------------------------------------------------------------
// Binary answers. Serialized as 1 and 2.

enum class Answer { first = 1, second = 2 };

inline constexpr std::size_t row(Answer a) { return a == Answer::first ? 0 : 1; }
inline constexpr Answer other(Answer a) { return a == Answer::first ? Answer::second : Answer::first; }
inline constexpr int to_int(Answer a) { return static_cast<int>(a); }

inline std::optional<Answer> answer_from_int(long long v) {
  if (v == 1) return Answer::first;
  if (v == 2) return Answer::second;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Text helpers. ASCII case mapping only.

namespace text {

inline bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

inline char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }
inline char upper(char c) { return static_cast<char>(std::toupper(static_cast<unsigned char>(c))); }

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), lower);
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

/// Whitespace-separated words, no empty entries.
inline std::vector<std::string> split_words(std::string_view s) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    std::size_t j = i;
    while (j < s.size() && !is_space(s[j])) ++j;
    if (j > i) words.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return words;
}

inline std::size_t count_words(std::string_view s) {
  std::size_t n = 0;
  bool in_word = false;
  for (char c : s) {
    if (is_space(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++n;
    }
  }
  return n;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

/// Collapse whitespace runs into one space and trim both ends.
inline std::string normalize_space(std::string_view s) { return join(split_words(s), " "); }

inline std::string capitalize_first(std::string_view s) {
  std::string out(s);
  if (!out.empty()) out[0] = upper(out[0]);
  return out;
}

inline bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (lower(a[i]) != lower(b[i])) return false;
  }
  return true;
}

/// Lowercase and keep only [a-z0-9_'-]; used to compare words while ignoring
/// adjacent punctuation.
inline std::string normalize_token(std::string_view word) {
  std::string out;
  for (char c : word) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u) || c == '_' || c == '\'' || c == '-') out += lower(c);
  }
  return out;
}

inline std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  if (needle.empty()) return 0;
  std::size_t n = 0;
  for (auto pos = haystack.find(needle); pos != std::string_view::npos;
       pos = haystack.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

inline std::string replace_all(std::string_view s, std::string_view from, std::string_view to) {
  std::string out;
  if (from.empty()) return std::string(s);
  std::size_t i = 0;
  for (auto pos = s.find(from); pos != std::string_view::npos; pos = s.find(from, i)) {
    out.append(s.substr(i, pos - i));
    out.append(to);
    i = pos + from.size();
  }
  out.append(s.substr(i));
  return out;
}

}  // namespace text
}  // namespace contrastive
