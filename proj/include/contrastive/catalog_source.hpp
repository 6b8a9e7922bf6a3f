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

// Authoring-time expansion of shorthand catalog sources. A source record has
// the same fields as a catalog record, but its pattern may contain
// alternation groups "[is|are]". Each record expands into the cartesian
// product of its groups; the catalog parser itself never sees brackets.

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "contrastive/common.hpp"
#include "contrastive/template_engine.hpp"

namespace contrastive {

namespace detail {

struct AlternationPart {
  bool is_group = false;
  std::vector<std::string> options;  // one entry for plain text
};

inline std::vector<AlternationPart> split_alternations(std::string_view pattern, std::size_t line) {
  std::vector<AlternationPart> parts;
  std::string plain;
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    if (pattern[i] == ']') throw ParseError(line, "pattern", "unbalanced ']'");
    if (pattern[i] != '[') {
      plain += pattern[i];
      continue;
    }
    const auto close = pattern.find(']', i);
    if (close == std::string_view::npos) throw ParseError(line, "pattern", "unbalanced '['");
    if (!plain.empty()) parts.push_back({false, {plain}});
    plain.clear();
    AlternationPart group{true, {}};
    std::string opt;
    for (char c : pattern.substr(i + 1, close - i - 1)) {
      if (c == '[') throw ParseError(line, "pattern", "nested '['");
      if (c == '|') {
        group.options.push_back(opt);
        opt.clear();
      } else {
        opt += c;
      }
    }
    group.options.push_back(opt);
    parts.push_back(std::move(group));
    i = close;
  }
  if (!plain.empty()) parts.push_back({false, {plain}});
  return parts;
}

}  // namespace detail

/// Sizes of the alternation groups in a shorthand pattern, left to right.
inline std::vector<std::size_t> alternation_group_sizes(std::string_view pattern) {
  std::vector<std::size_t> sizes;
  for (const auto& p : detail::split_alternations(pattern, 0)) {
    if (p.is_group) sizes.push_back(p.options.size());
  }
  return sizes;
}

/// All expansions of a shorthand pattern; the leftmost group varies slowest.
inline std::vector<std::string> expand_alternations(std::string_view pattern, std::size_t line = 0) {
  std::vector<std::string> out{""};
  for (const auto& part : detail::split_alternations(pattern, line)) {
    std::vector<std::string> next;
    next.reserve(out.size() * part.options.size());
    for (const auto& prefix : out) {
      for (const auto& opt : part.options) next.push_back(prefix + opt);
    }
    out = std::move(next);
  }
  for (auto& s : out) s = text::normalize_space(s);
  return out;
}

/// Expands a shorthand catalog source into catalog text. Expanded ids get a
/// "-<n>" suffix (1-based) when a record yields more than one pattern.
inline std::string expand_catalog_source(std::string_view source) {
  std::string out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= source.size()) {
    auto end = source.find('\n', pos);
    if (end == std::string_view::npos) end = source.size();
    const auto line = text::trim(source.substr(pos, end - pos));
    ++line_no;
    pos = end + 1;
    if (line.empty() || line.front() == '#') continue;
    nlohmann::ordered_json j;
    try {
      j = nlohmann::ordered_json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(line_no, "record", std::string("invalid record: ") + e.what());
    }
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string()) throw ParseError(line_no, "id", "missing");
    if (!j.contains("pattern") || !j["pattern"].is_string()) throw ParseError(line_no, "pattern", "missing");
    const std::string stem = j["id"].get<std::string>();
    const auto patterns = expand_alternations(j["pattern"].get<std::string>(), line_no);
    for (std::size_t k = 0; k < patterns.size(); ++k) {
      nlohmann::ordered_json e = j;
      e["id"] = patterns.size() == 1 ? stem : stem + "-" + std::to_string(k + 1);
      e["pattern"] = patterns[k];
      // Validate through the real parser so a bad source fails at authoring time.
      (void)parse_catalog_entry(e.dump(), line_no);
      out += e.dump();
      out += '\n';
    }
  }
  return out;
}

}  // namespace contrastive
