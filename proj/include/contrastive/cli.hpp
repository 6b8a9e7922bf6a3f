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

// Command-line front end.
//
//   contrastive run            --task T --data F --templates F --mode M --out D
//   contrastive flip-eval      (zeroshot and flipped runs plus the drop)
//   contrastive abstract-eval  (the three masking regimes plus the unmasked run)
//   contrastive csqa           (pairwise runs with Vote and Maximum-Margin)
//   contrastive inspect ID     --out D
//   contrastive expand-catalog --source F [--out D]
//
// Exit codes: 0 ok, 1 usage, 2 data, 3 backend.

#pragma once

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "contrastive/catalog_source.hpp"
#include "contrastive/common.hpp"
#include "contrastive/evaluation.hpp"

namespace contrastive {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitBackend = 3;

namespace detail {

struct CommonFlags {
  std::string task = "winogrande";
  std::string data;
  std::string labels;
  std::string templates;
  std::string backend = "stub";
  std::uint64_t seed = 0;
  std::size_t top_k = 1;
  std::string out;
  std::string cache;
  std::size_t workers = 1;
  std::vector<std::string> markers;
  int retries = 3;
  int timeout_ms = 60000;
};

inline void add_common_flags(CLI::App& app, CommonFlags& f, bool with_task) {
  if (with_task) {
    app.add_option("--task", f.task, "wsc | winogrande | winogender | piqa | csqa")
        ->check(CLI::IsMember({"wsc", "winogrande", "winogender", "piqa", "csqa"}));
  }
  app.add_option("--data", f.data, "dataset file (JSONL)")->required();
  app.add_option("--labels", f.labels, "PIQA labels file");
  app.add_option("--templates", f.templates, "template catalog (JSONL)")->required();
  app.add_option("--backend", f.backend, "stub or http://host:port");
  app.add_option("--seed", f.seed, "global seed");
  app.add_option("--top-k", f.top_k, "explanations kept per template")->check(CLI::PositiveNumber);
  app.add_option("--out", f.out, "output directory")->required();
  app.add_option("--cache", f.cache, "response cache directory")->envname("CONTRASTIVE_CACHE");
  app.add_option("--workers", f.workers, "instance-level worker threads")->check(CLI::PositiveNumber);
  app.add_option("--stub-marker", f.markers, "stub backend: penalized word or phrase (repeatable)");
  app.add_option("--retries", f.retries, "http backend: retries per request")->check(CLI::NonNegativeNumber);
  app.add_option("--timeout-ms", f.timeout_ms, "http backend: request timeout")->check(CLI::PositiveNumber);
}

inline RunConfig to_config(const CommonFlags& f, const std::string& mode) {
  RunConfig c;
  const auto task = parse_task_kind(f.task);
  if (!task) throw ConfigError("unknown task: " + f.task);
  c.task = *task;
  c.data = f.data;
  if (!f.labels.empty()) {
    if (c.task != TaskKind::piqa) throw ConfigError("--labels applies to --task piqa only");
    c.labels = f.labels;
  }
  c.templates = f.templates;
  c.backend = f.backend;
  std::tie(c.mode, c.abstraction) = parse_mode(mode);
  c.seed = f.seed;
  c.top_k = f.top_k;
  c.out = f.out;
  if (!f.cache.empty()) c.cache = f.cache;
  c.workers = f.workers;
  c.stub.markers = f.markers;
  if (!f.markers.empty() && f.backend != "stub") throw ConfigError("--stub-marker requires --backend stub");
  c.http.retries = f.retries;
  c.http.request_timeout_ms = f.timeout_ms;
  validate(c);
  return c;
}

inline void install_stderr_logger(const std::string& level) {
  auto logger = spdlog::get("contrastive");
  if (!logger) logger = spdlog::stderr_color_mt("contrastive");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::from_str(level));
}

inline std::string summary_line(const Report& r) {
  return summary_json(r).dump();
}

inline int cmd_run(const RunConfig& c) {
  const auto o = run(c);
  std::cout << summary_line(o.report) << "\n";
  return kExitOk;
}

inline int cmd_flip_eval(RunConfig c) {
  const std::filesystem::path root = c.out;
  c.mode = ScoringMode::ZeroShot;
  c.out = root / "zeroshot";
  const auto original = run(c);
  c.mode = ScoringMode::Flipped;
  c.out = root / "flip";
  const auto flipped = run(c);
  const auto drop = flip_drop(original.report, flipped.report);
  const std::string line = to_json(drop).dump();
  detail::write_file(root / "flip_drop.json", line + "\n");
  std::cout << line << "\n";
  return kExitOk;
}

inline int cmd_abstract_eval(RunConfig c) {
  const std::filesystem::path root = c.out;
  struct Regime {
    const char* dir;
    ScoringMode mode;
    AbstractionMode abstraction;
  };
  const Regime regimes[] = {
      {"none", ScoringMode::ZeroShot, AbstractionMode::None},
      {"context-only-abstracted", ScoringMode::ContextOnly, AbstractionMode::Full},
      {"abstract-full", ScoringMode::Abstracted, AbstractionMode::Full},
      {"abstract-after", ScoringMode::Abstracted, AbstractionMode::AfterExplanation},
  };
  Json summary = Json::array();
  for (const auto& g : regimes) {
    c.mode = g.mode;
    c.abstraction = g.abstraction;
    c.out = root / g.dir;
    const auto o = run(c);
    Json j = summary_json(o.report);
    j["regime"] = g.dir;
    summary.push_back(j);
  }
  std::string lines;
  for (const auto& j : summary) lines += j.dump() + "\n";
  detail::write_file(root / "abstraction.jsonl", lines);
  std::cout << lines;
  return kExitOk;
}

inline int cmd_inspect(const std::string& id, const std::filesystem::path& out) {
  const auto path = out / "trace.jsonl";
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = Json::parse(line);
    if (j.value("id", "") == id) {
      std::cout << j.dump(2) << "\n";
      return kExitOk;
    }
  }
  throw DataError("instance " + id + " not found in " + path.string());
}

inline int cmd_expand_catalog(const std::string& source, const std::string& out) {
  const std::string catalog = expand_catalog_source(detail::read_file(source));
  if (out.empty()) {
    std::cout << catalog;
  } else {
    std::filesystem::create_directories(out);
    detail::write_file(std::filesystem::path(out) / "catalog.jsonl", catalog);
  }
  return kExitOk;
}

}  // namespace detail

/// Parses argv and dispatches. Never throws.
inline int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Contrastive explanations for commonsense multiple choice"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace | debug | info | warn | error | off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  detail::CommonFlags run_f;
  std::string run_mode = "zeroshot";
  auto* run_cmd = app.add_subcommand("run", "evaluate one dataset in one mode");
  detail::add_common_flags(*run_cmd, run_f, true);
  run_cmd->add_option("--mode", run_mode, "context-only | zeroshot | flip | abstract-full | abstract-after")
      ->check(CLI::IsMember({"context-only", "zeroshot", "flip", "abstract-full", "abstract-after"}));

  detail::CommonFlags flip_f;
  auto* flip_cmd = app.add_subcommand("flip-eval", "zeroshot and flipped runs plus the accuracy drop");
  detail::add_common_flags(*flip_cmd, flip_f, true);

  detail::CommonFlags abs_f;
  auto* abs_cmd = app.add_subcommand("abstract-eval", "masked-answer regimes");
  detail::add_common_flags(*abs_cmd, abs_f, true);

  detail::CommonFlags csqa_f;
  std::string csqa_mode = "zeroshot";
  auto* csqa_cmd = app.add_subcommand("csqa", "pairwise CommonsenseQA with Vote and Maximum-Margin");
  detail::add_common_flags(*csqa_cmd, csqa_f, false);
  csqa_cmd->add_option("--mode", csqa_mode, "context-only | zeroshot | flip | abstract-full | abstract-after")
      ->check(CLI::IsMember({"context-only", "zeroshot", "flip", "abstract-full", "abstract-after"}));

  std::string inspect_id;
  std::string inspect_out;
  auto* inspect_cmd = app.add_subcommand("inspect", "pretty-print one instance trace");
  inspect_cmd->add_option("instance-id", inspect_id, "instance id")->required();
  inspect_cmd->add_option("--out", inspect_out, "run output directory")->required();

  std::string expand_source;
  std::string expand_out;
  auto* expand_cmd = app.add_subcommand("expand-catalog", "expand a shorthand catalog source");
  expand_cmd->add_option("--source", expand_source, "catalog source (JSONL with [a|b] groups)")->required();
  expand_cmd->add_option("--out", expand_out, "directory for catalog.jsonl (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  detail::install_stderr_logger(log_level);
  try {
    if (*run_cmd) return detail::cmd_run(detail::to_config(run_f, run_mode));
    if (*flip_cmd) return detail::cmd_flip_eval(detail::to_config(flip_f, "zeroshot"));
    if (*abs_cmd) return detail::cmd_abstract_eval(detail::to_config(abs_f, "zeroshot"));
    if (*csqa_cmd) {
      csqa_f.task = "csqa";
      return detail::cmd_run(detail::to_config(csqa_f, csqa_mode));
    }
    if (*inspect_cmd) return detail::cmd_inspect(inspect_id, inspect_out);
    if (*expand_cmd) return detail::cmd_expand_catalog(expand_source, expand_out);
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    return kExitUsage;
  } catch (const BackendError& e) {
    spdlog::error("backend: {}", e.what());
    return kExitBackend;
  } catch (const DataError& e) {
    spdlog::error("data: {}", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitData;
  }
  return kExitUsage;
}

inline int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  for (const auto& a : args) argv.push_back(a.c_str());
  argv.push_back(nullptr);
  return run_cli(static_cast<int>(args.size()), argv.data());
}

}  // namespace contrastive
