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

// Content-addressed response cache.
//
// Layout under the cache root:
//   infill/<key>.json     one file per entry
//   logprob/<key>.json
//   manifest.jsonl        append-only index {"kind","key","checksum","size"}
//
// Entries are written to a temporary file and renamed into place, so readers
// never observe a partial entry and several processes may share one root.

#pragma once

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "contrastive/common.hpp"
#include "contrastive/hash.hpp"
#include "contrastive/lm_backend.hpp"

namespace contrastive {

enum class CacheKind { Infill, Logprob };

inline std::string_view to_string(CacheKind k) { return k == CacheKind::Infill ? "infill" : "logprob"; }

struct CacheKey {
  CacheKind kind = CacheKind::Logprob;
  std::string payload_hash;  // 64 hex chars
  bool operator==(const CacheKey&) const = default;
};

/// Key over (kind, backend identity, exact request bytes[, seed]).
inline CacheKey make_cache_key(CacheKind kind, std::string_view backend_identity, std::string_view request_bytes,
                               std::optional<std::uint64_t> seed = std::nullopt) {
  Sha256 h;
  h.add_field(to_string(kind)).add_field(backend_identity).add_field(request_bytes);
  h.add_field(seed ? std::to_string(*seed) : std::string("-"));
  return {kind, to_hex(h.finish())};
}

struct CacheOptions {
  /// Keep the existing entry when a key is written twice.
  bool first_write_wins = false;
};

struct CompactionStats {
  std::size_t entries = 0;
  std::size_t removed_corrupt = 0;
  std::size_t removed_temp = 0;
  std::size_t manifest_lines_before = 0;
};

class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path root, CacheOptions options = {})
      : root_(std::move(root)), options_(options) {
    std::filesystem::create_directories(root_ / "infill");
    std::filesystem::create_directories(root_ / "logprob");
  }

  [[nodiscard]] const std::filesystem::path& root() const { return root_; }

  [[nodiscard]] std::filesystem::path entry_path(const CacheKey& key) const {
    return root_ / std::string(to_string(key.kind)) / (key.payload_hash + ".json");
  }

  /// Stored payload, or nullopt on a miss. Corrupt entries count as misses.
  [[nodiscard]] std::optional<std::string> get(const CacheKey& key) const {
    const auto path = entry_path(key);
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::stringstream ss;
    ss << in.rdbuf();
    auto payload = decode_entry(ss.str(), key);
    if (!payload) spdlog::warn("cache: corrupt entry {} treated as miss", path.string());
    return payload;
  }

  void put(const CacheKey& key, std::string_view payload) const {
    const auto path = entry_path(key);
    if (options_.first_write_wins && std::filesystem::exists(path)) return;
    const std::string entry = encode_entry(key, payload);
    const auto tmp = path.parent_path() / (".tmp-" + unique_suffix());
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw std::runtime_error("cache: cannot write " + tmp.string());
      out << entry;
      out.flush();
      if (!out) throw std::runtime_error("cache: short write to " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
      std::filesystem::remove(tmp, ec);
      throw std::runtime_error("cache: rename failed for " + path.string());
    }
    nlohmann::ordered_json m;
    m["kind"] = to_string(key.kind);
    m["key"] = key.payload_hash;
    m["checksum"] = sha256_hex(payload);
    m["size"] = payload.size();
    append_manifest(m.dump() + "\n");
  }

  /// Rewrites the manifest from the entries on disk, dropping corrupt entries
  /// and stray temporary files.
  CompactionStats compact() const {
    CompactionStats stats;
    {
      std::ifstream in(root_ / "manifest.jsonl");
      std::string line;
      while (std::getline(in, line)) stats.manifest_lines_before += line.empty() ? 0 : 1;
    }
    std::vector<std::string> lines;
    for (CacheKind kind : {CacheKind::Infill, CacheKind::Logprob}) {
      std::vector<std::filesystem::path> files;
      for (const auto& de : std::filesystem::directory_iterator(root_ / std::string(to_string(kind)))) {
        files.push_back(de.path());
      }
      std::sort(files.begin(), files.end());
      for (const auto& p : files) {
        const auto name = p.filename().string();
        if (name.rfind(".tmp-", 0) == 0) {
          std::filesystem::remove(p);
          ++stats.removed_temp;
          continue;
        }
        if (p.extension() != ".json") continue;
        const CacheKey key{kind, p.stem().string()};
        std::ifstream in(p, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        const auto payload = decode_entry(ss.str(), key);
        if (!payload) {
          std::filesystem::remove(p);
          ++stats.removed_corrupt;
          continue;
        }
        nlohmann::ordered_json m;
        m["kind"] = to_string(kind);
        m["key"] = key.payload_hash;
        m["checksum"] = sha256_hex(*payload);
        m["size"] = payload->size();
        lines.push_back(m.dump());
        ++stats.entries;
      }
    }
    const auto tmp = root_ / (".manifest-" + unique_suffix());
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      for (const auto& l : lines) out << l << '\n';
    }
    std::filesystem::rename(tmp, root_ / "manifest.jsonl");
    return stats;
  }

 private:
  static std::string encode_entry(const CacheKey& key, std::string_view payload) {
    nlohmann::ordered_json j;
    j["kind"] = to_string(key.kind);
    j["key"] = key.payload_hash;
    j["checksum"] = sha256_hex(payload);
    j["payload"] = std::string(payload);
    return j.dump();
  }

  static std::optional<std::string> decode_entry(const std::string& bytes, const CacheKey& key) {
    try {
      const auto j = nlohmann::json::parse(bytes);
      if (j.at("key").get<std::string>() != key.payload_hash) return std::nullopt;
      if (j.at("kind").get<std::string>() != to_string(key.kind)) return std::nullopt;
      auto payload = j.at("payload").get<std::string>();
      if (sha256_hex(payload) != j.at("checksum").get<std::string>()) return std::nullopt;
      return payload;
    } catch (const nlohmann::json::exception&) {
      return std::nullopt;
    }
  }

  void append_manifest(const std::string& line) const {
    const auto path = (root_ / "manifest.jsonl").string();
    const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (fd < 0) throw std::runtime_error("cache: cannot open manifest " + path);
    const auto written = ::write(fd, line.data(), line.size());
    ::close(fd);
    if (written != static_cast<ssize_t>(line.size())) throw std::runtime_error("cache: short manifest write");
  }

  static std::string unique_suffix() {
    static std::atomic<std::uint64_t> counter{0};
    return std::to_string(::getpid()) + "-" +
           std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())) + "-" +
           std::to_string(counter.fetch_add(1));
  }

  std::filesystem::path root_;
  CacheOptions options_;
};

/// Backend decorator that serves repeated requests from a ResponseCache.
/// Responses are validated before they are stored.
class CachingBackend final : public LmBackend {
 public:
  CachingBackend(const LmBackend& inner, const ResponseCache& cache, std::optional<std::uint64_t> seed = std::nullopt)
      : inner_(inner), cache_(cache), seed_(seed) {}

  [[nodiscard]] std::string identity() const override { return inner_.identity(); }

  InfillResponse infill(const InfillRequest& request) const override {
    validate(request);
    const auto key = make_cache_key(CacheKind::Infill, inner_.identity(), wire::infill_request(request).dump(),
                                    inner_.deterministic() ? std::nullopt : seed_);
    if (auto hit = cache_.get(key)) {
      try {
        auto resp = wire::parse_infill_response(wire::Json::parse(*hit));
        validate(resp, request.n_blanks(), request.top_k_return);
        ++hits_;
        return resp;
      } catch (const std::exception& e) {
        spdlog::warn("cache: unusable infill entry {}: {}", key.payload_hash, e.what());
      }
    }
    ++misses_;
    auto resp = inner_.infill(request);
    validate(resp, request.n_blanks(), request.top_k_return);
    cache_.put(key, wire::infill_response(resp).dump());
    return resp;
  }

  LogprobResponse sequence_logprob(std::string_view text) const override {
    const auto key = logprob_key(text);
    if (auto hit = lookup_logprob(key)) return *hit;
    ++misses_;
    auto r = inner_.sequence_logprob(text);
    validate(r);
    cache_.put(key, wire::logprob_result(r).dump());
    return r;
  }

  std::vector<LogprobResponse> sequence_logprob_batch(std::span<const std::string> texts) const override {
    std::vector<std::optional<LogprobResponse>> found(texts.size());
    std::vector<std::string> missing;
    std::vector<std::size_t> missing_at;
    for (std::size_t i = 0; i < texts.size(); ++i) {
      found[i] = lookup_logprob(logprob_key(texts[i]));
      if (!found[i]) {
        missing.push_back(texts[i]);
        missing_at.push_back(i);
      }
    }
    if (!missing.empty()) {
      misses_ += missing.size();
      const auto fresh = inner_.sequence_logprob_batch(missing);
      if (fresh.size() != missing.size()) throw ProtocolError("batched logprob size mismatch");
      for (std::size_t k = 0; k < fresh.size(); ++k) {
        validate(fresh[k]);
        cache_.put(logprob_key(missing[k]), wire::logprob_result(fresh[k]).dump());
        found[missing_at[k]] = fresh[k];
      }
    }
    std::vector<LogprobResponse> out;
    out.reserve(found.size());
    for (auto& f : found) out.push_back(*f);
    return out;
  }

  [[nodiscard]] bool supports_candidate_scoring() const override { return inner_.supports_candidate_scoring(); }
  [[nodiscard]] bool deterministic() const override { return inner_.deterministic(); }
  void check_ready() const override { inner_.check_ready(); }

  [[nodiscard]] std::size_t hits() const { return hits_.load(); }
  [[nodiscard]] std::size_t misses() const { return misses_.load(); }

 private:
  CacheKey logprob_key(std::string_view text) const {
    return make_cache_key(CacheKind::Logprob, inner_.identity(), wire::logprob_request(text).dump());
  }

  std::optional<LogprobResponse> lookup_logprob(const CacheKey& key) const {
    auto hit = cache_.get(key);
    if (!hit) return std::nullopt;
    try {
      auto r = wire::parse_logprob_result(wire::Json::parse(*hit));
      validate(r);
      ++hits_;
      return r;
    } catch (const std::exception& e) {
      spdlog::warn("cache: unusable logprob entry {}: {}", key.payload_hash, e.what());
      return std::nullopt;
    }
  }

  const LmBackend& inner_;
  const ResponseCache& cache_;
  std::optional<std::uint64_t> seed_;
  mutable std::atomic<std::size_t> hits_{0};
  mutable std::atomic<std::size_t> misses_{0};
};

}  // namespace contrastive
