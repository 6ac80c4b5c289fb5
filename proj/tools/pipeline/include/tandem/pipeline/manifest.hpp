#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "tandem/jsonl.hpp"

namespace tandem::pipeline {

/// Record of one stage run: config hash, input/output checksums, counters and
/// wall-clock timings. Written after every output file is in place.
class StageManifest {
 public:
  StageManifest(std::string stage, std::string config_hash, std::uint64_t seed);

  void input(const std::filesystem::path& path);
  void counter(const std::string& name, std::int64_t value) { counters_[name] = value; }
  void add(const std::string& name, std::int64_t delta = 1) { counters_[name] += delta; }
  std::int64_t get(const std::string& name) const;
  void mark(const std::string& phase);  // elapsed time since construction

  Json to_json(const std::map<std::string, std::string>& outputs) const;
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
  std::string config_hash_;
  std::uint64_t seed_;
  std::map<std::string, std::string> inputs_;
  std::map<std::string, std::int64_t> counters_;
  std::map<std::string, std::int64_t> timings_ms_;
  std::chrono::steady_clock::time_point start_;
};

/// Stage outputs held in memory until publish(), which writes every file to a
/// temporary name, renames them into place, and finally writes the manifest.
/// If anything fails no partial output is left behind.
class OutputSet {
 public:
  void add(const std::string& name, std::string bytes);
  void add_jsonl(const std::string& name, const std::vector<Json>& rows);
  void add_json(const std::string& name, const Json& doc);

  /// Returns the manifest path.
  std::filesystem::path publish(const std::filesystem::path& dir, StageManifest& manifest);

 private:
  std::vector<std::pair<std::string, std::string>> files_;
};

/// Drops fields that legitimately differ between identical runs (timings).
Json strip_volatile(Json manifest);

}  // namespace tandem::pipeline
