#include "tandem/pipeline/manifest.hpp"

#include <fstream>
#include <memory>

#include "tandem/digest.hpp"
#include "tandem/error.hpp"

namespace tandem::pipeline {

namespace fs = std::filesystem;

StageManifest::StageManifest(std::string stage, std::string config_hash, std::uint64_t seed)
    : stage_(std::move(stage)),
      config_hash_(std::move(config_hash)),
      seed_(seed),
      start_(std::chrono::steady_clock::now()) {}

void StageManifest::input(const fs::path& path) {
  inputs_[path.filename().string()] = sha256_file(path);
}

std::int64_t StageManifest::get(const std::string& name) const {
  const auto it = counters_.find(name);
  return it == counters_.end() ? 0 : it->second;
}

void StageManifest::mark(const std::string& phase) {
  timings_ms_[phase] = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - start_)
                           .count();
}

Json StageManifest::to_json(const std::map<std::string, std::string>& outputs) const {
  return {{"stage", stage_},
          {"config_sha256", config_hash_},
          {"seed", seed_},
          {"inputs", inputs_},
          {"outputs", outputs},
          {"counters", counters_},
          {"timings_ms", timings_ms_}};
}

void OutputSet::add(const std::string& name, std::string bytes) {
  files_.emplace_back(name, std::move(bytes));
}

void OutputSet::add_jsonl(const std::string& name, const std::vector<Json>& rows) {
  std::string bytes;
  for (const auto& row : rows) {
    bytes += canonical_dump(row);
    bytes += '\n';
  }
  add(name, std::move(bytes));
}

void OutputSet::add_json(const std::string& name, const Json& doc) {
  add(name, doc.dump(2, ' ', false) + "\n");
}

fs::path OutputSet::publish(const fs::path& dir, StageManifest& manifest) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());

  std::vector<std::unique_ptr<AtomicFileWriter>> writers;
  std::map<std::string, std::string> checksums;
  for (const auto& [name, bytes] : files_) {
    writers.push_back(std::make_unique<AtomicFileWriter>(dir / name));
    writers.back()->write(bytes);
    checksums[name] = sha256_hex(bytes);
  }
  // All temporaries are complete; move them into place.
  for (auto& w : writers) w->commit();

  manifest.mark("total");
  const fs::path manifest_path = dir / (manifest.stage() + ".manifest.json");
  AtomicFileWriter out(manifest_path);
  out.write(manifest.to_json(checksums).dump(2, ' ', false) + "\n");
  out.commit();
  return manifest_path;
}

Json strip_volatile(Json manifest) {
  if (manifest.is_object()) manifest.erase("timings_ms");
  return manifest;
}

}  // namespace tandem::pipeline
