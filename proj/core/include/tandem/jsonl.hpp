#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace tandem {

using Json = nlohmann::json;

/// Canonical compact form: sorted keys, UTF-8 (no \u escaping), no
/// insignificant whitespace. Invalid UTF-8 raises SchemaError.
std::string canonical_dump(const Json& value);

struct JsonlLine {
  std::size_t line_number = 0;  // 1-based
  Json value;
};

/// Parses a JSONL file; blank lines are skipped. Throws DataError naming the
/// file and line on malformed content.
std::vector<JsonlLine> read_jsonl(const std::filesystem::path& path);

/// Same as read_jsonl over an in-memory buffer; `source` labels errors.
std::vector<JsonlLine> parse_jsonl(std::string_view text, std::string_view source);

/// Writes to `<target>.tmp` and renames onto `target` on commit(). If the
/// writer is destroyed without commit() the temporary file is removed, so a
/// failed stage never leaves a partially written output behind.
class AtomicFileWriter {
 public:
  explicit AtomicFileWriter(std::filesystem::path target);
  AtomicFileWriter(const AtomicFileWriter&) = delete;
  AtomicFileWriter& operator=(const AtomicFileWriter&) = delete;
  ~AtomicFileWriter();

  void write(std::string_view bytes);
  /// Appends canonical_dump(value) followed by '\n'.
  void write_line(const Json& value);
  void commit();

  const std::filesystem::path& target() const { return target_; }

 private:
  std::filesystem::path target_;
  std::filesystem::path temp_;
  std::ofstream out_;
  bool committed_ = false;
};

/// Convenience: atomically writes one canonical JSON value per line.
void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& rows);

/// Locates a JSON object inside free-form model output. Accepts a bare
/// object, or one wrapped in prose/code fences (first '{' to last '}').
/// Returns a discarded value when nothing parses.
Json extract_json_object(std::string_view text);

}  // namespace tandem
