#include "tandem/jsonl.hpp"

#include <sstream>
#include <system_error>

#include "tandem/error.hpp"

namespace tandem {

std::string canonical_dump(const Json& value) {
  try {
    return value.dump(-1, ' ', false, Json::error_handler_t::strict);
  } catch (const Json::type_error& e) {
    throw SchemaError(std::string("invalid UTF-8 in JSON text: ") + e.what());
  }
}

std::vector<JsonlLine> parse_jsonl(std::string_view text, std::string_view source) {
  std::vector<JsonlLine> rows;
  std::size_t line_number = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    const std::size_t end = eol == std::string_view::npos ? text.size() : eol;
    std::string_view line = text.substr(pos, end - pos);
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") != std::string_view::npos) {
      try {
        rows.push_back({line_number, Json::parse(line)});
      } catch (const Json::parse_error& e) {
        throw DataError(std::string(source) + ":" + std::to_string(line_number) + ": " + e.what());
      }
    }
    if (eol == std::string_view::npos) break;
    pos = eol + 1;
  }
  return rows;
}

std::vector<JsonlLine> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_jsonl(buffer.str(), path.string());
}

AtomicFileWriter::AtomicFileWriter(std::filesystem::path target)
    : target_(std::move(target)), temp_(target_.string() + ".tmp") {
  if (target_.has_parent_path()) std::filesystem::create_directories(target_.parent_path());
  out_.open(temp_, std::ios::binary | std::ios::trunc);
  if (!out_) throw DataError("cannot open " + temp_.string() + " for writing");
}

AtomicFileWriter::~AtomicFileWriter() {
  if (!committed_) {
    out_.close();
    std::error_code ignored;
    std::filesystem::remove(temp_, ignored);
  }
}

void AtomicFileWriter::write(std::string_view bytes) {
  out_.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

void AtomicFileWriter::write_line(const Json& value) {
  write(canonical_dump(value));
  write("\n");
}

void AtomicFileWriter::commit() {
  out_.flush();
  if (!out_) throw DataError("write failed for " + temp_.string());
  out_.close();
  std::filesystem::rename(temp_, target_);
  committed_ = true;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& rows) {
  AtomicFileWriter writer(path);
  for (const auto& row : rows) writer.write_line(row);
  writer.commit();
}

Json extract_json_object(std::string_view text) {
  Json whole = Json::parse(text, nullptr, false);
  if (!whole.is_discarded() && whole.is_object()) return whole;
  const std::size_t open = text.find('{');
  const std::size_t close = text.rfind('}');
  if (open == std::string_view::npos || close == std::string_view::npos || close < open) {
    return Json(Json::value_t::discarded);
  }
  Json inner = Json::parse(text.substr(open, close - open + 1), nullptr, false);
  if (inner.is_discarded() || !inner.is_object()) return Json(Json::value_t::discarded);
  return inner;
}

}  // namespace tandem
