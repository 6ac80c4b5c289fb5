#include "tandem/prompt.hpp"

#include <cctype>

namespace tandem {
namespace {

bool is_identifier(std::string_view name) {
  if (name.empty()) return false;
  for (char c : name) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
  }
  return true;
}

}  // namespace

std::string render_template(std::string_view tmpl, const PromptVars& vars) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const std::size_t open = tmpl.find('{', pos);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    out.append(tmpl.substr(pos, open - pos));
    const std::size_t close = tmpl.find('}', open + 1);
    if (close != std::string_view::npos) {
      const std::string_view name = tmpl.substr(open + 1, close - open - 1);
      if (is_identifier(name)) {
        if (auto it = vars.find(name); it != vars.end()) {
          out.append(it->second);
          pos = close + 1;
          continue;
        }
      }
    }
    out.push_back('{');
    pos = open + 1;
  }
  return out;
}

}  // namespace tandem
