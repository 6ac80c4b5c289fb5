#pragma once

#include <map>
#include <string>
#include <string_view>

namespace tandem {

using PromptVars = std::map<std::string, std::string, std::less<>>;

/// Substitutes `{name}` placeholders present in `vars`. Braces that do not
/// enclose a known identifier (for example literal JSON in the template) are
/// copied through untouched.
std::string render_template(std::string_view tmpl, const PromptVars& vars);

}  // namespace tandem
