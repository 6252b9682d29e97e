#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace smm {

/// A system prompt plus a user-message template with `{{name}}` placeholders.
struct PromptTemplate {
  std::string id;
  std::string system;
  std::string user;
};

/// Compiled-in copies of resources/prompts/default.*.txt.
PromptTemplate builtin_annotation_template();
PromptTemplate builtin_detection_template();

/// Reads `<dir>/<id>.<kind>.system.txt` and `<dir>/<id>.<kind>.user.txt`,
/// where kind is "annotation" or "detection". A single trailing newline is
/// dropped from each file.
PromptTemplate load_template(const std::string& dir, const std::string& id, const std::string& kind);

/// Throws TemplateError naming the first placeholder missing from `tmpl`.
void require_placeholders(const std::string& tmpl, const std::vector<std::string>& names);

/// Substitutes every `{{name}}`; an unknown placeholder is TemplateError.
std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& values);

}  // namespace smm
