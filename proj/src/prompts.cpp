#include "smm/prompts.hpp"

#include <fstream>
#include <iterator>

#include "smm/error.hpp"

namespace smm {

namespace embedded {
extern const std::string_view kAnnotationSystem;
extern const std::string_view kAnnotationUser;
extern const std::string_view kDetectionSystem;
extern const std::string_view kDetectionUser;
}  // namespace embedded

namespace {

std::string strip_final_newline(std::string_view s) {
  if (!s.empty() && s.back() == '\n') s.remove_suffix(1);
  return std::string(s);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IOError, "cannot read prompt template '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

PromptTemplate builtin_annotation_template() {
  return {"default", strip_final_newline(embedded::kAnnotationSystem),
          strip_final_newline(embedded::kAnnotationUser)};
}

PromptTemplate builtin_detection_template() {
  return {"default", strip_final_newline(embedded::kDetectionSystem),
          strip_final_newline(embedded::kDetectionUser)};
}

PromptTemplate load_template(const std::string& dir, const std::string& id, const std::string& kind) {
  auto base = dir + "/" + id + "." + kind;
  return {id, strip_final_newline(read_file(base + ".system.txt")),
          strip_final_newline(read_file(base + ".user.txt"))};
}

void require_placeholders(const std::string& tmpl, const std::vector<std::string>& names) {
  for (const auto& name : names) {
    if (tmpl.find("{{" + name + "}}") == std::string::npos) {
      throw Error(Errc::TemplateError, "template lacks placeholder {{" + name + "}}");
    }
  }
}

std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& values) {
  std::string out;
  std::size_t pos = 0;
  while (true) {
    auto open = tmpl.find("{{", pos);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    auto close = tmpl.find("}}", open + 2);
    if (close == std::string_view::npos) throw Error(Errc::TemplateError, "unterminated placeholder");
    out.append(tmpl.substr(pos, open - pos));
    auto name = std::string(tmpl.substr(open + 2, close - open - 2));
    auto it = values.find(name);
    if (it == values.end()) throw Error(Errc::TemplateError, "no value for placeholder {{" + name + "}}");
    out += it->second;
    pos = close + 2;
  }
  return out;
}

}  // namespace smm
