#include "smm/json_extract.hpp"

#include <optional>
#include <string>

#include "smm/error.hpp"

namespace smm {

namespace {

struct Region {
  std::size_t offset = 0;  // into the original response
  std::string_view text;
};

// Next ``` at or after `from` that opens a line (only blanks before it).
std::size_t fence_at_line_start(std::string_view s, std::size_t from) {
  for (auto pos = s.find("```", from); pos != std::string_view::npos; pos = s.find("```", pos + 1)) {
    auto line = s.rfind('\n', pos == 0 ? 0 : pos - 1);
    auto lead = s.substr(line == std::string_view::npos ? 0 : line + 1,
                         pos - (line == std::string_view::npos ? 0 : line + 1));
    if (pos == 0 || lead.find_first_not_of(" \t") == std::string_view::npos) return pos;
  }
  return std::string_view::npos;
}

// Content of the first ``` fence (language tag line dropped). An unterminated
// fence yields everything after the opener.
std::optional<Region> fenced_block(std::string_view s) {
  auto open = fence_at_line_start(s, 0);
  if (open == std::string_view::npos) return std::nullopt;
  auto body = open + 3;
  auto eol = s.find('\n', body);
  if (eol == std::string_view::npos) return Region{body, s.substr(body)};
  // Anything between the backticks and the newline is the language tag.
  body = eol + 1;
  auto close = fence_at_line_start(s, body);
  auto len = close == std::string_view::npos ? s.npos : close - body;
  return Region{body, s.substr(body, len)};
}

Region balanced_object(const Region& in) {
  auto s = in.text;
  auto start = s.find('{');
  if (start == std::string_view::npos) {
    throw Error(Errc::NoJsonFound, "no '{' in model output");
  }
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = start; i < s.size(); ++i) {
    char c = s[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return Region{in.offset + start, s.substr(start, i - start + 1)};
    }
  }
  throw Error(Errc::UnbalancedBraces, "object opened at byte " + std::to_string(in.offset + start) +
                                          " is never closed");
}

std::string repair(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
        out.push_back(c);
      } else if (c == '\\') {
        escaped = true;
        out.push_back(c);
      } else if (c == '"') {
        in_string = false;
        out.push_back(c);
      } else if (c == '\n') {
        out += "\\n";
      } else if (c == '\r') {
        out += "\\r";
      } else if (c == '\t') {
        out += "\\t";
      } else {
        out.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
      out.push_back(c);
    } else if (c == '<') {
      auto close = s.find('>', i);
      auto name = close == std::string_view::npos ? std::string_view{} : s.substr(i + 1, close - i - 1);
      bool ident = !name.empty() && name.find_first_not_of(
                                        "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_ -") ==
                                        std::string_view::npos;
      if (ident) {
        out += "null";
        i = close;
      } else {
        out.push_back(c);
      }
    } else if (c == ',') {
      auto next = s.find_first_not_of(" \t\r\n", i + 1);
      if (next != std::string_view::npos && (s[next] == '}' || s[next] == ']')) continue;
      out.push_back(c);
    } else {
      out.push_back(c);
    }
  }
  return out;
}

}  // namespace

Json extract_json(std::string_view response) {
  Region whole{0, response};
  auto fence = fenced_block(response);
  auto region = balanced_object(fence ? *fence : whole);
  try {
    return Json::parse(region.text);
  } catch (const Json::parse_error& strict) {
    try {
      return Json::parse(repair(region.text));
    } catch (const Json::parse_error&) {
      auto offset = region.offset + (strict.byte > 0 ? strict.byte - 1 : 0);
      throw Error(Errc::ParseError, "invalid JSON at byte " + std::to_string(offset) + ": " + strict.what());
    }
  }
}

}  // namespace smm
