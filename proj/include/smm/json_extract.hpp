#pragma once

#include <string_view>

#include "smm/json.hpp"

namespace smm {

/// Pulls the JSON object out of a chat-model reply.
///
/// A markdown code fence (``` opening a line), when present, narrows the search to the first fenced
/// block. Within the remaining text the first balanced `{...}` region is
/// located with a string/escape-aware brace scan and parsed. If strict parsing
/// fails, one repair pass is attempted that only touches faults models are
/// known to emit: bare `<placeholder>` values (become null), raw newlines or
/// tabs inside strings (escaped), and trailing commas before `}` or `]`.
///
/// Throws Error with NoJsonFound, UnbalancedBraces, or ParseError (the message
/// carries the byte offset into `response`).
Json extract_json(std::string_view response);

}  // namespace smm
