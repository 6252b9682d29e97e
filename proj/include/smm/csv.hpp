#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace smm::csv {

using Row = std::vector<std::string>;

/// RFC 4180 reader: quoted fields may hold commas, quotes ("") and newlines.
/// CRLF and LF line ends both accepted; blank lines are skipped.
std::vector<Row> parse(std::string_view text);

/// Quotes a field only when it contains a comma, quote, CR or LF.
std::string escape(std::string_view field);
std::string format_row(const Row& row);

}  // namespace smm::csv
