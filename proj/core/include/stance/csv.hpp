#pragma once

#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace stance::csv {

using Row = std::vector<std::string>;

/// Parses RFC-4180 text. LF and CRLF record separators are both accepted,
/// quoted fields may span lines, and a leading UTF-8 byte-order mark is
/// skipped. A trailing newline does not produce an empty record.
///
/// Throws DataError naming `source` and the 1-based line on malformed
/// quoting (a quote inside an unquoted field, text after a closing quote,
/// or end of input inside a quoted field).
std::vector<Row> parse(std::string_view text, std::string_view source = "<memory>");

/// Reads a whole file as bytes. Throws DataError if it cannot be opened.
std::string read_file(const std::string& path);

/// Quotes a field only when it contains a comma, quote, CR or LF.
std::string escape(std::string_view field);

/// Writes one record terminated by CRLF.
void write_row(std::ostream& out, const Row& row);

}  // namespace stance::csv
