#include "stance/csv.hpp"

#include <fstream>
#include <sstream>

#include "stance/error.hpp"

namespace stance::csv {

namespace {

[[noreturn]] void malformed(std::string_view source, std::size_t line, std::string_view what) {
  std::ostringstream msg;
  msg << source << ":" << line << ": malformed CSV: " << what;
  throw DataError(msg.str());
}

}  // namespace

std::vector<Row> parse(std::string_view text, std::string_view source) {
  if (text.starts_with("\xEF\xBB\xBF")) {
    text.remove_prefix(3);
  }

  std::vector<Row> rows;
  Row row;
  std::string field;
  std::size_t line = 1;
  std::size_t quote_line = 0;
  bool in_quotes = false;
  bool was_quoted = false;
  bool after_quote = false;
  bool record_open = false;

  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    was_quoted = false;
    after_quote = false;
  };
  auto end_record = [&] {
    end_field();
    rows.push_back(std::move(row));
    row.clear();
    record_open = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
          after_quote = true;
        }
      } else {
        if (c == '\n') {
          ++line;
        }
        field.push_back(c);
      }
      continue;
    }

    if (c == ',') {
      end_field();
      record_open = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r') {
        if (i + 1 < text.size() && text[i + 1] == '\n') {
          ++i;
        } else {
          malformed(source, line, "bare carriage return");
        }
      }
      if (record_open) {
        end_record();
      }
      ++line;
    } else if (c == '"') {
      if (!field.empty() || was_quoted) {
        malformed(source, line, "quote inside unquoted field");
      }
      in_quotes = true;
      was_quoted = true;
      quote_line = line;
      record_open = true;
    } else {
      if (after_quote) {
        malformed(source, line, "text after closing quote");
      }
      field.push_back(c);
      record_open = true;
    }
  }

  if (in_quotes) {
    malformed(source, quote_line, "unterminated quoted field");
  }
  if (record_open) {
    end_record();
  }
  return rows;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open '" + path + "' for reading");
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) {
    throw DataError("error while reading '" + path + "'");
  }
  return std::move(buffer).str();
}

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) {
    return std::string(field);
  }
  std::string out;
  out.reserve(field.size() + 2);
  out.push_back('"');
  for (char c : field) {
    if (c == '"') {
      out.push_back('"');
    }
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_row(std::ostream& out, const Row& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i > 0) {
      out << ',';
    }
    out << escape(row[i]);
  }
  out << "\r\n";
}

}  // namespace stance::csv
