#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace stance::unicode {

enum class CharClass : std::uint8_t { Letter, Number, Space, Other };

struct CodePoint {
  char32_t value;           // U+FFFD stand-in for an invalid byte
  std::uint32_t offset;     // byte offset into the source text
  std::uint8_t length;      // bytes consumed
  CharClass cls;
};

/// Splits text into code points. Invalid UTF-8 is consumed one byte at a
/// time and classified as Other, so every byte lands in exactly one unit.
std::vector<CodePoint> scan(std::string_view text);

CharClass classify(char32_t cp);

/// Appends the UTF-8 encoding of cp.
void append_utf8(std::string& out, char32_t cp);

/// Decodes bytes as UTF-8, replacing each maximal invalid subpart with
/// U+FFFD (the substitution CPython's errors="replace" performs).
std::string sanitize_utf8(std::string_view bytes);

}  // namespace stance::unicode
