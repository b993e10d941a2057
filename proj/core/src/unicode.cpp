#include "unicode.hpp"

#include <unicode/uchar.h>

namespace stance::unicode {

namespace {

struct Decoded {
  char32_t value;
  std::uint8_t length;  // bytes of the sequence (or of the invalid subpart)
  bool valid;
};

// Well-formed UTF-8 per the Unicode table of valid byte sequences. On an
// invalid sequence `length` is the maximal subpart to replace (at least 1).
Decoded decode_one(std::string_view s, std::size_t i) {
  const auto byte = [&](std::size_t k) { return static_cast<unsigned char>(s[k]); };
  const unsigned char lead = byte(i);
  if (lead < 0x80) {
    return {lead, 1, true};
  }

  std::uint8_t need = 0;
  unsigned char lo = 0x80;
  unsigned char hi = 0xBF;
  char32_t value = 0;
  if (lead >= 0xC2 && lead <= 0xDF) {
    need = 1;
    value = lead & 0x1F;
  } else if (lead >= 0xE0 && lead <= 0xEF) {
    need = 2;
    value = lead & 0x0F;
    if (lead == 0xE0) {
      lo = 0xA0;
    } else if (lead == 0xED) {
      hi = 0x9F;
    }
  } else if (lead >= 0xF0 && lead <= 0xF4) {
    need = 3;
    value = lead & 0x07;
    if (lead == 0xF0) {
      lo = 0x90;
    } else if (lead == 0xF4) {
      hi = 0x8F;
    }
  } else {
    return {0xFFFD, 1, false};
  }

  std::uint8_t consumed = 1;
  for (std::uint8_t k = 0; k < need; ++k) {
    const std::size_t pos = i + 1 + k;
    if (pos >= s.size()) {
      return {0xFFFD, consumed, false};
    }
    const unsigned char c = byte(pos);
    if (c < lo || c > hi) {
      return {0xFFFD, consumed, false};
    }
    lo = 0x80;
    hi = 0xBF;
    value = (value << 6) | (c & 0x3F);
    ++consumed;
  }
  return {value, consumed, true};
}

}  // namespace

CharClass classify(char32_t cp) {
  const auto c = static_cast<UChar32>(cp);
  switch (u_charType(c)) {
    case U_UPPERCASE_LETTER:
    case U_LOWERCASE_LETTER:
    case U_TITLECASE_LETTER:
    case U_MODIFIER_LETTER:
    case U_OTHER_LETTER:
      return CharClass::Letter;
    case U_DECIMAL_DIGIT_NUMBER:
    case U_LETTER_NUMBER:
    case U_OTHER_NUMBER:
      return CharClass::Number;
    default:
      break;
  }
  return u_isUWhiteSpace(c) ? CharClass::Space : CharClass::Other;
}

std::vector<CodePoint> scan(std::string_view text) {
  std::vector<CodePoint> out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const Decoded d = decode_one(text, i);
    if (d.valid) {
      out.push_back({d.value, static_cast<std::uint32_t>(i), d.length, classify(d.value)});
      i += d.length;
    } else {
      out.push_back({0xFFFD, static_cast<std::uint32_t>(i), 1, CharClass::Other});
      i += 1;
    }
  }
  return out;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

std::string sanitize_utf8(std::string_view bytes) {
  std::string out;
  out.reserve(bytes.size());
  std::size_t i = 0;
  while (i < bytes.size()) {
    const Decoded d = decode_one(bytes, i);
    if (d.valid) {
      out.append(bytes.substr(i, d.length));
    } else {
      append_utf8(out, 0xFFFD);
    }
    i += d.length;
  }
  return out;
}

}  // namespace stance::unicode
