#include "stance/tokenizer.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "stance/csv.hpp"
#include "stance/error.hpp"
#include "unicode.hpp"

namespace stance {

namespace {

using unicode::CharClass;

// Printable stand-ins for the 256 byte values: printable Latin-1 bytes map
// to themselves, the rest to U+0100 onwards in byte order.
std::array<char32_t, 256> byte_symbols() {
  std::array<char32_t, 256> table{};
  std::array<bool, 256> direct{};
  auto mark = [&](int lo, int hi) {
    for (int b = lo; b <= hi; ++b) {
      direct[static_cast<std::size_t>(b)] = true;
    }
  };
  mark('!', '~');
  mark(0xA1, 0xAC);
  mark(0xAE, 0xFF);
  char32_t next = 256;
  for (std::size_t b = 0; b < 256; ++b) {
    table[b] = direct[b] ? static_cast<char32_t>(b) : next++;
  }
  return table;
}

std::string merge_key(std::string_view left, std::string_view right) {
  std::string key;
  key.reserve(left.size() + right.size() + 1);
  key.append(left).push_back(' ');
  key.append(right);
  return key;
}

[[noreturn]] void merges_error(std::size_t line, const std::string& what) {
  throw DataError("merges line " + std::to_string(line) + ": " + what);
}

// Greedy lowest-rank-first merging of one chunk's unit symbols.
void bpe_chunk(const BpeAssets& assets, std::string_view chunk, std::vector<TokenId>& out) {
  std::vector<std::string> symbols;
  symbols.reserve(chunk.size());
  for (char c : chunk) {
    symbols.push_back(assets.byte_symbol(static_cast<std::uint8_t>(c)));
  }

  while (symbols.size() > 1) {
    std::int32_t best_rank = std::numeric_limits<std::int32_t>::max();
    std::size_t best = symbols.size();
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      const std::int32_t rank = assets.merge_rank(symbols[i], symbols[i + 1]);
      if (rank >= 0 && rank < best_rank) {
        best_rank = rank;
        best = i;
      }
    }
    if (best == symbols.size()) {
      break;
    }
    const std::string left = symbols[best];
    const std::string right = symbols[best + 1];
    std::vector<std::string> merged;
    merged.reserve(symbols.size());
    for (std::size_t i = 0; i < symbols.size();) {
      if (i + 1 < symbols.size() && symbols[i] == left && symbols[i + 1] == right) {
        merged.push_back(left + right);
        i += 2;
      } else {
        merged.push_back(std::move(symbols[i]));
        i += 1;
      }
    }
    symbols = std::move(merged);
  }

  for (const auto& s : symbols) {
    out.push_back(assets.token_to_id(s));
  }
}

}  // namespace

BpeAssets BpeAssets::parse(std::string_view vocab_json, std::string_view merges_text) {
  BpeAssets assets;

  nlohmann::json vocab;
  try {
    vocab = nlohmann::json::parse(vocab_json);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("vocab: invalid JSON: ") + e.what());
  }
  if (!vocab.is_object()) {
    throw DataError("vocab: expected a JSON object mapping tokens to ids");
  }
  std::int64_t max_id = -1;
  for (const auto& [token, id] : vocab.items()) {
    if (!id.is_number_integer() || id.get<std::int64_t>() < 0 ||
        id.get<std::int64_t>() > std::numeric_limits<TokenId>::max()) {
      throw DataError("vocab: token \"" + token + "\" has an invalid id");
    }
    max_id = std::max(max_id, id.get<std::int64_t>());
  }
  assets.id_to_token_.assign(static_cast<std::size_t>(max_id + 1), std::string());
  std::vector<bool> seen(assets.id_to_token_.size(), false);
  for (const auto& [token, id] : vocab.items()) {
    const auto index = static_cast<std::size_t>(id.get<std::int64_t>());
    if (seen[index]) {
      throw DataError("vocab: duplicate id " + std::to_string(index) + " (\"" + assets.id_to_token_[index] +
                      "\" and \"" + token + "\")");
    }
    seen[index] = true;
    assets.id_to_token_[index] = token;
    assets.vocab_.emplace(token, static_cast<TokenId>(index));
  }
  if (assets.vocab_.size() != assets.id_to_token_.size()) {
    throw DataError("vocab: ids are not contiguous from 0");
  }

  const auto symbols = byte_symbols();
  for (std::size_t b = 0; b < 256; ++b) {
    std::string s;
    unicode::append_utf8(s, symbols[b]);
    if (!assets.vocab_.contains(s)) {
      throw DataError("vocab: missing byte symbol for byte " + std::to_string(b));
    }
    assets.byte_to_symbol_[b] = std::move(s);
    assets.symbol_to_byte_.emplace(symbols[b], static_cast<std::uint8_t>(b));
  }

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= merges_text.size()) {
    std::size_t end = merges_text.find('\n', pos);
    if (end == std::string_view::npos) {
      end = merges_text.size();
    }
    std::string_view line = merges_text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.remove_suffix(1);
    }
    if (line.empty() || (line_no == 1 && line.starts_with("#version"))) {
      continue;
    }
    const std::size_t space = line.find(' ');
    if (space == std::string_view::npos || space == 0 || space + 1 == line.size() ||
        line.find(' ', space + 1) != std::string_view::npos) {
      merges_error(line_no, "expected two space-separated symbols");
    }
    std::string left(line.substr(0, space));
    std::string right(line.substr(space + 1));
    if (!assets.vocab_.contains(left) || !assets.vocab_.contains(right)) {
      merges_error(line_no, "unknown symbol in \"" + std::string(line) + "\"");
    }
    if (!assets.vocab_.contains(left + right)) {
      merges_error(line_no, "merge result \"" + left + right + "\" is not in the vocab");
    }
    const auto rank = static_cast<std::int32_t>(assets.merges_.size());
    if (!assets.merge_ranks_.emplace(merge_key(left, right), rank).second) {
      merges_error(line_no, "duplicate merge \"" + std::string(line) + "\"");
    }
    assets.merges_.emplace_back(std::move(left), std::move(right));
  }
  return assets;
}

TokenId BpeAssets::token_to_id(std::string_view token) const {
  auto it = vocab_.find(std::string(token));
  return it == vocab_.end() ? -1 : it->second;
}

const std::string& BpeAssets::id_to_token(TokenId id) const {
  if (!contains_id(id)) {
    throw DataError("token id " + std::to_string(id) + " is outside the vocab");
  }
  return id_to_token_[static_cast<std::size_t>(id)];
}

bool BpeAssets::contains_id(TokenId id) const {
  return id >= 0 && static_cast<std::size_t>(id) < id_to_token_.size();
}

std::int32_t BpeAssets::merge_rank(std::string_view left, std::string_view right) const {
  auto it = merge_ranks_.find(merge_key(left, right));
  return it == merge_ranks_.end() ? -1 : it->second;
}

int BpeAssets::symbol_byte(char32_t symbol) const {
  auto it = symbol_to_byte_.find(symbol);
  return it == symbol_to_byte_.end() ? -1 : it->second;
}

BpeAssets load_assets(const std::string& vocab_path, const std::string& merges_path) {
  return BpeAssets::parse(csv::read_file(vocab_path), csv::read_file(merges_path));
}

SpecialTokens SpecialTokens::from_assets(const BpeAssets& assets) {
  auto need = [&](std::string_view token) {
    const TokenId id = assets.token_to_id(token);
    if (id < 0) {
      throw DataError("vocab has no special token " + std::string(token));
    }
    return id;
  };
  SpecialTokens specials{need("<s>"), need("</s>"), need("<pad>")};
  if (specials.start_id == specials.separator_id || specials.start_id == specials.pad_id ||
      specials.separator_id == specials.pad_id) {
    throw DataError("special token ids must be distinct");
  }
  return specials;
}

std::vector<std::string_view> pretokenize(std::string_view text) {
  const auto cps = unicode::scan(text);
  const std::size_t n = cps.size();
  std::vector<std::string_view> chunks;

  auto emit = [&](std::size_t from, std::size_t to) {
    const std::size_t begin = cps[from].offset;
    const std::size_t end = to < n ? cps[to].offset : text.size();
    chunks.push_back(text.substr(begin, end - begin));
  };
  auto run_end = [&](std::size_t from, CharClass cls) {
    while (from < n && cps[from].cls == cls) {
      ++from;
    }
    return from;
  };

  std::size_t i = 0;
  while (i < n) {
    const char32_t c = cps[i].value;

    if (c == U'\'' && i + 1 < n) {
      const char32_t a = cps[i + 1].value;
      if (a == U's' || a == U't' || a == U'm' || a == U'd') {
        emit(i, i + 2);
        i += 2;
        continue;
      }
      if (i + 2 < n) {
        const char32_t b = cps[i + 2].value;
        if ((a == U'r' && b == U'e') || (a == U'v' && b == U'e') || (a == U'l' && b == U'l')) {
          emit(i, i + 3);
          i += 3;
          continue;
        }
      }
    }

    if (cps[i].cls != CharClass::Space) {
      const std::size_t end = run_end(i, cps[i].cls);
      emit(i, end);
      i = end;
      continue;
    }
    if (c == U' ' && i + 1 < n && cps[i + 1].cls != CharClass::Space) {
      const std::size_t end = run_end(i + 1, cps[i + 1].cls);
      emit(i, end);
      i = end;
      continue;
    }

    // Whitespace run. When a non-space follows, the last whitespace
    // character is left to start the next chunk.
    const std::size_t end = run_end(i, CharClass::Space);
    if (end < n && end - i >= 2) {
      emit(i, end - 1);
      i = end - 1;
    } else {
      emit(i, end);
      i = end;
    }
  }
  return chunks;
}

std::vector<TokenId> encode_text(const BpeAssets& assets, std::string_view text) {
  std::vector<TokenId> ids;
  for (std::string_view chunk : pretokenize(text)) {
    bpe_chunk(assets, chunk, ids);
  }
  return ids;
}

std::string decode(const BpeAssets& assets, const std::vector<TokenId>& ids) {
  std::string bytes;
  for (TokenId id : ids) {
    const std::string& token = assets.id_to_token(id);
    for (const auto& cp : unicode::scan(token)) {
      const int b = assets.symbol_byte(cp.value);
      if (b >= 0) {
        bytes.push_back(static_cast<char>(b));
      } else {
        bytes.append(token.substr(cp.offset, cp.length));
      }
    }
  }
  return unicode::sanitize_utf8(bytes);
}

TokenSequence layout_pair(const SpecialTokens& specials, const std::vector<TokenId>& claim_ids,
                          const std::vector<TokenId>& article_ids, std::size_t max_len) {
  if (max_len < kMinPairLength) {
    throw DataError("max_len " + std::to_string(max_len) + " is below the minimum of " +
                    std::to_string(kMinPairLength));
  }
  if (claim_ids.size() + kStructuralTokens > max_len) {
    throw DataError("claim of " + std::to_string(claim_ids.size()) + " tokens does not fit in max_len " +
                    std::to_string(max_len));
  }
  const std::size_t room = max_len - claim_ids.size() - kStructuralTokens;
  const std::size_t kept = std::min(room, article_ids.size());

  TokenSequence seq;
  seq.ids.reserve(max_len);
  seq.ids.push_back(specials.start_id);
  seq.ids.insert(seq.ids.end(), claim_ids.begin(), claim_ids.end());
  seq.ids.push_back(specials.separator_id);
  seq.ids.push_back(specials.separator_id);
  seq.ids.insert(seq.ids.end(), article_ids.begin(), article_ids.begin() + static_cast<std::ptrdiff_t>(kept));
  seq.ids.push_back(specials.separator_id);
  seq.content_len = seq.ids.size();
  seq.ids.resize(max_len, specials.pad_id);
  seq.mask.assign(max_len, 0);
  std::fill_n(seq.mask.begin(), seq.content_len, std::uint8_t{1});
  return seq;
}

TokenSequence encode_pair(const BpeAssets& assets, const SpecialTokens& specials, std::string_view claim,
                          std::string_view article, std::size_t max_len) {
  return layout_pair(specials, encode_text(assets, claim), encode_text(assets, article), max_len);
}

std::size_t pair_length(const BpeAssets& assets, [[maybe_unused]] const SpecialTokens& specials,
                        std::string_view claim, std::string_view article) {
  return encode_text(assets, claim).size() + encode_text(assets, article).size() + kStructuralTokens;
}

}  // namespace stance
