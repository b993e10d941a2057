#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace stance {

using TokenId = std::int32_t;

/// Vocabulary, ranked merges and the byte <-> unit-symbol bijection of a
/// byte-level BPE model. Immutable once built; safe to share across threads.
class BpeAssets {
 public:
  /// Builds from the text of a JSON vocab map (token -> id) and a merges
  /// file (optional "#version" line, then one "left right" pair per line).
  /// Throws DataError on malformed lines, duplicate ids, merges whose
  /// symbols or results are not in the vocab, or byte symbols missing from
  /// the vocab.
  static BpeAssets parse(std::string_view vocab_json, std::string_view merges_text);

  std::size_t vocab_size() const { return id_to_token_.size(); }
  std::size_t merge_count() const { return merges_.size(); }

  /// Id for a token string, or -1.
  TokenId token_to_id(std::string_view token) const;
  const std::string& id_to_token(TokenId id) const;
  bool contains_id(TokenId id) const;

  /// Rank of merging (left, right), or -1 when no such merge exists.
  std::int32_t merge_rank(std::string_view left, std::string_view right) const;
  const std::vector<std::pair<std::string, std::string>>& merges() const { return merges_; }

  /// UTF-8 unit symbol for a raw byte.
  const std::string& byte_symbol(std::uint8_t byte) const { return byte_to_symbol_[byte]; }

  /// Raw byte for a unit symbol code point, or -1.
  int symbol_byte(char32_t symbol) const;

 private:
  BpeAssets() = default;

  std::unordered_map<std::string, TokenId> vocab_;
  std::vector<std::string> id_to_token_;
  std::vector<std::pair<std::string, std::string>> merges_;
  std::unordered_map<std::string, std::int32_t> merge_ranks_;  // key: left + ' ' + right
  std::array<std::string, 256> byte_to_symbol_;
  std::unordered_map<char32_t, std::uint8_t> symbol_to_byte_;
};

/// Reads vocab.json and merges.txt from disk.
BpeAssets load_assets(const std::string& vocab_path, const std::string& merges_path);

struct SpecialTokens {
  TokenId start_id = 0;
  TokenId separator_id = 2;
  TokenId pad_id = 1;

  /// Looks up "<s>", "</s>" and "<pad>". Throws DataError if any is missing.
  static SpecialTokens from_assets(const BpeAssets& assets);
};

/// A claim-article pair laid out for the encoder and padded to max_len.
struct TokenSequence {
  std::vector<TokenId> ids;
  std::vector<std::uint8_t> mask;
  std::size_t content_len = 0;

  std::size_t max_len() const { return ids.size(); }
  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

/// Splits text into the chunks BPE runs over, using the standard byte-level
/// pattern: contractions, optional-space + letters, optional-space +
/// numbers, optional-space + other symbols, then whitespace runs (a
/// whitespace run followed by a non-space keeps its last character for the
/// next chunk). Chunks are views into `text`.
std::vector<std::string_view> pretokenize(std::string_view text);

/// Byte-level BPE encoding. Any byte string is encodable.
std::vector<TokenId> encode_text(const BpeAssets& assets, std::string_view text);

/// Inverse of encode_text. Invalid UTF-8 in the reassembled bytes becomes
/// U+FFFD. Throws DataError on an id outside the vocab.
std::string decode(const BpeAssets& assets, const std::vector<TokenId>& ids);

/// Lays out [start] claim [sep][sep] article [sep] and pads to max_len.
/// Over-length input loses article tokens from the tail; the claim and the
/// final separator are always kept. Throws DataError if max_len < 5 or the
/// claim does not fit.
TokenSequence encode_pair(const BpeAssets& assets, const SpecialTokens& specials, std::string_view claim,
                          std::string_view article, std::size_t max_len);

/// Same layout from already-encoded claim and article ids.
TokenSequence layout_pair(const SpecialTokens& specials, const std::vector<TokenId>& claim_ids,
                          const std::vector<TokenId>& article_ids, std::size_t max_len);

/// Untruncated token count of the pair, four structural tokens included.
std::size_t pair_length(const BpeAssets& assets, const SpecialTokens& specials, std::string_view claim,
                        std::string_view article);

inline constexpr std::size_t kStructuralTokens = 4;
inline constexpr std::size_t kMinPairLength = 5;

}  // namespace stance
