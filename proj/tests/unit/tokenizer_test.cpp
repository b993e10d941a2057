#include <gtest/gtest.h>

#include <random>

#include <json.hpp>

#include "stance/error.hpp"
#include "stance/tokenizer.hpp"
#include "support/support.hpp"

namespace stance {
namespace {

using testing::assets;
using testing::specials;

std::vector<std::string> chunks(std::string_view text) {
  std::vector<std::string> out;
  for (auto c : pretokenize(text)) {
    out.emplace_back(c);
  }
  return out;
}

TEST(Pretokenize, SplitsLikeTheByteLevelPattern) {
  EXPECT_EQ(chunks("Hello world"), (std::vector<std::string>{"Hello", " world"}));
  EXPECT_EQ(chunks("it's 42!"), (std::vector<std::string>{"it", "'s", " 42", "!"}));
  EXPECT_EQ(chunks("a  b"), (std::vector<std::string>{"a", " ", " b"}));
  EXPECT_EQ(chunks("end  "), (std::vector<std::string>{"end", "  "}));
  EXPECT_EQ(chunks("x\n\ny"), (std::vector<std::string>{"x", "\n", "\n", "y"}));
  EXPECT_TRUE(chunks("").empty());
}

TEST(Tokenizer, AssetsHaveSpecialTokensAndByteSymbols) {
  EXPECT_EQ(assets().vocab_size(), 3000U);
  EXPECT_EQ(specials().start_id, 0);
  EXPECT_EQ(specials().pad_id, 1);
  EXPECT_EQ(specials().separator_id, 2);
  for (int b = 0; b < 256; ++b) {
    EXPECT_GE(assets().token_to_id(assets().byte_symbol(static_cast<std::uint8_t>(b))), 0);
  }
}

TEST(Tokenizer, MatchesIndependentReferenceEncodings) {
  const auto golden = testing::load_bpe_golden();
  ASSERT_EQ(golden.size(), 500U);
  std::size_t mismatches = 0;
  for (const auto& g : golden) {
    const auto ids = encode_text(assets(), g.text);
    if (ids != g.ids) {
      ++mismatches;
      ADD_FAILURE() << "encoding differs for \"" << g.text << "\"";
    }
  }
  EXPECT_EQ(mismatches, 0U);
}

TEST(Tokenizer, KnownSentence) {
  EXPECT_EQ(encode_text(assets(), "The dog barks."), (std::vector<TokenId>{632, 484, 75, 301, 1479, 87, 18}));
}

TEST(Tokenizer, DecodeInvertsEncodeOnRandomUtf8) {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 1000; ++i) {
    const auto text = testing::random_utf8(rng, 40);
    ASSERT_EQ(decode(assets(), encode_text(assets(), text)), text);
  }
}

TEST(Tokenizer, InvalidUtf8IsEncodableAndDecodesWithReplacement) {
  const std::string bytes = "ok \xFF\xC3 end";
  const auto ids = encode_text(assets(), bytes);
  EXPECT_FALSE(ids.empty());
  EXPECT_EQ(decode(assets(), ids), "ok \xEF\xBF\xBD\xEF\xBF\xBD end");
}

TEST(Tokenizer, DecodeRejectsUnknownIds) {
  EXPECT_THROW(decode(assets(), {5, 99999}), DataError);
  EXPECT_THROW(decode(assets(), {-1}), DataError);
}

TEST(PairLayout, StructureAndPadding) {
  const std::vector<TokenId> claim{10, 11};
  const std::vector<TokenId> article{20, 21, 22};
  const auto seq = layout_pair(specials(), claim, article, 12);
  EXPECT_EQ(seq.ids, (std::vector<TokenId>{0, 10, 11, 2, 2, 20, 21, 22, 2, 1, 1, 1}));
  EXPECT_EQ(seq.mask, (std::vector<std::uint8_t>{1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0}));
  EXPECT_EQ(seq.content_len, 9U);
  EXPECT_EQ(seq.max_len(), 12U);
}

TEST(PairLayout, TruncatesArticleTailOnly) {
  const std::vector<TokenId> claim{10, 11};
  const std::vector<TokenId> article{20, 21, 22, 23, 24};
  const auto seq = layout_pair(specials(), claim, article, 8);
  EXPECT_EQ(seq.ids, (std::vector<TokenId>{0, 10, 11, 2, 2, 20, 21, 2}));
  EXPECT_EQ(seq.content_len, 8U);
  const auto no_article = layout_pair(specials(), claim, article, 6);
  EXPECT_EQ(no_article.ids, (std::vector<TokenId>{0, 10, 11, 2, 2, 2}));
}

TEST(PairLayout, RejectsImpossibleLengths) {
  const std::vector<TokenId> claim{10, 11, 12};
  EXPECT_THROW(layout_pair(specials(), claim, {}, 4), DataError);
  EXPECT_THROW(layout_pair(specials(), claim, {}, 6), DataError);
  EXPECT_NO_THROW(layout_pair(specials(), claim, {}, 7));
}

TEST(PairLayout, EncodePairAgreesWithLayout) {
  const std::string claim = "Police confirm the report";
  const std::string article = "The report was confirmed by police on Tuesday.";
  const auto seq = encode_pair(assets(), specials(), claim, article, 64);
  EXPECT_EQ(seq, layout_pair(specials(), encode_text(assets(), claim), encode_text(assets(), article), 64));
  EXPECT_EQ(pair_length(assets(), specials(), claim, article),
            encode_text(assets(), claim).size() + encode_text(assets(), article).size() + kStructuralTokens);
}

std::string byte_vocab(std::vector<std::string> extra) {
  nlohmann::ordered_json v = nlohmann::ordered_json::object();
  for (int b = 0; b < 256; ++b) {
    v[assets().byte_symbol(static_cast<std::uint8_t>(b))] = b;
  }
  for (const auto& e : extra) {
    v[e] = static_cast<int>(v.size());
  }
  return v.dump();
}

TEST(BpeAssets, MinimalModelMergesByRank) {
  const auto a = BpeAssets::parse(byte_vocab({"ab", "abc"}), "#version: 0.2\na b\nab c\n");
  EXPECT_EQ(a.merge_count(), 2U);
  EXPECT_EQ(a.merge_rank("ab", "c"), 1);
  EXPECT_EQ(a.merge_rank("c", "d"), -1);
  EXPECT_EQ(encode_text(a, "abc"), (std::vector<TokenId>{257}));
  EXPECT_EQ(encode_text(a, "abd"), (std::vector<TokenId>{256, 'd'}));
}

TEST(BpeAssets, RejectsMalformedAssets) {
  EXPECT_THROW(BpeAssets::parse("not json", ""), DataError);
  EXPECT_THROW(BpeAssets::parse(R"({"a":0})", ""), DataError);                    // byte symbols missing
  EXPECT_THROW(BpeAssets::parse(byte_vocab({"ab"}), "a b c\n"), DataError);      // three fields
  EXPECT_THROW(BpeAssets::parse(byte_vocab({"ab"}), "x yz\n"), DataError);       // result missing
  EXPECT_THROW(BpeAssets::parse(byte_vocab({"ab"}), "a b\na b\n"), DataError);  // duplicate merge
  try {
    BpeAssets::parse(byte_vocab({"ab"}), "#version: 0.2\na b\nq\n");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(load_assets("/nonexistent/vocab.json", "/nonexistent/merges.txt"), DataError);
}

TEST(Tokenizer, IdsStayInVocabAndNeverProduceSpecials) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 300; ++i) {
    auto text = testing::random_utf8(rng, 30);
    if (i % 3 == 0) {
      text += " <s></s><pad> ";
    }
    for (TokenId id : encode_text(assets(), text)) {
      ASSERT_GE(id, 0);
      ASSERT_LT(static_cast<std::size_t>(id), assets().vocab_size());
      ASSERT_NE(id, specials().start_id);
      ASSERT_NE(id, specials().separator_id);
      ASSERT_NE(id, specials().pad_id);
    }
  }
}

TEST(PairLayout, ContentLengthIsPairLengthCappedAtMaxLen) {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 200; ++i) {
    const auto claim = testing::random_utf8(rng, 6);
    const auto article = testing::random_utf8(rng, 60);
    const std::size_t max_len = 8 + rng() % 60;
    const std::size_t full = pair_length(assets(), specials(), claim, article);
    if (full - encode_text(assets(), article).size() > max_len) {
      EXPECT_THROW(encode_pair(assets(), specials(), claim, article, max_len), DataError);
      continue;
    }
    const auto seq = encode_pair(assets(), specials(), claim, article, max_len);
    ASSERT_EQ(seq.ids.size(), max_len);
    ASSERT_EQ(seq.mask.size(), max_len);
    EXPECT_EQ(seq.content_len, std::min(full, max_len));
    EXPECT_EQ(seq.ids[0], specials().start_id);
    EXPECT_EQ(seq.ids[seq.content_len - 1], specials().separator_id);
    for (std::size_t k = 0; k < max_len; ++k) {
      EXPECT_EQ(seq.mask[k], k < seq.content_len ? 1 : 0);
      if (k >= seq.content_len) {
        EXPECT_EQ(seq.ids[k], specials().pad_id);
      }
    }
  }
}

}  // namespace
}  // namespace stance
