#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "stance/corpus.hpp"
#include "stance/model.hpp"
#include "stance/tokenizer.hpp"

namespace stance::testing {

inline std::string data_path(const std::string& name) { return std::string(STANCE_TEST_DATA_DIR) + "/" + name; }

/// Test BPE assets (3000-token byte-level vocab). Loaded once.
inline const BpeAssets& assets() {
  static const BpeAssets a = load_assets(data_path("bpe/vocab.json"), data_path("bpe/merges.txt"));
  return a;
}

inline const SpecialTokens& specials() {
  static const SpecialTokens s = SpecialTokens::from_assets(assets());
  return s;
}

/// Keyword-rule corpus. The claim names a topic; the article names a topic and
/// carries one stance keyword. Different topics are unrelated; the same topic
/// is agree, disagree or discuss by keyword (confirmed, denied, reported).
inline std::vector<PairedExample> synthetic_corpus(std::size_t n, std::uint64_t seed) {
  static const std::vector<std::string> topics = {"river", "castle", "rocket", "garden",
                                                  "museum", "bridge", "harbor", "forest"};
  static const std::vector<std::string> keywords = {"confirmed", "denied", "reported"};
  std::mt19937_64 rng(seed);
  std::vector<PairedExample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t claim_topic = rng() % topics.size();
    // Half related, half unrelated.
    const bool related = (rng() & 1U) != 0;
    std::size_t article_topic = claim_topic;
    if (!related) {
      article_topic = (claim_topic + 1 + rng() % (topics.size() - 1)) % topics.size();
    }
    const std::size_t kw = rng() % keywords.size();
    PairedExample p;
    p.claim = "news about the " + topics[claim_topic];
    p.article = "officials " + keywords[kw] + " the " + topics[article_topic] + " story";
    p.label = related ? label_from_code(kw) : StanceLabel::Unrelated;
    p.source_body_id = static_cast<std::int64_t>(i);
    out.push_back(std::move(p));
  }
  return out;
}

/// Random valid UTF-8 string of up to max_cp code points, mixing ASCII,
/// whitespace, Latin, CJK and astral-plane characters.
inline std::string random_utf8(std::mt19937_64& rng, std::size_t max_cp) {
  static const std::u32string pool_ascii = U" \t\n\r'sdlmtrevABCxyz0123456789.,!?-_\"'";
  std::string out;
  const std::size_t n = rng() % (max_cp + 1);
  for (std::size_t i = 0; i < n; ++i) {
    char32_t cp = 0;
    switch (rng() % 6) {
      case 0:
      case 1: cp = pool_ascii[rng() % pool_ascii.size()]; break;
      case 2: cp = static_cast<char32_t>(0x20 + rng() % 0x5F); break;
      case 3: cp = static_cast<char32_t>(0xA0 + rng() % 0x560); break;
      case 4: cp = static_cast<char32_t>(0x3000 + rng() % 0x6000); break;
      default:
        cp = static_cast<char32_t>(rng() % 0x110000);
        if (cp >= 0xD800 && cp <= 0xDFFF) {
          cp = U'?';
        }
    }
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
  return out;
}

struct GoldenEncoding {
  std::string text;
  std::vector<TokenId> ids;
};

/// Reference encodings produced by an independent BPE implementation.
std::vector<GoldenEncoding> load_bpe_golden();

struct GradientCheck {
  std::size_t coordinates = 0;
  double max_relative_error = 0.0;
  std::string worst;  // tensor[index] of the worst coordinate
};

/// Compares backward() against central differences of forward_loss() on
/// `count` coordinates: a tensor drawn uniformly, then an index within it
/// (seeded).
/// Relative error is |a - n| / max(|a|, |n|, 1e-6).
GradientCheck gradient_check(const ModelParameters& params, const std::vector<TokenSequence>& batch,
                             const std::vector<StanceLabel>& labels, std::size_t count, double h,
                             std::uint64_t seed);

/// Adds a fixed smooth perturbation to every parameter so that biases, norm
/// offsets and scales are not at their trivial initial values.
inline void perturb(ModelParameters& params, double amplitude) {
  for (std::size_t t = 0; t < params.tensors.size(); ++t) {
    for (std::size_t k = 0; k < params.tensors[t].size(); ++k) {
      params.tensors[t].values[k] +=
          amplitude * std::sin(1.3 * static_cast<double>(k) + 0.7 * static_cast<double>(t));
    }
  }
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("stance_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Weighted accuracy computed example by example, straight from the
/// definition: a quarter for the related/unrelated decision over all
/// examples, three quarters for the exact label over gold-related examples.
inline double brute_force_weighted_accuracy(const std::vector<StanceLabel>& gold,
                                            const std::vector<StanceLabel>& predicted) {
  double binary_hits = 0;
  double related = 0;
  double related_hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const bool g_rel = gold[i] != StanceLabel::Unrelated;
    const bool p_rel = predicted[i] != StanceLabel::Unrelated;
    if (g_rel == p_rel) {
      binary_hits += 1;
    }
    if (g_rel) {
      related += 1;
      if (gold[i] == predicted[i]) {
        related_hits += 1;
      }
    }
  }
  const double acc_ru = binary_hits / static_cast<double>(gold.size());
  const double acc_add = related == 0 ? 0.0 : related_hits / related;
  return 0.25 * acc_ru + 0.75 * acc_add;
}

}  // namespace stance::testing
