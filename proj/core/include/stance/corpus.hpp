#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace stance {

/// The four stance classes. Integer codes are stable and index the rows and
/// columns of a confusion matrix.
enum class StanceLabel : std::uint8_t { Agree = 0, Disagree = 1, Discuss = 2, Unrelated = 3 };

inline constexpr std::size_t kNumLabels = 4;
inline constexpr std::array<StanceLabel, kNumLabels> kAllLabels = {
    StanceLabel::Agree, StanceLabel::Disagree, StanceLabel::Discuss, StanceLabel::Unrelated};

constexpr std::size_t code(StanceLabel label) { return static_cast<std::size_t>(label); }
StanceLabel label_from_code(std::size_t code);

std::string_view to_string(StanceLabel label);

/// Case-insensitive match against "agree", "disagree", "discuss", "unrelated".
std::optional<StanceLabel> parse_stance(std::string_view text);

constexpr bool is_related(StanceLabel label) { return label != StanceLabel::Unrelated; }

struct ArticleBody {
  std::int64_t body_id = 0;
  std::string text;
};

struct ClaimInstance {
  std::string headline;
  std::int64_t body_id = 0;
  std::optional<StanceLabel> stance;
};

struct PairedExample {
  std::string claim;
  std::string article;
  std::optional<StanceLabel> label;
  std::int64_t source_body_id = 0;

  friend bool operator==(const PairedExample&, const PairedExample&) = default;
};

using BodyMap = std::map<std::int64_t, ArticleBody>;

struct DatasetStats {
  std::size_t total = 0;
  std::array<std::size_t, kNumLabels> per_label_count{};
  std::array<double, kNumLabels> per_label_percent{};  // fractions in [0, 1]
};

// Parsing from in-memory text; `source` only labels error messages.
BodyMap parse_bodies(std::string_view text, std::string_view source = "<memory>");
std::vector<ClaimInstance> parse_stances(std::string_view text, bool labeled,
                                         std::string_view source = "<memory>");

/// Reads an FNC-I bodies file ("Body ID", "articleBody").
BodyMap load_bodies(const std::string& path);

/// Reads an FNC-I stances file ("Headline", "Body ID" and, when labeled,
/// "Stance"). Row order is preserved.
std::vector<ClaimInstance> load_stances(const std::string& path, bool labeled);

/// Attaches each claim to its article body. Throws DataError listing every
/// body id that is referenced but missing.
std::vector<PairedExample> join_pairs(std::span<const ClaimInstance> stances, const BodyMap& bodies);

/// Convenience: load both files of one split and join them.
std::vector<PairedExample> load_split(const std::string& bodies_path, const std::string& stances_path,
                                      bool labeled = true);

DatasetStats compute_stats(std::span<const PairedExample> pairs);

// Two-file CSV form of a list of pairs. Bodies are written once per
// distinct source_body_id in ascending id order; stances in list order.
std::string format_bodies(std::span<const PairedExample> pairs);
std::string format_stances(std::span<const PairedExample> pairs);

/// Published per-split dataset figures used to reconcile loaded corpora.
struct SplitReference {
  std::string_view name;
  std::size_t total;
  std::array<double, kNumLabels> percent;  // agree, disagree, discuss, unrelated; in percent
};

inline constexpr SplitReference kTrainReference{"train", 49972, {7.36, 1.68, 17.83, 73.13}};
inline constexpr SplitReference kTestReference{"test", 25413, {7.49, 2.74, 17.57, 72.20}};

struct Reconciliation {
  const SplitReference* reference = nullptr;
  bool count_matches = false;
  double max_percent_deviation = 0.0;  // percentage points
  std::vector<std::string> warnings;
};

/// Compares stats against a reference split. Mismatches become warnings.
Reconciliation reconcile(const DatasetStats& stats, const SplitReference& reference);

/// Picks the reference whose total is closest to stats.total.
const SplitReference& closest_reference(const DatasetStats& stats);

/// Fraction as a percentage string with two decimals ("73.13").
std::string format_percent(double fraction);

std::string stats_to_json(const DatasetStats& stats, const Reconciliation* reconciliation = nullptr);
std::string stats_to_csv(const DatasetStats& stats);
std::string stats_to_table(const DatasetStats& stats, const Reconciliation* reconciliation = nullptr);

/// Seeded random holdout: returns (kept, held_out). Each list keeps the
/// original relative order. With a positive fraction and two or more
/// examples, both sides are non-empty.
std::pair<std::vector<PairedExample>, std::vector<PairedExample>> holdout_split(
    std::span<const PairedExample> pairs, double holdout_fraction, std::uint64_t seed);

/// Deterministic Fisher-Yates permutation of [0, n) driven by a
/// mt19937_64 seeded with `seed`. Same output on every platform.
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

}  // namespace stance
