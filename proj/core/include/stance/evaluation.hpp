#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stance/corpus.hpp"
#include "stance/model.hpp"
#include "stance/tokenizer.hpp"
#include "stance/training.hpp"

namespace stance {

/// Gold-by-predicted counts; rows and columns indexed by label code.
class ConfusionMatrix {
 public:
  using Counts = std::array<std::array<std::uint64_t, kNumLabels>, kNumLabels>;

  ConfusionMatrix() = default;
  explicit ConfusionMatrix(const Counts& counts) : counts_(counts) {}

  void add(StanceLabel gold, StanceLabel predicted, std::uint64_t n = 1) { counts_[code(gold)][code(predicted)] += n; }

  std::uint64_t at(StanceLabel gold, StanceLabel predicted) const { return counts_[code(gold)][code(predicted)]; }
  std::uint64_t at(std::size_t gold, std::size_t predicted) const { return counts_[gold][predicted]; }
  const Counts& counts() const { return counts_; }

  std::uint64_t total() const;
  std::uint64_t diagonal() const;
  std::uint64_t row_total(std::size_t gold) const;
  std::uint64_t column_total(std::size_t predicted) const;

  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  friend ConfusionMatrix operator+(ConfusionMatrix a, const ConfusionMatrix& b) { return a += b; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  Counts counts_{};
};

/// Throws DataError on length mismatch or empty input.
ConfusionMatrix confusion(std::span<const StanceLabel> golds, std::span<const StanceLabel> predictions);

/// trace / total. Throws DataError on an empty matrix.
double standard_accuracy(const ConfusionMatrix& cm);

struct WeightedAccuracy {
  double acc_w = 0.0;
  double acc_ru = 0.0;   // related-vs-unrelated binary accuracy over all examples
  double acc_add = 0.0;  // exact-label accuracy over gold-related examples (0 if there are none)
};

/// acc_w = 0.25 * acc_ru + 0.75 * acc_add. Throws DataError on an empty matrix.
WeightedAccuracy weighted_accuracy(const ConfusionMatrix& cm);

struct EvalReport {
  double acc = 0.0;
  double acc_w = 0.0;
  double acc_ru = 0.0;
  double acc_add = 0.0;
  std::array<double, kNumLabels> precision{};  // 0 when a class is never predicted
  std::array<double, kNumLabels> recall{};     // 0 when a class never occurs
  std::uint64_t n = 0;
};

EvalReport make_report(const ConfusionMatrix& cm);

struct Evaluation {
  EvalReport report;
  ConfusionMatrix confusion;
  std::vector<Prediction> predictions;
};

/// Encodes at max_len, predicts and scores. Throws ConfigError when max_len
/// exceeds the model's max_positions.
Evaluation evaluate(const ModelParameters& params, std::span<const PairedExample> pairs, const BpeAssets& assets,
                    const SpecialTokens& specials, std::size_t max_len, std::size_t threads = 1);

struct LengthBucket {
  std::string_view label;
  std::size_t lower = 0;  // inclusive
  std::size_t upper = 0;  // inclusive
  std::uint64_t n = 0;
  std::uint64_t correct = 0;

  double accuracy() const { return n == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(n); }
};

inline constexpr std::size_t kNumBuckets = 5;
inline constexpr std::size_t kUnbounded = std::numeric_limits<std::size_t>::max();

/// <129, 129-256, 257-384, 385-512, >512
std::array<LengthBucket, kNumBuckets> empty_buckets();
std::size_t bucket_index(std::size_t length);

struct LengthBucketReport {
  std::array<LengthBucket, kNumBuckets> buckets;
  LengthBucket overall;
  bool has_predictions = false;
};

/// Buckets examples by pair length. With an empty `predictions` span only
/// counts are filled. Throws DataError on misaligned inputs.
LengthBucketReport bucket_by_length(std::span<const PairedExample> pairs, std::span<const StanceLabel> predictions,
                                    std::span<const std::size_t> lengths);

/// pair_length for every example.
std::vector<std::size_t> pair_lengths(std::span<const PairedExample> pairs, const BpeAssets& assets,
                                      const SpecialTokens& specials, std::size_t threads = 1);

struct AblationRow {
  std::size_t max_len = 0;
  double acc_w = 0.0;
  double acc = 0.0;
};

struct AblationReport {
  std::vector<AblationRow> rows;
};

/// For each max_len (ascending, duplicates removed): initialise from
/// model_config, train on train_pairs and evaluate on eval_pairs at that length.
AblationReport ablate_max_length(std::span<const PairedExample> train_pairs, std::span<const PairedExample> eval_pairs,
                                 std::span<const std::size_t> lengths, const ModelConfig& model_config,
                                 const TrainConfig& train_config, const BpeAssets& assets,
                                 const SpecialTokens& specials, std::ostream* log = nullptr);

/// Same, on a seeded random holdout of one corpus.
AblationReport ablate_max_length(std::span<const PairedExample> corpus, std::span<const std::size_t> lengths,
                                 const ModelConfig& model_config, const TrainConfig& train_config,
                                 const BpeAssets& assets, const SpecialTokens& specials, double holdout_fraction,
                                 std::uint64_t holdout_seed, std::ostream* log = nullptr);

// ---------------------------------------------------------------------------
// Report serialisation

/// Published FNC-I test results, carried only as reference rows in report
/// footers; none of them is reproduced here.
struct ReferenceResult {
  std::string_view method;
  double acc_w;
  double acc;
};
std::span<const ReferenceResult> published_results();

struct ReferenceAblationRow {
  std::size_t max_len;
  double acc_w;
  double acc;
};
std::span<const ReferenceAblationRow> published_ablation();

std::string report_to_json(const EvalReport& report, const ConfusionMatrix& cm);
std::string report_to_csv(const EvalReport& report);

std::string confusion_to_csv(const ConfusionMatrix& cm);
/// Parses the confusion_to_csv format. Throws DataError.
ConfusionMatrix confusion_from_csv(std::string_view text);

std::string buckets_to_csv(const LengthBucketReport& report);
std::string buckets_to_json(const LengthBucketReport& report);

std::string ablation_to_csv(const AblationReport& report);
std::string ablation_to_json(const AblationReport& report);

/// Deterministic SVG heatmap of the matrix.
std::string confusion_svg(const ConfusionMatrix& cm, std::string_view title = "Confusion matrix");
/// Writes confusion_svg to path. Throws IoError.
void render_confusion_svg(const ConfusionMatrix& cm, const std::string& path,
                          std::string_view title = "Confusion matrix");

/// Writes text to path. Throws IoError.
void write_text_file(const std::string& path, std::string_view text);

}  // namespace stance
