#include "stance/evaluation.hpp"

#include <algorithm>
#include <set>

#include "parallel.hpp"
#include "stance/error.hpp"

namespace stance {

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t n = 0;
  for (const auto& row : counts_) {
    for (auto v : row) {
      n += v;
    }
  }
  return n;
}

std::uint64_t ConfusionMatrix::diagonal() const {
  std::uint64_t n = 0;
  for (std::size_t k = 0; k < kNumLabels; ++k) {
    n += counts_[k][k];
  }
  return n;
}

std::uint64_t ConfusionMatrix::row_total(std::size_t gold) const {
  std::uint64_t n = 0;
  for (auto v : counts_[gold]) {
    n += v;
  }
  return n;
}

std::uint64_t ConfusionMatrix::column_total(std::size_t predicted) const {
  std::uint64_t n = 0;
  for (const auto& row : counts_) {
    n += row[predicted];
  }
  return n;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  for (std::size_t g = 0; g < kNumLabels; ++g) {
    for (std::size_t p = 0; p < kNumLabels; ++p) {
      counts_[g][p] += other.counts_[g][p];
    }
  }
  return *this;
}

ConfusionMatrix confusion(std::span<const StanceLabel> golds, std::span<const StanceLabel> predictions) {
  if (golds.size() != predictions.size()) {
    throw DataError("gold and predicted label lists differ in length (" + std::to_string(golds.size()) + " vs " +
                    std::to_string(predictions.size()) + ")");
  }
  if (golds.empty()) {
    throw DataError("cannot build a confusion matrix from zero examples");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    cm.add(golds[i], predictions[i]);
  }
  return cm;
}

double standard_accuracy(const ConfusionMatrix& cm) {
  const auto n = cm.total();
  if (n == 0) {
    throw DataError("accuracy of an empty confusion matrix is undefined");
  }
  return static_cast<double>(cm.diagonal()) / static_cast<double>(n);
}

WeightedAccuracy weighted_accuracy(const ConfusionMatrix& cm) {
  const auto n = cm.total();
  if (n == 0) {
    throw DataError("weighted accuracy of an empty confusion matrix is undefined");
  }
  const auto unrelated = code(StanceLabel::Unrelated);
  std::uint64_t binary_correct = 0;
  std::uint64_t related_total = 0;
  std::uint64_t related_correct = 0;
  for (std::size_t g = 0; g < kNumLabels; ++g) {
    for (std::size_t p = 0; p < kNumLabels; ++p) {
      const auto count = cm.at(g, p);
      if ((g == unrelated) == (p == unrelated)) {
        binary_correct += count;
      }
      if (g != unrelated) {
        related_total += count;
        if (g == p) {
          related_correct += count;
        }
      }
    }
  }
  WeightedAccuracy w;
  w.acc_ru = static_cast<double>(binary_correct) / static_cast<double>(n);
  w.acc_add = related_total == 0 ? 0.0 : static_cast<double>(related_correct) / static_cast<double>(related_total);
  w.acc_w = 0.25 * w.acc_ru + 0.75 * w.acc_add;
  return w;
}

EvalReport make_report(const ConfusionMatrix& cm) {
  EvalReport r;
  r.n = cm.total();
  r.acc = standard_accuracy(cm);
  const auto w = weighted_accuracy(cm);
  r.acc_w = w.acc_w;
  r.acc_ru = w.acc_ru;
  r.acc_add = w.acc_add;
  for (std::size_t k = 0; k < kNumLabels; ++k) {
    const auto predicted = cm.column_total(k);
    const auto actual = cm.row_total(k);
    r.precision[k] = predicted == 0 ? 0.0 : static_cast<double>(cm.at(k, k)) / static_cast<double>(predicted);
    r.recall[k] = actual == 0 ? 0.0 : static_cast<double>(cm.at(k, k)) / static_cast<double>(actual);
  }
  return r;
}

Evaluation evaluate(const ModelParameters& params, std::span<const PairedExample> pairs, const BpeAssets& assets,
                    const SpecialTokens& specials, std::size_t max_len, std::size_t threads) {
  if (max_len > params.config.max_positions) {
    throw ConfigError("max_len " + std::to_string(max_len) + " exceeds the checkpoint's max_positions " +
                      std::to_string(params.config.max_positions));
  }
  std::vector<StanceLabel> golds;
  golds.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (!pairs[i].label) {
      throw DataError("example " + std::to_string(i) + " is unlabeled; evaluation needs gold labels");
    }
    golds.push_back(*pairs[i].label);
  }
  const auto sequences = encode_corpus(pairs, assets, specials, max_len, threads);

  Evaluation result;
  result.predictions = predict(params, sequences, threads);
  std::vector<StanceLabel> predicted;
  predicted.reserve(result.predictions.size());
  for (const auto& p : result.predictions) {
    predicted.push_back(p.label);
  }
  result.confusion = confusion(golds, predicted);
  result.report = make_report(result.confusion);
  return result;
}

std::array<LengthBucket, kNumBuckets> empty_buckets() {
  return {{
      {"<129", 0, 128, 0, 0},
      {"129-256", 129, 256, 0, 0},
      {"257-384", 257, 384, 0, 0},
      {"385-512", 385, 512, 0, 0},
      {">512", 513, kUnbounded, 0, 0},
  }};
}

std::size_t bucket_index(std::size_t length) {
  if (length <= 128) {
    return 0;
  }
  if (length <= 256) {
    return 1;
  }
  if (length <= 384) {
    return 2;
  }
  if (length <= 512) {
    return 3;
  }
  return 4;
}

LengthBucketReport bucket_by_length(std::span<const PairedExample> pairs, std::span<const StanceLabel> predictions,
                                    std::span<const std::size_t> lengths) {
  if (lengths.size() != pairs.size() || (!predictions.empty() && predictions.size() != pairs.size())) {
    throw DataError("pairs, predictions and lengths are not aligned");
  }
  LengthBucketReport report;
  report.buckets = empty_buckets();
  report.overall = {"All", 0, kUnbounded, 0, 0};
  report.has_predictions = !predictions.empty();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    auto& bucket = report.buckets[bucket_index(lengths[i])];
    ++bucket.n;
    ++report.overall.n;
    if (report.has_predictions) {
      if (!pairs[i].label) {
        throw DataError("example " + std::to_string(i) + " is unlabeled");
      }
      if (*pairs[i].label == predictions[i]) {
        ++bucket.correct;
        ++report.overall.correct;
      }
    }
  }
  return report;
}

std::vector<std::size_t> pair_lengths(std::span<const PairedExample> pairs, const BpeAssets& assets,
                                      const SpecialTokens& specials, std::size_t threads) {
  std::vector<std::size_t> out(pairs.size());
  detail::parallel_for(pairs.size(), threads, [&](std::size_t i) {
    out[i] = pair_length(assets, specials, pairs[i].claim, pairs[i].article);
  });
  return out;
}

AblationReport ablate_max_length(std::span<const PairedExample> train_pairs, std::span<const PairedExample> eval_pairs,
                                 std::span<const std::size_t> lengths, const ModelConfig& model_config,
                                 const TrainConfig& train_config, const BpeAssets& assets,
                                 const SpecialTokens& specials, std::ostream* log) {
  if (lengths.empty()) {
    throw ConfigError("ablation needs at least one max_len");
  }
  const std::set<std::size_t> ordered(lengths.begin(), lengths.end());
  AblationReport report;
  for (std::size_t max_len : ordered) {
    if (max_len < kMinPairLength) {
      throw ConfigError("ablation max_len " + std::to_string(max_len) + " is below " + std::to_string(kMinPairLength));
    }
    if (max_len > model_config.max_positions) {
      throw ConfigError("ablation max_len " + std::to_string(max_len) + " exceeds max_positions " +
                        std::to_string(model_config.max_positions));
    }
    if (log != nullptr) {
      *log << "ablation: max_len " << max_len << "\n";
    }
    TrainConfig config = train_config;
    config.max_len = max_len;
    auto trained = train(init_params(model_config), train_pairs, assets, specials, config, std::nullopt, log);
    const auto eval = evaluate(trained.params, eval_pairs, assets, specials, max_len, config.threads);
    report.rows.push_back({max_len, eval.report.acc_w, eval.report.acc});
  }
  return report;
}

AblationReport ablate_max_length(std::span<const PairedExample> corpus, std::span<const std::size_t> lengths,
                                 const ModelConfig& model_config, const TrainConfig& train_config,
                                 const BpeAssets& assets, const SpecialTokens& specials, double holdout_fraction,
                                 std::uint64_t holdout_seed, std::ostream* log) {
  if (holdout_fraction == 0.0) {
    return ablate_max_length(corpus, corpus, lengths, model_config, train_config, assets, specials, log);
  }
  const auto [kept, held] = holdout_split(corpus, holdout_fraction, holdout_seed);
  return ablate_max_length(kept, held, lengths, model_config, train_config, assets, specials, log);
}

}  // namespace stance
