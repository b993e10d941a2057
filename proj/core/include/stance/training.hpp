#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "stance/corpus.hpp"
#include "stance/model.hpp"
#include "stance/tokenizer.hpp"

namespace stance {

struct TrainConfig {
  double learning_rate = 2e-5;
  double weight_decay = 0.1;
  std::size_t epochs = 3;
  std::size_t batch_size = 8;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double epsilon = 1e-6;
  double warmup_fraction = 0.06;
  std::uint64_t shuffle_seed = 0;
  std::size_t max_len = 512;
  double max_grad_norm = 0.0;  // 0 disables clipping
  std::size_t threads = 1;

  /// Throws ConfigError when a field is out of range.
  void validate() const;
};

struct Batch {
  std::vector<std::size_t> example_indices;  // positions in the input corpus
  std::vector<TokenSequence> sequences;
  std::vector<StanceLabel> labels;
};

/// Encodes every labeled pair at max_len. Errors carry the example index.
std::vector<TokenSequence> encode_corpus(std::span<const PairedExample> pairs, const BpeAssets& assets,
                                         const SpecialTokens& specials, std::size_t max_len,
                                         std::size_t threads = 1);

/// Seed for one epoch's shuffle.
std::uint64_t epoch_seed(std::uint64_t shuffle_seed, std::size_t epoch);

/// One epoch of batches over already-encoded sequences, shuffled from
/// (shuffle_seed, epoch). Every example appears exactly once.
std::vector<Batch> make_batches(std::span<const TokenSequence> encoded, std::span<const PairedExample> pairs,
                                const TrainConfig& config, std::size_t epoch);

/// Encodes and batches in one go.
std::vector<Batch> make_batches(std::span<const PairedExample> pairs, const BpeAssets& assets,
                                const SpecialTokens& specials, const TrainConfig& config, std::size_t epoch);

struct OptimizerState {
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::uint64_t step = 0;

  static OptimizerState zeros_like(const ModelParameters& params);
};

/// Linear warmup over the first warmup_fraction of total_steps, then linear
/// decay to zero. `step` counts completed updates (0 for the first update).
double learning_rate_at(const TrainConfig& config, std::uint64_t step, std::uint64_t total_steps);

/// Adam moments with bias correction, then decoupled weight decay on the
/// tensors marked as decaying (biases and norm parameters are exempt):
///   p <- p - lr_t * m_hat / (sqrt(v_hat) + eps) - lr_t * wd * p
/// Throws NumericError naming the tensor if a gradient is not finite.
void optimizer_step(ModelParameters& params, const ModelParameters& grads, OptimizerState& state,
                    const TrainConfig& config, std::uint64_t total_steps);

/// L2 norm over all gradient entries.
double gradient_norm(const ModelParameters& grads);

struct EpochRecord {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double train_accuracy = 0.0;  // from the training-mode forward passes of the epoch
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::string checkpoint_path;

  /// epoch,mean_loss,train_accuracy; timing excluded so that the file is
  /// reproducible byte for byte.
  std::string to_csv() const;
  /// Human-readable summary; wall-clock times only when include_timing.
  std::string to_text(bool include_timing = true) const;
};

struct TrainResult {
  ModelParameters params;
  TrainReport report;
};

/// Fine-tunes `params` on labeled pairs. Writes the final checkpoint when a
/// path is given. Progress lines go to `log` when non-null.
TrainResult train(ModelParameters params, std::span<const PairedExample> corpus, const BpeAssets& assets,
                  const SpecialTokens& specials, const TrainConfig& config,
                  const std::optional<std::string>& checkpoint_path = std::nullopt, std::ostream* log = nullptr);

}  // namespace stance
