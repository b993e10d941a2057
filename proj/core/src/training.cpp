#include "stance/training.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "parallel.hpp"
#include "random.hpp"
#include "stance/error.hpp"

namespace stance {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be positive");
  }
  if (!(weight_decay >= 0.0)) {
    throw ConfigError("weight_decay must be non-negative");
  }
  if (epochs < 1) {
    throw ConfigError("epochs must be at least 1");
  }
  if (batch_size < 1) {
    throw ConfigError("batch_size must be at least 1");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("beta1 and beta2 must be in [0, 1)");
  }
  if (!(epsilon > 0.0)) {
    throw ConfigError("epsilon must be positive");
  }
  if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) {
    throw ConfigError("warmup_fraction must be in [0, 1)");
  }
  if (max_len < kMinPairLength) {
    throw ConfigError("max_len must be at least " + std::to_string(kMinPairLength));
  }
  if (!(max_grad_norm >= 0.0)) {
    throw ConfigError("max_grad_norm must be non-negative");
  }
}

std::vector<TokenSequence> encode_corpus(std::span<const PairedExample> pairs, const BpeAssets& assets,
                                         const SpecialTokens& specials, std::size_t max_len, std::size_t threads) {
  std::vector<TokenSequence> out(pairs.size());
  detail::parallel_for(pairs.size(), threads, [&](std::size_t i) {
    try {
      out[i] = encode_pair(assets, specials, pairs[i].claim, pairs[i].article, max_len);
    } catch (const DataError& e) {
      throw DataError("example " + std::to_string(i) + ": " + e.what());
    }
  });
  return out;
}

std::uint64_t epoch_seed(std::uint64_t shuffle_seed, std::size_t epoch) {
  return detail::mix_seed(shuffle_seed, static_cast<std::uint64_t>(epoch));
}

std::vector<Batch> make_batches(std::span<const TokenSequence> encoded, std::span<const PairedExample> pairs,
                                const TrainConfig& config, std::size_t epoch) {
  if (encoded.size() != pairs.size()) {
    throw DataError("encoded sequences and pairs differ in length");
  }
  const auto order = seeded_permutation(pairs.size(), epoch_seed(config.shuffle_seed, epoch));
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
    Batch batch;
    const std::size_t end = std::min(order.size(), start + config.batch_size);
    for (std::size_t k = start; k < end; ++k) {
      const std::size_t i = order[k];
      if (!pairs[i].label) {
        throw DataError("example " + std::to_string(i) + " is unlabeled");
      }
      batch.example_indices.push_back(i);
      batch.sequences.push_back(encoded[i]);
      batch.labels.push_back(*pairs[i].label);
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

std::vector<Batch> make_batches(std::span<const PairedExample> pairs, const BpeAssets& assets,
                                const SpecialTokens& specials, const TrainConfig& config, std::size_t epoch) {
  const auto encoded = encode_corpus(pairs, assets, specials, config.max_len, config.threads);
  return make_batches(encoded, pairs, config, epoch);
}

OptimizerState OptimizerState::zeros_like(const ModelParameters& params) {
  OptimizerState s;
  for (const auto& t : params.tensors) {
    s.first_moment.emplace_back(t.size(), 0.0);
    s.second_moment.emplace_back(t.size(), 0.0);
  }
  return s;
}

double learning_rate_at(const TrainConfig& config, std::uint64_t step, std::uint64_t total_steps) {
  if (total_steps == 0) {
    return config.learning_rate;
  }
  const auto warmup = static_cast<std::uint64_t>(config.warmup_fraction * static_cast<double>(total_steps));
  if (step < warmup) {
    return config.learning_rate * static_cast<double>(step + 1) / static_cast<double>(warmup);
  }
  if (step >= total_steps) {
    return 0.0;
  }
  return config.learning_rate * static_cast<double>(total_steps - step) / static_cast<double>(total_steps - warmup);
}

void optimizer_step(ModelParameters& params, const ModelParameters& grads, OptimizerState& state,
                    const TrainConfig& config, std::uint64_t total_steps) {
  if (grads.tensors.size() != params.tensors.size() || state.first_moment.size() != params.tensors.size() ||
      state.second_moment.size() != params.tensors.size()) {
    throw DataError("optimizer: parameter, gradient and state groups differ");
  }
  for (std::size_t t = 0; t < params.tensors.size(); ++t) {
    const auto& g = grads.tensors[t].values;
    if (g.size() != params.tensors[t].size() || state.first_moment[t].size() != g.size() ||
        state.second_moment[t].size() != g.size()) {
      throw DataError("optimizer: shape mismatch in " + params.tensors[t].name);
    }
    for (double v : g) {
      if (!std::isfinite(v)) {
        throw NumericError("non-finite gradient in parameter group " + params.tensors[t].name);
      }
    }
  }

  const double lr = learning_rate_at(config, state.step, total_steps);
  const auto t_next = static_cast<double>(state.step + 1);
  const double bias1 = 1.0 - std::pow(config.beta1, t_next);
  const double bias2 = 1.0 - std::pow(config.beta2, t_next);

  for (std::size_t t = 0; t < params.tensors.size(); ++t) {
    Tensor& p = params.tensors[t];
    const auto& g = grads.tensors[t].values;
    auto& m = state.first_moment[t];
    auto& v = state.second_moment[t];
    const double decay = p.decays ? lr * config.weight_decay : 0.0;
    for (std::size_t i = 0; i < p.values.size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      const double old = p.values[i];
      p.values[i] = old - lr * m_hat / (std::sqrt(v_hat) + config.epsilon) - decay * old;
    }
  }
  ++state.step;
}

double gradient_norm(const ModelParameters& grads) {
  double sum = 0.0;
  for (const auto& t : grads.tensors) {
    for (double v : t.values) {
      sum += v * v;
    }
  }
  return std::sqrt(sum);
}

std::string TrainReport::to_csv() const {
  std::ostringstream out;
  out << "epoch,mean_loss,train_accuracy\n";
  out << std::setprecision(17);
  for (const auto& e : epochs) {
    out << e.epoch << ',' << e.mean_loss << ',' << e.train_accuracy << '\n';
  }
  return std::move(out).str();
}

std::string TrainReport::to_text(bool include_timing) const {
  std::ostringstream out;
  out << std::fixed;
  for (const auto& e : epochs) {
    out << "epoch " << e.epoch << ": loss " << std::setprecision(6) << e.mean_loss << ", train accuracy "
        << std::setprecision(2) << e.train_accuracy * 100.0 << "%";
    if (include_timing) {
      out << ", " << std::setprecision(1) << e.seconds << " s";
    }
    out << "\n";
  }
  if (!checkpoint_path.empty()) {
    out << "checkpoint: " << checkpoint_path << "\n";
  }
  return std::move(out).str();
}

TrainResult train(ModelParameters params, std::span<const PairedExample> corpus, const BpeAssets& assets,
                  const SpecialTokens& specials, const TrainConfig& config,
                  const std::optional<std::string>& checkpoint_path, std::ostream* log) {
  config.validate();
  params.config.validate();
  if (corpus.empty()) {
    throw DataError("training corpus is empty");
  }
  if (config.max_len > params.config.max_positions) {
    throw ConfigError("max_len " + std::to_string(config.max_len) + " exceeds the model's max_positions " +
                      std::to_string(params.config.max_positions));
  }

  const auto encoded = encode_corpus(corpus, assets, specials, config.max_len, config.threads);
  const std::size_t batches_per_epoch = (corpus.size() + config.batch_size - 1) / config.batch_size;
  const std::uint64_t total_steps = batches_per_epoch * config.epochs;

  OptimizerState state = OptimizerState::zeros_like(params);
  TrainReport report;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    const auto batches = make_batches(encoded, corpus, config, epoch);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (const auto& batch : batches) {
      const DropoutContext dropout{params.config.dropout_rate, config.shuffle_seed, state.step};
      LossResult result = forward_loss(params, batch.sequences, batch.labels, &dropout, config.threads);
      loss_sum += result.loss * static_cast<double>(batch.labels.size());
      for (std::size_t b = 0; b < batch.labels.size(); ++b) {
        const RowVector row = result.logits.row(static_cast<Eigen::Index>(b));
        if (prediction_from_logits(std::span<const double>(row.data(), kNumLabels)).label == batch.labels[b]) {
          ++correct;
        }
      }
      ModelParameters grads = backward(params, result.trace, config.threads);
      if (config.max_grad_norm > 0.0) {
        const double norm = gradient_norm(grads);
        if (norm > config.max_grad_norm) {
          const double factor = config.max_grad_norm / norm;
          for (auto& t : grads.tensors) {
            for (auto& v : t.values) {
              v *= factor;
            }
          }
        }
      }
      optimizer_step(params, grads, state, config, total_steps);
    }
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started;
    EpochRecord record{epoch + 1, loss_sum / static_cast<double>(corpus.size()),
                       static_cast<double>(correct) / static_cast<double>(corpus.size()), elapsed.count()};
    report.epochs.push_back(record);
    if (log != nullptr) {
      *log << "epoch " << record.epoch << "/" << config.epochs << " loss " << record.mean_loss << " acc "
           << record.train_accuracy << " (" << record.seconds << " s)\n";
    }
  }

  if (checkpoint_path) {
    save_checkpoint(params, *checkpoint_path);
    report.checkpoint_path = *checkpoint_path;
  }
  return {std::move(params), std::move(report)};
}

}  // namespace stance
