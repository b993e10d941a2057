#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "stance/corpus.hpp"
#include "stance/tokenizer.hpp"

namespace stance {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

struct ModelConfig {
  std::size_t num_layers = 4;
  std::size_t hidden_dim = 64;
  std::size_t num_heads = 4;
  std::size_t ffn_dim = 256;
  std::size_t vocab_size = 0;
  std::size_t max_positions = 512;
  std::size_t num_classes = kNumLabels;
  double dropout_rate = 0.1;
  std::uint64_t seed = 0;

  /// Desk-scale default: 4 layers, width 64, 4 heads, FFN 256.
  static ModelConfig toy(std::size_t vocab_size);
  /// 12 layers, width 768, 12 heads, FFN 3072.
  static ModelConfig base(std::size_t vocab_size);

  std::size_t head_dim() const { return hidden_dim / num_heads; }

  /// Throws ConfigError on zero dimensions, indivisible heads, a class
  /// count other than 4, or a dropout rate outside [0, 1).
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// One named parameter array, row-major.
struct Tensor {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;
  bool decays = true;  // false for biases and layer-norm parameters

  std::size_t size() const { return values.size(); }
  Eigen::Map<Matrix> matrix() { return {values.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)}; }
  Eigen::Map<const Matrix> matrix() const {
    return {values.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
  }
};

/// Index of each tensor within one encoder layer; layer l's tensors start
/// at kFirstLayerTensor + l * kTensorsPerLayer.
enum class LayerTensor : std::size_t {
  Norm1Scale, Norm1Offset,
  QueryWeight, QueryBias, KeyWeight, KeyBias, ValueWeight, ValueBias, OutputWeight, OutputBias,
  Norm2Scale, Norm2Offset,
  FfnInWeight, FfnInBias, FfnOutWeight, FfnOutBias,
};
inline constexpr std::size_t kTensorsPerLayer = 16;
inline constexpr std::size_t kFirstLayerTensor = 2;

/// Every learnable array in a fixed order: token embedding, position
/// embedding, the per-layer tensors, final norm scale and offset,
/// classifier weight (hidden x classes) and bias. Gradients use the same type.
struct ModelParameters {
  ModelConfig config;
  std::vector<Tensor> tensors;

  /// Same shapes and names, all values zero.
  static ModelParameters zeros(const ModelConfig& config);

  std::size_t parameter_count() const;

  Tensor& token_embedding() { return tensors[0]; }
  const Tensor& token_embedding() const { return tensors[0]; }
  Tensor& position_embedding() { return tensors[1]; }
  const Tensor& position_embedding() const { return tensors[1]; }
  Tensor& layer(std::size_t l, LayerTensor t) { return tensors[layer_index(l, t)]; }
  const Tensor& layer(std::size_t l, LayerTensor t) const { return tensors[layer_index(l, t)]; }
  Tensor& final_norm_scale() { return tensors[head_index()]; }
  const Tensor& final_norm_scale() const { return tensors[head_index()]; }
  Tensor& final_norm_offset() { return tensors[head_index() + 1]; }
  const Tensor& final_norm_offset() const { return tensors[head_index() + 1]; }
  Tensor& classifier_weight() { return tensors[head_index() + 2]; }
  const Tensor& classifier_weight() const { return tensors[head_index() + 2]; }
  Tensor& classifier_bias() { return tensors[head_index() + 3]; }
  const Tensor& classifier_bias() const { return tensors[head_index() + 3]; }

  /// Throws DataError if no tensor has this name.
  const Tensor& find(std::string_view name) const;

  bool all_finite() const;

  friend bool operator==(const ModelParameters&, const ModelParameters&);

 private:
  static std::size_t layer_index(std::size_t l, LayerTensor t) {
    return kFirstLayerTensor + l * kTensorsPerLayer + static_cast<std::size_t>(t);
  }
  std::size_t head_index() const { return kFirstLayerTensor + config.num_layers * kTensorsPerLayer; }
};

bool operator==(const Tensor& a, const Tensor& b);

/// Closed-form parameter count for a config.
std::size_t expected_parameter_count(const ModelConfig& config);

/// Weights ~ normal(0, 0.02) from config.seed; biases and norm offsets 0,
/// norm scales 1. Bitwise deterministic for a fixed seed.
ModelParameters init_params(const ModelConfig& config);

/// Dropout for the training path. Masks depend only on (run_seed, step,
/// position of the example in the batch), so results do not depend on the
/// number of worker threads.
struct DropoutContext {
  double rate = 0.0;
  std::uint64_t run_seed = 0;
  std::uint64_t step = 0;
};

struct LayerNormCache {
  Matrix normalized;      // (x - mean) * inv_std
  Eigen::VectorXd inv_std;
};

struct LayerCache {
  Matrix input;
  LayerNormCache norm1;
  Matrix normed1;
  Matrix query, key, value;
  std::vector<Matrix> attention;  // per head, content x content
  Matrix context;
  Matrix attn_drop;                // empty when dropout is off
  Matrix mid;
  LayerNormCache norm2;
  Matrix normed2;
  Matrix ffn_pre;
  Matrix ffn_act;
  Matrix ffn_drop;
};

struct ExampleTrace {
  std::vector<TokenId> ids;  // content tokens only
  Matrix embed_drop;
  std::vector<LayerCache> layers;
  Matrix final_input;
  LayerNormCache final_norm;
  Matrix final_hidden;
  std::array<double, kNumLabels> probabilities{};
  std::size_t label = 0;
};

/// Activations of one forward_loss evaluation, enough for exact gradients.
struct ForwardTrace {
  ModelConfig config;
  std::vector<ExampleTrace> examples;
};

struct LossResult {
  double loss = 0.0;
  Matrix logits;  // batch x 4
  ForwardTrace trace;
};

/// Logits (batch x 4) for a batch sharing one max_len. Pure inference: no
/// dropout. Padded positions are excluded from attention.
Matrix forward(const ModelParameters& params, std::span<const TokenSequence> batch, std::size_t threads = 1);

/// Mean cross-entropy over the batch plus the trace for backward().
LossResult forward_loss(const ModelParameters& params, std::span<const TokenSequence> batch,
                        std::span<const StanceLabel> labels, const DropoutContext* dropout = nullptr,
                        std::size_t threads = 1);

/// Exact gradient of the mean cross-entropy recorded in `trace`.
ModelParameters backward(const ModelParameters& params, const ForwardTrace& trace, std::size_t threads = 1);

struct Prediction {
  StanceLabel label = StanceLabel::Agree;
  std::array<double, kNumLabels> probabilities{};
};

/// Softmax over one logit row; ties go to the lowest label code.
Prediction prediction_from_logits(std::span<const double> logits);

std::vector<Prediction> predict(const ModelParameters& params, std::span<const TokenSequence> sequences,
                                std::size_t threads = 1);

/// Final (post-norm) hidden states of the content positions.
Matrix hidden_states(const ModelParameters& params, const TokenSequence& sequence);

/// Attention weights per layer and head, one row per content query and
/// one column per position of the padded sequence.
std::vector<std::vector<Matrix>> attention_weights(const ModelParameters& params, const TokenSequence& sequence);

// Checkpoints: magic "STNCCKPT", version byte, config, then every tensor
// (name, rows, cols, decay flag, little-endian float64 values) in
// ModelParameters order.
inline constexpr std::uint8_t kCheckpointVersion = 1;
std::string serialize_checkpoint(const ModelParameters& params);
ModelParameters deserialize_checkpoint(std::string_view bytes);
void save_checkpoint(const ModelParameters& params, const std::string& path);
ModelParameters load_checkpoint(const std::string& path);

}  // namespace stance
