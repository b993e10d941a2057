#include "stance/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "parallel.hpp"
#include "random.hpp"
#include "stance/error.hpp"

namespace stance {

namespace {

constexpr double kInitStd = 0.02;
constexpr double kNormEps = 1e-5;

constexpr std::array<std::string_view, kTensorsPerLayer> kLayerTensorNames = {
    "norm1.scale", "norm1.offset", "attn.query.weight", "attn.query.bias", "attn.key.weight", "attn.key.bias",
    "attn.value.weight", "attn.value.bias", "attn.output.weight", "attn.output.bias", "norm2.scale",
    "norm2.offset", "ffn.in.weight", "ffn.in.bias", "ffn.out.weight", "ffn.out.bias",
};

Tensor make_tensor(std::string name, std::size_t rows, std::size_t cols, bool decays) {
  Tensor t;
  t.name = std::move(name);
  t.rows = rows;
  t.cols = cols;
  t.values.assign(rows * cols, 0.0);
  t.decays = decays;
  return t;
}

bool is_norm_scale(const Tensor& t) { return t.name.ends_with(".scale"); }

// ---------------------------------------------------------------------------
// Building blocks

void layer_norm(const Matrix& x, const Tensor& scale, const Tensor& offset, LayerNormCache& cache, Matrix& out) {
  const auto n = x.rows();
  const auto h = static_cast<double>(x.cols());
  cache.normalized.resize(n, x.cols());
  cache.inv_std.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mean = x.row(i).sum() / h;
    const auto centered = x.row(i).array() - mean;
    const double var = centered.square().sum() / h;
    const double inv_std = 1.0 / std::sqrt(var + kNormEps);
    cache.inv_std(i) = inv_std;
    cache.normalized.row(i) = centered * inv_std;
  }
  const auto gamma = scale.matrix().row(0).array();
  const auto beta = offset.matrix().row(0).array();
  out = (cache.normalized.array().rowwise() * gamma).rowwise() + beta;
}

// Returns d(input); accumulates the scale and offset gradients.
Matrix layer_norm_backward(const Matrix& d_out, const LayerNormCache& cache, const Tensor& scale, Matrix& d_scale,
                           Matrix& d_offset) {
  d_scale.row(0) += (d_out.array() * cache.normalized.array()).colwise().sum().matrix();
  d_offset.row(0) += d_out.colwise().sum();
  const Matrix d_norm = (d_out.array().rowwise() * scale.matrix().row(0).array()).matrix();
  const double h = static_cast<double>(d_out.cols());
  Matrix d_in(d_out.rows(), d_out.cols());
  for (Eigen::Index i = 0; i < d_out.rows(); ++i) {
    const double mean_d = d_norm.row(i).sum() / h;
    const double mean_dx = d_norm.row(i).dot(cache.normalized.row(i)) / h;
    d_in.row(i) = cache.inv_std(i) *
                  (d_norm.row(i).array() - mean_d - cache.normalized.row(i).array() * mean_dx).matrix();
  }
  return d_in;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

Matrix affine(const Matrix& x, const Tensor& weight, const Tensor& bias) {
  Matrix y = x * weight.matrix();
  y.rowwise() += bias.matrix().row(0);
  return y;
}

void softmax_rows(Matrix& s) {
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const double m = s.row(i).maxCoeff();
    s.row(i) = (s.row(i).array() - m).exp();
    s.row(i) /= s.row(i).sum();
  }
}

class DropoutSource {
 public:
  DropoutSource(const DropoutContext* ctx, std::size_t example)
      : rate_(ctx != nullptr ? ctx->rate : 0.0),
        rng_(ctx != nullptr ? detail::mix_seed(detail::mix_seed(ctx->run_seed, ctx->step), example) : 0) {}

  bool active() const { return rate_ > 0.0; }

  // Inverted-dropout mask: entries 0 or 1 / (1 - rate).
  Matrix mask(Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    const double keep_scale = 1.0 / (1.0 - rate_);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      m.data()[i] = detail::uniform01(rng_) < rate_ ? 0.0 : keep_scale;
    }
    return m;
  }

 private:
  double rate_;
  std::mt19937_64 rng_;
};

// ---------------------------------------------------------------------------
// Validation

void check_batch(const ModelParameters& params, std::span<const TokenSequence> batch) {
  if (batch.empty()) {
    return;
  }
  const std::size_t max_len = batch.front().max_len();
  if (max_len > params.config.max_positions) {
    throw DataError("sequence length " + std::to_string(max_len) + " exceeds max_positions " +
                    std::to_string(params.config.max_positions));
  }
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& seq = batch[b];
    if (seq.max_len() != max_len || seq.mask.size() != max_len) {
      throw DataError("batch item " + std::to_string(b) + " does not share max_len " + std::to_string(max_len));
    }
    if (seq.content_len == 0 || seq.content_len > max_len) {
      throw DataError("batch item " + std::to_string(b) + " has no content tokens");
    }
    for (std::size_t i = 0; i < max_len; ++i) {
      if ((seq.mask[i] != 0) != (i < seq.content_len)) {
        throw DataError("batch item " + std::to_string(b) + " mask is not a prefix of content_len ones");
      }
      if (seq.ids[i] < 0 || static_cast<std::size_t>(seq.ids[i]) >= params.config.vocab_size) {
        throw DataError("batch item " + std::to_string(b) + " token id " + std::to_string(seq.ids[i]) +
                        " is outside the vocab of size " + std::to_string(params.config.vocab_size));
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Forward pass for one sequence. Only the content prefix is computed: padded
// keys get zero attention weight (the -inf additive mask) and padded queries
// never feed back into content positions, so they cannot affect the output.

ExampleTrace run_example(const ModelParameters& p, const TokenSequence& seq, const DropoutContext* dropout,
                         std::size_t example_index) {
  const ModelConfig& cfg = p.config;
  const auto len = static_cast<Eigen::Index>(seq.content_len);
  const auto hidden = static_cast<Eigen::Index>(cfg.hidden_dim);
  const auto head_dim = static_cast<Eigen::Index>(cfg.head_dim());
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
  DropoutSource drop(dropout, example_index);

  ExampleTrace tr;
  tr.ids.assign(seq.ids.begin(), seq.ids.begin() + len);

  Matrix x(len, hidden);
  const auto tok = p.token_embedding().matrix();
  const auto pos = p.position_embedding().matrix();
  for (Eigen::Index i = 0; i < len; ++i) {
    x.row(i) = tok.row(tr.ids[static_cast<std::size_t>(i)]) + pos.row(i);
  }
  if (drop.active()) {
    tr.embed_drop = drop.mask(len, hidden);
    x.array() *= tr.embed_drop.array();
  }

  tr.layers.resize(cfg.num_layers);
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    LayerCache& c = tr.layers[l];
    c.input = x;
    layer_norm(x, p.layer(l, LayerTensor::Norm1Scale), p.layer(l, LayerTensor::Norm1Offset), c.norm1, c.normed1);
    c.query = affine(c.normed1, p.layer(l, LayerTensor::QueryWeight), p.layer(l, LayerTensor::QueryBias));
    c.key = affine(c.normed1, p.layer(l, LayerTensor::KeyWeight), p.layer(l, LayerTensor::KeyBias));
    c.value = affine(c.normed1, p.layer(l, LayerTensor::ValueWeight), p.layer(l, LayerTensor::ValueBias));
    c.context.resize(len, hidden);
    c.attention.resize(cfg.num_heads);
    for (std::size_t h = 0; h < cfg.num_heads; ++h) {
      const auto col = static_cast<Eigen::Index>(h) * head_dim;
      Matrix scores = c.query.middleCols(col, head_dim) * c.key.middleCols(col, head_dim).transpose() * scale;
      softmax_rows(scores);
      c.context.middleCols(col, head_dim) = scores * c.value.middleCols(col, head_dim);
      c.attention[h] = std::move(scores);
    }
    Matrix attn_out = affine(c.context, p.layer(l, LayerTensor::OutputWeight), p.layer(l, LayerTensor::OutputBias));
    if (drop.active()) {
      c.attn_drop = drop.mask(len, hidden);
      attn_out.array() *= c.attn_drop.array();
    }
    c.mid = x + attn_out;

    layer_norm(c.mid, p.layer(l, LayerTensor::Norm2Scale), p.layer(l, LayerTensor::Norm2Offset), c.norm2, c.normed2);
    c.ffn_pre = affine(c.normed2, p.layer(l, LayerTensor::FfnInWeight), p.layer(l, LayerTensor::FfnInBias));
    c.ffn_act = c.ffn_pre.unaryExpr([](double v) { return gelu(v); });
    Matrix ffn_out = affine(c.ffn_act, p.layer(l, LayerTensor::FfnOutWeight), p.layer(l, LayerTensor::FfnOutBias));
    if (drop.active()) {
      c.ffn_drop = drop.mask(len, hidden);
      ffn_out.array() *= c.ffn_drop.array();
    }
    x = c.mid + ffn_out;
  }

  tr.final_input = x;
  layer_norm(x, p.final_norm_scale(), p.final_norm_offset(), tr.final_norm, tr.final_hidden);
  return tr;
}

std::array<double, kNumLabels> head_logits(const ModelParameters& p, const ExampleTrace& tr) {
  const RowVector z = tr.final_hidden.row(0) * p.classifier_weight().matrix() + p.classifier_bias().matrix().row(0);
  std::array<double, kNumLabels> out{};
  for (std::size_t k = 0; k < kNumLabels; ++k) {
    out[k] = z(static_cast<Eigen::Index>(k));
  }
  return out;
}

std::array<double, kNumLabels> softmax4(const std::array<double, kNumLabels>& logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  std::array<double, kNumLabels> p{};
  double sum = 0.0;
  for (std::size_t k = 0; k < kNumLabels; ++k) {
    p[k] = std::exp(logits[k] - m);
    sum += p[k];
  }
  for (auto& v : p) {
    v /= sum;
  }
  return p;
}

// ---------------------------------------------------------------------------
// Backward pass for one example.

struct ExampleGrad {
  std::vector<Matrix> dense;  // indexed like ModelParameters::tensors; embeddings left empty
  Matrix d_embed;             // gradient w.r.t. the (pre-dropout) embedding sum, content x hidden
};

ExampleGrad backprop_example(const ModelParameters& p, const ExampleTrace& tr, double weight) {
  const ModelConfig& cfg = p.config;
  const auto len = tr.final_hidden.rows();
  const auto head_dim = static_cast<Eigen::Index>(cfg.head_dim());
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));

  ExampleGrad g;
  g.dense.resize(p.tensors.size());
  for (std::size_t t = kFirstLayerTensor; t < p.tensors.size(); ++t) {
    g.dense[t] = Matrix::Zero(static_cast<Eigen::Index>(p.tensors[t].rows),
                              static_cast<Eigen::Index>(p.tensors[t].cols));
  }
  auto grad = [&](const Tensor& t) -> Matrix& {
    return g.dense[static_cast<std::size_t>(&t - p.tensors.data())];
  };

  // d loss / d logits = weight * (softmax - onehot)
  RowVector d_logits(static_cast<Eigen::Index>(kNumLabels));
  for (std::size_t k = 0; k < kNumLabels; ++k) {
    d_logits(static_cast<Eigen::Index>(k)) = weight * (tr.probabilities[k] - (k == tr.label ? 1.0 : 0.0));
  }
  grad(p.classifier_weight()) += tr.final_hidden.row(0).transpose() * d_logits;
  grad(p.classifier_bias()).row(0) += d_logits;

  Matrix d_hidden = Matrix::Zero(len, tr.final_hidden.cols());
  d_hidden.row(0) = d_logits * p.classifier_weight().matrix().transpose();
  Matrix dx = layer_norm_backward(d_hidden, tr.final_norm, p.final_norm_scale(), grad(p.final_norm_scale()),
                                  grad(p.final_norm_offset()));

  for (std::size_t l = cfg.num_layers; l-- > 0;) {
    const LayerCache& c = tr.layers[l];
    auto lt = [&](LayerTensor t) -> const Tensor& { return p.layer(l, t); };

    // x_out = mid + drop(ffn_act W2 + b2)
    Matrix d_ffn_out = dx;
    if (c.ffn_drop.size() > 0) {
      d_ffn_out.array() *= c.ffn_drop.array();
    }
    grad(lt(LayerTensor::FfnOutWeight)) += c.ffn_act.transpose() * d_ffn_out;
    grad(lt(LayerTensor::FfnOutBias)).row(0) += d_ffn_out.colwise().sum();
    Matrix d_pre = d_ffn_out * lt(LayerTensor::FfnOutWeight).matrix().transpose();
    d_pre.array() *= c.ffn_pre.unaryExpr([](double v) { return gelu_grad(v); }).array();
    grad(lt(LayerTensor::FfnInWeight)) += c.normed2.transpose() * d_pre;
    grad(lt(LayerTensor::FfnInBias)).row(0) += d_pre.colwise().sum();
    const Matrix d_normed2 = d_pre * lt(LayerTensor::FfnInWeight).matrix().transpose();
    Matrix d_mid = dx + layer_norm_backward(d_normed2, c.norm2, lt(LayerTensor::Norm2Scale),
                                            grad(lt(LayerTensor::Norm2Scale)), grad(lt(LayerTensor::Norm2Offset)));

    // mid = input + drop(context Wo + bo)
    Matrix d_attn_out = d_mid;
    if (c.attn_drop.size() > 0) {
      d_attn_out.array() *= c.attn_drop.array();
    }
    grad(lt(LayerTensor::OutputWeight)) += c.context.transpose() * d_attn_out;
    grad(lt(LayerTensor::OutputBias)).row(0) += d_attn_out.colwise().sum();
    const Matrix d_context = d_attn_out * lt(LayerTensor::OutputWeight).matrix().transpose();

    Matrix d_query(len, c.query.cols());
    Matrix d_key(len, c.key.cols());
    Matrix d_value(len, c.value.cols());
    for (std::size_t h = 0; h < cfg.num_heads; ++h) {
      const auto col = static_cast<Eigen::Index>(h) * head_dim;
      const Matrix& probs = c.attention[h];
      const auto d_ctx_h = d_context.middleCols(col, head_dim);
      const Matrix d_probs = d_ctx_h * c.value.middleCols(col, head_dim).transpose();
      d_value.middleCols(col, head_dim) = probs.transpose() * d_ctx_h;
      // softmax backward, row-wise
      const Eigen::VectorXd row_dot = (d_probs.array() * probs.array()).rowwise().sum();
      Matrix d_scores = (probs.array() * (d_probs.colwise() - row_dot).array()).matrix() * scale;
      d_query.middleCols(col, head_dim) = d_scores * c.key.middleCols(col, head_dim);
      d_key.middleCols(col, head_dim) = d_scores.transpose() * c.query.middleCols(col, head_dim);
    }
    grad(lt(LayerTensor::QueryWeight)) += c.normed1.transpose() * d_query;
    grad(lt(LayerTensor::QueryBias)).row(0) += d_query.colwise().sum();
    grad(lt(LayerTensor::KeyWeight)) += c.normed1.transpose() * d_key;
    grad(lt(LayerTensor::KeyBias)).row(0) += d_key.colwise().sum();
    grad(lt(LayerTensor::ValueWeight)) += c.normed1.transpose() * d_value;
    grad(lt(LayerTensor::ValueBias)).row(0) += d_value.colwise().sum();
    const Matrix d_normed1 = d_query * lt(LayerTensor::QueryWeight).matrix().transpose() +
                             d_key * lt(LayerTensor::KeyWeight).matrix().transpose() +
                             d_value * lt(LayerTensor::ValueWeight).matrix().transpose();
    dx = d_mid + layer_norm_backward(d_normed1, c.norm1, lt(LayerTensor::Norm1Scale),
                                     grad(lt(LayerTensor::Norm1Scale)), grad(lt(LayerTensor::Norm1Offset)));
  }

  if (tr.embed_drop.size() > 0) {
    dx.array() *= tr.embed_drop.array();
  }
  g.d_embed = std::move(dx);
  return g;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config and parameters

ModelConfig ModelConfig::toy(std::size_t vocab_size) {
  ModelConfig c;
  c.vocab_size = vocab_size;
  return c;
}

ModelConfig ModelConfig::base(std::size_t vocab_size) {
  ModelConfig c;
  c.num_layers = 12;
  c.hidden_dim = 768;
  c.num_heads = 12;
  c.ffn_dim = 3072;
  c.vocab_size = vocab_size;
  return c;
}

void ModelConfig::validate() const {
  if (num_layers == 0 || hidden_dim == 0 || num_heads == 0 || ffn_dim == 0 || vocab_size == 0 ||
      max_positions == 0) {
    throw ConfigError("model dimensions must all be positive");
  }
  if (hidden_dim % num_heads != 0) {
    throw ConfigError("hidden_dim " + std::to_string(hidden_dim) + " is not divisible by num_heads " +
                      std::to_string(num_heads));
  }
  if (num_classes != kNumLabels) {
    throw ConfigError("num_classes must be 4");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw ConfigError("dropout_rate must be in [0, 1)");
  }
}

ModelParameters ModelParameters::zeros(const ModelConfig& config) {
  config.validate();
  const std::size_t h = config.hidden_dim;
  const std::size_t f = config.ffn_dim;
  ModelParameters p;
  p.config = config;
  p.tensors.push_back(make_tensor("embed.token", config.vocab_size, h, true));
  p.tensors.push_back(make_tensor("embed.position", config.max_positions, h, true));
  for (std::size_t l = 0; l < config.num_layers; ++l) {
    const std::string prefix = "layer" + std::to_string(l) + ".";
    for (std::size_t t = 0; t < kTensorsPerLayer; ++t) {
      const auto kind = static_cast<LayerTensor>(t);
      std::size_t rows = 1;
      std::size_t cols = h;
      bool decays = false;
      switch (kind) {
        case LayerTensor::QueryWeight:
        case LayerTensor::KeyWeight:
        case LayerTensor::ValueWeight:
        case LayerTensor::OutputWeight:
          rows = h;
          decays = true;
          break;
        case LayerTensor::FfnInWeight:
          rows = h;
          cols = f;
          decays = true;
          break;
        case LayerTensor::FfnInBias:
          cols = f;
          break;
        case LayerTensor::FfnOutWeight:
          rows = f;
          decays = true;
          break;
        default:
          break;
      }
      p.tensors.push_back(make_tensor(prefix + std::string(kLayerTensorNames[t]), rows, cols, decays));
    }
  }
  p.tensors.push_back(make_tensor("final_norm.scale", 1, h, false));
  p.tensors.push_back(make_tensor("final_norm.offset", 1, h, false));
  p.tensors.push_back(make_tensor("classifier.weight", h, config.num_classes, true));
  p.tensors.push_back(make_tensor("classifier.bias", 1, config.num_classes, false));
  return p;
}

std::size_t ModelParameters::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) {
    n += t.size();
  }
  return n;
}

const Tensor& ModelParameters::find(std::string_view name) const {
  for (const auto& t : tensors) {
    if (t.name == name) {
      return t;
    }
  }
  throw DataError("no parameter tensor named " + std::string(name));
}

bool ModelParameters::all_finite() const {
  return std::all_of(tensors.begin(), tensors.end(), [](const Tensor& t) {
    return std::all_of(t.values.begin(), t.values.end(), [](double v) { return std::isfinite(v); });
  });
}

bool operator==(const Tensor& a, const Tensor& b) {
  return a.name == b.name && a.rows == b.rows && a.cols == b.cols && a.decays == b.decays && a.values == b.values;
}

bool operator==(const ModelParameters& a, const ModelParameters& b) {
  return a.config == b.config && a.tensors == b.tensors;
}

std::size_t expected_parameter_count(const ModelConfig& c) {
  const std::size_t h = c.hidden_dim;
  const std::size_t f = c.ffn_dim;
  const std::size_t per_layer = 4 * h                // two norms, scale + offset
                                + 4 * (h * h + h)    // q, k, v, output
                                + (h * f + f)        // ffn in
                                + (f * h + h);       // ffn out
  return c.vocab_size * h + c.max_positions * h + c.num_layers * per_layer + 2 * h + h * c.num_classes +
         c.num_classes;
}

ModelParameters init_params(const ModelConfig& config) {
  ModelParameters p = ModelParameters::zeros(config);
  std::mt19937_64 rng(config.seed);
  for (auto& t : p.tensors) {
    if (t.decays) {
      for (auto& v : t.values) {
        v = kInitStd * detail::standard_normal(rng);
      }
    } else if (is_norm_scale(t)) {
      std::fill(t.values.begin(), t.values.end(), 1.0);
    }
  }
  return p;
}

// ---------------------------------------------------------------------------
// Public passes

Matrix forward(const ModelParameters& params, std::span<const TokenSequence> batch, std::size_t threads) {
  check_batch(params, batch);
  Matrix logits(static_cast<Eigen::Index>(batch.size()), static_cast<Eigen::Index>(kNumLabels));
  detail::parallel_for(batch.size(), threads, [&](std::size_t b) {
    const ExampleTrace tr = run_example(params, batch[b], nullptr, b);
    const auto z = head_logits(params, tr);
    for (std::size_t k = 0; k < kNumLabels; ++k) {
      logits(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(k)) = z[k];
    }
  });
  return logits;
}

LossResult forward_loss(const ModelParameters& params, std::span<const TokenSequence> batch,
                        std::span<const StanceLabel> labels, const DropoutContext* dropout, std::size_t threads) {
  if (labels.size() != batch.size()) {
    throw DataError("got " + std::to_string(labels.size()) + " labels for a batch of " +
                    std::to_string(batch.size()));
  }
  if (batch.empty()) {
    throw DataError("cannot compute the loss of an empty batch");
  }
  check_batch(params, batch);

  LossResult result;
  result.trace.config = params.config;
  result.trace.examples.resize(batch.size());
  result.logits.resize(static_cast<Eigen::Index>(batch.size()), static_cast<Eigen::Index>(kNumLabels));
  std::vector<double> nll(batch.size());

  detail::parallel_for(batch.size(), threads, [&](std::size_t b) {
    ExampleTrace tr = run_example(params, batch[b], dropout, b);
    const auto z = head_logits(params, tr);
    const double m = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) {
      sum += std::exp(v - m);
    }
    const double log_norm = m + std::log(sum);
    tr.label = code(labels[b]);
    tr.probabilities = softmax4(z);
    nll[b] = log_norm - z[tr.label];
    for (std::size_t k = 0; k < kNumLabels; ++k) {
      result.logits(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(k)) = z[k];
    }
    result.trace.examples[b] = std::move(tr);
  });

  double total = 0.0;
  for (double v : nll) {
    total += v;
  }
  result.loss = total / static_cast<double>(batch.size());
  return result;
}

ModelParameters backward(const ModelParameters& params, const ForwardTrace& trace, std::size_t threads) {
  if (!(trace.config == params.config)) {
    throw DataError("trace was recorded with a different model configuration");
  }
  for (const auto& ex : trace.examples) {
    if (ex.layers.size() != params.config.num_layers ||
        ex.final_hidden.cols() != static_cast<Eigen::Index>(params.config.hidden_dim)) {
      throw DataError("trace shapes do not match the parameters");
    }
  }
  const std::size_t n = trace.examples.size();
  const double weight = n > 0 ? 1.0 / static_cast<double>(n) : 0.0;
  std::vector<ExampleGrad> parts(n);
  detail::parallel_for(n, threads, [&](std::size_t b) { parts[b] = backprop_example(params, trace.examples[b], weight); });

  // Reduce in example order so the sum is independent of the thread count.
  ModelParameters grads = ModelParameters::zeros(params.config);
  auto tok = grads.token_embedding().matrix();
  auto pos = grads.position_embedding().matrix();
  for (std::size_t b = 0; b < n; ++b) {
    const auto& ids = trace.examples[b].ids;
    for (Eigen::Index i = 0; i < parts[b].d_embed.rows(); ++i) {
      tok.row(ids[static_cast<std::size_t>(i)]) += parts[b].d_embed.row(i);
      pos.row(i) += parts[b].d_embed.row(i);
    }
    for (std::size_t t = kFirstLayerTensor; t < grads.tensors.size(); ++t) {
      grads.tensors[t].matrix() += parts[b].dense[t];
    }
  }
  return grads;
}

Prediction prediction_from_logits(std::span<const double> logits) {
  if (logits.size() != kNumLabels) {
    throw DataError("expected 4 logits");
  }
  std::array<double, kNumLabels> z{};
  std::copy(logits.begin(), logits.end(), z.begin());
  Prediction out;
  out.probabilities = softmax4(z);
  std::size_t best = 0;
  for (std::size_t k = 1; k < kNumLabels; ++k) {
    if (z[k] > z[best]) {
      best = k;
    }
  }
  out.label = label_from_code(best);
  return out;
}

std::vector<Prediction> predict(const ModelParameters& params, std::span<const TokenSequence> sequences,
                                std::size_t threads) {
  const Matrix logits = forward(params, sequences, threads);
  std::vector<Prediction> out;
  out.reserve(sequences.size());
  for (Eigen::Index b = 0; b < logits.rows(); ++b) {
    const RowVector row = logits.row(b);
    out.push_back(prediction_from_logits(std::span<const double>(row.data(), kNumLabels)));
  }
  return out;
}

Matrix hidden_states(const ModelParameters& params, const TokenSequence& sequence) {
  check_batch(params, std::span<const TokenSequence>(&sequence, 1));
  return run_example(params, sequence, nullptr, 0).final_hidden;
}

std::vector<std::vector<Matrix>> attention_weights(const ModelParameters& params, const TokenSequence& sequence) {
  check_batch(params, std::span<const TokenSequence>(&sequence, 1));
  const ExampleTrace tr = run_example(params, sequence, nullptr, 0);
  const auto len = static_cast<Eigen::Index>(sequence.content_len);
  const auto width = static_cast<Eigen::Index>(sequence.max_len());
  std::vector<std::vector<Matrix>> out(tr.layers.size());
  for (std::size_t l = 0; l < tr.layers.size(); ++l) {
    for (const Matrix& probs : tr.layers[l].attention) {
      Matrix full = Matrix::Zero(len, width);
      full.leftCols(len) = probs;
      out[l].push_back(std::move(full));
    }
  }
  return out;
}

}  // namespace stance
