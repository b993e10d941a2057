#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>

#include "stance/error.hpp"
#include "stance/training.hpp"
#include "support/support.hpp"

namespace stance {
namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.num_layers = 1;
  c.hidden_dim = 16;
  c.num_heads = 2;
  c.ffn_dim = 32;
  c.vocab_size = testing::assets().vocab_size();
  c.max_positions = 32;
  c.dropout_rate = 0.1;
  c.seed = 1;
  return c;
}

TrainConfig tiny_train() {
  TrainConfig t;
  t.learning_rate = 1e-3;
  t.epochs = 2;
  t.batch_size = 4;
  t.max_len = 32;
  t.shuffle_seed = 8;
  return t;
}

TEST(TrainConfig, ValidationRejectsBadValues) {
  EXPECT_NO_THROW(TrainConfig{}.validate());
  auto t = TrainConfig{};
  t.learning_rate = 0;
  EXPECT_THROW(t.validate(), ConfigError);
  t = TrainConfig{};
  t.batch_size = 0;
  EXPECT_THROW(t.validate(), ConfigError);
  t = TrainConfig{};
  t.beta2 = 1.0;
  EXPECT_THROW(t.validate(), ConfigError);
  t = TrainConfig{};
  t.warmup_fraction = 1.0;
  EXPECT_THROW(t.validate(), ConfigError);
}

TEST(Schedule, LinearWarmupThenLinearDecay) {
  TrainConfig t;
  t.learning_rate = 1.0;
  t.warmup_fraction = 0.1;
  EXPECT_DOUBLE_EQ(learning_rate_at(t, 0, 100), 0.1);
  EXPECT_DOUBLE_EQ(learning_rate_at(t, 4, 100), 0.5);
  EXPECT_DOUBLE_EQ(learning_rate_at(t, 9, 100), 1.0);
  EXPECT_DOUBLE_EQ(learning_rate_at(t, 10, 100), 1.0);
  EXPECT_DOUBLE_EQ(learning_rate_at(t, 55, 100), 0.5);
  EXPECT_DOUBLE_EQ(learning_rate_at(t, 99, 100), 1.0 / 90.0);
  EXPECT_DOUBLE_EQ(learning_rate_at(t, 100, 100), 0.0);
  t.warmup_fraction = 0.0;
  EXPECT_DOUBLE_EQ(learning_rate_at(t, 0, 10), 1.0);
}

// One scalar parameter, two groups: a decaying weight and an exempt bias.
ModelParameters scalar_params(double w, double b) {
  ModelParameters p;
  p.tensors.push_back({"w", 1, 1, {w}, true});
  p.tensors.push_back({"b", 1, 1, {b}, false});
  return p;
}

TEST(AdamW, FirstStepScalarGolden) {
  auto params = scalar_params(0.5, 0.5);
  auto state = OptimizerState::zeros_like(params);
  TrainConfig t;
  t.learning_rate = 1e-3;
  t.weight_decay = 0.1;
  t.warmup_fraction = 0.0;
  t.epsilon = 1e-6;
  optimizer_step(params, scalar_params(1.0, 1.0), state, t, 10);
  // Bias-corrected moments equal g and g^2 on the first step.
  EXPECT_NEAR(params.tensors[0].values[0], 0.5 - 1e-3 / (1.0 + 1e-6) - 1e-3 * 0.1 * 0.5, 1e-15);
  EXPECT_NEAR(params.tensors[1].values[0], 0.5 - 1e-3 / (1.0 + 1e-6), 1e-15);
  EXPECT_EQ(state.step, 1U);
}

TEST(AdamW, MatchesReferenceRecurrenceOverManySteps) {
  TrainConfig t;
  t.learning_rate = 1e-2;
  t.weight_decay = 0.05;
  t.warmup_fraction = 0.2;
  t.beta1 = 0.9;
  t.beta2 = 0.98;
  t.epsilon = 1e-6;
  const std::uint64_t total = 20;
  auto params = scalar_params(0.3, -0.2);
  auto state = OptimizerState::zeros_like(params);

  // Decoupled weight decay in the multiplicative form, then the Adam update.
  double w = 0.3;
  double b = -0.2;
  double mw = 0, vw = 0, mb = 0, vb = 0;
  for (std::uint64_t step = 0; step < total; ++step) {
    const double gw = std::sin(0.7 * static_cast<double>(step)) + 0.1;
    const double gb = std::cos(0.3 * static_cast<double>(step));
    optimizer_step(params, scalar_params(gw, gb), state, t, total);

    const std::uint64_t warm = 4;
    const double lr = step < warm ? 1e-2 * static_cast<double>(step + 1) / warm
                                  : 1e-2 * static_cast<double>(total - step) / static_cast<double>(total - warm);
    const double c1 = 1 - std::pow(0.9, static_cast<double>(step + 1));
    const double c2 = 1 - std::pow(0.98, static_cast<double>(step + 1));
    w *= 1 - lr * 0.05;
    mw = 0.9 * mw + 0.1 * gw;
    vw = 0.98 * vw + 0.02 * gw * gw;
    w -= lr * (mw / c1) / (std::sqrt(vw / c2) + 1e-6);
    mb = 0.9 * mb + 0.1 * gb;
    vb = 0.98 * vb + 0.02 * gb * gb;
    b -= lr * (mb / c1) / (std::sqrt(vb / c2) + 1e-6);
    ASSERT_NEAR(params.tensors[0].values[0], w, 1e-14) << "step " << step;
    ASSERT_NEAR(params.tensors[1].values[0], b, 1e-14) << "step " << step;
  }
}

TEST(AdamW, NonFiniteGradientNamesTheGroup) {
  auto params = scalar_params(0.5, 0.5);
  auto state = OptimizerState::zeros_like(params);
  try {
    optimizer_step(params, scalar_params(1.0, std::numeric_limits<double>::quiet_NaN()), state, TrainConfig{}, 10);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find('b'), std::string::npos);
  }
  EXPECT_EQ(params.tensors[0].values[0], 0.5);
  EXPECT_DOUBLE_EQ(gradient_norm(scalar_params(3.0, 4.0)), 5.0);
}

TEST(Batches, CoverEveryExampleOncePerEpochAndReshuffle) {
  const auto pairs = testing::synthetic_corpus(10, 4);
  auto config = tiny_train();
  const auto e0 = make_batches(pairs, testing::assets(), testing::specials(), config, 0);
  const auto e1 = make_batches(pairs, testing::assets(), testing::specials(), config, 1);
  ASSERT_EQ(e0.size(), 3U);
  EXPECT_EQ(e0.back().example_indices.size(), 2U);
  std::multiset<std::size_t> seen;
  std::vector<std::size_t> order0;
  std::vector<std::size_t> order1;
  for (const auto& b : e0) {
    ASSERT_EQ(b.sequences.size(), b.example_indices.size());
    for (std::size_t i = 0; i < b.example_indices.size(); ++i) {
      seen.insert(b.example_indices[i]);
      order0.push_back(b.example_indices[i]);
      EXPECT_EQ(b.labels[i], *pairs[b.example_indices[i]].label);
    }
  }
  for (const auto& b : e1) {
    order1.insert(order1.end(), b.example_indices.begin(), b.example_indices.end());
  }
  EXPECT_EQ(seen.size(), 10U);
  EXPECT_EQ(std::set<std::size_t>(seen.begin(), seen.end()).size(), 10U);
  EXPECT_NE(order0, order1);
  const auto again = make_batches(pairs, testing::assets(), testing::specials(), config, 0);
  for (std::size_t i = 0; i < e0.size(); ++i) {
    EXPECT_EQ(again[i].example_indices, e0[i].example_indices);
  }
}

TEST(Train, IsDeterministicAndReducesLoss) {
  const auto pairs = testing::synthetic_corpus(24, 6);
  auto config = tiny_train();
  config.epochs = 4;
  const auto a = train(init_params(tiny_config()), pairs, testing::assets(), testing::specials(), config);
  config.threads = 2;
  const auto b = train(init_params(tiny_config()), pairs, testing::assets(), testing::specials(), config);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.report.to_csv(), b.report.to_csv());
  ASSERT_EQ(a.report.epochs.size(), 4U);
  EXPECT_LT(a.report.epochs.back().mean_loss, a.report.epochs.front().mean_loss);
  EXPECT_TRUE(a.params.all_finite());
  EXPECT_EQ(a.report.to_csv().find("second"), std::string::npos);
}

TEST(Train, WritesLoadableCheckpoint) {
  const auto pairs = testing::synthetic_corpus(8, 6);
  const auto dir = testing::temp_dir("train_ckpt");
  const auto path = (dir / "m.ckpt").string();
  auto config = tiny_train();
  config.epochs = 1;
  const auto r = train(init_params(tiny_config()), pairs, testing::assets(), testing::specials(), config, path);
  EXPECT_EQ(load_checkpoint(path), r.params);
  EXPECT_EQ(r.report.checkpoint_path, path);
}

TEST(Train, RejectsInconsistentSettings) {
  const auto pairs = testing::synthetic_corpus(8, 6);
  auto config = tiny_train();
  config.max_len = 64;
  EXPECT_THROW(train(init_params(tiny_config()), pairs, testing::assets(), testing::specials(), config), ConfigError);
  EXPECT_THROW(train(init_params(tiny_config()), {}, testing::assets(), testing::specials(), tiny_train()), DataError);
}

TEST(Train, LossDescendsStrictlyOnATinyBatch) {
  auto config = tiny_config();
  config.dropout_rate = 0.0;
  auto params = init_params(config);
  const auto pairs = testing::synthetic_corpus(4, 2);
  std::vector<TokenSequence> batch;
  std::vector<StanceLabel> labels;
  for (const auto& p : pairs) {
    batch.push_back(encode_pair(testing::assets(), testing::specials(), p.claim, p.article, 32));
    labels.push_back(*p.label);
  }
  TrainConfig t;
  t.learning_rate = 1e-3;
  t.warmup_fraction = 0.0;
  auto state = OptimizerState::zeros_like(params);
  double previous = std::numeric_limits<double>::infinity();
  for (int step = 0; step < 10; ++step) {
    const auto r = forward_loss(params, batch, labels);
    EXPECT_LT(r.loss, previous) << "step " << step;
    previous = r.loss;
    optimizer_step(params, backward(params, r.trace), state, t, 1000);
  }
}

TEST(AdamW, UpdateDoesNotDependOnGrouping) {
  ModelParameters whole;
  whole.tensors.push_back({"w", 1, 4, {0.1, -0.2, 0.3, 0.4}, true});
  ModelParameters split;
  split.tensors.push_back({"w0", 1, 2, {0.1, -0.2}, true});
  split.tensors.push_back({"w1", 1, 2, {0.3, 0.4}, true});
  ModelParameters g_whole = whole;
  g_whole.tensors[0].values = {0.5, -1.5, 2.0, 1e-3};
  ModelParameters g_split = split;
  g_split.tensors[0].values = {0.5, -1.5};
  g_split.tensors[1].values = {2.0, 1e-3};
  auto s_whole = OptimizerState::zeros_like(whole);
  auto s_split = OptimizerState::zeros_like(split);
  TrainConfig t;
  t.learning_rate = 1e-2;
  for (int step = 0; step < 5; ++step) {
    optimizer_step(whole, g_whole, s_whole, t, 10);
    optimizer_step(split, g_split, s_split, t, 10);
  }
  EXPECT_EQ(whole.tensors[0].values[0], split.tensors[0].values[0]);
  EXPECT_EQ(whole.tensors[0].values[1], split.tensors[0].values[1]);
  EXPECT_EQ(whole.tensors[0].values[2], split.tensors[1].values[0]);
  EXPECT_EQ(whole.tensors[0].values[3], split.tensors[1].values[1]);
}

TEST(AdamW, ExemptParametersWithZeroGradientNeverMove) {
  auto params = init_params(tiny_config());
  testing::perturb(params, 0.1);
  const auto before = params;
  auto grads = ModelParameters::zeros(tiny_config());
  for (auto& t : grads.tensors) {
    if (t.decays) {
      std::fill(t.values.begin(), t.values.end(), 0.01);
    }
  }
  TrainConfig t;
  t.learning_rate = 1e-2;
  t.warmup_fraction = 0.0;
  auto state = OptimizerState::zeros_like(params);
  for (int step = 0; step < 3; ++step) {
    optimizer_step(params, grads, state, t, 10);
  }
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    if (!params.tensors[i].decays) {
      EXPECT_EQ(params.tensors[i].values, before.tensors[i].values) << params.tensors[i].name;
    } else {
      EXPECT_NE(params.tensors[i].values, before.tensors[i].values) << params.tensors[i].name;
    }
  }
}

}  // namespace
}  // namespace stance
