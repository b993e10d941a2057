#include <benchmark/benchmark.h>

#include <random>
#include <string>

#include "stance/evaluation.hpp"
#include "stance/model.hpp"
#include "stance/tokenizer.hpp"

namespace {

using namespace stance;

const BpeAssets& assets() {
  static const BpeAssets a = load_assets(std::string(STANCE_BENCH_DATA_DIR) + "/bpe/vocab.json",
                                         std::string(STANCE_BENCH_DATA_DIR) + "/bpe/merges.txt");
  return a;
}

std::string article(std::size_t words) {
  static const char* vocab[] = {"the",    "report", "officials", "confirmed", "government", "said",
                                "police", "denied", "claim",     "Tuesday",   "sources",    "story,"};
  std::mt19937 rng(1);
  std::string out;
  for (std::size_t i = 0; i < words; ++i) {
    out += (i > 0 ? " " : "") + std::string(vocab[rng() % 12]);
  }
  return out;
}

void BM_EncodeText(benchmark::State& state) {
  const auto text = article(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(encode_text(assets(), text));
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_EncodeText)->Arg(50)->Arg(500);

std::vector<TokenSequence> batch(std::size_t size, std::size_t max_len) {
  const auto specials = SpecialTokens::from_assets(assets());
  std::vector<TokenSequence> out;
  for (std::size_t i = 0; i < size; ++i) {
    out.push_back(encode_pair(assets(), specials, "police confirmed the report", article(400), max_len));
  }
  return out;
}

ModelParameters toy_model() {
  return init_params(ModelConfig::toy(assets().vocab_size()));
}

void BM_Forward(benchmark::State& state) {
  const auto params = toy_model();
  const auto b = batch(8, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward(params, b));
  }
}
BENCHMARK(BM_Forward)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_ForwardBackward(benchmark::State& state) {
  const auto params = toy_model();
  const auto b = batch(8, static_cast<std::size_t>(state.range(0)));
  const std::vector<StanceLabel> labels(8, StanceLabel::Discuss);
  for (auto _ : state) {
    const auto loss = forward_loss(params, b, labels);
    benchmark::DoNotOptimize(backward(params, loss.trace));
  }
}
BENCHMARK(BM_ForwardBackward)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_WeightedAccuracy(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<StanceLabel> gold(n);
  std::vector<StanceLabel> pred(n);
  for (std::size_t i = 0; i < n; ++i) {
    gold[i] = label_from_code(rng() % 4);
    pred[i] = label_from_code(rng() % 4);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(weighted_accuracy(confusion(gold, pred)));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}
BENCHMARK(BM_WeightedAccuracy)->Arg(25413);

}  // namespace

BENCHMARK_MAIN();
