#include "support/support.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace stance::testing {

std::vector<GoldenEncoding> load_bpe_golden() {
  std::ifstream in(data_path("bpe_golden.jsonl"));
  if (!in) {
    throw std::runtime_error("missing bpe_golden.jsonl");
  }
  std::vector<GoldenEncoding> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    const auto j = nlohmann::json::parse(line);
    out.push_back({j.at("text").get<std::string>(), j.at("ids").get<std::vector<TokenId>>()});
  }
  return out;
}

}  // namespace stance::testing

namespace stance::testing {

GradientCheck gradient_check(const ModelParameters& params, const std::vector<TokenSequence>& batch,
                             const std::vector<StanceLabel>& labels, std::size_t count, double h,
                             std::uint64_t seed) {
  const auto analytic = backward(params, forward_loss(params, batch, labels).trace);
  std::mt19937_64 rng(seed);
  GradientCheck result;
  ModelParameters probe = params;
  for (std::size_t c = 0; c < count; ++c) {
    const std::size_t t = rng() % params.tensors.size();
    const std::size_t i = rng() % params.tensors[t].size();
    double& w = probe.tensors[t].values[i];
    const double original = w;
    w = original + h;
    const double plus = forward_loss(probe, batch, labels).loss;
    w = original - h;
    const double minus = forward_loss(probe, batch, labels).loss;
    w = original;
    const double numeric = (plus - minus) / (2.0 * h);
    const double a = analytic.tensors[t].values[i];
    const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
    if (rel > result.max_relative_error || result.worst.empty()) {
      result.max_relative_error = rel;
      result.worst = params.tensors[t].name + "[" + std::to_string(i) + "]";
    }
    ++result.coordinates;
  }
  return result;
}

}  // namespace stance::testing
