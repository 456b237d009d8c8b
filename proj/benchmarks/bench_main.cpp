#include <benchmark/benchmark.h>

#include "ssmctb/block.hpp"
#include "ssmctb/channel_transformer.hpp"
#include "ssmctb/masked_conv.hpp"
#include "ssmctb/metrics.hpp"
#include "ssmctb/rng.hpp"

using namespace ssmctb;

namespace {

Tensor noise(const Shape& shape, Rng& rng) {
  Tensor t = Tensor::zeros(shape);
  for (auto& v : t.mutable_data()) v = rng.normal();
  return t;
}

void BM_MaskedConv2d(benchmark::State& state) {
  masked::MaskedConvConfig cfg;
  cfg.channels = static_cast<std::size_t>(state.range(0));
  cfg.sub_kernel = 1;
  cfg.dilation = 3;
  Rng rng(1);
  const auto params = masked::MaskedConvParams::random(cfg, rng);
  const auto x = noise({32, 32, cfg.channels}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(masked::masked_conv_forward(x, params, cfg));
}
BENCHMARK(BM_MaskedConv2d)->Arg(4)->Arg(16)->Arg(32);

void BM_MaskedConv3d(benchmark::State& state) {
  masked::MaskedConvConfig cfg;
  cfg.dims = 3;
  cfg.channels = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  const auto params = masked::MaskedConvParams::random(cfg, rng);
  const auto x = noise({8, 16, 16, cfg.channels}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(masked::masked_conv_forward(x, params, cfg));
}
BENCHMARK(BM_MaskedConv3d)->Arg(4)->Arg(16);

void BM_ChannelGate(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto cfg = block::SsmctbConfig::defaults(2, c).transformer;
  Rng rng(3);
  const auto params = transformer::TransformerParams::random(cfg, c, rng);
  const auto z = noise({32, 32, c}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(transformer::gate_weights(z, params, cfg));
}
BENCHMARK(BM_ChannelGate)->Arg(16)->Arg(64);

void BM_RocAuc(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(4);
  std::vector<double> scores(n);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = i % 3 == 0 ? 1 : 0;
    scores[i] = rng.uniform() + 0.3 * labels[i];
  }
  for (auto _ : state) benchmark::DoNotOptimize(metrics::roc_auc(scores, labels));
  state.SetComplexityN(static_cast<long>(n));
}
BENCHMARK(BM_RocAuc)->RangeMultiplier(8)->Range(1 << 10, 1 << 19)->Complexity(benchmark::oNLogN);

}  // namespace
BENCHMARK_MAIN();
