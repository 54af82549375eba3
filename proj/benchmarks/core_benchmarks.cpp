#include <random>

#include <benchmark/benchmark.h>

#include "mkteff/cluster.hpp"
#include "mkteff/efficiency.hpp"
#include "mkteff/entropy.hpp"
#include "mkteff/rng.hpp"
#include "mkteff/simlab.hpp"
#include "mkteff/volstale.hpp"
#include "mkteff/whiten.hpp"

using namespace mkteff;

namespace {

Series gaussian(std::size_t n, std::uint64_t seed) {
  auto rng = make_rng(seed, {0xBE});
  std::normal_distribution<double> z;
  Series y(n);
  for (auto& v : y) v = z(rng);
  return y;
}

void BM_BlockFrequencies(benchmark::State& state) {
  const auto seq = discretize_quantile(gaussian(static_cast<std::size_t>(state.range(0)), 1), 4);
  const int k = select_block_length(seq);
  for (auto _ : state) benchmark::DoNotOptimize(block_frequencies(seq, k));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_BlockFrequencies)->Arg(1000)->Arg(10000)->Arg(100000);

void BM_MonteCarloEntropySample(benchmark::State& state) {
  for (auto _ : state)
    benchmark::DoNotOptimize(mc_entropy_sample(static_cast<std::size_t>(state.range(0)), 4, 100, 7));
  state.SetItemsProcessed(state.iterations() * 100);
}
BENCHMARK(BM_MonteCarloEntropySample)->Arg(1000)->Arg(7000)->Unit(benchmark::kMillisecond);

void BM_FilterAndEstimate(benchmark::State& state) {
  SimModelConfig c;
  c.n_half = static_cast<std::size_t>(state.range(0));
  c.stale = StaleModel::Walk20;
  c.seed = 3;
  const auto path = simulate_observed_price(c);
  const auto returns = path.observed_returns(0, path.steps());
  const auto prices = path.observed_prices(0, path.steps());
  const RoundingModel m{prices, path.tick, {}, {}};
  for (auto _ : state) benchmark::DoNotOptimize(filter_and_estimate(returns, {0.05, EwmaMode::Abs}, m));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(returns.size()));
}
BENCHMARK(BM_FilterAndEstimate)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

void BM_Upgma(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n; ++i) names.push_back(std::to_string(i));
  DistanceMatrix m(names);
  auto rng = make_rng(5, {0xBF});
  std::uniform_real_distribution<double> u;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) m.set(i, j, u(rng));
  for (auto _ : state) benchmark::DoNotOptimize(upgma(m));
}
BENCHMARK(BM_Upgma)->Arg(16)->Arg(64)->Arg(256);

void BM_ArmaLoglik(benchmark::State& state) {
  const auto y = gaussian(static_cast<std::size_t>(state.range(0)), 2);
  const ArmaModel model{{2, 1}, {0.3, -0.1}, {0.2}, 1.0};
  for (auto _ : state) benchmark::DoNotOptimize(arma_loglik(y, model));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ArmaLoglik)->Arg(1000)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
