#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "mkteff/entropy.hpp"
#include "mkteff/error.hpp"
#include "mkteff/simlab.hpp"
#include "mkteff/volstale.hpp"

using namespace mkteff;

TEST(Simulate, NoStalenessObservesRoundedPath) {
  SimModelConfig c;
  c.n_half = 2000;
  c.seed = 1;
  const auto p = simulate_observed_price(c);
  ASSERT_EQ(p.steps(), 4000u);
  EXPECT_EQ(p.observed_ticks, p.rounded_ticks);
  EXPECT_TRUE(std::all_of(p.stale.begin(), p.stale.end(), [](auto b) { return b == 0; }));
  EXPECT_EQ(p.rounded_ticks[0], 10000);
  for (std::size_t i = 0; i <= p.steps(); ++i)
    EXPECT_EQ(p.rounded_ticks[i], std::llround(p.efficient[i] / c.tick));
}

TEST(Simulate, StaleStepsRepeatThePrice) {
  for (auto stale : {StaleModel::Walk10, StaleModel::Walk20, StaleModel::Seasonal20}) {
    SimModelConfig c;
    c.n_half = 3000;
    c.stale = stale;
    c.vol = VolModel::Garch1;
    c.seed = 2;
    const auto p = simulate_observed_price(c);
    std::size_t n_stale = 0;
    for (std::size_t i = 1; i <= p.steps(); ++i) {
      EXPECT_GE(p.pr[i], 0.0);
      EXPECT_LE(p.pr[i], 1.0);
      if (p.stale[i]) {
        EXPECT_EQ(p.observed_ticks[i], p.observed_ticks[i - 1]);
        ++n_stale;
      } else {
        EXPECT_EQ(p.observed_ticks[i], p.rounded_ticks[i]);
      }
    }
    EXPECT_GT(n_stale, 0u) << model_id(c.vol, stale);
  }
}

TEST(Simulate, BitReproducible) {
  SimModelConfig c;
  c.n_half = 2000;
  c.vol = VolModel::Arch;
  c.stale = StaleModel::Walk20;
  c.seed = 77;
  const auto a = simulate_observed_price(c), b = simulate_observed_price(c);
  EXPECT_EQ(a.efficient, b.efficient);
  EXPECT_EQ(a.observed_ticks, b.observed_ticks);
  EXPECT_TRUE(std::equal(a.sigma.begin() + 1, a.sigma.end(), b.sigma.begin() + 1));  // sigma[0] is NaN
  c.seed = 78;
  EXPECT_NE(simulate_observed_price(c).efficient, a.efficient);
}

TEST(Simulate, VarianceModelsArePositive) {
  for (auto [vol, stale] : all_models()) {
    SimModelConfig c;
    c.n_half = 1000;
    c.vol = vol;
    c.stale = stale;
    const auto p = simulate_observed_price(c);
    for (std::size_t i = 1; i <= p.steps(); ++i) EXPECT_GT(p.sigma[i], 0.0);
  }
  EXPECT_EQ(all_models().size(), 16u);
  EXPECT_EQ(model_id(VolModel::Constant, StaleModel::None), "s1,pr1");
  EXPECT_EQ(model_id(VolModel::Garch2, StaleModel::Seasonal20), "s4,pr4");
}

TEST(Simulate, ZeroFractionMatchesRoundingProbability) {
  // per-seed difference between the zero fraction and the mean modeled
  // probability; its mean over seeds must sit within 3 standard errors of 0
  std::vector<double> diff;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    SimModelConfig c;
    c.n_half = 2500;
    c.seed = seed;
    const auto p = simulate_observed_price(c);
    double expected = 0.0;
    for (std::size_t i = 1; i <= p.steps(); ++i)
      expected += rounding_zero_prob(p.efficient[i - 1], p.sigma[i], p.tick, 1.0);
    const double n = static_cast<double>(p.steps());
    diff.push_back(static_cast<double>(p.rounding_zeros(0, p.steps())) / n - expected / n);
  }
  double mean = 0.0;
  for (double d : diff) mean += d;
  mean /= static_cast<double>(diff.size());
  double ss = 0.0;
  for (double d : diff) ss += (d - mean) * (d - mean);
  const double se = std::sqrt(ss / static_cast<double>(diff.size() - 1) / static_cast<double>(diff.size()));
  EXPECT_LT(std::abs(mean), 3 * se + 1e-12) << "mean " << mean << " se " << se;
}

TEST(Benchmark, NoStalenessFilteringChangesNothing) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    SimModelConfig c;
    c.n_half = 4000;
    c.seed = seed;
    const auto p = simulate_observed_price(c);
    const auto r = evaluate_replicate(p, c.n_half, {Variant::AbsOptimized, Variant::AbsUnfiltered});
    const auto& f = r.variants[static_cast<std::size_t>(Variant::AbsOptimized)];
    const auto& u = r.variants[static_cast<std::size_t>(Variant::AbsUnfiltered)];
    ASSERT_TRUE(f.computed && u.computed);
    EXPECT_NEAR(f.mape, u.mape, 1e-12);
    EXPECT_EQ(f.deleted, u.deleted);
    EXPECT_FALSE(r.variants[static_cast<std::size_t>(Variant::SquaredFixed)].computed);
  }
}

TEST(Benchmark, MetricRanges) {
  BenchmarkOptions o;
  o.replicates = 4;
  o.n_half = 3000;
  o.seed = 3;
  std::vector<ReplicateResult> raw;
  const auto row = benchmark_model(VolModel::Arch, StaleModel::Walk20, o, &raw);
  EXPECT_EQ(row.replicates, 4u);
  EXPECT_EQ(raw.size(), 4u);
  for (const auto& rep : raw)
    for (std::size_t v = 0; v < kVariants; ++v) {
      const auto& m = rep.variants[v];
      ASSERT_TRUE(m.computed);
      EXPECT_GE(m.mape, 0.0);
      EXPECT_GE(m.deleted, 0.0);
      EXPECT_LE(m.deleted, 1.0);
      EXPECT_GT(m.alpha, 0.0);
      EXPECT_LT(m.alpha, 1.0);
    }
  o.jobs = 3;
  const auto again = benchmark_model(VolModel::Arch, StaleModel::Walk20, o);
  for (std::size_t v = 0; v < kVariants; ++v) EXPECT_EQ(again.mape[v].mean, row.mape[v].mean);
}

TEST(Benchmark, ConstantVolatilitySmallAlphaHasSmallError) {
  SimModelConfig c;
  c.n_half = 20000;
  c.seed = 5;
  const auto p = simulate_observed_price(c);
  const auto big = evaluate_replicate(p, c.n_half, {Variant::AbsFixed}, 0.2);
  const auto small = evaluate_replicate(p, c.n_half, {Variant::AbsFixed}, 0.002);
  const auto idx = static_cast<std::size_t>(Variant::AbsFixed);
  EXPECT_LT(small.variants[idx].mape, big.variants[idx].mape);
  EXPECT_LT(small.variants[idx].mape, 0.05);
}

TEST(Benchmark, SummaryQuantiles) {
  std::vector<double> v;
  for (int i = 0; i <= 100; ++i) v.push_back(i);
  v.push_back(NAN);
  const auto s = summarize(v);
  EXPECT_EQ(s.count, 101u);
  EXPECT_DOUBLE_EQ(s.mean, 50.0);
  EXPECT_NEAR(s.lo, 2.5, 1e-12);
  EXPECT_NEAR(s.hi, 97.5, 1e-12);
  EXPECT_TRUE(std::isnan(summarize({}).mean));
}

TEST(Benchmark, TablesHaveOneRowPerModel) {
  BenchmarkOptions o;
  o.replicates = 1;
  o.n_half = 1500;
  const auto rows = benchmark_estimators({{VolModel::Constant, StaleModel::None}, {VolModel::Garch2, StaleModel::Walk10}}, o);
  const auto vol = volatility_table_csv(rows), stale = staleness_table_csv(rows);
  EXPECT_EQ(std::count(vol.begin(), vol.end(), '\n'), 3);
  EXPECT_EQ(std::count(stale.begin(), stale.end(), '\n'), 3);
  EXPECT_NE(vol.find("s4,pr2"), std::string::npos);
}

TEST(Fixture, SubMovesUniformAndThreeSymbolsMaximal) {
  const auto fx = markov_fixture(300000, 3);
  std::array<std::size_t, 6> n{};
  for (auto s : fx.states) ++n[s];
  const double sub = static_cast<double>(n[3] + n[4] + n[5]);
  for (int s = 3; s <= 5; ++s) EXPECT_NEAR(static_cast<double>(n[static_cast<std::size_t>(s)]) / sub, 1.0 / 3, 0.01);
  for (int s = 1; s <= 2; ++s) EXPECT_NEAR(static_cast<double>(n[static_cast<std::size_t>(s)]) / 300000.0, 1.0 / 3, 0.01);
  const auto d = block_frequencies(discretize_quantile(fx.returns, 3), 1);
  EXPECT_NEAR(entropy_estimate(d).plugin, 1.0, 0.002);
  EXPECT_THROW(markov_fixture(1, 0), Error);
}

TEST(Panel, WeekdayBarsOnTickGrid) {
  SyntheticPanelConfig c;
  c.days = 10;
  c.stale_prob = 0.1;
  c.seed = 4;
  const auto bars = synthetic_bars(c);
  ASSERT_FALSE(bars.empty());
  std::set<int> dates;
  for (const auto& b : bars) {
    dates.insert(b.time.date);
    EXPECT_GE(b.time.minute, c.session.open_minute);
    EXPECT_LE(b.time.minute, c.session.close_minute);
    EXPECT_NEAR(b.close / c.tick, std::round(b.close / c.tick), 1e-6);
    const std::chrono::year_month_day ymd{std::chrono::year{b.time.date / 10000},
                                          std::chrono::month{static_cast<unsigned>(b.time.date / 100 % 100)},
                                          std::chrono::day{static_cast<unsigned>(b.time.date % 100)}};
    const std::chrono::weekday wd{std::chrono::sys_days{ymd}};
    EXPECT_NE(wd, std::chrono::Saturday);
    EXPECT_NE(wd, std::chrono::Sunday);
  }
  EXPECT_EQ(dates.size(), 10u);
  const auto again = synthetic_bars(c);
  ASSERT_EQ(again.size(), bars.size());
  for (std::size_t i = 0; i < bars.size(); ++i) {
    EXPECT_EQ(again[i].close, bars[i].close);
    EXPECT_EQ(again[i].ticker, bars[i].ticker);
  }
}
