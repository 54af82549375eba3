#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "mkteff/entropy.hpp"
#include "mkteff/error.hpp"
#include "mkteff/rng.hpp"
#include "mkteff/simlab.hpp"
#include "test_support.hpp"

using namespace mkteff;

namespace {

SymbolSequence symbols(int alphabet, std::initializer_list<int> s) {
  SymbolSequence seq;
  seq.alphabet = alphabet;
  for (int v : s) seq.symbols.push_back(v < 0 ? kMissingSymbol : static_cast<std::uint8_t>(v));
  return seq;
}

SymbolSequence uniform_symbols(int alphabet, std::size_t n, std::uint64_t seed) {
  auto rng = make_rng(seed, {});
  std::uniform_int_distribution<int> d(0, alphabet - 1);
  SymbolSequence seq;
  seq.alphabet = alphabet;
  for (std::size_t i = 0; i < n; ++i) seq.symbols.push_back(static_cast<std::uint8_t>(d(rng)));
  return seq;
}

Series gaussian(std::size_t n, std::uint64_t seed) {
  auto rng = make_rng(seed, {});
  std::normal_distribution<double> z;
  Series x(n);
  for (auto& v : x) v = z(rng);
  return x;
}

}  // namespace

TEST(Discretize, FourSymbolsOnePerQuartile) {
  const auto s = discretize_quantile(Series{-2.0, -1.0, 1.0, 2.0}, 4);
  EXPECT_EQ(s.symbols, (std::vector<std::uint8_t>{0, 1, 2, 3}));
  ASSERT_EQ(s.thresholds.size(), 3u);
  EXPECT_TRUE(std::is_sorted(s.thresholds.begin(), s.thresholds.end()));
}

TEST(Discretize, ThreeSymbolMapping) {
  // t1 and t2 are the 2nd and 4th order statistics of six values
  const auto s = discretize_quantile(Series{-3.0, -2.0, -1.0, 1.0, 2.0, 3.0}, 3);
  EXPECT_EQ(s.symbols, (std::vector<std::uint8_t>{1, 1, 0, 0, 2, 2}));
}

TEST(Discretize, MissingStaysMissing) {
  const auto s = discretize_quantile(Series{-1.0, std::nullopt, 0.5, 2.0, -0.3}, 4);
  EXPECT_TRUE(s.missing(1));
  EXPECT_EQ(std::count(s.symbols.begin(), s.symbols.end(), kMissingSymbol), 1);
}

TEST(Discretize, ConstantInputIsDegenerate) {
  EXPECT_THROW(discretize_quantile(Series(10, 1.0), 4), Error);
}

TEST(Discretize, SymmetricSampleHasEqualTertiles) {
  const auto s = discretize_quantile(gaussian(30000, 5), 3);
  std::map<int, int> c;
  for (auto v : s.symbols) ++c[v];
  for (int a = 0; a < 3; ++a) EXPECT_NEAR(c[a] / 30000.0, 1.0 / 3, 1e-3);
}

TEST(Discretize, TiedRunIsNeverSplit) {
  // ranks 2..4 hold the tie; q*n = 2.5 for the lower quartile of ten values
  const Series x{-5.0, -1.0, -1.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.0, 5.0};
  const auto s = discretize_quantile(x, 4);
  std::set<int> tie_symbols;
  for (int i = 1; i <= 3; ++i) tie_symbols.insert(s.symbols[static_cast<std::size_t>(i)]);
  EXPECT_EQ(tie_symbols.size(), 1u);
}

TEST(Discretize, BinCountsDifferByAtMostTies) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto rng = make_rng(seed, {9});
    std::uniform_int_distribution<int> d(-20, 20);
    Series x(401);
    for (auto& v : x) v = d(rng);
    for (int a : {3, 4}) {
      const auto s = discretize_quantile(x, a);
      std::vector<int> counts(static_cast<std::size_t>(a));
      for (auto v : s.symbols) ++counts[v];
      std::size_t ties = 0;
      const auto vals = present_values(x);
      for (double t : s.thresholds)
        ties += static_cast<std::size_t>(std::count(vals.begin(), vals.end(), t));
      const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
      EXPECT_LE(static_cast<std::size_t>(*hi - *lo), ties + 1) << "seed " << seed << " A " << a;
    }
  }
}

TEST(DiscretizePair, IdenticalSeriesComove) {
  const auto x = gaussian(1001, 3);
  const auto s = discretize_pair(x, x);
  for (auto v : s.symbols) EXPECT_TRUE(v == 0 || v == 3);
}

TEST(DiscretizePair, OppositeSeriesOnlyMixedSymbols) {
  const auto x = gaussian(1000, 3);  // even length: no sample sits on both medians
  Series y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = -*x[i];
  const auto s = discretize_pair(x, y);
  for (auto v : s.symbols) EXPECT_TRUE(v == 1 || v == 2);
}

TEST(DiscretizePair, IndependentPairsAreUniform) {
  const auto s = discretize_pair(gaussian(40000, 1), gaussian(40000, 2));
  std::map<int, int> c;
  for (auto v : s.symbols) ++c[v];
  for (int a = 0; a < 4; ++a) EXPECT_NEAR(c[a] / 40000.0, 0.25, 0.01);
}

TEST(DiscretizePair, NeedsOverlap) {
  EXPECT_THROW(discretize_pair(Series{1.0, std::nullopt}, Series{std::nullopt, 2.0}), Error);
}

TEST(BlockLength, MatchesEnumerationOracle) {
  const auto& g = test::golden()["block_length"];
  EXPECT_EQ(select_block_length(uniform_symbols(4, 1000, 1)), g["A4_n1000"].get<int>());
  EXPECT_EQ(select_block_length(uniform_symbols(3, 1000, 1)), g["A3_n1000"].get<int>());
  EXPECT_EQ(select_block_length(uniform_symbols(4, 10000, 1)), g["A4_n10000"].get<int>());
}

TEST(BlockLength, FloorLogIsExact) {
  EXPECT_EQ(floor_log(1, 4), 0);
  EXPECT_EQ(floor_log(4, 4), 1);
  EXPECT_EQ(floor_log(1023, 4), 4);
  EXPECT_EQ(floor_log(1024, 4), 5);
  EXPECT_EQ(floor_log(729, 3), 6);
}

TEST(BlockLength, GapsLowerTheCount) {
  auto s = uniform_symbols(4, 1100, 2);
  for (std::size_t i = 10; i < s.size(); i += 11) s.symbols[i] = kMissingSymbol;
  EXPECT_EQ(count_complete_blocks(s, 1), 1000u);
  EXPECT_LT(count_complete_blocks(s, 3), 1000u);
}

TEST(BlockFrequencies, Alternating) {
  const auto d = block_frequencies(symbols(2, {0, 1, 0, 1, 0}), 2);
  EXPECT_EQ(d.total, 4u);
  EXPECT_EQ(d.count_of("01"), 2u);
  EXPECT_EQ(d.count_of("10"), 2u);
}

TEST(BlockFrequencies, MissingBreaksWindows) {
  const auto d = block_frequencies(symbols(2, {0, 1, -1, 0, 1}), 2);
  EXPECT_EQ(d.total, 2u);
  EXPECT_EQ(d.count_of("01"), 2u);
}

TEST(BlockFrequencies, ConstantSequence) {
  const auto d = block_frequencies(symbols(4, {2, 2, 2, 2, 2, 2}), 3);
  EXPECT_EQ(d.counts.size(), 1u);
  EXPECT_EQ(d.total, 4u);
  EXPECT_DOUBLE_EQ(entropy_estimate(d).plugin, 0.0);
}

TEST(BlockFrequencies, EmptyIsError) {
  EXPECT_THROW(block_frequencies(symbols(4, {1, -1, 2}), 2), Error);
}

TEST(BlockFrequencies, CountsSumToTotal) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto s = uniform_symbols(4, 3000, seed);
    auto rng = make_rng(seed, {1});
    std::bernoulli_distribution gap(0.05);
    for (auto& v : s.symbols)
      if (gap(rng)) v = kMissingSymbol;
    for (int k = 1; k <= 5; ++k) {
      const auto d = block_frequencies(s, k);
      std::uint64_t sum = 0;
      for (const auto& [code, c] : d.counts) sum += c;
      EXPECT_EQ(sum, d.total);
      EXPECT_EQ(d.total, count_complete_blocks(s, k));
    }
  }
}

TEST(Grassberger, MatchesRecursionOracle) {
  const auto& g = test::golden()["grassberger"];
  for (const auto& [n, v] : g.items())
    EXPECT_NEAR(grassberger_g(std::stoull(n)), v.get<double>(), 1e-12) << "G(" << n << ")";
  EXPECT_NEAR(grassberger_g(1), -1.27036, 1e-5);
  EXPECT_NEAR(grassberger_g(2), 0.72964, 1e-5);
  EXPECT_EQ(grassberger_g(3), grassberger_g(2));
  EXPECT_NEAR(grassberger_g(4), 1.39630, 1e-5);
}

TEST(Entropy, PluginBoundsAndRelabeling) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    auto s = uniform_symbols(4, 2000, seed);
    for (auto& v : s.symbols) v = static_cast<std::uint8_t>(v < 2 ? v : v % 3);  // skewed
    const int k = select_block_length(s);
    const auto e = entropy_estimate(block_frequencies(s, k));
    EXPECT_GE(e.plugin, 0.0);
    EXPECT_LE(e.plugin, k + 1e-12);
    EXPECT_LE(e.plugin_rate(), 1.0 + 1e-12);
    EXPECT_TRUE(std::isfinite(e.rate()));
    auto relabeled = s;
    for (auto& v : relabeled.symbols) v = static_cast<std::uint8_t>((v + 1) % 4);
    EXPECT_NEAR(entropy_estimate(block_frequencies(relabeled, k)).plugin, e.plugin, 1e-12);
  }
}

TEST(Entropy, MostFrequentBlockSmallestCodeOnTies) {
  const auto d = block_frequencies(symbols(4, {3, 1, 3, 1, 0, 0}), 2);
  // 31 twice, 13 once, 10 once, 00 once
  EXPECT_EQ(most_frequent_block(d), "31");
  const auto tie = block_frequencies(symbols(4, {2, 1, 0}), 1);
  EXPECT_EQ(most_frequent_block(tie), "0");
}

TEST(Entropy, MarkovFixtureAnalytic) {
  const auto& g = test::golden()["markov_fixture"];
  const auto h = markov_fixture_entropies();
  EXPECT_NEAR(h.h1, g["h1"].get<double>(), 1e-12);
  EXPECT_NEAR(h.h2, g["h2"].get<double>(), 1e-12);
  EXPECT_NEAR(h.h1, 0.946, 1e-3);
  EXPECT_NEAR(h.h2, 0.944, 1e-3);
  EXPECT_LT(h.h2, h.h1);
}

TEST(Entropy, MarkovFixtureBlockProbability) {
  // p(11) = 7/162 with -0.3 and 0.1 sharing symbol 1
  const auto fx = markov_fixture(1'000'000, 11);
  const std::vector<double> paper_thresholds{-0.4, 0.1, 0.2};
  const auto s = discretize_with_thresholds(fx.returns, 4, paper_thresholds);
  const auto d = block_frequencies(s, 2);
  const auto& p = test::golden()["markov_fixture"]["p11"];
  EXPECT_NEAR(static_cast<double>(d.count_of("11")) / static_cast<double>(d.total),
              p[0].get<double>() / p[1].get<double>(), 1.5e-3);
}

TEST(Entropy, MarkovFixtureQuartiles) {
  const auto fx = markov_fixture(300'000, 12);
  const auto s = discretize_quantile(fx.returns, 4);
  EXPECT_DOUBLE_EQ(s.thresholds[0], -0.4);
  // the median sits on the edge of the 0.1 run; either side gives the same entropies
  EXPECT_TRUE(s.thresholds[1] == -0.3 || s.thresholds[1] == 0.1);
  EXPECT_DOUBLE_EQ(s.thresholds[2], 0.2);
  const auto t = discretize_quantile(fx.returns, 3);
  EXPECT_DOUBLE_EQ(t.thresholds[0], -0.4);
  EXPECT_DOUBLE_EQ(t.thresholds[1], 0.2);
}
