#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "mkteff/cluster.hpp"
#include "mkteff/efficiency.hpp"
#include "mkteff/error.hpp"
#include "mkteff/rng.hpp"
#include "test_support.hpp"

using namespace mkteff;

namespace {

BlockDistribution counts(std::vector<std::uint64_t> c, int alphabet = 4, int k = 1) {
  BlockDistribution d;
  d.alphabet = alphabet;
  d.k = k;
  for (std::uint64_t code = 0; code < c.size(); ++code) {
    if (c[code] == 0) continue;
    d.counts.emplace_back(code, c[code]);
    d.total += c[code];
  }
  return d;
}

DistanceMatrix matrix3() {
  DistanceMatrix m({"A", "B", "C"});
  m.set(0, 1, 1.0);
  m.set(0, 2, 4.0);
  m.set(1, 2, 4.0);
  return m;
}

DistanceMatrix random_matrix(std::mt19937_64& rng, std::size_t n) {
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < n; ++i) labels.push_back("L" + std::to_string(i));
  DistanceMatrix m(labels);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) m.set(i, j, u(rng));
  return m;
}

// Textbook UPGMA on explicit leaf sets, averaging raw leaf distances at every step.
std::vector<std::pair<std::set<std::size_t>, double>> brute_upgma(const DistanceMatrix& m) {
  std::vector<std::set<std::size_t>> active;
  for (std::size_t i = 0; i < m.size(); ++i) active.push_back({i});
  std::vector<std::pair<std::set<std::size_t>, double>> out;
  while (active.size() > 1) {
    double best = INFINITY;
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < active.size(); ++i)
      for (std::size_t j = i + 1; j < active.size(); ++j) {
        double s = 0;
        for (auto x : active[i])
          for (auto y : active[j]) s += m.at(x, y);
        s /= static_cast<double>(active[i].size() * active[j].size());
        if (s < best) best = s, bi = i, bj = j;
      }
    active[bi].insert(active[bj].begin(), active[bj].end());
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(bj));
    out.emplace_back(active[bi], best);
  }
  return out;
}

Series gaussian(std::uint64_t seed, std::size_t n) {
  auto rng = make_rng(seed, {0x636c});
  std::normal_distribution<double> z;
  Series y(n);
  for (auto& v : y) v = z(rng);
  return y;
}

}  // namespace

TEST(Kl, GoldenValue) {
  const auto& g = test::golden();
  const auto p = counts({75, 25}), q = counts({50, 50});
  EXPECT_NEAR(kl_divergence(p, q), g["kl_divergence_75_25_vs_50_50_A4"].get<double>(), 1e-12);
  EXPECT_NEAR(kl_distance(p, q), g["kl_distance_75_25_vs_50_50_A4"].get<double>(), 1e-12);
}

TEST(Kl, IdenticalIsZeroAndDegenerateThrows) {
  const auto p = counts({10, 0, 3, 7});
  EXPECT_EQ(kl_distance(p, p), 0.0);
  EXPECT_THROW(kl_distance(counts({10}), counts({5, 5})), Error);
  EXPECT_THROW(kl_distance(counts({5, 5}, 4, 1), counts({5, 5}, 3, 1)), Error);
}

TEST(Kl, AxiomsOnRandomCountMaps) {
  auto rng = make_rng(6, {});
  std::uniform_int_distribution<int> c(0, 40);
  std::uniform_int_distribution<int> sz(2, 16);
  for (int rep = 0; rep < 10000; ++rep) {
    std::vector<std::uint64_t> a(static_cast<std::size_t>(sz(rng))), b(a.size());
    for (auto& v : a) v = static_cast<std::uint64_t>(c(rng));
    for (auto& v : b) v = static_cast<std::uint64_t>(c(rng));
    a[0] += 3, a[1] += 3, b[0] += 3, b[1] += 3;  // two distinct blocks keep H^G positive
    const auto p = counts(a), q = counts(b);
    const double pq = kl_distance(p, q), qp = kl_distance(q, p);
    EXPECT_GE(pq, 0.0);
    EXPECT_LT(std::abs(pq - qp), 1e-12);
    EXPECT_EQ(kl_distance(p, p), 0.0);
    KlOptions inter{KlSupport::Intersection, 0.0};
    EXPECT_GE(kl_divergence(p, q, inter), -1e-15);
  }
}

TEST(Kl, SequencesUseCommonBlockLength) {
  SymbolSequence a, b;
  a.alphabet = b.alphabet = 4;
  auto rng = make_rng(2, {});
  std::uniform_int_distribution<int> u(0, 3);
  a.symbols.resize(5000);
  b.symbols.resize(300);
  for (auto& v : a.symbols) v = static_cast<std::uint8_t>(u(rng));
  for (auto& v : b.symbols) v = static_cast<std::uint8_t>(u(rng));
  const int k = common_block_length(a, b);
  EXPECT_EQ(k, std::min(select_block_length(a), select_block_length(b)));
  EXPECT_LT(k, select_block_length(a));
  EXPECT_EQ(kl_distance(a, b), kl_distance(block_frequencies(a, k), block_frequencies(b, k)));
}

TEST(Comovement, IdenticalAndOpposite) {
  const auto r = gaussian(1, 10000);
  Series neg(r.size());
  for (std::size_t t = 0; t < r.size(); ++t) neg[t] = -*r[t];
  EXPECT_NEAR(comovement_entropy(r, r).rate(), 0.5, 0.01);
  EXPECT_NEAR(comovement_entropy(r, neg).rate(), 0.5, 0.01);
}

TEST(Comovement, IndependentPairsNearOne) {
  const auto a = gaussian(2, 10000), b = gaussian(3, 10000);
  const auto e = comovement_entropy(a, b);
  const auto bound = mc_entropy_bound(10000 - 1 + 1, 4, 300, 1);
  EXPECT_GE(e.corrected, bound.bound * e.k / bound.k - 1e-12);
  EXPECT_NEAR(e.rate(), 1.0, 0.01);
}

TEST(Comovement, SwapInvariant) {
  const auto a = gaussian(4, 3000);
  auto b = gaussian(5, 3000);
  for (std::size_t t = 0; t < b.size(); ++t) *b[t] += 0.6 * *a[t];
  EXPECT_NEAR(comovement_entropy(a, b).corrected, comovement_entropy(b, a).corrected, 1e-12);
  EXPECT_THROW(comovement_entropy(Series{1.0}, Series{1.0}), Error);
}

TEST(Upgma, ThreeLeafGolden) {
  const auto tree = upgma(matrix3());
  const auto& g = test::golden()["upgma_three_leaf"];
  ASSERT_EQ(tree.merges.size(), g.size());
  for (std::size_t m = 0; m < g.size(); ++m) {
    EXPECT_EQ(tree.merges[m].a, g[m][0].get<std::size_t>());
    EXPECT_EQ(tree.merges[m].b, g[m][1].get<std::size_t>());
    EXPECT_EQ(tree.merges[m].height, g[m][2].get<double>());
    EXPECT_EQ(tree.merges[m].size, g[m][3].get<std::size_t>());
  }
}

TEST(Upgma, TwoLeavesAndTies) {
  DistanceMatrix two({"x", "y"});
  two.set(0, 1, 0.7);
  const auto t2 = upgma(two);
  ASSERT_EQ(t2.merges.size(), 1u);
  EXPECT_EQ(t2.merges[0].height, 0.7);

  DistanceMatrix eq({"a", "b", "c", "d"});
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = i + 1; j < 4; ++j) eq.set(i, j, 2.0);
  const auto t = upgma(eq);
  for (const auto& mg : t.merges) EXPECT_EQ(mg.height, 2.0);
  EXPECT_EQ(t.merges[0].a, 0u);
  EXPECT_EQ(t.merges[0].b, 1u);
  EXPECT_EQ(t.merges[1].a, 2u);
  EXPECT_EQ(t.merges[1].b, 4u);

  DistanceMatrix bad({"a", "b"});
  bad.set(0, 1, NAN);
  EXPECT_THROW(upgma(bad), Error);
  EXPECT_THROW(upgma(DistanceMatrix({"a"})), Error);
}

TEST(Upgma, MatchesBruteForceOnRandomMatrices) {
  auto rng = make_rng(8, {});
  for (int rep = 0; rep < 300; ++rep) {
    const std::size_t n = 2 + static_cast<std::size_t>(rep % 11);
    const auto m = random_matrix(rng, n);
    const auto tree = upgma(m);
    const auto expect = brute_upgma(m);
    ASSERT_EQ(tree.merges.size(), n - 1);
    std::vector<std::set<std::size_t>> mem(n);
    for (std::size_t i = 0; i < n; ++i) mem[i] = {i};
    for (std::size_t k = 0; k < tree.merges.size(); ++k) {
      const auto& mg = tree.merges[k];
      std::set<std::size_t> joined = mem[mg.a];
      joined.insert(mem[mg.b].begin(), mem[mg.b].end());
      mem.push_back(joined);
      EXPECT_EQ(joined, expect[k].first);
      EXPECT_NEAR(mg.height, expect[k].second, 1e-12);
      EXPECT_EQ(mg.size, joined.size());
      if (k > 0) EXPECT_GE(mg.height, tree.merges[k - 1].height - 1e-15);
    }
    EXPECT_EQ(tree.merges.back().size, n);

    const auto c = cophenetic(tree);
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_EQ(c.at(i, i), 0.0);
      for (std::size_t j = 0; j < n; ++j) {
        EXPECT_EQ(c.at(i, j), c.at(j, i));
        for (std::size_t k = 0; k < n; ++k) EXPECT_LE(c.at(i, j), std::max(c.at(i, k), c.at(k, j)) + 1e-15);
      }
    }
  }
}

TEST(Cut, Examples) {
  const auto tree = upgma(matrix3());
  EXPECT_EQ(cut_dendrogram(tree, 0.0), (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(cut_dendrogram(tree, 2.0), (std::vector<std::size_t>{0, 0, 1}));
  EXPECT_EQ(cut_dendrogram(tree, 10.0), (std::vector<std::size_t>{0, 0, 0}));
  EXPECT_EQ(cut_dendrogram(tree, 1.0), (std::vector<std::size_t>{0, 1, 2}));  // strict
}

TEST(Cut, AgreesWithCopheneticThreshold) {
  auto rng = make_rng(10, {});
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 100; ++rep) {
    const auto tree = upgma(random_matrix(rng, 9));
    const auto c = cophenetic(tree);
    const double thr = u(rng);
    const auto cl = cut_dendrogram(tree, thr);
    for (std::size_t i = 0; i < 9; ++i)
      for (std::size_t j = 0; j < 9; ++j) EXPECT_EQ(cl[i] == cl[j], i == j || c.at(i, j) < thr);
  }
}

TEST(Export, NewickAndLeafOrder) {
  const auto tree = upgma(matrix3());
  EXPECT_EQ(to_newick(tree), "(C:2,(A:0.5,B:0.5):1.5);");
  EXPECT_EQ(leaf_order(tree), (std::vector<std::size_t>{2, 0, 1}));
}
