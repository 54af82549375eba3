#include "mkteff/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "mkteff/error.hpp"

namespace mkteff {

namespace {

void check_compatible(const BlockDistribution& p, const BlockDistribution& q) {
  if (p.alphabet != q.alphabet || p.k != q.k)
    throw Error(ErrorKind::Config, "distributions differ in alphabet or block length");
  if (p.total == 0 || q.total == 0)
    throw Error(ErrorKind::InsufficientData, "empty block distribution");
}

// Aligned counts over the requested support, in code order.
void aligned_counts(const BlockDistribution& p, const BlockDistribution& q, KlSupport support,
                    std::vector<double>& fp, std::vector<double>& fq) {
  auto ip = p.counts.begin();
  auto iq = q.counts.begin();
  while (ip != p.counts.end() || iq != q.counts.end()) {
    if (iq == q.counts.end() || (ip != p.counts.end() && ip->first < iq->first)) {
      if (support == KlSupport::SmoothedUnion) {
        fp.push_back(static_cast<double>(ip->second));
        fq.push_back(0.0);
      }
      ++ip;
    } else if (ip == p.counts.end() || iq->first < ip->first) {
      if (support == KlSupport::SmoothedUnion) {
        fp.push_back(0.0);
        fq.push_back(static_cast<double>(iq->second));
      }
      ++iq;
    } else {
      fp.push_back(static_cast<double>(ip->second));
      fq.push_back(static_cast<double>(iq->second));
      ++ip;
      ++iq;
    }
  }
}

}  // namespace

double kl_divergence(const BlockDistribution& p, const BlockDistribution& q,
                     const KlOptions& options) {
  check_compatible(p, q);
  std::vector<double> fp, fq;
  aligned_counts(p, q, options.support, fp, fq);
  if (fp.empty()) throw Error(ErrorKind::Degenerate, "distributions share no block");
  const double c = options.support == KlSupport::SmoothedUnion ? options.pseudo_count : 0.0;
  if (options.support == KlSupport::SmoothedUnion && !(c > 0.0))
    throw Error(ErrorKind::Config, "pseudo-count must be positive");
  const double np = std::accumulate(fp.begin(), fp.end(), 0.0) + c * static_cast<double>(fp.size());
  const double nq = std::accumulate(fq.begin(), fq.end(), 0.0) + c * static_cast<double>(fq.size());
  double kl = 0.0;
  for (std::size_t i = 0; i < fp.size(); ++i) {
    const double pi = (fp[i] + c) / np;
    const double qi = (fq[i] + c) / nq;
    kl += pi * std::log(pi / qi);
  }
  return std::max(0.0, kl / std::log(static_cast<double>(p.alphabet)));
}

double kl_distance(const BlockDistribution& p, const BlockDistribution& q,
                   const KlOptions& options) {
  check_compatible(p, q);
  const double hp = entropy_estimate(p).corrected;
  const double hq = entropy_estimate(q).corrected;
  if (!(hp > 0.0) || !(hq > 0.0))
    throw Error(ErrorKind::Degenerate, "KL distance needs positive corrected entropies");
  if (p.counts == q.counts) return 0.0;
  return kl_divergence(p, q, options) / hp + kl_divergence(q, p, options) / hq;
}

int common_block_length(const SymbolSequence& a, const SymbolSequence& b) {
  return std::min(select_block_length(a), select_block_length(b));
}

double kl_distance(const SymbolSequence& a, const SymbolSequence& b, const KlOptions& options) {
  const int k = common_block_length(a, b);
  return kl_distance(block_frequencies(a, k), block_frequencies(b, k), options);
}

EntropyEstimate comovement_entropy(const Series& first, const Series& second) {
  return estimate_sequence_entropy(discretize_pair(first, second));
}

DistanceMatrix::DistanceMatrix(std::vector<std::string> names)
    : labels(std::move(names)), values(labels.size() * labels.size(), 0.0) {}

void DistanceMatrix::set(std::size_t i, std::size_t j, double d) {
  at(i, j) = d;
  at(j, i) = d;
}

Dendrogram upgma(const DistanceMatrix& matrix) {
  const std::size_t n = matrix.size();
  if (n < 2) throw Error(ErrorKind::InsufficientData, "clustering needs at least two items");
  for (double v : matrix.values)
    if (!std::isfinite(v)) throw Error(ErrorKind::Numerical, "non-finite distance");

  struct Cluster {
    std::size_t id;
    std::size_t first_leaf;
    std::size_t size;
  };
  std::vector<Cluster> active;
  for (std::size_t i = 0; i < n; ++i) active.push_back({i, i, 1});
  // d[i][j] between active positions, kept in step with `active`
  std::vector<std::vector<double>> d(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) d[i][j] = i == j ? 0.0 : 0.5 * (matrix.at(i, j) + matrix.at(j, i));

  Dendrogram tree;
  tree.labels = matrix.labels;
  while (active.size() > 1) {
    // `active` stays sorted by first_leaf, so the first strict minimum in
    // row-major order is the lowest-index pair among ties.
    std::size_t bi = 0, bj = 1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < active.size(); ++i)
      for (std::size_t j = i + 1; j < active.size(); ++j)
        if (d[i][j] < best) {
          best = d[i][j];
          bi = i;
          bj = j;
        }
    const auto ni = static_cast<double>(active[bi].size);
    const auto nj = static_cast<double>(active[bj].size);
    for (std::size_t k = 0; k < active.size(); ++k) {
      if (k == bi || k == bj) continue;
      const double v = (ni * d[bi][k] + nj * d[bj][k]) / (ni + nj);
      d[bi][k] = d[k][bi] = v;
    }
    tree.merges.push_back({std::min(active[bi].id, active[bj].id), std::max(active[bi].id, active[bj].id), best,
                           active[bi].size + active[bj].size});
    active[bi] = {n + tree.merges.size() - 1, active[bi].first_leaf, tree.merges.back().size};
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(bj));
    d.erase(d.begin() + static_cast<std::ptrdiff_t>(bj));
    for (auto& row : d) row.erase(row.begin() + static_cast<std::ptrdiff_t>(bj));
  }
  return tree;
}

std::vector<std::size_t> cut_dendrogram(const Dendrogram& tree, double threshold) {
  const std::size_t n = tree.leaves();
  std::vector<std::size_t> parent(n + tree.merges.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<std::size_t(std::size_t)> root = [&](std::size_t x) {
    return parent[x] == x ? x : parent[x] = root(parent[x]);
  };
  for (std::size_t m = 0; m < tree.merges.size(); ++m) {
    if (!(tree.merges[m].height < threshold)) continue;
    parent[root(tree.merges[m].a)] = n + m;
    parent[root(tree.merges[m].b)] = n + m;
  }
  std::vector<std::size_t> out(n);
  std::vector<std::size_t> seen_roots;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = root(i);
    const auto it = std::find(seen_roots.begin(), seen_roots.end(), r);
    out[i] = static_cast<std::size_t>(it - seen_roots.begin());
    if (it == seen_roots.end()) seen_roots.push_back(r);
  }
  return out;
}

namespace {

// Leaves under each cluster id.
std::vector<std::vector<std::size_t>> members(const Dendrogram& tree) {
  const std::size_t n = tree.leaves();
  std::vector<std::vector<std::size_t>> m(n + tree.merges.size());
  for (std::size_t i = 0; i < n; ++i) m[i] = {i};
  for (std::size_t k = 0; k < tree.merges.size(); ++k) {
    m[n + k] = m[tree.merges[k].a];
    m[n + k].insert(m[n + k].end(), m[tree.merges[k].b].begin(), m[tree.merges[k].b].end());
  }
  return m;
}

}  // namespace

DistanceMatrix cophenetic(const Dendrogram& tree) {
  DistanceMatrix out(tree.labels);
  const auto mem = members(tree);
  for (const auto& mg : tree.merges)
    for (std::size_t x : mem[mg.a])
      for (std::size_t y : mem[mg.b]) out.set(x, y, mg.height);
  return out;
}

std::vector<std::size_t> leaf_order(const Dendrogram& tree) {
  const std::size_t n = tree.leaves();
  std::vector<std::size_t> size(n + tree.merges.size(), 1);
  for (std::size_t k = 0; k < tree.merges.size(); ++k) size[n + k] = tree.merges[k].size;
  std::vector<std::size_t> order;
  std::function<void(std::size_t)> walk = [&](std::size_t id) {
    if (id < n) {
      order.push_back(id);
      return;
    }
    const auto& mg = tree.merges[id - n];
    const bool swap = size[mg.b] < size[mg.a];
    walk(swap ? mg.b : mg.a);
    walk(swap ? mg.a : mg.b);
  };
  if (tree.merges.empty()) {
    for (std::size_t i = 0; i < n; ++i) order.push_back(i);
  } else {
    walk(n + tree.merges.size() - 1);
  }
  return order;
}

std::string to_newick(const Dendrogram& tree) {
  const std::size_t n = tree.leaves();
  auto depth = [&](std::size_t id) { return id < n ? 0.0 : tree.merges[id - n].height / 2.0; };
  std::function<std::string(std::size_t)> node = [&](std::size_t id) -> std::string {
    if (id < n) return tree.labels[id];
    const auto& mg = tree.merges[id - n];
    const double h = depth(id);
    return fmt::format("({}:{:.10g},{}:{:.10g})", node(mg.a), h - depth(mg.a), node(mg.b),
                       h - depth(mg.b));
  };
  if (tree.merges.empty()) return n == 1 ? tree.labels[0] + ";" : ";";
  return node(n + tree.merges.size() - 1) + ";";
}

}  // namespace mkteff
