#include "mkteff/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>
#include <unordered_map>

#include "mkteff/error.hpp"

namespace mkteff {

namespace {

std::vector<double> quantile_levels(int alphabet) {
  switch (alphabet) {
    case 3:
      return {1.0 / 3.0, 2.0 / 3.0};
    case 4:
      return {0.25, 0.5, 0.75};
    default:
      throw Error(ErrorKind::Config,
                  "alphabet must be 3 or 4, got " + std::to_string(alphabet));
  }
}

std::uint8_t symbol_for(double r, int alphabet, std::span<const double> t) {
  if (alphabet == 3) {
    if (r <= t[0]) return 1;
    if (r <= t[1]) return 0;
    return 2;
  }
  if (r <= t[0]) return 0;
  if (r <= t[1]) return 1;
  if (r <= t[2]) return 2;
  return 3;
}

std::uint64_t ipow(std::uint64_t base, int exp) {
  std::uint64_t r = 1;
  for (int i = 0; i < exp; ++i) {
    if (r > std::numeric_limits<std::uint64_t>::max() / base)
      throw Error(ErrorKind::Numerical, "block code space overflows 64 bits");
    r *= base;
  }
  return r;
}

}  // namespace

double empirical_threshold(std::span<const double> sorted, double q) {
  const std::size_t n = sorted.size();
  const double target = 2.0 * q * static_cast<double>(n);
  double threshold = -std::numeric_limits<double>::infinity();
  std::size_t lo = 0;
  while (lo < n) {
    std::size_t hi = lo + 1;
    while (hi < n && sorted[hi] == sorted[lo]) ++hi;
    // the tie run occupies ranks lo+1..hi
    if (static_cast<double>(lo + hi) > target) break;
    threshold = sorted[lo];
    lo = hi;
  }
  return threshold;
}

SymbolSequence discretize_with_thresholds(const Series& returns, int alphabet,
                                          std::span<const double> thresholds) {
  const auto levels = quantile_levels(alphabet);
  if (thresholds.size() != levels.size())
    throw Error(ErrorKind::Config, "threshold count does not match alphabet");
  SymbolSequence seq;
  seq.alphabet = alphabet;
  seq.thresholds.assign(thresholds.begin(), thresholds.end());
  seq.symbols.resize(returns.size(), kMissingSymbol);
  for (std::size_t i = 0; i < returns.size(); ++i)
    if (returns[i]) seq.symbols[i] = symbol_for(*returns[i], alphabet, thresholds);
  return seq;
}

SymbolSequence discretize_quantile(const Series& returns, int alphabet) {
  const auto levels = quantile_levels(alphabet);
  std::vector<double> values = present_values(returns);
  if (values.size() < static_cast<std::size_t>(alphabet))
    throw Error(ErrorKind::InsufficientData,
                "discretization needs at least " + std::to_string(alphabet) +
                    " observed returns, got " + std::to_string(values.size()));
  std::sort(values.begin(), values.end());
  if (values.front() == values.back())
    throw Error(ErrorKind::Degenerate, "all observed returns are identical");
  std::vector<double> thresholds;
  thresholds.reserve(levels.size());
  for (double q : levels) thresholds.push_back(empirical_threshold(values, q));
  return discretize_with_thresholds(returns, alphabet, thresholds);
}

SymbolSequence discretize_pair(const Series& first, const Series& second) {
  if (first.size() != second.size())
    throw Error(ErrorKind::Config, "paired series must share the grid");
  std::vector<double> a, b;
  for (std::size_t i = 0; i < first.size(); ++i) {
    if (first[i] && second[i]) {
      a.push_back(*first[i]);
      b.push_back(*second[i]);
    }
  }
  if (a.size() < 2)
    throw Error(ErrorKind::InsufficientData,
                "paired series overlap in fewer than 2 slots");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double m1 = empirical_threshold(a, 0.5);
  const double m2 = empirical_threshold(b, 0.5);

  SymbolSequence seq;
  seq.alphabet = 4;
  seq.thresholds = {m1, m2};
  seq.symbols.resize(first.size(), kMissingSymbol);
  for (std::size_t i = 0; i < first.size(); ++i) {
    if (!first[i] || !second[i]) continue;
    const int hi1 = *first[i] > m1;
    const int hi2 = *second[i] > m2;
    seq.symbols[i] = static_cast<std::uint8_t>(2 * hi1 + hi2);
  }
  return seq;
}

std::size_t count_complete_blocks(const SymbolSequence& seq, int k) {
  if (k < 1) throw Error(ErrorKind::Config, "block length must be >= 1");
  std::size_t total = 0;
  std::size_t run = 0;
  for (auto s : seq.symbols) {
    if (s == kMissingSymbol) {
      run = 0;
    } else if (++run >= static_cast<std::size_t>(k)) {
      ++total;
    }
  }
  return total;
}

int floor_log(std::size_t n, int base) {
  if (n == 0) throw Error(ErrorKind::Numerical, "log of zero");
  int e = 0;
  std::size_t p = static_cast<std::size_t>(base);
  while (p <= n) {
    ++e;
    if (p > std::numeric_limits<std::size_t>::max() / static_cast<std::size_t>(base)) break;
    p *= static_cast<std::size_t>(base);
  }
  return e;
}

int select_block_length(const SymbolSequence& seq) {
  const std::size_t n1 = count_complete_blocks(seq, 1);
  if (n1 == 0) throw Error(ErrorKind::InsufficientData, "sequence has no observed symbols");
  int best = 1;
  for (int k = 1;; ++k) {
    const std::size_t nb = count_complete_blocks(seq, k);
    if (nb == 0 || k >= floor_log(nb, seq.alphabet)) break;
    best = k;
  }
  return best;
}

std::string BlockDistribution::block_string(std::uint64_t code) const {
  std::string s(static_cast<std::size_t>(k), '0');
  for (int i = k - 1; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = static_cast<char>('0' + code % static_cast<std::uint64_t>(alphabet));
    code /= static_cast<std::uint64_t>(alphabet);
  }
  return s;
}

std::uint64_t BlockDistribution::count_of(std::string_view block) const {
  if (block.size() != static_cast<std::size_t>(k)) return 0;
  std::uint64_t code = 0;
  for (char c : block) code = code * static_cast<std::uint64_t>(alphabet) + static_cast<std::uint64_t>(c - '0');
  auto it = std::lower_bound(counts.begin(), counts.end(), std::pair{code, std::uint64_t{0}});
  return (it != counts.end() && it->first == code) ? it->second : 0;
}

BlockDistribution block_frequencies(const SymbolSequence& seq, int k) {
  if (k < 1) throw Error(ErrorKind::Config, "block length must be >= 1");
  const auto base = static_cast<std::uint64_t>(seq.alphabet);
  const std::uint64_t space = ipow(base, k);
  const std::uint64_t lead = space / base;

  BlockDistribution dist;
  dist.alphabet = seq.alphabet;
  dist.k = k;

  constexpr std::uint64_t kDenseLimit = std::uint64_t{1} << 22;
  std::vector<std::uint64_t> dense;
  std::unordered_map<std::uint64_t, std::uint64_t> sparse;
  if (space <= kDenseLimit) dense.assign(space, 0);

  std::uint64_t code = 0;
  std::size_t run = 0;
  for (auto s : seq.symbols) {
    if (s == kMissingSymbol) {
      run = 0;
      code = 0;
      continue;
    }
    code = (code % lead) * base + s;
    if (++run >= static_cast<std::size_t>(k)) {
      ++dist.total;
      if (!dense.empty())
        ++dense[code];
      else
        ++sparse[code];
    }
  }
  if (dist.total == 0)
    throw Error(ErrorKind::InsufficientData,
                "no complete block of length " + std::to_string(k));

  if (!dense.empty()) {
    for (std::uint64_t c = 0; c < space; ++c)
      if (dense[c]) dist.counts.emplace_back(c, dense[c]);
  } else {
    dist.counts.assign(sparse.begin(), sparse.end());
    std::sort(dist.counts.begin(), dist.counts.end());
  }
  return dist;
}

double grassberger_g(std::uint64_t n) {
  if (n == 0) throw Error(ErrorKind::Numerical, "G(0) is undefined");
  static std::mutex mu;
  static std::vector<double> table;  // table[m] = G(2m), m >= 1
  const std::uint64_t m = n / 2;
  if (n == 1) return -std::numbers::egamma - std::numbers::ln2;
  std::lock_guard lock(mu);
  if (table.empty()) table = {0.0, 2.0 - std::numbers::egamma - std::numbers::ln2};
  while (table.size() <= m) {
    const auto j = static_cast<double>(table.size() - 1);  // G(2j+2) = G(2j) + 2/(2j+1)
    table.push_back(table.back() + 2.0 / (2.0 * j + 1.0));
  }
  // G(2m+1) = G(2m)
  return table[m];
}

EntropyEstimate entropy_estimate(const BlockDistribution& dist) {
  if (dist.total == 0) throw Error(ErrorKind::InsufficientData, "empty block distribution");
  const double ln_a = std::log(static_cast<double>(dist.alphabet));
  const double nb = static_cast<double>(dist.total);
  double sum_flogf = 0.0;
  double sum_fg = 0.0;
  for (const auto& [code, f] : dist.counts) {
    const double fd = static_cast<double>(f);
    sum_flogf += fd * std::log(fd);
    sum_fg += fd * grassberger_g(f);
  }
  EntropyEstimate e;
  e.k = dist.k;
  e.plugin = (std::log(nb) - sum_flogf / nb) / ln_a;
  e.corrected = (std::log(nb) - sum_fg / nb) / ln_a;
  return e;
}

EntropyEstimate estimate_sequence_entropy(const SymbolSequence& seq) {
  return entropy_estimate(block_frequencies(seq, select_block_length(seq)));
}

std::string most_frequent_block(const BlockDistribution& dist) {
  if (dist.counts.empty()) return {};
  auto best = dist.counts.begin();
  for (auto it = dist.counts.begin(); it != dist.counts.end(); ++it)
    if (it->second > best->second) best = it;
  return dist.block_string(best->first);
}

}  // namespace mkteff
