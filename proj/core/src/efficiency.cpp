#include "mkteff/efficiency.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mkteff/error.hpp"
#include "mkteff/parallel.hpp"
#include "mkteff/rng.hpp"

namespace mkteff {

std::size_t percentile_rank(std::size_t n_sim, double percentile) {
  const auto rank = static_cast<std::size_t>(std::ceil(percentile / 100.0 * static_cast<double>(n_sim) - 1e-9));
  return std::clamp<std::size_t>(rank, 1, n_sim);
}

std::vector<double> mc_entropy_sample(std::size_t length, int alphabet, std::size_t n_sim,
                                      std::uint64_t seed, unsigned jobs, int k) {
  if (n_sim == 0) throw Error(ErrorKind::Config, "n_sim must be positive");
  if (length < 2) throw Error(ErrorKind::InsufficientData, "bound sequence length must be >= 2");
  std::vector<double> ent(n_sim);
  parallel_for(n_sim, jobs, [&](std::size_t i) {
    auto rng = make_rng(seed, {length, static_cast<std::uint64_t>(alphabet), i});
    std::normal_distribution<double> normal;
    Series x(length);
    for (auto& v : x) v = normal(rng);
    const auto seq = discretize_quantile(x, alphabet);
    ent[i] = k > 0 ? entropy_estimate(block_frequencies(seq, k)).corrected
                   : estimate_sequence_entropy(seq).corrected;
  });
  std::sort(ent.begin(), ent.end());
  return ent;
}

EfficiencyBound mc_entropy_bound(std::size_t length, int alphabet, std::size_t n_sim,
                                 std::uint64_t seed, unsigned jobs, int k) {
  const auto sample = mc_entropy_sample(length, alphabet, n_sim, seed, jobs, k);
  EfficiencyBound b;
  b.length = length;
  b.alphabet = alphabet;
  b.n_sim = n_sim;
  b.seed = seed;
  b.bound = sample[percentile_rank(n_sim) - 1];
  if (k > 0) {
    b.k = k;
  } else {
    SymbolSequence probe;
    probe.alphabet = alphabet;
    probe.symbols.assign(length, 0);
    b.k = select_block_length(probe);
  }
  return b;
}

EfficiencyBound BoundCache::get(std::size_t length, int alphabet, int k) {
  const auto key = std::make_tuple(alphabet, k, length);
  {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    if (tolerance_ > 0.0) {
      for (const auto& [cached, b] : cache_) {
        if (std::get<0>(cached) != alphabet || std::get<1>(cached) != k) continue;
        const double rel = std::abs(static_cast<double>(std::get<2>(cached)) - static_cast<double>(length)) /
                           static_cast<double>(length);
        if (rel < tolerance_) return b;
      }
    }
  }
  // Computed outside the lock; a concurrent duplicate gives the same value.
  auto b = mc_entropy_bound(length, alphabet, n_sim_, seed_, jobs_, k);
  std::lock_guard lock(mutex_);
  return cache_.emplace(key, b).first->second;
}

std::size_t BoundCache::size() const {
  std::lock_guard lock(mutex_);
  return cache_.size();
}

const DiscretizationVerdict* IntervalVerdict::find(int alphabet) const noexcept {
  for (const auto& t : tests)
    if (t.alphabet == alphabet) return &t;
  return nullptr;
}

IntervalVerdict classify_interval(std::vector<DiscretizationVerdict> tests) {
  IntervalVerdict v;
  for (auto& t : tests) {
    if (!(t.entropy > 0.0) || !(t.bound > 0.0))
      throw Error(ErrorKind::Degenerate, "entropy and bound must be positive");
    t.rate = t.entropy / t.bound;
    v.inefficient = v.inefficient || t.inefficient();
  }
  v.tests = std::move(tests);
  return v;
}

IntervalVerdict classify_interval(double entropy3, double entropy4, double bound3, double bound4) {
  DiscretizationVerdict a, b;
  a.alphabet = 3;
  a.entropy = entropy3;
  a.bound = bound3;
  b.alphabet = 4;
  b.entropy = entropy4;
  b.bound = bound4;
  return classify_interval({a, b});
}

DiscretizationVerdict test_discretization(const SymbolSequence& seq, BoundCache& bounds) {
  DiscretizationVerdict v;
  v.alphabet = seq.alphabet;
  const auto est = estimate_sequence_entropy(seq);
  v.k = est.k;
  v.entropy = est.corrected;
  v.length = count_complete_blocks(seq, est.k) + static_cast<std::size_t>(est.k) - 1;
  // A gap-free Gaussian sequence of length l selects the same k as a
  // gap-free real one; with gaps the real k can be lower, so fix it.
  SymbolSequence full;
  full.alphabet = seq.alphabet;
  full.symbols.assign(v.length, 0);
  const int k_free = select_block_length(full);
  v.bound = bounds.get(v.length, seq.alphabet, k_free == est.k ? 0 : est.k).bound;
  if (!(v.bound > 0.0)) throw Error(ErrorKind::Degenerate, "Monte Carlo bound is not positive");
  v.rate = v.entropy / v.bound;
  return v;
}

double degree_of_inefficiency(const std::vector<bool>& flags) {
  if (flags.empty()) throw Error(ErrorKind::EmptyInput, "no verdicts to aggregate");
  const auto n = std::count(flags.begin(), flags.end(), true);
  return static_cast<double>(n) / static_cast<double>(flags.size());
}

double degree_of_inefficiency(const std::vector<IntervalVerdict>& verdicts) {
  std::vector<bool> flags;
  flags.reserve(verdicts.size());
  for (const auto& v : verdicts) flags.push_back(v.inefficient);
  return degree_of_inefficiency(flags);
}

namespace {

constexpr int kPrefix = 3;
constexpr std::size_t kPrefixCodes = 64;  // 4^3

// Calls fn(prefix code, successor) for each missing-free 4-block in [lo, hi).
template <class Fn>
void for_each_block(const SymbolSequence& seq, std::size_t lo, std::size_t hi, Fn&& fn) {
  for (std::size_t i = lo; i + kPrefix < hi; ++i) {
    std::size_t code = 0;
    bool ok = true;
    for (int j = 0; j <= kPrefix && ok; ++j) ok = !seq.missing(i + static_cast<std::size_t>(j));
    if (!ok) continue;
    for (int j = 0; j < kPrefix; ++j) code = code * 4 + seq.symbols[i + static_cast<std::size_t>(j)];
    fn(code, seq.symbols[i + kPrefix]);
  }
}

std::string prefix_string(std::size_t code) {
  std::string s(kPrefix, '0');
  for (int j = kPrefix - 1; j >= 0; --j) {
    s[static_cast<std::size_t>(j)] = static_cast<char>('0' + code % 4);
    code /= 4;
  }
  return s;
}

}  // namespace

StrategyResult evaluate_strategy_symbols(const SymbolSequence& seq, std::size_t split) {
  if (seq.alphabet != 4) throw Error(ErrorKind::Config, "strategy needs a 4-symbol sequence");
  if (split > seq.size()) throw Error(ErrorKind::Config, "split beyond the sequence");
  std::array<std::size_t, kPrefixCodes> down{}, up{};
  for_each_block(seq, 0, split, [&](std::size_t code, std::uint8_t next) {
    (next <= 1 ? down : up)[code]++;
  });

  enum class Group : std::uint8_t { None, D, I };
  std::array<Group, kPrefixCodes> group{};
  StrategyResult res;
  for (std::size_t c = 0; c < kPrefixCodes; ++c) {
    if (down[c] > up[c]) {
      group[c] = Group::D;
      res.group_d.push_back(prefix_string(c));
    } else if (up[c] > down[c]) {
      group[c] = Group::I;
      res.group_i.push_back(prefix_string(c));
    }
  }
  for_each_block(seq, split, seq.size(), [&](std::size_t code, std::uint8_t next) {
    if (group[code] == Group::None) return;
    ++res.trials;
    if ((group[code] == Group::D) == (next <= 1)) ++res.successes;
  });
  return res;
}

StrategyResult evaluate_simple_strategy(const Series& returns) {
  const std::size_t split = returns.size() / 2;
  const Series first(returns.begin(), returns.begin() + static_cast<std::ptrdiff_t>(split));
  const auto fitted = discretize_quantile(first, 4);
  const auto seq = discretize_with_thresholds(returns, 4, fitted.thresholds);
  auto res = evaluate_strategy_symbols(seq, split);
  res.thresholds = fitted.thresholds;
  return res;
}

}  // namespace mkteff
