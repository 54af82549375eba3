#pragma once

// Monte Carlo efficiency bounds, interval verdicts and the D/I strategy test.

#include <cstddef>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "mkteff/entropy.hpp"
#include "mkteff/series.hpp"

namespace mkteff {

struct EfficiencyBound {
  std::size_t length = 0;  // l
  int alphabet = 0;
  std::size_t n_sim = 0;
  double percentile = 1.0;
  double bound = 0.0;  // corrected k-entropy at the percentile rank
  int k = 0;           // block length chosen on the simulated sequences
  std::uint64_t seed = 0;
};

/// Rank (1-based) of the order statistic used as the percentile bound.
std::size_t percentile_rank(std::size_t n_sim, double percentile = 1.0);

/// Corrected k-entropies of n_sim i.i.d. Gaussian sequences of length l,
/// sorted ascending. Replicate i uses the stream derived from (seed, l, A, i).
/// `k` = 0 selects the block length on each simulated sequence; a positive
/// `k` fixes it (used when gaps in the real sequence lower its k).
std::vector<double> mc_entropy_sample(std::size_t length, int alphabet, std::size_t n_sim,
                                      std::uint64_t seed, unsigned jobs = 1, int k = 0);

EfficiencyBound mc_entropy_bound(std::size_t length, int alphabet, std::size_t n_sim = 10000,
                                 std::uint64_t seed = 0, unsigned jobs = 1, int k = 0);

/// Thread-safe cache of bounds keyed by (l, A, k). With a positive
/// `relative_tolerance` a cached bound is reused for any l within that
/// relative distance (off by default).
class BoundCache {
 public:
  BoundCache(std::size_t n_sim, std::uint64_t seed, unsigned jobs = 1,
             double relative_tolerance = 0.0)
      : n_sim_(n_sim), seed_(seed), jobs_(jobs), tolerance_(relative_tolerance) {}

  /// k = 0 lets each simulated sequence select its own block length.
  EfficiencyBound get(std::size_t length, int alphabet, int k = 0);
  std::size_t size() const;

 private:
  std::size_t n_sim_;
  std::uint64_t seed_;
  unsigned jobs_;
  double tolerance_;
  mutable std::mutex mutex_;
  std::map<std::tuple<int, int, std::size_t>, EfficiencyBound> cache_;  // (A, k, l)
};

struct DiscretizationVerdict {
  int alphabet = 0;
  int k = 0;
  double entropy = 0.0;  // corrected k-entropy
  double bound = 0.0;
  double rate = 0.0;     // entropy / bound
  std::size_t length = 0;  // l = n_b(k) + k - 1
  bool inefficient() const noexcept { return rate < 1.0; }
};

struct IntervalVerdict {
  std::vector<DiscretizationVerdict> tests;  // one per alphabet
  bool inefficient = false;                  // any rate < 1

  const DiscretizationVerdict* find(int alphabet) const noexcept;
};

IntervalVerdict classify_interval(double entropy3, double entropy4, double bound3, double bound4);
IntervalVerdict classify_interval(std::vector<DiscretizationVerdict> tests);

/// Discretizes, selects k, estimates the corrected entropy and compares it
/// to the Monte Carlo bound for an equally long Gaussian sequence.
DiscretizationVerdict test_discretization(const SymbolSequence& seq, BoundCache& bounds);

/// Fraction of inefficient verdicts.
double degree_of_inefficiency(const std::vector<IntervalVerdict>& verdicts);
double degree_of_inefficiency(const std::vector<bool>& inefficient_flags);

struct StrategyResult {
  std::size_t successes = 0;
  std::size_t trials = 0;
  std::vector<std::string> group_d;  // prefixes followed mostly by 0 or 1
  std::vector<std::string> group_i;  // prefixes followed mostly by 2 or 3
  std::vector<double> thresholds;    // quartiles fitted on the first half

  std::optional<double> fraction() const {
    if (trials == 0) return std::nullopt;
    return static_cast<double>(successes) / static_cast<double>(trials);
  }
};

/// D/I prefix strategy on a 4-symbol sequence split at `split`: groups are
/// learned from 4-blocks inside [0, split) and scored on 4-blocks inside
/// [split, n).
StrategyResult evaluate_strategy_symbols(const SymbolSequence& seq, std::size_t split);

/// Same strategy on returns: quartiles come from the first half only, and
/// the split is at n / 2.
StrategyResult evaluate_simple_strategy(const Series& returns);

}  // namespace mkteff
