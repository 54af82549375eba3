#pragma once

// Symbolic discretization of returns and block-entropy estimation with the
// Grassberger finite-sample correction.

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mkteff/series.hpp"

namespace mkteff {

inline constexpr std::uint8_t kMissingSymbol = 0xFF;

struct SymbolSequence {
  int alphabet = 0;                   // 3 or 4
  std::vector<std::uint8_t> symbols;  // kMissingSymbol marks a missing slot
  std::vector<double> thresholds;     // tertiles, quartiles, or the two medians

  std::size_t size() const noexcept { return symbols.size(); }
  bool missing(std::size_t i) const noexcept { return symbols[i] == kMissingSymbol; }
};

/// Threshold t such that values <= t form the lower part of a q-split.
///
/// A run of tied values is never divided: it goes to the lower part when at
/// least half of its ranks lie at or below q*n. For data without ties this is
/// the order statistic of rank round(q*n). `sorted` must be ascending.
double empirical_threshold(std::span<const double> sorted, double q);

/// 3-symbol (tertile) or 4-symbol (quartile) discretization.
///
/// A = 3: r <= t1 -> 1, t1 < r <= t2 -> 0, r > t2 -> 2.
/// A = 4: r <= Q1 -> 0, Q1 < r <= Q2 -> 1, Q2 < r <= Q3 -> 2, r > Q3 -> 3.
SymbolSequence discretize_quantile(const Series& returns, int alphabet);

/// Same mapping with externally supplied thresholds (used when thresholds
/// are fitted on a different part of the data).
SymbolSequence discretize_with_thresholds(const Series& returns, int alphabet,
                                          std::span<const double> thresholds);

/// Joint co-movement symbol of two grid-aligned series relative to their
/// medians over commonly observed slots:
/// 0 = both low, 1 = first low / second high, 2 = first high / second low,
/// 3 = both high. Slots missing in either input are missing.
SymbolSequence discretize_pair(const Series& first, const Series& second);

/// Number of length-k windows that contain no missing symbol.
std::size_t count_complete_blocks(const SymbolSequence& seq, int k);

/// floor(log_base(n)) computed in integer arithmetic; n >= 1.
int floor_log(std::size_t n, int base);

/// Largest K with K < floor(log_A n_b(K)); 1 when no K >= 2 qualifies.
int select_block_length(const SymbolSequence& seq);

struct BlockDistribution {
  int alphabet = 0;
  int k = 0;
  /// (block code, count) sorted by code; the code is the block read as a
  /// base-A number with the first symbol most significant.
  std::vector<std::pair<std::uint64_t, std::uint64_t>> counts;
  std::uint64_t total = 0;  // n_b

  std::string block_string(std::uint64_t code) const;
  std::uint64_t count_of(std::string_view block) const;
};

BlockDistribution block_frequencies(const SymbolSequence& seq, int k);

/// Grassberger's G(n) in natural-log units, n >= 1.
double grassberger_g(std::uint64_t n);

struct EntropyEstimate {
  int k = 0;
  double plugin = 0.0;     // H_k, base-A units
  double corrected = 0.0;  // H_k^G, base-A units
  double rate() const noexcept { return corrected / k; }
  double plugin_rate() const noexcept { return plugin / k; }
};

EntropyEstimate entropy_estimate(const BlockDistribution& dist);

/// Selects k with select_block_length and returns the corrected estimate.
EntropyEstimate estimate_sequence_entropy(const SymbolSequence& seq);

/// Most frequent block (ties broken by the smallest code) as a digit string.
std::string most_frequent_block(const BlockDistribution& dist);

}  // namespace mkteff
