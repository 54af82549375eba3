#pragma once

// Synthetic rounded and stale prices, estimator benchmarks, and a Markov
// return fixture whose 3-symbol discretization looks perfectly random.

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mkteff/ingest.hpp"
#include "mkteff/series.hpp"

namespace mkteff {

enum class VolModel { Constant = 1, Arch = 2, Garch1 = 3, Garch2 = 4 };
enum class StaleModel { None = 1, Walk10 = 2, Walk20 = 3, Seasonal20 = 4 };

struct SimModelConfig {
  std::size_t n_half = 100000;  // N; the path has 2N returns
  double p0 = 100.0;
  double nu = 1e-4;
  double tick = 0.01;
  VolModel vol = VolModel::Constant;
  StaleModel stale = StaleModel::None;
  std::uint64_t seed = 0;
};

/// "s1,pr1" style identifier.
std::string model_id(VolModel vol, StaleModel stale);

struct SimPath {
  std::vector<double> efficient;            // P_0..P_2N
  std::vector<std::int64_t> rounded_ticks;  // efficient price in ticks
  std::vector<std::int64_t> observed_ticks;
  std::vector<double> sigma;  // sigma[i] drives the return into step i; sigma[0] unused
  std::vector<double> pr;
  std::vector<std::uint8_t> stale;  // B_i
  double tick = 0.01;
  std::size_t clamped_steps = 0;  // pr values clamped into [0, 1]

  std::size_t steps() const noexcept { return efficient.size() - 1; }
  double observed_price(std::size_t i) const { return static_cast<double>(observed_ticks[i]) * tick; }
  /// Zero returns of the rounded efficient path over returns (lo, hi].
  std::size_t rounding_zeros(std::size_t lo, std::size_t hi) const;
  /// Observed log-returns for steps lo+1..hi, indexed from 0.
  Series observed_returns(std::size_t lo, std::size_t hi) const;
  /// Observed prices at steps lo+1..hi, indexed like observed_returns.
  std::vector<double> observed_prices(std::size_t lo, std::size_t hi) const;
};

SimPath simulate_observed_price(const SimModelConfig& config);

/// One estimator variant of the benchmark tables.
enum class Variant : std::uint8_t {
  AbsOptimized = 0,
  SquaredOptimized,
  AbsFixed,
  SquaredFixed,
  AbsUnfiltered,
  SquaredUnfiltered,
};
inline constexpr std::size_t kVariants = 6;
const char* variant_name(Variant v) noexcept;

struct VariantMetrics {
  bool computed = false;
  double alpha = 0.0;
  double mape = 0.0;
  double er_n = 0.0;     // NaN when no zero survives the filter
  double deleted = 0.0;  // 1 - N_A / N
};

struct ReplicateResult {
  std::size_t replicate = 0;
  std::array<VariantMetrics, kVariants> variants{};
  std::size_t n_round = 0;
};

/// Trains alpha on the first half of the path and scores the second half.
ReplicateResult evaluate_replicate(const SimPath& path, std::size_t n_half,
                                   const std::vector<Variant>& variants, double fixed_alpha = 0.05);

struct Summary {
  double mean = 0.0;
  double lo = 0.0;  // 2.5% replicate quantile
  double hi = 0.0;  // 97.5% replicate quantile
  std::size_t count = 0;
};

Summary summarize(std::vector<double> values);

struct BenchmarkRow {
  VolModel vol = VolModel::Constant;
  StaleModel stale = StaleModel::None;
  std::size_t replicates = 0;  // effective count after dropped failures
  std::array<Summary, kVariants> mape{};
  std::array<Summary, kVariants> alpha{};
  std::array<Summary, kVariants> er_n{};
  std::array<Summary, kVariants> deleted{};
  std::array<bool, kVariants> computed{};

  std::string id() const { return model_id(vol, stale); }
};

struct BenchmarkOptions {
  std::size_t replicates = 100;
  std::size_t n_half = 100000;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  std::vector<Variant> variants = {Variant::AbsOptimized,  Variant::SquaredOptimized,
                                   Variant::AbsFixed,      Variant::SquaredFixed,
                                   Variant::AbsUnfiltered, Variant::SquaredUnfiltered};
};

/// Replicate r of a model uses the stream derived from (seed, vol, stale, r).
BenchmarkRow benchmark_model(VolModel vol, StaleModel stale, const BenchmarkOptions& options,
                             std::vector<ReplicateResult>* raw = nullptr);

std::vector<BenchmarkRow> benchmark_estimators(
    const std::vector<std::pair<VolModel, StaleModel>>& models, const BenchmarkOptions& options);

/// Every (vol, stale) combination in table order.
std::vector<std::pair<VolModel, StaleModel>> all_models();

std::string volatility_table_csv(const std::vector<BenchmarkRow>& rows);
std::string staleness_table_csv(const std::vector<BenchmarkRow>& rows);

struct MarkovFixture {
  Series returns;
  std::vector<std::uint8_t> states;  // 1, 2 top-level moves; 3, 4, 5 sub-moves
};

/// Top-level moves 0/1/2 are i.i.d. uniform; move 0 emits sub-move 3/4/5
/// drawn from a circulant transition law given the previous sub-move.
MarkovFixture markov_fixture(std::size_t length, std::uint64_t seed);

struct FixtureEntropies {
  double h1 = 0.0;  // base 4, one symbol
  double h2 = 0.0;  // base 4, per symbol of a 2-block
};

/// Exact 4-symbol entropies of the fixture from its transition law.
FixtureEntropies markov_fixture_entropies();

/// Synthetic 1-minute bars on weekdays inside the session window: a
/// Gaussian log-price walk with a U-shaped intraday volatility profile,
/// rounded to the tick, with random no-trade minutes and stale repeats.
struct SyntheticPanelConfig {
  std::vector<std::string> tickers{"AAA", "BBB"};
  int first_date = 20130102;  // YYYYMMDD; weekends are skipped
  std::size_t days = 40;
  SessionWindow session;
  double p0 = 100.0;
  double tick = 0.01;
  double sigma = 5e-4;         // per-minute volatility at the profile mean
  double missing_prob = 0.05;  // minute without a bar
  double stale_prob = 0.0;     // bar repeating the previous close
  double common_weight = 0.0;  // share of variance from a factor common to all tickers
  std::uint64_t seed = 0;
};

std::vector<RawBar> synthetic_bars(const SyntheticPanelConfig& config);

}  // namespace mkteff
