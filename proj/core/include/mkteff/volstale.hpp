#pragma once

// Joint volatility / price-staleness estimation: an EWMA volatility filter
// that separates rounding zeros from staleness zeros on the fly.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <numbers>
#include <span>
#include <vector>

#include "mkteff/series.hpp"

namespace mkteff {

enum class EwmaMode {
  Abs,      // sigma_n = a * |r| / mu1 + (1 - a) * sigma_{n-1}
  Squared,  // sigma_n^2 = a * r^2 + (1 - a) * sigma_{n-1}^2
};

inline constexpr double kMu1 = 0.79788456080286535588;  // sqrt(2/pi)

struct EwmaConfig {
  double alpha = 0.05;
  EwmaMode mode = EwmaMode::Abs;
};

/// One EWMA step.
double ewma_update(const EwmaConfig& config, double r_prev, double sigma_prev);

/// Initial volatility from the first non-zero return.
double ewma_initial(EwmaMode mode, double r_first);

/// Probability that a zero return is caused by rounding to the tick:
/// with R = tick / (price * sigma * sqrt(2 * delta_t)),
/// p = erf(R) + (exp(-R^2) - 1) / (R * sqrt(pi)), clamped to [0, 1].
double rounding_zero_prob(double price, double sigma, double tick, double delta_t);

/// The same probability expressed directly in R.
double rounding_zero_prob_r(double r);

enum class SlotState : std::uint8_t {
  Leading,        // before the first non-zero return
  Observed,       // non-zero return kept
  RetainedZero,   // zero kept as a rounding zero
  StaleZero,      // zero flagged as staleness
  PostRun,        // first non-zero return after a missing run, flagged
  NoTrade,        // missing in the input
};

struct StalenessVolatilityTrace {
  /// sigma[t] is the volatility forecast for return t (NaN before the start).
  std::vector<double> sigma;
  /// p[t] is the rounding-zero probability accumulated at step t.
  std::vector<double> p;
  std::vector<double> z;
  std::vector<std::uint32_t> n_save;
  std::vector<std::uint32_t> n_missing_run;  // N_0 after step t
  std::vector<SlotState> state;
  double sigma_next = 0.0;  // forecast one step past the last slot
  std::size_t start = 0;    // index of the first non-zero return

  std::size_t size() const noexcept { return sigma.size(); }
  bool flagged(std::size_t t) const noexcept {
    return state[t] == SlotState::StaleZero || state[t] == SlotState::PostRun ||
           state[t] == SlotState::Leading;
  }
};

struct FilteredReturns {
  Series returns;                    // staleness-flagged slots are missing
  std::size_t retained_zeros = 0;    // zeros kept as rounding zeros
  std::size_t input_zeros = 0;       // N_real
  std::size_t flagged = 0;           // slots newly set missing by the filter
};

struct FilterResult {
  StalenessVolatilityTrace trace;
  FilteredReturns filtered;
};

/// Probability source for the filter: p for step t given the previous
/// slot index and that slot's volatility forecast.
using ZeroProbFn = std::function<double(std::size_t prev, double sigma_prev)>;

/// Runs the filter with an arbitrary rounding-probability source.
FilterResult filter_and_estimate(const Series& returns, const EwmaConfig& config,
                                 const ZeroProbFn& zero_prob);

struct RoundingModel {
  std::span<const double> prices;   // last traded price per slot
  double tick = 0.01;
  std::span<const double> delta_t;  // per-slot time step; empty = all 1
  /// Per-slot multiplier turning the filter's sigma into raw-return units
  /// (the intraday profile when returns are deseasonalized); empty = all 1.
  std::span<const double> sigma_scale;
};

FilterResult filter_and_estimate(const Series& returns, const EwmaConfig& config,
                                 const RoundingModel& model);

/// Plain EWMA without zero filtering; missing slots carry the last value.
StalenessVolatilityTrace plain_ewma(const Series& returns, const EwmaConfig& config);

/// Returns true when the observed zero count exceeds the rounding
/// expectation by more than 1.96 binomial standard deviations.
bool staleness_significance(std::span<const double> p, std::size_t n_real_zeros);
bool staleness_significance(const StalenessVolatilityTrace& trace,
                            std::size_t n_real_zeros);

/// Filter, then test significance; when staleness is not significant the
/// result is the plain EWMA with every zero restored.
struct EstimateResult {
  StalenessVolatilityTrace trace;
  FilteredReturns filtered;
  bool staleness_detected = false;
};

EstimateResult estimate_with_significance(const Series& returns, const EwmaConfig& config,
                                          const RoundingModel& model);

/// Sum over kept returns of (sigma_t^2 - r_t^2)^2.
double forecast_error(const Series& kept_returns, const StalenessVolatilityTrace& trace);

enum class FilterPolicy {
  Filtered,    // filter with significance fallback
  Unfiltered,  // plain EWMA over every return
};

/// Grid points used to bracket the minimum of forecast_error.
std::span<const double> default_alpha_grid() noexcept;

/// Minimizes forecast_error over alpha in (1e-4, 1 - 1e-4). The objective is
/// evaluated on `grid` (ascending, empty = default_alpha_grid()), and Brent
/// then refines between the neighbours of the best grid point.
double optimize_alpha(const Series& returns, const RoundingModel& model, EwmaMode mode,
                      FilterPolicy policy = FilterPolicy::Filtered, std::span<const double> grid = {});

}  // namespace mkteff
