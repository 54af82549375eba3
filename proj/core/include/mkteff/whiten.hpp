#pragma once

// Intraday seasonality removal and ARMA prewhitening.

#include <cstddef>
#include <optional>
#include <vector>

#include "mkteff/series.hpp"

namespace mkteff {

/// Returns laid out day by intraday slot, row-major.
struct ReturnMatrix {
  std::size_t days = 0;
  std::size_t slots = 0;
  Series values;

  ReturnMatrix() = default;
  ReturnMatrix(std::size_t d, std::size_t s) : days(d), slots(s), values(d * s) {}

  std::optional<double>& at(std::size_t day, std::size_t slot) { return values[day * slots + slot]; }
  const std::optional<double>& at(std::size_t day, std::size_t slot) const {
    return values[day * slots + slot];
  }
};

/// How the per-day scale s_d of absolute returns is computed.
enum class DayScale {
  StdDev,          // population standard deviation of |R| (mean removed)
  RootMeanSquare,  // sqrt(mean(|R|^2))
};

struct SeasonalProfile {
  std::vector<std::optional<double>> xi;  // per intraday slot; empty when never observed
  std::vector<std::size_t> days_per_slot;
  std::vector<std::optional<double>> day_scale;  // empty for skipped days
  std::size_t days_used = 0;
};

/// xi_t = mean over usable days of |R_{d,t}| / s_d.
/// Days with fewer than two observations or zero scale are skipped.
SeasonalProfile intraday_profile(const ReturnMatrix& returns, DayScale scale = DayScale::StdDev);

/// R_{d,t} / xi_t; missing stays missing and slots without a profile value
/// become missing. Throws Degenerate when an observed slot has xi_t == 0.
ReturnMatrix deseasonalize(const ReturnMatrix& returns, const SeasonalProfile& profile);

struct ArmaOrder {
  int p = 0;
  int q = 0;
  friend bool operator==(const ArmaOrder&, const ArmaOrder&) = default;
};

/// Zero-mean ARMA: y_t = sum phi_i y_{t-i} + e_t + sum theta_j e_{t-j}.
struct ArmaModel {
  ArmaOrder order;
  std::vector<double> phi;
  std::vector<double> theta;
  double sigma2 = 1.0;
};

struct ArmaFit {
  ArmaModel model;
  double loglik = 0.0;
  double bic = 0.0;
  std::size_t n_obs = 0;
  unsigned evaluations = 0;
};

/// Exact Gaussian log-likelihood via the Kalman filter, with sigma^2
/// concentrated out. Missing observations skip the measurement update.
double arma_loglik(const Series& y, const ArmaModel& model, double* sigma2_hat = nullptr);

/// Maximum-likelihood fit over the stationary/invertible region.
/// Throws FitFailure when the optimizer does not converge or the
/// estimate sits on the stationarity/invertibility boundary.
ArmaFit fit_arma(const Series& y, ArmaOrder order);

struct OrderSelection {
  ArmaOrder best;
  std::vector<ArmaFit> fits;  // every converged candidate
};

/// BIC = -2 loglik + (P + Q) ln n over all P, Q >= 0 with P + Q < max_total.
OrderSelection select_arma_order(const Series& y, int max_total = 6);

/// One-step-ahead prediction errors divided by the square root of their
/// sigma-free variance; missing where the input is missing.
Series arma_residuals(const Series& y, const ArmaModel& model);

struct WhitenedSeries {
  Series residuals;
  ArmaFit fit;
};

WhitenedSeries arma_whiten(const Series& y, ArmaOrder order);

}  // namespace mkteff
