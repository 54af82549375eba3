#include "mkteff/volstale.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "mkteff/error.hpp"
#include "mkteff/optimize.hpp"

namespace mkteff {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kAlphaLo = 1e-4;
constexpr double kAlphaHi = 1.0 - 1e-4;
constexpr double kAlphaTolerance = 1e-6;
constexpr double kAlphaGrid[] = {kAlphaLo, 3e-4, 1e-3, 2e-3, 5e-3, 0.01, 0.02, 0.03, 0.05,
                                 0.075, 0.1,  0.15, 0.2,  0.3,  0.4,  0.5, 0.7,  0.9, kAlphaHi};

std::size_t first_nonzero(const Series& returns) {
  for (std::size_t i = 0; i < returns.size(); ++i)
    if (returns[i] && *returns[i] != 0.0) return i;
  throw Error(ErrorKind::EmptyInput, "no non-zero return to start the volatility estimate");
}

StalenessVolatilityTrace make_trace(std::size_t n) {
  StalenessVolatilityTrace tr;
  tr.sigma.assign(n, kNaN);
  tr.p.assign(n, 0.0);
  tr.z.assign(n, 0.0);
  tr.n_save.assign(n, 0);
  tr.n_missing_run.assign(n, 0);
  tr.state.assign(n, SlotState::NoTrade);
  return tr;
}

// Leading slots: zeros are dropped, missing slots stay missing.
void mark_leading(const Series& returns, StalenessVolatilityTrace& tr, FilteredReturns& out) {
  for (std::size_t i = 0; i < tr.start; ++i) {
    if (returns[i]) {
      tr.state[i] = SlotState::Leading;
      out.returns[i].reset();
    }
  }
}

}  // namespace

double ewma_update(const EwmaConfig& config, double r_prev, double sigma_prev) {
  const double a = config.alpha;
  if (config.mode == EwmaMode::Abs) return a * std::abs(r_prev) / kMu1 + (1.0 - a) * sigma_prev;
  return std::sqrt(a * r_prev * r_prev + (1.0 - a) * sigma_prev * sigma_prev);
}

double ewma_initial(EwmaMode mode, double r_first) {
  return mode == EwmaMode::Abs ? std::abs(r_first) / kMu1 : std::abs(r_first);
}

double rounding_zero_prob_r(double r) {
  if (!(r > 0.0) || !std::isfinite(r))
    throw Error(ErrorKind::Numerical, "rounding ratio must be positive and finite");
  constexpr double kSqrtPi = 1.77245385090551602730;
  const double p = std::erf(r) + std::expm1(-r * r) / (r * kSqrtPi);
  if (!std::isfinite(p)) throw Error(ErrorKind::Numerical, "non-finite rounding probability");
  return std::clamp(p, 0.0, 1.0);
}

double rounding_zero_prob(double price, double sigma, double tick, double delta_t) {
  const double r = tick / (price * sigma * std::sqrt(2.0 * delta_t));
  if (!(price > 0.0 && sigma > 0.0 && tick > 0.0 && delta_t > 0.0) || !std::isfinite(r)) {
    std::ostringstream os;
    os << "rounding probability undefined for price=" << price << " sigma=" << sigma
       << " tick=" << tick << " delta_t=" << delta_t;
    throw Error(ErrorKind::Numerical, os.str());
  }
  return rounding_zero_prob_r(r);
}

FilterResult filter_and_estimate(const Series& returns, const EwmaConfig& config,
                                 const ZeroProbFn& zero_prob) {
  const std::size_t n = returns.size();
  FilterResult res;
  auto& tr = res.trace;
  auto& out = res.filtered;
  tr = make_trace(n);
  out.returns = returns;
  tr.start = first_nonzero(returns);
  mark_leading(returns, tr, out);

  const std::size_t s = tr.start;
  tr.sigma[s] = ewma_initial(config.mode, *returns[s]);
  tr.state[s] = SlotState::Observed;

  double z = 0.0;
  std::uint32_t n_save = 0;
  std::uint32_t n0 = 0;
  for (std::size_t i = s; i < n; ++i)
    if (returns[i] && *returns[i] == 0.0) ++out.input_zeros;

  for (std::size_t t = s + 1; t <= n; ++t) {
    const std::size_t prev = t - 1;
    const auto& r = returns[prev];
    const double sig_prev = tr.sigma[prev];
    double sig = sig_prev;

    if (!r) {
      tr.state[prev] = SlotState::NoTrade;
      ++n0;
    } else if (*r == 0.0) {
      if (n_save > 0 && n0 == 0) {
        --n_save;
        sig = ewma_update(config, 0.0, sig_prev);
        tr.state[prev] = SlotState::RetainedZero;
        ++out.retained_zeros;
      } else {
        ++n0;
        tr.state[prev] = SlotState::StaleZero;
        out.returns[prev].reset();
        ++out.flagged;
      }
    } else {
      sig = ewma_update(config, *r / std::sqrt(static_cast<double>(n0) + 1.0), sig_prev);
      if (n0 > 0) {
        tr.state[prev] = SlotState::PostRun;
        out.returns[prev].reset();
        ++out.flagged;
      } else {
        tr.state[prev] = SlotState::Observed;
      }
      n0 = 0;
    }
    if (prev > s) tr.n_missing_run[prev] = n0;

    if (t == n) {
      tr.sigma_next = sig;
      break;
    }
    tr.sigma[t] = sig;

    const double p = zero_prob(prev, sig_prev);
    tr.p[t] = p;
    const double z_before = z;
    const bool kept = tr.state[prev] == SlotState::Observed ||
                      tr.state[prev] == SlotState::RetainedZero;
    if (kept) z += p;
    const auto advance = static_cast<std::uint32_t>(std::floor(z) - std::floor(z_before));
    n_save += advance;
    tr.z[t] = z;
    tr.n_save[t] = n_save;
  }
  return res;
}

FilterResult filter_and_estimate(const Series& returns, const EwmaConfig& config,
                                 const RoundingModel& model) {
  const std::size_t n = returns.size();
  if (model.prices.size() != n)
    throw Error(ErrorKind::Config, "price and return series lengths differ");
  if (!model.delta_t.empty() && model.delta_t.size() != n)
    throw Error(ErrorKind::Config, "time-step series length differs from returns");
  if (!model.sigma_scale.empty() && model.sigma_scale.size() != n)
    throw Error(ErrorKind::Config, "sigma scale length differs from returns");
  auto prob = [&](std::size_t prev, double sigma_prev) {
    const double dt = model.delta_t.empty() ? 1.0 : model.delta_t[prev];
    const double scale = model.sigma_scale.empty() ? 1.0 : model.sigma_scale[prev];
    return rounding_zero_prob(model.prices[prev], sigma_prev * scale, model.tick, dt);
  };
  return filter_and_estimate(returns, config, ZeroProbFn(prob));
}

StalenessVolatilityTrace plain_ewma(const Series& returns, const EwmaConfig& config) {
  const std::size_t n = returns.size();
  auto tr = make_trace(n);
  tr.start = first_nonzero(returns);
  for (std::size_t i = 0; i < tr.start; ++i)
    if (returns[i]) tr.state[i] = SlotState::Leading;
  tr.sigma[tr.start] = ewma_initial(config.mode, *returns[tr.start]);
  for (std::size_t t = tr.start + 1; t <= n; ++t) {
    const std::size_t prev = t - 1;
    const auto& r = returns[prev];
    double sig = tr.sigma[prev];
    if (r) {
      sig = ewma_update(config, *r, sig);
      tr.state[prev] = *r == 0.0 ? SlotState::RetainedZero : SlotState::Observed;
    }
    if (t == n)
      tr.sigma_next = sig;
    else
      tr.sigma[t] = sig;
  }
  return tr;
}

bool staleness_significance(std::span<const double> p, std::size_t n_real_zeros) {
  if (p.empty()) throw Error(ErrorKind::InsufficientData, "significance test on zero steps");
  double sum = 0.0;
  for (double x : p) sum += x;
  const double n = static_cast<double>(p.size());
  const double p_hat = sum / n;
  const double var = p_hat * (1.0 - p_hat) * n;
  return static_cast<double>(n_real_zeros) > sum + 1.96 * std::sqrt(var);
}

bool staleness_significance(const StalenessVolatilityTrace& trace, std::size_t n_real_zeros) {
  std::vector<double> p;
  p.reserve(trace.size());
  for (std::size_t t = trace.start + 1; t < trace.size(); ++t)
    if (trace.state[t - 1] != SlotState::NoTrade) p.push_back(trace.p[t]);
  return staleness_significance(p, n_real_zeros);
}

EstimateResult estimate_with_significance(const Series& returns, const EwmaConfig& config,
                                          const RoundingModel& model) {
  auto fr = filter_and_estimate(returns, config, model);
  EstimateResult res;
  if (fr.trace.size() > fr.trace.start + 1 &&
      staleness_significance(fr.trace, fr.filtered.input_zeros)) {
    res.trace = std::move(fr.trace);
    res.filtered = std::move(fr.filtered);
    res.staleness_detected = true;
    return res;
  }
  res.trace = plain_ewma(returns, config);
  res.filtered.returns = returns;
  for (std::size_t i = 0; i < res.trace.start; ++i) res.filtered.returns[i].reset();
  res.filtered.input_zeros = fr.filtered.input_zeros;
  res.filtered.retained_zeros = fr.filtered.input_zeros;
  res.filtered.flagged = 0;
  // keep the rounding probabilities for diagnostics
  res.trace.p = std::move(fr.trace.p);
  res.trace.z = std::move(fr.trace.z);
  return res;
}

double forecast_error(const Series& kept_returns, const StalenessVolatilityTrace& trace) {
  double err = 0.0;
  for (std::size_t t = trace.start + 1; t < trace.size(); ++t) {
    if (!kept_returns[t]) continue;
    const double s2 = trace.sigma[t] * trace.sigma[t];
    const double r2 = *kept_returns[t] * *kept_returns[t];
    err += (s2 - r2) * (s2 - r2);
  }
  return err;
}

std::span<const double> default_alpha_grid() noexcept { return kAlphaGrid; }

double optimize_alpha(const Series& returns, const RoundingModel& model, EwmaMode mode,
                      FilterPolicy policy, std::span<const double> grid) {
  if (grid.empty()) grid = kAlphaGrid;
  if (!std::is_sorted(grid.begin(), grid.end()) || grid.front() < kAlphaLo || grid.back() > kAlphaHi)
    throw Error(ErrorKind::Config, "alpha grid must be ascending inside (1e-4, 1 - 1e-4)");
  if (count_present(returns) < 100)
    throw Error(ErrorKind::InsufficientData, "alpha optimization needs >= 100 returns");
  auto objective = [&](double alpha) {
    const EwmaConfig cfg{alpha, mode};
    if (policy == FilterPolicy::Unfiltered) {
      const auto tr = plain_ewma(returns, cfg);
      Series kept = returns;
      for (std::size_t i = 0; i < tr.start; ++i) kept[i].reset();
      return forecast_error(kept, tr);
    }
    const auto res = estimate_with_significance(returns, cfg, model);
    return forecast_error(res.filtered.returns, res.trace);
  };
  std::size_t best = 0;
  double best_value = INFINITY;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double v = objective(grid[i]);
    if (v < best_value) best = i, best_value = v;
  }
  if (!std::isfinite(best_value)) throw Error(ErrorKind::Numerical, "alpha objective is not finite on the grid");
  if (grid.size() == 1) return grid.front();
  const double lo = grid[best == 0 ? 0 : best - 1];
  const double hi = grid[std::min(best + 1, grid.size() - 1)];
  const auto refined = brent_minimize(objective, lo, hi, kAlphaTolerance);
  return refined.value <= best_value ? refined.x : grid[best];
}

}  // namespace mkteff
