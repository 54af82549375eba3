#include "mkteff/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include <boost/math/tools/minima.hpp>

#include "mkteff/error.hpp"

namespace mkteff {

ScalarMinimum brent_minimize(const std::function<double(double)>& f, double lo, double hi,
                             double tolerance, unsigned long max_evaluations) {
  if (!(lo < hi)) throw Error(ErrorKind::Config, "brent_minimize: empty interval");
  // Boost stops once the bracket is within 2 * (t|x| + t/4) with t = 2^(1-bits).
  const int max_bits = std::numeric_limits<double>::digits / 2;
  const int bits = std::clamp(static_cast<int>(std::ceil(1.0 - std::log2(tolerance / 5.0))), 8,
                              max_bits);
  std::uintmax_t iters = max_evaluations;
  unsigned long calls = 0;
  bool any_finite = false;
  auto guarded = [&](double x) {
    ++calls;
    const double v = f(x);
    if (std::isfinite(v)) {
      any_finite = true;
      return v;
    }
    return std::numeric_limits<double>::max();
  };
  const auto [x, fx] = boost::math::tools::brent_find_minima(guarded, lo, hi, bits, iters);
  if (!any_finite) throw Error(ErrorKind::Numerical, "objective is non-finite at every probe");
  return {x, fx, calls};
}


SimplexMinimum nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                           std::vector<double> x0, double step, double ftol, double xtol,
                           unsigned max_evaluations) {
  const std::size_t d = x0.size();
  SimplexMinimum res;
  auto eval = [&](const std::vector<double>& x) {
    ++res.evaluations;
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::max();
  };
  if (d == 0) {
    res.value = eval(x0);
    res.x = std::move(x0);
    res.converged = true;
    return res;
  }

  std::vector<std::vector<double>> pts(d + 1, x0);
  std::vector<double> vals(d + 1);
  for (std::size_t i = 0; i < d; ++i) pts[i + 1][i] += step;
  for (std::size_t i = 0; i <= d; ++i) vals[i] = eval(pts[i]);

  std::vector<std::size_t> order(d + 1);
  std::vector<double> centroid(d), trial(d), trial2(d);
  auto along = [&](double coef, std::vector<double>& out, const std::vector<double>& worst) {
    for (std::size_t j = 0; j < d; ++j) out[j] = centroid[j] + coef * (worst[j] - centroid[j]);
  };

  while (res.evaluations < max_evaluations) {
    for (std::size_t i = 0; i <= d; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return vals[a] < vals[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[d - 1];

    double spread_x = 0.0;
    for (std::size_t i = 0; i <= d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        spread_x = std::max(spread_x, std::abs(pts[i][j] - pts[best][j]));
    if (vals[worst] - vals[best] <= ftol && spread_x <= xtol) {
      res.converged = true;
      break;
    }

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i <= d; ++i)
      if (i != worst)
        for (std::size_t j = 0; j < d; ++j) centroid[j] += pts[i][j] / static_cast<double>(d);

    along(-1.0, trial, pts[worst]);
    const double fr = eval(trial);
    if (fr < vals[best]) {
      along(-2.0, trial2, pts[worst]);
      const double fe = eval(trial2);
      if (fe < fr) {
        pts[worst] = trial2;
        vals[worst] = fe;
      } else {
        pts[worst] = trial;
        vals[worst] = fr;
      }
      continue;
    }
    if (fr < vals[second]) {
      pts[worst] = trial;
      vals[worst] = fr;
      continue;
    }
    const bool outside = fr < vals[worst];
    along(outside ? -0.5 : 0.5, trial2, pts[worst]);
    const double fc = eval(trial2);
    if (fc < (outside ? fr : vals[worst])) {
      pts[worst] = trial2;
      vals[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i <= d; ++i) {
      if (i == best) continue;
      for (std::size_t j = 0; j < d; ++j) pts[i][j] = pts[best][j] + 0.5 * (pts[i][j] - pts[best][j]);
      vals[i] = eval(pts[i]);
    }
  }
  const auto best = static_cast<std::size_t>(std::min_element(vals.begin(), vals.end()) - vals.begin());
  res.x = pts[best];
  res.value = vals[best];
  return res;
}

}  // namespace mkteff
