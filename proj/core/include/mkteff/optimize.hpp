#pragma once

#include <functional>
#include <vector>

namespace mkteff {

struct ScalarMinimum {
  double x = 0.0;
  double value = 0.0;
  unsigned long evaluations = 0;
};

/// Derivative-free Brent minimization on [lo, hi].
/// `tolerance` is the requested absolute accuracy in x (bounded below by
/// roughly sqrt(machine epsilon) * |x|).
ScalarMinimum brent_minimize(const std::function<double(double)>& f, double lo, double hi,
                             double tolerance = 1e-6, unsigned long max_evaluations = 500);


struct SimplexMinimum {
  std::vector<double> x;
  double value = 0.0;
  unsigned evaluations = 0;
  bool converged = false;
};

/// Nelder-Mead downhill simplex. Converged when the spread of vertex values
/// is below `ftol` and every vertex is within `xtol` of the best one.
SimplexMinimum nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                           std::vector<double> x0, double step, double ftol = 1e-8,
                           double xtol = 1e-6, unsigned max_evaluations = 4000);

}  // namespace mkteff
