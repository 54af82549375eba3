#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Dense>

#include "mkteff/error.hpp"
#include "mkteff/optimize.hpp"
#include "mkteff/whiten.hpp"

namespace mkteff {

namespace {

constexpr int kMaxState = 8;
constexpr double kBoundary = 1.0 - 1e-6;

// Harvey state-space form of a zero-mean ARMA(p, q), state dimension
// m = max(p, q + 1):
//   a_{t+1} = T a_t + R e_{t+1},  y_t = a_t[0]
// T has phi in its first column and ones on the superdiagonal.
struct StateSpace {
  int m = 1;
  std::array<double, kMaxState> phi{};  // padded with zeros
  std::array<double, kMaxState> r{};    // (1, theta_1, ..., theta_{m-1})
  std::array<double, kMaxState * kMaxState> p0{};

  explicit StateSpace(const ArmaModel& model) {
    const int p = model.order.p, q = model.order.q;
    m = std::max(p, q + 1);
    if (m > kMaxState) throw Error(ErrorKind::Config, "ARMA order too large");
    for (int i = 0; i < p; ++i) phi[i] = model.phi[static_cast<std::size_t>(i)];
    r[0] = 1.0;
    for (int j = 0; j < q; ++j) r[j + 1] = model.theta[static_cast<std::size_t>(j)];
    stationary_covariance();
  }

  double& P(std::array<double, kMaxState * kMaxState>& a, int i, int j) const {
    return a[static_cast<std::size_t>(i * kMaxState + j)];
  }

  // Solves P = T P T' + R R' via vec(P) = (I - T (x) T)^{-1} vec(R R').
  void stationary_covariance() {
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
      t(i, 0) = phi[i];
      if (i + 1 < m) t(i, i + 1) = 1.0;
    }
    const int mm = m * m;
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(mm, mm);
    Eigen::VectorXd b(mm);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        b(i * m + j) = r[i] * r[j];
        for (int k = 0; k < m; ++k)
          for (int l = 0; l < m; ++l) a(i * m + j, k * m + l) -= t(i, k) * t(j, l);
      }
    const Eigen::VectorXd x = a.partialPivLu().solve(b);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) P(p0, i, j) = x(i * m + j);
  }

  // a <- T a
  void propagate_state(std::array<double, kMaxState>& a) const {
    const double a0 = a[0];
    for (int i = 0; i < m - 1; ++i) a[i] = phi[i] * a0 + a[i + 1];
    a[m - 1] = phi[m - 1] * a0;
  }

  // P <- T P T' + R R'
  void propagate_cov(std::array<double, kMaxState * kMaxState>& pm) const {
    std::array<double, kMaxState * kMaxState> tp{};
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        P(tp, i, j) = phi[i] * P(pm, 0, j) + (i + 1 < m ? P(pm, i + 1, j) : 0.0);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        P(pm, i, j) = P(tp, i, 0) * phi[j] + (j + 1 < m ? P(tp, i, j + 1) : 0.0) + r[i] * r[j];
  }
};

struct KalmanPass {
  double sum_sq = 0.0;     // sum v^2 / F
  double sum_log_f = 0.0;  // sum log F
  std::size_t n_obs = 0;
};

// Runs the filter; when `residuals` is non-null it receives v / sqrt(F).
KalmanPass run_kalman(const Series& y, const ArmaModel& model, Series* residuals) {
  const StateSpace ss(model);
  const int m = ss.m;
  std::array<double, kMaxState> a{};
  auto pm = ss.p0;
  KalmanPass out;
  if (residuals) residuals->assign(y.size(), std::nullopt);

  // Once F has settled and no observation is missing, the gain is constant
  // and the covariance recursion can be skipped.
  bool steady = false;
  int settled_steps = 0;
  double f_prev = -1.0;
  double f_steady = 0.0;
  std::array<double, kMaxState> gain{};  // T P[:,0] / F

  for (std::size_t t = 0; t < y.size(); ++t) {
    if (!y[t]) {
      steady = false;
      settled_steps = 0;
      ss.propagate_state(a);
      ss.propagate_cov(pm);
      continue;
    }
    const double v = *y[t] - a[0];
    if (steady) {
      out.sum_sq += v * v / f_steady;
      out.sum_log_f += std::log(f_steady);
      ++out.n_obs;
      if (residuals) (*residuals)[t] = v / std::sqrt(f_steady);
      ss.propagate_state(a);
      for (int i = 0; i < m; ++i) a[i] += gain[i] * v;
      continue;
    }
    const double f = ss.P(pm, 0, 0);
    if (!(f > 0.0) || !std::isfinite(f))
      throw Error(ErrorKind::Numerical, "non-positive innovation variance in Kalman filter");
    out.sum_sq += v * v / f;
    out.sum_log_f += std::log(f);
    ++out.n_obs;
    if (residuals) (*residuals)[t] = v / std::sqrt(f);

    std::array<double, kMaxState> k{};  // P[:,0] / F
    for (int i = 0; i < m; ++i) k[i] = ss.P(pm, i, 0) / f;
    for (int i = 0; i < m; ++i) a[i] += k[i] * v;
    std::array<double, kMaxState> pcol{};
    for (int i = 0; i < m; ++i) pcol[i] = ss.P(pm, i, 0);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) ss.P(pm, i, j) -= pcol[i] * pcol[j] / f;
    ss.propagate_state(a);
    ss.propagate_cov(pm);

    if (f_prev > 0.0 && std::abs(f - f_prev) <= 1e-13 * f) {
      if (++settled_steps >= 3) {
        steady = true;
        f_steady = ss.P(pm, 0, 0);
        // a_{t+1} = T a_t + (T P[:,0] / F) v with the settled predicted P
        std::array<double, kMaxState> tk{};
        for (int i = 0; i < m; ++i) tk[i] = ss.P(pm, i, 0);
        ss.propagate_state(tk);
        for (int i = 0; i < m; ++i) gain[i] = tk[i] / f_steady;
      }
    } else {
      settled_steps = 0;
    }
    f_prev = f;
  }
  return out;
}

double concentrated_loglik(const KalmanPass& k, double* sigma2_hat) {
  const auto n = static_cast<double>(k.n_obs);
  const double s2 = k.sum_sq / n;
  if (sigma2_hat) *sigma2_hat = s2;
  return -0.5 * n * (std::log(2.0 * std::numbers::pi) + 1.0 + std::log(s2)) - 0.5 * k.sum_log_f;
}

// Unconstrained u -> partial autocorrelations tanh(u) -> coefficients of a
// polynomial 1 - c_1 z - ... - c_k z^k with all roots outside the unit circle.
std::vector<double> pacf_to_coefficients(const double* u, int k) {
  std::vector<double> c;
  c.reserve(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) {
    const double rho = std::tanh(u[j]);
    std::vector<double> next(c.size() + 1);
    for (std::size_t i = 0; i < c.size(); ++i) next[i] = c[i] - rho * c[c.size() - 1 - i];
    next.back() = rho;
    c = std::move(next);
  }
  return c;
}

ArmaModel model_from_params(ArmaOrder order, const std::vector<double>& u) {
  ArmaModel model;
  model.order = order;
  model.phi = pacf_to_coefficients(u.data(), order.p);
  const auto c = pacf_to_coefficients(u.data() + order.p, order.q);
  model.theta.resize(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) model.theta[i] = -c[i];
  return model;
}

}  // namespace

double arma_loglik(const Series& y, const ArmaModel& model, double* sigma2_hat) {
  const auto pass = run_kalman(y, model, nullptr);
  if (pass.n_obs == 0) throw Error(ErrorKind::InsufficientData, "no observations");
  return concentrated_loglik(pass, sigma2_hat);
}

Series arma_residuals(const Series& y, const ArmaModel& model) {
  Series res;
  run_kalman(y, model, &res);
  return res;
}

ArmaFit fit_arma(const Series& y, ArmaOrder order) {
  if (order.p < 0 || order.q < 0) throw Error(ErrorKind::Config, "negative ARMA order");
  const std::size_t n = count_present(y);
  if (n < 2) throw Error(ErrorKind::InsufficientData, "ARMA fit needs observations");
  const int dim = order.p + order.q;

  auto objective = [&](const std::vector<double>& u) {
    for (double x : u)
      if (std::abs(x) > 15.0) return std::numeric_limits<double>::infinity();
    try {
      return -arma_loglik(y, model_from_params(order, u));
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  const auto opt = nelder_mead(objective, std::vector<double>(static_cast<std::size_t>(dim), 0.0),
                               0.3, 1e-7, 1e-5, 600u * static_cast<unsigned>(dim + 1));
  if (!opt.converged)
    throw Error(ErrorKind::FitFailure, "ARMA(" + std::to_string(order.p) + "," +
                                           std::to_string(order.q) + ") did not converge");
  for (double u : opt.x)
    if (std::abs(std::tanh(u)) > kBoundary)
      throw Error(ErrorKind::FitFailure,
                  "ARMA(" + std::to_string(order.p) + "," + std::to_string(order.q) +
                      ") estimate is on the stationarity/invertibility boundary");

  ArmaFit fit;
  fit.model = model_from_params(order, opt.x);
  fit.loglik = arma_loglik(y, fit.model, &fit.model.sigma2);
  fit.n_obs = n;
  fit.bic = -2.0 * fit.loglik + static_cast<double>(dim) * std::log(static_cast<double>(n));
  fit.evaluations = opt.evaluations;
  return fit;
}

OrderSelection select_arma_order(const Series& y, int max_total) {
  if (count_present(y) < 200)
    throw Error(ErrorKind::InsufficientData, "order selection needs >= 200 observations");
  OrderSelection sel;
  for (int total = 0; total < max_total; ++total) {
    for (int p = 0; p <= total; ++p) {
      try {
        sel.fits.push_back(fit_arma(y, {p, total - p}));
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::FitFailure) throw;
      }
    }
  }
  if (sel.fits.empty()) throw Error(ErrorKind::FitFailure, "no candidate ARMA order converged");
  const auto best = std::min_element(sel.fits.begin(), sel.fits.end(),
                                     [](const auto& a, const auto& b) { return a.bic < b.bic; });
  sel.best = best->model.order;
  return sel;
}

WhitenedSeries arma_whiten(const Series& y, ArmaOrder order) {
  if (order.p + order.q >= 6) throw Error(ErrorKind::Config, "ARMA order must satisfy P+Q < 6");
  WhitenedSeries out;
  if (count_present(y) == 0) {
    out.residuals.assign(y.size(), std::nullopt);
    out.fit.model.order = order;
    out.fit.model.phi.assign(static_cast<std::size_t>(order.p), 0.0);
    out.fit.model.theta.assign(static_cast<std::size_t>(order.q), 0.0);
    return out;
  }
  out.fit = fit_arma(y, order);
  out.residuals = arma_residuals(y, out.fit.model);
  return out;
}

}  // namespace mkteff
