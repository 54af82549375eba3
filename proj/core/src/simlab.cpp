#include "mkteff/simlab.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <random>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "mkteff/error.hpp"
#include "mkteff/parallel.hpp"
#include "mkteff/rng.hpp"
#include "mkteff/volstale.hpp"

namespace mkteff {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kUnconditionalVariance = 2.5e-7;

struct VolParams {
  double omega = 0.0;
  double a1 = 0.0;
  double a2 = 0.0;  // ARCH lag 2
  double b = 0.0;   // GARCH lag 1
};

VolParams vol_params(VolModel m) {
  switch (m) {
    case VolModel::Constant: return {kUnconditionalVariance, 0.0, 0.0, 0.0};
    case VolModel::Arch: return {1.75e-7, 0.2, 0.1, 0.0};
    case VolModel::Garch1: return {1.25e-8, 0.1, 0.0, 0.85};
    case VolModel::Garch2: return {1.25e-8, 0.15, 0.0, 0.8};
  }
  throw Error(ErrorKind::Config, "unknown volatility model");
}

double pr_at(StaleModel m, double walk, std::size_t t, std::size_t n_half) {
  switch (m) {
    case StaleModel::None: return 0.0;
    case StaleModel::Walk10: return 0.1 + walk;
    case StaleModel::Walk20: return 0.2 + walk;
    case StaleModel::Seasonal20: {
      const double x = 8.0 * std::numbers::pi * static_cast<double>(t) / static_cast<double>(n_half);
      return 0.2 + 0.1 * std::sin(x) + walk;
    }
  }
  throw Error(ErrorKind::Config, "unknown staleness model");
}

double quantile_sorted(const std::vector<double>& s, double q) {
  const double pos = q * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

bool is_fixed(Variant v) { return v == Variant::AbsFixed || v == Variant::SquaredFixed; }
bool is_unfiltered(Variant v) {
  return v == Variant::AbsUnfiltered || v == Variant::SquaredUnfiltered;
}
EwmaMode mode_of(Variant v) {
  return static_cast<int>(v) % 2 == 0 ? EwmaMode::Abs : EwmaMode::Squared;
}

}  // namespace

std::string model_id(VolModel vol, StaleModel stale) {
  return fmt::format("s{},pr{}", static_cast<int>(vol), static_cast<int>(stale));
}

std::size_t SimPath::rounding_zeros(std::size_t lo, std::size_t hi) const {
  std::size_t n = 0;
  for (std::size_t i = lo + 1; i <= hi; ++i) n += rounded_ticks[i] == rounded_ticks[i - 1];
  return n;
}

Series SimPath::observed_returns(std::size_t lo, std::size_t hi) const {
  Series out;
  out.reserve(hi - lo);
  for (std::size_t i = lo + 1; i <= hi; ++i)
    out.emplace_back(std::log(static_cast<double>(observed_ticks[i]) /
                              static_cast<double>(observed_ticks[i - 1])));
  return out;
}

std::vector<double> SimPath::observed_prices(std::size_t lo, std::size_t hi) const {
  std::vector<double> out;
  out.reserve(hi - lo);
  for (std::size_t i = lo + 1; i <= hi; ++i) out.push_back(observed_price(i));
  return out;
}

SimPath simulate_observed_price(const SimModelConfig& cfg) {
  if (cfg.n_half == 0 || !(cfg.p0 > 0.0) || !(cfg.tick > 0.0) || !(cfg.nu >= 0.0))
    throw Error(ErrorKind::Config, "invalid simulation config");
  const VolParams vp = vol_params(cfg.vol);
  if (!(vp.a1 + vp.a2 + vp.b < 1.0)) throw Error(ErrorKind::Config, "persistence must be < 1");

  const std::size_t n = 2 * cfg.n_half;
  auto rng_price = make_rng(cfg.seed, {1});
  auto rng_pr = make_rng(cfg.seed, {2});
  auto rng_stale = make_rng(cfg.seed, {3});
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform;

  SimPath path;
  path.tick = cfg.tick;
  path.efficient.resize(n + 1);
  path.rounded_ticks.resize(n + 1);
  path.observed_ticks.resize(n + 1);
  path.sigma.assign(n + 1, kNaN);
  path.pr.assign(n + 1, 0.0);
  path.stale.assign(n + 1, 0);

  auto to_ticks = [&](double p) { return static_cast<std::int64_t>(std::llround(p / cfg.tick)); };
  path.efficient[0] = cfg.p0;
  path.rounded_ticks[0] = path.observed_ticks[0] = to_ticks(cfg.p0);

  // ARCH/GARCH state seeded at the unconditional variance
  double r2_1 = kUnconditionalVariance, r2_2 = kUnconditionalVariance;
  double s2_1 = kUnconditionalVariance;
  double walk = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    double s2 = kUnconditionalVariance;
    if (cfg.vol == VolModel::Constant) {
      s2 = 5e-4 * 5e-4;
    } else {
      s2 = vp.omega + vp.a1 * r2_1 + vp.a2 * r2_2 + vp.b * s2_1;
    }
    const double sigma = std::sqrt(s2);
    const double ret = sigma * normal(rng_price);
    path.sigma[i] = sigma;
    path.efficient[i] = path.efficient[i - 1] * (1.0 + ret);
    if (!(path.efficient[i] > 0.0)) throw Error(ErrorKind::Numerical, "simulated price left (0, inf)");
    path.rounded_ticks[i] = to_ticks(path.efficient[i]);
    r2_2 = r2_1;
    r2_1 = ret * ret;
    s2_1 = s2;

    walk += cfg.nu * normal(rng_pr);
    double pr = pr_at(cfg.stale, walk, i, cfg.n_half);
    if (pr < 0.0 || pr > 1.0) {
      ++path.clamped_steps;
      pr = std::clamp(pr, 0.0, 1.0);
    }
    path.pr[i] = pr;
    const bool b = uniform(rng_stale) < pr;
    path.stale[i] = b;
    path.observed_ticks[i] = b ? path.observed_ticks[i - 1] : path.rounded_ticks[i];
  }
  if (path.clamped_steps > 0)
    spdlog::warn("{} seed {}: staleness probability clamped into [0,1] at {} steps",
                 model_id(cfg.vol, cfg.stale), cfg.seed, path.clamped_steps);
  return path;
}

const char* variant_name(Variant v) noexcept {
  switch (v) {
    case Variant::AbsOptimized: return "v1_opt";
    case Variant::SquaredOptimized: return "v2_opt";
    case Variant::AbsFixed: return "v1_fixed";
    case Variant::SquaredFixed: return "v2_fixed";
    case Variant::AbsUnfiltered: return "v1_unfiltered";
    case Variant::SquaredUnfiltered: return "v2_unfiltered";
  }
  return "?";
}

ReplicateResult evaluate_replicate(const SimPath& path, std::size_t n_half,
                                   const std::vector<Variant>& variants, double fixed_alpha) {
  if (path.steps() != 2 * n_half) throw Error(ErrorKind::Config, "path length is not 2N");
  const Series train = path.observed_returns(0, n_half);
  const auto train_prices = path.observed_prices(0, n_half);
  const Series test = path.observed_returns(n_half, 2 * n_half);
  const auto test_prices = path.observed_prices(n_half, 2 * n_half);
  const RoundingModel train_model{train_prices, path.tick, {}, {}};
  const RoundingModel test_model{test_prices, path.tick, {}, {}};

  ReplicateResult res;
  res.n_round = path.rounding_zeros(n_half, 2 * n_half);
  const auto n = static_cast<double>(n_half);

  for (const Variant v : variants) {
    auto& m = res.variants[static_cast<std::size_t>(v)];
    const EwmaMode mode = mode_of(v);
    const FilterPolicy policy = is_unfiltered(v) ? FilterPolicy::Unfiltered : FilterPolicy::Filtered;
    m.alpha = is_fixed(v) ? fixed_alpha : optimize_alpha(train, train_model, mode, policy);
    const EwmaConfig cfg{m.alpha, mode};

    StalenessVolatilityTrace trace;
    Series kept;
    if (policy == FilterPolicy::Unfiltered) {
      trace = plain_ewma(test, cfg);
      kept = test;
      for (std::size_t i = 0; i < trace.start; ++i) kept[i].reset();
    } else {
      auto est = estimate_with_significance(test, cfg, test_model);
      trace = std::move(est.trace);
      kept = std::move(est.filtered.returns);
    }

    double err = 0.0;
    std::size_t terms = 0;
    for (std::size_t j = trace.start; j < trace.size(); ++j) {
      err += std::abs(trace.sigma[j] / path.sigma[n_half + 1 + j] - 1.0);
      ++terms;
    }
    m.mape = err / static_cast<double>(terms);
    std::size_t n_a = 0, n_0 = 0;
    for (const auto& r : kept) {
      if (!r) continue;
      ++n_a;
      n_0 += *r == 0.0;
    }
    m.deleted = 1.0 - static_cast<double>(n_a) / n;
    m.er_n = n_0 == 0 ? kNaN
                      : std::abs(static_cast<double>(res.n_round) * static_cast<double>(n_a) /
                                     (static_cast<double>(n_0) * n) -
                                 1.0);
    m.computed = true;
  }
  return res;
}

Summary summarize(std::vector<double> values) {
  std::erase_if(values, [](double x) { return !std::isfinite(x); });
  Summary s;
  s.count = values.size();
  if (values.empty()) {
    s.mean = s.lo = s.hi = kNaN;
    return s;
  }
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double x : values) sum += x;
  s.mean = sum / static_cast<double>(values.size());
  s.lo = quantile_sorted(values, 0.025);
  s.hi = quantile_sorted(values, 0.975);
  return s;
}

BenchmarkRow benchmark_model(VolModel vol, StaleModel stale, const BenchmarkOptions& opt,
                             std::vector<ReplicateResult>* raw) {
  if (opt.replicates == 0) throw Error(ErrorKind::Config, "replicates must be >= 1");
  std::vector<ReplicateResult> results(opt.replicates);
  std::vector<char> ok(opt.replicates, 0);  // not vector<bool>: written concurrently
  parallel_for(opt.replicates, opt.jobs, [&](std::size_t r) {
    SimModelConfig cfg;
    cfg.n_half = opt.n_half;
    cfg.vol = vol;
    cfg.stale = stale;
    cfg.seed = derive_seed(opt.seed, {static_cast<std::uint64_t>(vol),
                                      static_cast<std::uint64_t>(stale), r});
    try {
      results[r] = evaluate_replicate(simulate_observed_price(cfg), opt.n_half, opt.variants);
      results[r].replicate = r;
      ok[r] = 1;
    } catch (const Error& e) {
      spdlog::warn("{} replicate {} dropped: {}", model_id(vol, stale), r, e.what());
    }
  });

  BenchmarkRow row;
  row.vol = vol;
  row.stale = stale;
  std::vector<ReplicateResult> kept;
  for (std::size_t r = 0; r < opt.replicates; ++r)
    if (ok[r]) kept.push_back(results[r]);
  row.replicates = kept.size();
  for (const Variant v : opt.variants) {
    const auto k = static_cast<std::size_t>(v);
    std::vector<double> mape, alpha, er, del;
    for (const auto& r : kept) {
      mape.push_back(r.variants[k].mape);
      alpha.push_back(r.variants[k].alpha);
      er.push_back(r.variants[k].er_n);
      del.push_back(r.variants[k].deleted);
    }
    row.computed[k] = true;
    row.mape[k] = summarize(mape);
    row.alpha[k] = summarize(alpha);
    row.er_n[k] = summarize(er);
    row.deleted[k] = summarize(del);
  }
  if (raw) *raw = std::move(kept);
  return row;
}

std::vector<BenchmarkRow> benchmark_estimators(
    const std::vector<std::pair<VolModel, StaleModel>>& models, const BenchmarkOptions& options) {
  std::vector<BenchmarkRow> rows;
  rows.reserve(models.size());
  for (const auto& [vol, stale] : models) rows.push_back(benchmark_model(vol, stale, options));
  return rows;
}

std::vector<std::pair<VolModel, StaleModel>> all_models() {
  std::vector<std::pair<VolModel, StaleModel>> out;
  for (int v = 1; v <= 4; ++v)
    for (int s = 1; s <= 4; ++s) out.emplace_back(static_cast<VolModel>(v), static_cast<StaleModel>(s));
  return out;
}

namespace {

std::string cell(const Summary& s, bool computed) {
  if (!computed || s.count == 0) return ",,";
  return fmt::format("{:.6g},{:.6g},{:.6g}", s.mean, s.lo, s.hi);
}

}  // namespace

std::string volatility_table_csv(const std::vector<BenchmarkRow>& rows) {
  std::string out = "model,replicates";
  for (std::size_t k = 0; k < kVariants; ++k) {
    const char* name = variant_name(static_cast<Variant>(k));
    out += fmt::format(",mape_{0}_mean,mape_{0}_lo,mape_{0}_hi", name);
  }
  out += '\n';
  for (const auto& r : rows) {
    out += fmt::format("\"{}\",{}", r.id(), r.replicates);
    for (std::size_t k = 0; k < kVariants; ++k) out += "," + cell(r.mape[k], r.computed[k]);
    out += '\n';
  }
  return out;
}

std::string staleness_table_csv(const std::vector<BenchmarkRow>& rows) {
  constexpr std::array kCols = {Variant::AbsOptimized, Variant::SquaredOptimized};
  std::string out = "model,replicates";
  for (const Variant v : kCols) {
    const char* name = variant_name(v);
    for (const char* metric : {"alpha", "er_n", "deleted"})
      out += fmt::format(",{0}_{1}_mean,{0}_{1}_lo,{0}_{1}_hi", metric, name);
  }
  out += '\n';
  for (const auto& r : rows) {
    out += fmt::format("\"{}\",{}", r.id(), r.replicates);
    for (const Variant v : kCols) {
      const auto k = static_cast<std::size_t>(v);
      out += "," + cell(r.alpha[k], r.computed[k]);
      out += "," + cell(r.er_n[k], r.computed[k]);
      out += "," + cell(r.deleted[k], r.computed[k]);
    }
    out += '\n';
  }
  return out;
}

namespace {

// Row = previous sub-move, column = next sub-move (3, 4, 5).
constexpr double kTransition[3][3] = {
    {1.0 / 6, 1.0 / 3, 1.0 / 2},
    {1.0 / 2, 1.0 / 6, 1.0 / 3},
    {1.0 / 3, 1.0 / 2, 1.0 / 6},
};
constexpr double kFixtureReturn[6] = {0.0, -0.4, 0.4, -0.3, 0.1, 0.2};

}  // namespace

MarkovFixture markov_fixture(std::size_t length, std::uint64_t seed) {
  if (length < 2) throw Error(ErrorKind::Config, "fixture length must be >= 2");
  auto rng = make_rng(seed, {0x4d61726b6f76ULL});
  std::uniform_int_distribution<int> top(0, 2);
  std::uniform_real_distribution<double> u01;
  MarkovFixture fx;
  fx.returns.resize(length);
  fx.states.resize(length);
  int prev_sub = top(rng);  // stationary law of the sub-moves is uniform
  for (std::size_t i = 0; i < length; ++i) {
    int state = top(rng);
    if (state == 0) {
      const double x = u01(rng);
      int next = 0;
      double acc = kTransition[prev_sub][0];
      while (next < 2 && x >= acc) acc += kTransition[prev_sub][++next];
      prev_sub = next;
      state = 3 + next;
    }
    fx.states[i] = static_cast<std::uint8_t>(state);
    fx.returns[i] = kFixtureReturn[state];
  }
  return fx;
}

FixtureEntropies markov_fixture_entropies() {
  // 4-symbol image of each move: -0.4 -> 0, -0.3 and 0.1 -> 1, 0.2 -> 2, 0.4 -> 3
  constexpr int kSymbol[6] = {-1, 0, 3, 1, 1, 2};
  double marginal[6] = {0.0, 1.0 / 3, 1.0 / 3, 1.0 / 9, 1.0 / 9, 1.0 / 9};
  std::array<double, 4> p1{};
  std::array<double, 16> p2{};
  for (int a = 1; a < 6; ++a) {
    p1[static_cast<std::size_t>(kSymbol[a])] += marginal[a];
    for (int b = 1; b < 6; ++b) {
      const double joint = a >= 3 && b >= 3 ? kTransition[a - 3][b - 3] / 27.0 : marginal[a] * marginal[b];
      p2[static_cast<std::size_t>(kSymbol[a] * 4 + kSymbol[b])] += joint;
    }
  }
  auto entropy4 = [](auto& probs) {
    double h = 0.0;
    for (double p : probs)
      if (p > 0.0) h -= p * std::log(p);
    return h / std::log(4.0);
  };
  return {entropy4(p1), entropy4(p2) / 2.0};
}

std::vector<RawBar> synthetic_bars(const SyntheticPanelConfig& c) {
  using namespace std::chrono;
  if (c.tickers.empty() || c.days == 0) throw Error(ErrorKind::Config, "synthetic panel needs tickers and days");
  if (!(c.common_weight >= 0.0 && c.common_weight <= 1.0))
    throw Error(ErrorKind::Config, "common_weight must be in [0, 1]");
  year_month_day ymd{year{c.first_date / 10000}, month{static_cast<unsigned>(c.first_date / 100 % 100)},
                     day{static_cast<unsigned>(c.first_date % 100)}};
  if (!ymd.ok()) throw Error(ErrorKind::Config, "invalid first_date");
  std::vector<int> dates;
  for (sys_days d{ymd}; dates.size() < c.days; d += days{1}) {
    const weekday wd{d};
    if (wd == Saturday || wd == Sunday) continue;
    const year_month_day x{d};
    dates.push_back(static_cast<int>(x.year()) * 10000 + static_cast<int>(static_cast<unsigned>(x.month())) * 100 +
                    static_cast<int>(static_cast<unsigned>(x.day())));
  }
  const int width = c.session.minutes();
  // U-shaped profile normalized to mean one
  std::vector<double> profile(static_cast<std::size_t>(width));
  double mean = 0.0;
  for (int t = 0; t < width; ++t) {
    const double u = (t + 0.5) / width - 0.5;
    profile[static_cast<std::size_t>(t)] = 0.6 + 3.2 * u * u;
    mean += profile[static_cast<std::size_t>(t)];
  }
  for (double& v : profile) v *= width / mean;

  const std::size_t steps = dates.size() * static_cast<std::size_t>(width);
  std::vector<double> common(steps);
  {
    auto rng = make_rng(c.seed, {0x636f6d6d6f6eULL});
    std::normal_distribution<double> z;
    for (double& x : common) x = z(rng);
  }
  std::vector<RawBar> out;
  for (std::size_t k = 0; k < c.tickers.size(); ++k) {
    auto rng = make_rng(c.seed, {0x7469636bULL, k});
    std::normal_distribution<double> z;
    std::uniform_real_distribution<double> u01;
    double log_p = std::log(c.p0);
    double last_close = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t s = 0; s < steps; ++s) {
      const int t = static_cast<int>(s % static_cast<std::size_t>(width));
      const double shock = std::sqrt(c.common_weight) * common[s] + std::sqrt(1.0 - c.common_weight) * z(rng);
      log_p += c.sigma * profile[static_cast<std::size_t>(t)] * shock;
      const double missing = u01(rng);
      const double stale = u01(rng);
      if (missing < c.missing_prob) continue;
      double close = std::round(std::exp(log_p) / c.tick) * c.tick;
      if (stale < c.stale_prob && std::isfinite(last_close)) close = last_close;
      last_close = close;
      out.push_back({c.tickers[k], Timestamp{dates[s / static_cast<std::size_t>(width)], c.session.open_minute + t}, close});
    }
  }
  return out;
}

}  // namespace mkteff
