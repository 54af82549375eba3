#include "mkteff/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "mkteff/error.hpp"
#include "mkteff/io.hpp"
#include "mkteff/parallel.hpp"

namespace mkteff {

using nlohmann::json;

namespace {

int parse_clock(const std::string& s) {
  int h = 0, m = 0;
  char colon = 0;
  std::istringstream in(s);
  if (!(in >> h >> colon >> m) || colon != ':' || h < 0 || h > 23 || m < 0 || m > 59)
    throw Error(ErrorKind::Config, "invalid clock time '" + s + "' (expected HH:MM)");
  return h * 60 + m;
}

std::uint64_t require_seed(const PipelineConfig& c) {
  if (!c.seed) throw Error(ErrorKind::Config, "a master seed is required for the Monte Carlo bounds");
  return *c.seed;
}

std::string format_clock(int minute) { return fmt::format("{:02d}:{:02d}", minute / 60, minute % 60); }

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw Error(ErrorKind::Config, where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw Error(ErrorKind::Config, "unknown config key '" + where + (where.empty() ? "" : ".") + key + "'");
  }
}

template <class T>
void read(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

}  // namespace

PipelineConfig parse_config(const std::string& text) {
  PipelineConfig c;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, std::string("config is not valid JSON: ") + e.what());
  }
  try {
    reject_unknown(j,
                   {"session", "gap_threshold", "closure_delta", "outliers", "tick", "day_scale", "profile", "alpha",
                    "arma", "alphabets", "n_sim", "bound_tolerance", "seed", "kl", "cluster",
                    "inputs", "output", "jobs"},
                   "");
    if (j.contains("session")) {
      const auto& s = j["session"];
      reject_unknown(s, {"open", "close"}, "session");
      if (s.contains("open")) c.session.open_minute = parse_clock(s["open"].get<std::string>());
      if (s.contains("close")) c.session.close_minute = parse_clock(s["close"].get<std::string>());
    }
    read(j, "gap_threshold", c.gap_threshold);
    read(j, "closure_delta", c.closure_delta);
    if (j.contains("outliers")) {
      const auto& o = j["outliers"];
      reject_unknown(o, {"window", "trim_percent", "multiplier", "slack"}, "outliers");
      read(o, "window", c.outliers.window);
      read(o, "trim_percent", c.outliers.trim_percent);
      read(o, "multiplier", c.outliers.multiplier);
      read(o, "slack", c.outliers.slack);
    }
    if (j.contains("tick") && !j["tick"].is_null()) c.tick = j["tick"].get<double>();
    if (j.contains("day_scale")) {
      const auto v = j["day_scale"].get<std::string>();
      if (v == "std") c.day_scale = DayScale::StdDev;
      else if (v == "rms") c.day_scale = DayScale::RootMeanSquare;
      else throw Error(ErrorKind::Config, "day_scale must be 'std' or 'rms'");
    }
    if (j.contains("profile")) {
      const auto& p = j["profile"];
      reject_unknown(p, {"mode", "trailing_days"}, "profile");
      if (p.contains("mode")) {
        const auto v = p["mode"].get<std::string>();
        if (v == "whole") c.profile_mode = ProfileMode::WholePeriod;
        else if (v == "trailing") c.profile_mode = ProfileMode::Trailing;
        else throw Error(ErrorKind::Config, "profile.mode must be 'whole' or 'trailing'");
      }
      read(p, "trailing_days", c.trailing_days);
    }
    if (j.contains("alpha")) {
      const auto& a = j["alpha"];
      reject_unknown(a, {"policy", "value", "mode"}, "alpha");
      if (a.contains("policy")) {
        const auto v = a["policy"].get<std::string>();
        if (v == "fixed") c.alpha_policy = AlphaPolicy::Fixed;
        else if (v == "optimized") c.alpha_policy = AlphaPolicy::Optimized;
        else throw Error(ErrorKind::Config, "alpha.policy must be 'fixed' or 'optimized'");
      }
      read(a, "value", c.alpha);
      if (a.contains("mode")) {
        const auto v = a["mode"].get<std::string>();
        if (v == "abs") c.ewma_mode = EwmaMode::Abs;
        else if (v == "squared") c.ewma_mode = EwmaMode::Squared;
        else throw Error(ErrorKind::Config, "alpha.mode must be 'abs' or 'squared'");
      }
    }
    if (j.contains("arma")) {
      const auto& a = j["arma"];
      reject_unknown(a, {"first_year_order", "max_total"}, "arma");
      if (a.contains("first_year_order")) {
        const auto v = a["first_year_order"].get<std::vector<int>>();
        if (v.size() != 2) throw Error(ErrorKind::Config, "arma.first_year_order must be [P, Q]");
        c.first_year_order = {v[0], v[1]};
      }
      read(a, "max_total", c.arma_max_total);
    }
    read(j, "alphabets", c.alphabets);
    read(j, "n_sim", c.n_sim);
    read(j, "bound_tolerance", c.bound_tolerance);
    if (j.contains("seed") && !j["seed"].is_null()) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("kl")) {
      const auto& k = j["kl"];
      reject_unknown(k, {"support", "pseudo_count"}, "kl");
      if (k.contains("support")) {
        const auto v = k["support"].get<std::string>();
        if (v == "union") c.kl.support = KlSupport::SmoothedUnion;
        else if (v == "intersection") c.kl.support = KlSupport::Intersection;
        else throw Error(ErrorKind::Config, "kl.support must be 'union' or 'intersection'");
      }
      read(k, "pseudo_count", c.kl.pseudo_count);
    }
    if (j.contains("cluster")) {
      const auto& k = j["cluster"];
      reject_unknown(k, {"alphabet", "kl_threshold", "comovement_threshold"}, "cluster");
      read(k, "alphabet", c.cluster_alphabet);
      read(k, "kl_threshold", c.kl_threshold);
      read(k, "comovement_threshold", c.comovement_threshold);
    }
    read(j, "inputs", c.inputs);
    read(j, "output", c.output);
    read(j, "jobs", c.jobs);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, std::string("config value has the wrong type: ") + e.what());
  }

  if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw Error(ErrorKind::Config, "alpha.value must be in (0, 1)");
  if (c.first_year_order.p < 0 || c.first_year_order.q < 0 ||
      c.first_year_order.p + c.first_year_order.q >= 6)
    throw Error(ErrorKind::Config, "arma.first_year_order must satisfy P, Q >= 0 and P + Q < 6");
  if (c.arma_max_total < 1 || c.arma_max_total > 6)
    throw Error(ErrorKind::Config, "arma.max_total must be in [1, 6]");
  for (int a : c.alphabets)
    if (a != 3 && a != 4) throw Error(ErrorKind::Config, "alphabets may contain only 3 and 4");
  if (c.alphabets.empty()) throw Error(ErrorKind::Config, "alphabets must not be empty");
  if (c.cluster_alphabet != 3 && c.cluster_alphabet != 4)
    throw Error(ErrorKind::Config, "cluster.alphabet must be 3 or 4");
  if (c.n_sim == 0) throw Error(ErrorKind::Config, "n_sim must be positive");
  if (c.tick && !(*c.tick > 0.0)) throw Error(ErrorKind::Config, "tick must be positive");
  if (c.gap_threshold < 1) throw Error(ErrorKind::Config, "gap_threshold must be >= 1");
  if (!(c.closure_delta > 0.0)) throw Error(ErrorKind::Config, "closure_delta must be positive");
  return c;
}

std::string config_to_json(const PipelineConfig& c) {
  json j;
  j["session"] = {{"open", format_clock(c.session.open_minute)},
                  {"close", format_clock(c.session.close_minute)}};
  j["gap_threshold"] = c.gap_threshold;
  j["closure_delta"] = c.closure_delta;
  j["outliers"] = {{"window", c.outliers.window},
                   {"trim_percent", c.outliers.trim_percent},
                   {"multiplier", c.outliers.multiplier},
                   {"slack", c.outliers.slack}};
  j["tick"] = c.tick ? json(*c.tick) : json(nullptr);
  j["day_scale"] = c.day_scale == DayScale::StdDev ? "std" : "rms";
  j["profile"] = {{"mode", c.profile_mode == ProfileMode::WholePeriod ? "whole" : "trailing"},
                  {"trailing_days", c.trailing_days}};
  j["alpha"] = {{"policy", c.alpha_policy == AlphaPolicy::Fixed ? "fixed" : "optimized"},
                {"value", c.alpha},
                {"mode", c.ewma_mode == EwmaMode::Abs ? "abs" : "squared"}};
  j["arma"] = {{"first_year_order", {c.first_year_order.p, c.first_year_order.q}},
               {"max_total", c.arma_max_total}};
  j["alphabets"] = c.alphabets;
  j["n_sim"] = c.n_sim;
  j["bound_tolerance"] = c.bound_tolerance;
  j["seed"] = c.seed ? json(*c.seed) : json(nullptr);
  j["kl"] = {{"support", c.kl.support == KlSupport::SmoothedUnion ? "union" : "intersection"},
             {"pseudo_count", c.kl.pseudo_count}};
  j["cluster"] = {{"alphabet", c.cluster_alphabet},
                  {"kl_threshold", c.kl_threshold},
                  {"comovement_threshold", c.comovement_threshold}};
  j["inputs"] = c.inputs;
  j["output"] = c.output;
  j["jobs"] = c.jobs;
  return j.dump(2);
}

std::string config_hash(const PipelineConfig& config) {
  // jobs and output location do not change results
  auto c = config;
  c.jobs = 0;
  c.output.clear();
  return hex64(fnv1a(config_to_json(c)));
}

std::vector<MonthRange> month_ranges(const SessionGrid& grid) {
  std::vector<MonthRange> out;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const int m = grid.slots[i].month_key();
    if (out.empty() || out.back().month != m) out.push_back({m, i, i});
    out.back().end = i + 1;
  }
  return out;
}

namespace {

std::map<int, std::size_t> day_index(const SessionGrid& grid) {
  std::map<int, std::size_t> days;
  for (const auto& s : grid.slots) days.emplace(s.date, 0);
  std::size_t k = 0;
  for (auto& [date, idx] : days) idx = k++;
  return days;
}

// Fills deseasonalized returns and the per-slot xi used to scale sigma.
void seasonality_stage(TickerData& d, const PipelineConfig& cfg, std::vector<double>& xi_slot) {
  const auto& grid = d.cleaned.grid;
  const auto days = day_index(grid);
  const auto width = static_cast<std::size_t>(grid.window.minutes());
  ReturnMatrix m(days.size(), width);
  std::vector<std::size_t> row(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    row[i] = days.at(grid.slots[i].date);
    m.at(row[i], static_cast<std::size_t>(grid.intraday_index(i))) = d.raw_returns[i];
  }
  d.profile = intraday_profile(m, cfg.day_scale);
  d.deseasonalized.assign(grid.size(), std::nullopt);
  xi_slot.assign(grid.size(), 1.0);

  if (cfg.profile_mode == ProfileMode::WholePeriod) {
    const auto des = deseasonalize(m, d.profile);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const auto t = static_cast<std::size_t>(grid.intraday_index(i));
      d.deseasonalized[i] = des.at(row[i], t);
      if (d.profile.xi[t]) xi_slot[i] = *d.profile.xi[t];
    }
    return;
  }
  // trailing: day k is scaled by the profile of the preceding days only
  std::vector<std::optional<SeasonalProfile>> per_day(m.days);
  for (std::size_t k = 0; k < m.days; ++k) {
    const std::size_t lo = k > cfg.trailing_days ? k - cfg.trailing_days : 0;
    if (lo == k) continue;
    ReturnMatrix window(k - lo, width);
    std::copy(m.values.begin() + static_cast<std::ptrdiff_t>(lo * width),
              m.values.begin() + static_cast<std::ptrdiff_t>(k * width), window.values.begin());
    try {
      per_day[k] = intraday_profile(window, cfg.day_scale);
    } catch (const Error&) {
    }
  }
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto t = static_cast<std::size_t>(grid.intraday_index(i));
    const auto& prof = per_day[row[i]];
    if (!prof || !prof->xi[t] || !d.raw_returns[i]) continue;
    if (*prof->xi[t] == 0.0) throw Error(ErrorKind::Degenerate, "seasonal profile is zero");
    d.deseasonalized[i] = *d.raw_returns[i] / *prof->xi[t];
    xi_slot[i] = *prof->xi[t];
  }
}

void staleness_stage(TickerData& d, const PipelineConfig& cfg, const std::vector<double>& xi_slot) {
  const auto prices = carried_prices(d.cleaned.prices);
  const double tick = d.cleaned.tick->value;
  d.standardized.assign(d.cleaned.size(), std::nullopt);
  d.staleness.assign(d.months.size(), {});
  for (std::size_t k = 0; k < d.months.size(); ++k) {
    const auto [month, b, e] = d.months[k];
    auto& st = d.staleness[k];
    try {
      const Series slice(d.deseasonalized.begin() + static_cast<std::ptrdiff_t>(b),
                         d.deseasonalized.begin() + static_cast<std::ptrdiff_t>(e));
      const RoundingModel model{std::span(prices).subspan(b, e - b), tick,
                                std::span(d.cleaned.grid.delta).subspan(b, e - b),
                                std::span(xi_slot).subspan(b, e - b)};
      st.alpha = cfg.alpha_policy == AlphaPolicy::Fixed
                     ? cfg.alpha
                     : optimize_alpha(slice, model, cfg.ewma_mode, FilterPolicy::Filtered);
      auto res = estimate_with_significance(slice, {st.alpha, cfg.ewma_mode}, model);
      st.staleness_detected = res.staleness_detected;
      st.input_zeros = res.filtered.input_zeros;
      st.retained_zeros = res.filtered.retained_zeros;
      st.flagged = res.filtered.flagged;
      for (std::size_t t = 0; t < slice.size(); ++t) {
        const auto& r = res.filtered.returns[t];
        const double s = res.trace.sigma[t];
        if (r && std::isfinite(s) && s > 0.0) d.standardized[b + t] = *r / s;
      }
      st.trace = std::move(res.trace);
    } catch (const Error& e) {
      st.error = StageError{"staleness", e.what()};
    }
  }
}

void arma_stage(TickerData& d, const PipelineConfig& cfg) {
  std::map<int, std::pair<std::size_t, std::size_t>> years;
  for (const auto& m : d.months) {
    const int y = m.month / 100;
    auto [it, fresh] = years.emplace(y, std::make_pair(m.begin, m.end));
    if (!fresh) it->second.second = m.end;
  }
  d.whitened.assign(d.cleaned.size(), std::nullopt);
  std::optional<ArmaOrder> selected;
  bool first = true;
  for (const auto& [year, range] : years) {
    const auto [b, e] = range;
    const Series slice(d.standardized.begin() + static_cast<std::ptrdiff_t>(b),
                       d.standardized.begin() + static_cast<std::ptrdiff_t>(e));
    const ArmaOrder order = first || !selected ? cfg.first_year_order : *selected;
    first = false;
    d.arma_orders[year] = order;
    try {
      const auto w = arma_whiten(slice, order);
      std::copy(w.residuals.begin(), w.residuals.end(),
                d.whitened.begin() + static_cast<std::ptrdiff_t>(b));
    } catch (const Error& e) {
      d.arma_errors[year] = StageError{"arma", e.what()};
    }
    try {
      selected = select_arma_order(slice, cfg.arma_max_total).best;
    } catch (const Error& e) {
      spdlog::info("{} {}: ARMA order not selected ({}); keeping the previous order", d.ticker, year,
                   e.what());
    }
  }
}

}  // namespace

TickerData prepare_ticker(const std::vector<RawBar>& bars, const PipelineConfig& cfg) {
  TickerData d;
  if (!bars.empty()) d.ticker = bars.front().ticker;
  const char* stage = "ingest";
  try {
    auto grid = build_session_grid(bars, cfg.session, cfg.gap_threshold, cfg.closure_delta);
    auto cleaned = detect_outliers(grid, cfg.outliers);
    d.cleaned = std::move(cleaned.series);
    d.cleaning = std::move(cleaned.report);
    if (cfg.tick)
      d.cleaned.tick = TickSize{*cfg.tick, fractional_digits(*cfg.tick)};
    else
      d.cleaned.tick = estimate_tick_size(d.cleaned);
    d.raw_returns = log_returns(d.cleaned.prices);
    d.months = month_ranges(d.cleaned.grid);

    stage = "seasonality";
    std::vector<double> xi_slot;
    seasonality_stage(d, cfg, xi_slot);

    stage = "staleness";
    staleness_stage(d, cfg, xi_slot);

    stage = "arma";
    arma_stage(d, cfg);
  } catch (const Error& e) {
    d.error = StageError{stage, e.what()};
  }
  return d;
}

namespace {

IntervalAnalysis analyze_interval_tagged(const Series& whitened, const Series& original,
                                         const std::vector<int>& alphabets, BoundCache& bounds,
                                         std::string& stage) {
  IntervalAnalysis out;
  std::vector<DiscretizationVerdict> verdicts;
  for (int a : alphabets) {
    stage = "discretize";
    const auto seq = discretize_quantile(whitened, a);
    stage = "efficiency";
    AlphabetResult r;
    r.alphabet = a;
    r.verdict = test_discretization(seq, bounds);
    r.most_frequent_block = most_frequent_block(block_frequencies(seq, r.verdict.k));
    verdicts.push_back(r.verdict);
    out.tests.push_back(std::move(r));
  }
  out.inefficient = classify_interval(std::move(verdicts)).inefficient;
  stage = "strategy";
  auto strategy = [](const Series& s) -> std::optional<StrategyResult> {
    try {
      return evaluate_simple_strategy(s);
    } catch (const Error& e) {
      spdlog::debug("strategy skipped: {}", e.what());
      return std::nullopt;
    }
  };
  out.strategy_filtered = strategy(whitened);
  if (!original.empty()) out.strategy_original = strategy(original);
  return out;
}

Series slice_of(const Series& s, const MonthRange& m) {
  return Series(s.begin() + static_cast<std::ptrdiff_t>(m.begin),
                s.begin() + static_cast<std::ptrdiff_t>(m.end));
}

}  // namespace

IntervalAnalysis analyze_interval(const Series& whitened, const Series& original,
                                  const std::vector<int>& alphabets, BoundCache& bounds) {
  std::string stage;
  return analyze_interval_tagged(whitened, original, alphabets, bounds, stage);
}

MonthReport analyze_month(const TickerData& d, std::size_t k, const PipelineConfig& cfg,
                          BoundCache& bounds) {
  MonthReport rep;
  rep.ticker = d.ticker;
  if (k < d.months.size()) {
    const auto& m = d.months[k];
    rep.month = m.month;
    rep.slots = m.end - m.begin;
    for (std::size_t i = m.begin; i < m.end; ++i) rep.prices += d.cleaned.prices[i].has_value();
    rep.outliers = static_cast<std::size_t>(
        std::count_if(d.cleaning.outlier_slots.begin(), d.cleaning.outlier_slots.end(),
                      [&](std::size_t s) { return s >= m.begin && s < m.end; }));
  }
  if (d.error) {
    rep.error = d.error;
    return rep;
  }
  if (k >= d.months.size()) {
    rep.error = StageError{"ingest", "month index out of range"};
    return rep;
  }
  const auto& m = d.months[k];
  if (k < d.staleness.size()) {
    rep.staleness = d.staleness[k];
    rep.staleness->trace.reset();  // kept on TickerData; reports stay small
    if (d.staleness[k].error) {
      rep.error = d.staleness[k].error;
      return rep;
    }
  }
  const int year = m.month / 100;
  if (auto it = d.arma_orders.find(year); it != d.arma_orders.end()) rep.arma_order = it->second;
  if (auto it = d.arma_errors.find(year); it != d.arma_errors.end()) {
    rep.error = it->second;
    return rep;
  }
  std::string stage;
  try {
    rep.analysis = analyze_interval_tagged(slice_of(d.whitened, m), slice_of(d.raw_returns, m),
                                           cfg.alphabets, bounds, stage);
  } catch (const Error& e) {
    rep.error = StageError{stage, e.what()};
  }
  return rep;
}

std::map<std::string, std::vector<RawBar>> load_inputs(const PipelineConfig& cfg) {
  if (cfg.inputs.empty()) throw Error(ErrorKind::Config, "no input files configured");
  std::map<std::string, std::vector<RawBar>> out;
  for (const auto& path : cfg.inputs) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open input file " + path);
    auto parsed = parse_price_csv(in);
    for (auto& bar : parsed.bars) out[bar.ticker].push_back(std::move(bar));
  }
  return out;
}

MonthReport run_month_pipeline(const PipelineConfig& cfg, const std::string& ticker, int month) {
  MonthReport rep;
  rep.ticker = ticker;
  rep.month = month;
  std::map<std::string, std::vector<RawBar>> bars;
  try {
    bars = load_inputs(cfg);
  } catch (const Error& e) {
    rep.error = StageError{"ingest", e.what()};
    return rep;
  }
  const auto it = bars.find(ticker);
  if (it == bars.end()) {
    rep.error = StageError{"ingest", "ticker " + ticker + " not found in the inputs"};
    return rep;
  }
  const auto data = prepare_ticker(it->second, cfg);
  const auto m = std::find_if(data.months.begin(), data.months.end(),
                              [&](const MonthRange& r) { return r.month == month; });
  if (m == data.months.end()) {
    rep.error = data.error ? *data.error
                           : StageError{"ingest", fmt::format("no data for month {}", month)};
    return rep;
  }
  std::uint64_t seed = 0;
  try {
    seed = require_seed(cfg);
  } catch (const Error& e) {
    rep.error = StageError{"efficiency", e.what()};
    return rep;
  }
  BoundCache bounds(cfg.n_sim, seed, cfg.jobs, cfg.bound_tolerance);
  return analyze_month(data, static_cast<std::size_t>(m - data.months.begin()), cfg, bounds);
}

ClusterOutputs cluster_tickers(const std::vector<TickerData>& tickers, const PipelineConfig& cfg) {
  ClusterOutputs out;
  std::vector<const TickerData*> usable;
  for (const auto& t : tickers)
    if (!t.error && count_present(t.whitened) >= 2) usable.push_back(&t);
  if (usable.size() < 2) return out;

  std::vector<std::string> labels;
  std::vector<SymbolSequence> seqs;
  for (const auto* t : usable) {
    try {
      seqs.push_back(discretize_quantile(t->whitened, cfg.cluster_alphabet));
      labels.push_back(t->ticker);
    } catch (const Error& e) {
      spdlog::warn("{}: excluded from KL clustering ({})", t->ticker, e.what());
    }
  }
  const std::size_t n = labels.size();
  if (n >= 2) {
    DistanceMatrix kl(labels);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
    std::vector<double> dist(pairs.size());
    parallel_for(pairs.size(), cfg.jobs, [&](std::size_t p) {
      dist[p] = kl_distance(seqs[pairs[p].first], seqs[pairs[p].second], cfg.kl);
    });
    for (std::size_t p = 0; p < pairs.size(); ++p) kl.set(pairs[p].first, pairs[p].second, dist[p]);
    out.kl_tree = upgma(kl);
    out.kl = std::move(kl);
  }

  std::vector<std::string> co_labels;
  for (const auto* t : usable) co_labels.push_back(t->ticker);
  DistanceMatrix co(co_labels);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < usable.size(); ++i)
    for (std::size_t j = i + 1; j < usable.size(); ++j) pairs.emplace_back(i, j);
  std::vector<double> dist(pairs.size());
  parallel_for(pairs.size(), cfg.jobs, [&](std::size_t p) {
    dist[p] = comovement_entropy(usable[pairs[p].first]->whitened, usable[pairs[p].second]->whitened).rate();
  });
  for (std::size_t p = 0; p < pairs.size(); ++p) co.set(pairs[p].first, pairs[p].second, dist[p]);
  out.comovement_tree = upgma(co);
  out.comovement = std::move(co);
  return out;
}

PipelineResult run_pipeline(const std::map<std::string, std::vector<RawBar>>& bars,
                            const PipelineConfig& cfg, bool with_clusters) {
  const std::uint64_t seed = require_seed(cfg);
  PipelineResult res;
  std::vector<const std::vector<RawBar>*> inputs;
  for (const auto& [ticker, b] : bars) inputs.push_back(&b);
  res.tickers.resize(inputs.size());
  parallel_for(inputs.size(), cfg.jobs, [&](std::size_t i) { res.tickers[i] = prepare_ticker(*inputs[i], cfg); });
  for (const auto& t : res.tickers)
    if (t.error) spdlog::warn("{}: {} stage failed: {}", t.ticker, t.error->stage, t.error->message);

  std::vector<std::pair<std::size_t, std::size_t>> tasks;
  for (std::size_t i = 0; i < res.tickers.size(); ++i) {
    if (res.tickers[i].months.empty()) tasks.emplace_back(i, 0);  // carries the ticker error
    for (std::size_t k = 0; k < res.tickers[i].months.size(); ++k) tasks.emplace_back(i, k);
  }
  // Parallelize across months when there are enough of them, otherwise
  // inside each Monte Carlo bound. Results do not depend on the split.
  const unsigned jobs = resolve_jobs(cfg.jobs);
  const bool across = tasks.size() >= jobs;
  BoundCache bounds(cfg.n_sim, seed, across ? 1 : jobs, cfg.bound_tolerance);
  res.reports.resize(tasks.size());
  parallel_for(tasks.size(), across ? jobs : 1, [&](std::size_t t) {
    res.reports[t] = analyze_month(res.tickers[tasks[t].first], tasks[t].second, cfg, bounds);
  });
  if (with_clusters) res.clusters = cluster_tickers(res.tickers, cfg);
  return res;
}

namespace {

std::string opt_double(const std::optional<double>& x) { return x ? format_double(*x) : ""; }

struct OutputFile {
  std::string name;
  std::string stage;
  std::string content;
};

std::vector<std::string> write_all(const std::filesystem::path& dir, std::vector<OutputFile> files,
                                   const std::string& hash) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw Error(ErrorKind::Io, "output directory " + dir.string() + " is not writable");
  json manifest;
  manifest["config_hash"] = hash;
  manifest["files"] = json::array();
  for (const auto& f : files) manifest["files"].push_back({{"file", f.name}, {"stage", f.stage}});
  files.push_back({"manifest.json", "report", manifest.dump(2) + "\n"});
  std::vector<std::string> names;
  for (const auto& f : files) {
    atomic_write(dir / f.name, f.content);
    names.push_back(f.name);
  }
  return names;
}

void add_cluster_files(std::vector<OutputFile>& files, const std::string& prefix,
                       const DistanceMatrix& m, const Dendrogram& tree, double threshold) {
  files.push_back({prefix + "_distance.csv", "cluster", distance_matrix_csv(m)});
  files.push_back({prefix + "_linkage.csv", "cluster", linkage_csv(tree)});
  files.push_back({prefix + "_dendrogram.nwk", "cluster", to_newick(tree) + "\n"});
  const auto assign = cut_dendrogram(tree, threshold);
  const auto order = leaf_order(tree);
  std::vector<std::size_t> position(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) position[order[i]] = i;
  std::string csv = "label,cluster,leaf_order\n";
  for (std::size_t i = 0; i < tree.leaves(); ++i)
    csv += fmt::format("{},{},{}\n", csv_field(tree.labels[i]), assign[i], position[i]);
  files.push_back({prefix + "_clusters.csv", "cluster", csv});
}

}  // namespace

std::vector<std::string> emit_reports(const std::vector<MonthReport>& reports,
                                      const ClusterOutputs* clusters,
                                      const std::filesystem::path& out_dir,
                                      const PipelineConfig& cfg) {
  if (reports.empty()) throw Error(ErrorKind::EmptyInput, "no month reports to emit");
  std::vector<MonthReport> sorted = reports;
  std::stable_sort(sorted.begin(), sorted.end(), [](const MonthReport& a, const MonthReport& b) {
    return std::tie(a.ticker, a.month) < std::tie(b.ticker, b.month);
  });
  const auto& alphabets = cfg.alphabets;

  std::string verdicts = "ticker,month";
  for (int a : alphabets) verdicts += fmt::format(",k{0},length{0},entropy{0},bound{0},rate{0}", a);
  verdicts += ",inefficient,error_stage,error\n";
  std::string strategy = "ticker,month";
  for (int a : alphabets) strategy += fmt::format(",most_frequent_block{}", a);
  strategy += ",strategy_filtered,trials_filtered,strategy_original,trials_original\n";
  std::string stale =
      "ticker,month,slots,prices,outliers,alpha,staleness_detected,input_zeros,retained_zeros,"
      "flagged,arma_p,arma_q\n";

  struct Degree {
    std::size_t months = 0, any = 0;
    std::map<int, std::size_t> per_alphabet;
  };
  std::map<std::string, Degree> degrees;

  for (const auto& r : sorted) {
    verdicts += fmt::format("{},{}", csv_field(r.ticker), r.month);
    strategy += fmt::format("{},{}", csv_field(r.ticker), r.month);
    auto& deg = degrees[r.ticker];
    for (int a : alphabets) {
      const AlphabetResult* t = nullptr;
      if (r.analysis)
        for (const auto& x : r.analysis->tests)
          if (x.alphabet == a) t = &x;
      if (t) {
        verdicts += fmt::format(",{},{},{},{},{}", t->verdict.k, t->verdict.length,
                                format_double(t->verdict.entropy), format_double(t->verdict.bound),
                                format_double(t->verdict.rate));
        strategy += "," + t->most_frequent_block;
        deg.per_alphabet[a] += t->verdict.inefficient();
      } else {
        verdicts += ",,,,,";
        strategy += ",";
      }
    }
    if (r.analysis) {
      ++deg.months;
      deg.any += r.analysis->inefficient;
    }
    verdicts += fmt::format(",{},{},{}\n", r.analysis ? (r.analysis->inefficient ? "1" : "0") : "",
                            r.error ? r.error->stage : "", r.error ? csv_field(r.error->message) : "");
    auto strat = [](const std::optional<StrategyResult>& s) {
      if (!s) return std::string(",");
      return opt_double(s->fraction()) + "," + std::to_string(s->trials);
    };
    strategy += "," + strat(r.analysis ? r.analysis->strategy_filtered : std::nullopt);
    strategy += "," + strat(r.analysis ? r.analysis->strategy_original : std::nullopt);
    strategy += '\n';
    stale += fmt::format("{},{},{},{},{}", csv_field(r.ticker), r.month, r.slots, r.prices, r.outliers);
    if (r.staleness && !r.staleness->error)
      stale += fmt::format(",{},{},{},{},{}", format_double(r.staleness->alpha),
                           r.staleness->staleness_detected ? 1 : 0, r.staleness->input_zeros,
                           r.staleness->retained_zeros, r.staleness->flagged);
    else
      stale += ",,,,,";
    if (r.arma_order)
      stale += fmt::format(",{},{}\n", r.arma_order->p, r.arma_order->q);
    else
      stale += ",,\n";
  }

  std::string degree_csv = "ticker,months";
  for (int a : alphabets) degree_csv += fmt::format(",inefficient{0},degree{0}", a);
  degree_csv += ",inefficient_any,degree\n";
  std::size_t total_months = 0, total_any = 0;
  for (const auto& [ticker, deg] : degrees) {
    degree_csv += fmt::format("{},{}", csv_field(ticker), deg.months);
    for (int a : alphabets) {
      const auto it = deg.per_alphabet.find(a);
      const std::size_t c = it == deg.per_alphabet.end() ? 0 : it->second;
      degree_csv += fmt::format(",{},{}", c,
                                deg.months ? format_double(static_cast<double>(c) / static_cast<double>(deg.months)) : "");
    }
    degree_csv += fmt::format(",{},{}\n", deg.any,
                              deg.months ? format_double(static_cast<double>(deg.any) / static_cast<double>(deg.months)) : "");
    total_months += deg.months;
    total_any += deg.any;
  }
  degree_csv += fmt::format("ALL,{}", total_months);
  for (std::size_t i = 0; i < alphabets.size(); ++i) degree_csv += ",,";
  degree_csv += fmt::format(",{},{}\n", total_any,
                            total_months ? format_double(static_cast<double>(total_any) / static_cast<double>(total_months)) : "");

  std::vector<OutputFile> files = {
      {"verdicts.csv", "efficiency", verdicts},
      {"degrees.csv", "efficiency", degree_csv},
      {"strategy.csv", "strategy", strategy},
      {"staleness.csv", "staleness", stale},
  };
  if (clusters) {
    if (clusters->kl && clusters->kl_tree)
      add_cluster_files(files, "kl", *clusters->kl, *clusters->kl_tree, cfg.kl_threshold);
    if (clusters->comovement && clusters->comovement_tree)
      add_cluster_files(files, "comovement", *clusters->comovement, *clusters->comovement_tree,
                        cfg.comovement_threshold);
  }
  return write_all(out_dir, std::move(files), config_hash(cfg));
}

std::vector<std::string> emit_clusters(const ClusterOutputs& clusters,
                                       const std::filesystem::path& out_dir,
                                       const PipelineConfig& cfg) {
  std::vector<OutputFile> files;
  if (clusters.kl && clusters.kl_tree)
    add_cluster_files(files, "kl", *clusters.kl, *clusters.kl_tree, cfg.kl_threshold);
  if (clusters.comovement && clusters.comovement_tree)
    add_cluster_files(files, "comovement", *clusters.comovement, *clusters.comovement_tree,
                      cfg.comovement_threshold);
  if (files.empty()) throw Error(ErrorKind::InsufficientData, "clustering needs at least two usable instruments");
  return write_all(out_dir, std::move(files), config_hash(cfg));
}

std::vector<std::string> emit_intermediates(const TickerData& d, const std::filesystem::path& out_dir,
                                            const PipelineConfig& cfg) {
  std::vector<OutputFile> files;
  if (!d.cleaned.grid.slots.empty()) {
    files.push_back({"prices_clean.csv", "ingest", price_series_csv(d.cleaned)});
    files.push_back({"cleaning_report.txt", "ingest", cleaning_report_text(d.cleaned, d.cleaning) +
                                                         (d.cleaned.tick ? fmt::format("tick: {}\ntick_decimals: {}\n",
                                                                                       format_double(d.cleaned.tick->value),
                                                                                       d.cleaned.tick->decimals)
                                                                         : std::string())});
  }
  if (!d.profile.xi.empty()) {
    std::string prof = "slot,minute,xi,days\n";
    for (std::size_t t = 0; t < d.profile.xi.size(); ++t)
      prof += fmt::format("{},{},{},{}\n", t,
                          Timestamp{0, d.cleaned.grid.window.open_minute + static_cast<int>(t)}.to_string().substr(11),
                          opt_double(d.profile.xi[t]), d.profile.days_per_slot[t]);
    files.push_back({"profile.csv", "seasonality", prof});
  }
  if (!d.raw_returns.empty()) {
    std::string ret = "timestamp,raw,deseasonalized,standardized,whitened\n";
    auto at = [](const Series& s, std::size_t i) { return i < s.size() ? opt_double(s[i]) : std::string(); };
    for (std::size_t i = 0; i < d.raw_returns.size(); ++i)
      ret += fmt::format("{},{},{},{},{}\n", d.cleaned.grid.slots[i].to_string(), at(d.raw_returns, i),
                         at(d.deseasonalized, i), at(d.standardized, i), at(d.whitened, i));
    files.push_back({"returns.csv", "arma", ret});
  }
  for (std::size_t k = 0; k < d.staleness.size(); ++k)
    if (d.staleness[k].trace)
      files.push_back({fmt::format("trace_{}.csv", d.months[k].month), "staleness",
                       trace_csv(*d.staleness[k].trace)});
  if (!d.arma_orders.empty()) {
    std::string arma;
    for (const auto& [year, order] : d.arma_orders) {
      arma += fmt::format("{}: [{}, {}]", year, order.p, order.q);
      if (auto it = d.arma_errors.find(year); it != d.arma_errors.end()) arma += "  # failed: " + it->second.message;
      arma += '\n';
    }
    files.push_back({"arma_orders.txt", "arma", arma});
  }
  if (d.error)
    files.push_back({"error.txt", d.error->stage, d.error->stage + ": " + d.error->message + "\n"});
  return write_all(out_dir / d.ticker, std::move(files), config_hash(cfg));
}

}  // namespace mkteff
