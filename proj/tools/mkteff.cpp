// mkteff: batch command-line front end for the efficiency pipeline.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "mkteff/error.hpp"
#include "mkteff/io.hpp"
#include "mkteff/parallel.hpp"
#include "mkteff/pipeline.hpp"
#include "mkteff/simlab.hpp"

namespace fs = std::filesystem;
using namespace mkteff;

namespace {

// Failure tagged with the pipeline stage it came from.
struct StageFailure {
  std::string stage;
  std::string message;
  int code = 1;
};

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<unsigned> jobs;
  std::vector<std::string> inputs;
  std::string log_level = "warn";
};

PipelineConfig load_config(const Globals& g) {
  PipelineConfig cfg;
  try {
    if (!g.config_path.empty()) cfg = parse_config(read_file(g.config_path));
  } catch (const Error& e) {
    throw StageFailure{"config", e.what(), 2};
  }
  if (g.seed) cfg.seed = g.seed;
  if (g.out) cfg.output = *g.out;
  if (g.jobs) cfg.jobs = *g.jobs;
  if (!g.inputs.empty()) cfg.inputs = g.inputs;
  return cfg;
}

std::map<std::string, std::vector<RawBar>> load_bars(const PipelineConfig& cfg) {
  try {
    return load_inputs(cfg);
  } catch (const Error& e) {
    throw StageFailure{"ingest", e.what()};
  }
}

template <class F>
auto in_stage(const char* stage, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw StageFailure{stage, e.what()};
  }
}

void print_written(const fs::path& dir, const std::vector<std::string>& files) {
  for (const auto& f : files) std::cout << (dir / f).string() << '\n';
}

// Prepares every instrument; whole-instrument failures are reported and
// make the command fail after the remaining outputs are written.
std::vector<TickerData> prepare_all(const std::map<std::string, std::vector<RawBar>>& bars,
                                    const PipelineConfig& cfg) {
  std::vector<const std::vector<RawBar>*> inputs;
  for (const auto& [ticker, b] : bars) inputs.push_back(&b);
  std::vector<TickerData> out(inputs.size());
  parallel_for(inputs.size(), cfg.jobs, [&](std::size_t i) { out[i] = prepare_ticker(*inputs[i], cfg); });
  return out;
}

int report_ticker_errors(const std::vector<TickerData>& tickers) {
  int failures = 0;
  for (const auto& t : tickers)
    if (t.error) {
      std::cerr << fmt::format("mkteff: error [{}] {}: {}\n", t.error->stage, t.ticker, t.error->message);
      ++failures;
    }
  return failures;
}

void warn_month_errors(const std::vector<MonthReport>& reports) {
  for (const auto& r : reports)
    if (r.error)
      std::cerr << fmt::format("mkteff: warning [{}] {} {}: {}\n", r.error->stage, r.ticker, r.month,
                               r.error->message);
}

int cmd_ingest(const Globals& g) {
  const auto cfg = load_config(g);
  const auto bars = load_bars(cfg);
  int failures = 0;
  for (const auto& [ticker, b] : bars) {
    try {
      auto grid = build_session_grid(b, cfg.session, cfg.gap_threshold);
      auto cleaned = detect_outliers(grid, cfg.outliers);
      cleaned.series.tick = cfg.tick ? TickSize{*cfg.tick, fractional_digits(*cfg.tick)}
                                     : estimate_tick_size(cleaned.series);
      const fs::path dir = fs::path(cfg.output) / ticker;
      fs::create_directories(dir);
      atomic_write(dir / "prices_clean.csv", price_series_csv(cleaned.series));
      atomic_write(dir / "cleaning_report.txt",
                   cleaning_report_text(cleaned.series, cleaned.report) +
                       fmt::format("tick: {}\ntick_decimals: {}\n", format_double(cleaned.series.tick->value),
                                   cleaned.series.tick->decimals));
      print_written(dir, {"prices_clean.csv", "cleaning_report.txt"});
    } catch (const Error& e) {
      std::cerr << fmt::format("mkteff: error [ingest] {}: {}\n", ticker, e.what());
      ++failures;
    }
  }
  return failures ? 1 : 0;
}

int cmd_whiten(const Globals& g) {
  const auto cfg = load_config(g);
  const auto tickers = prepare_all(load_bars(cfg), cfg);
  for (const auto& t : tickers) {
    const auto files = in_stage("report", [&] { return emit_intermediates(t, cfg.output, cfg); });
    print_written(fs::path(cfg.output) / t.ticker, files);
  }
  return report_ticker_errors(tickers) ? 1 : 0;
}

int cmd_analyze(const Globals& g, const std::string& ticker, int month, bool intermediates) {
  const auto cfg = load_config(g);
  if (!cfg.seed) throw StageFailure{"config", "--seed or a config seed is required", 2};
  if (!ticker.empty() && month != 0) {
    const auto rep = run_month_pipeline(cfg, ticker, month);
    warn_month_errors({rep});
    const auto files = in_stage("report", [&] { return emit_reports({rep}, nullptr, cfg.output, cfg); });
    print_written(cfg.output, files);
    return rep.error ? 1 : 0;
  }
  auto bars = load_bars(cfg);
  if (!ticker.empty()) {
    const auto it = bars.find(ticker);
    if (it == bars.end()) throw StageFailure{"ingest", "ticker " + ticker + " not found in the inputs"};
    bars = {{it->first, it->second}};
  }
  auto res = in_stage("efficiency", [&] { return run_pipeline(bars, cfg, false); });
  if (month != 0) {
    std::erase_if(res.reports, [&](const MonthReport& r) { return r.month != month; });
    if (res.reports.empty()) throw StageFailure{"ingest", fmt::format("no data for month {}", month)};
  }
  warn_month_errors(res.reports);
  print_written(cfg.output, in_stage("report", [&] { return emit_reports(res.reports, nullptr, cfg.output, cfg); }));
  if (intermediates)
    for (const auto& t : res.tickers)
      print_written(fs::path(cfg.output) / t.ticker,
                    in_stage("report", [&] { return emit_intermediates(t, cfg.output, cfg); }));
  return report_ticker_errors(res.tickers) ? 1 : 0;
}

int cmd_cluster(const Globals& g) {
  const auto cfg = load_config(g);
  const auto tickers = prepare_all(load_bars(cfg), cfg);
  const int failures = report_ticker_errors(tickers);
  const auto clusters = in_stage("cluster", [&] { return cluster_tickers(tickers, cfg); });
  print_written(cfg.output, in_stage("cluster", [&] { return emit_clusters(clusters, cfg.output, cfg); }));
  return failures ? 1 : 0;
}

int cmd_strategy(const Globals& g) {
  const auto cfg = load_config(g);
  const auto tickers = prepare_all(load_bars(cfg), cfg);
  std::string csv = "ticker,month,strategy_filtered,trials_filtered,strategy_original,trials_original\n";
  auto cell = [](const Series& s) {
    try {
      const auto r = evaluate_simple_strategy(s);
      const auto f = r.fraction();
      return (f ? format_double(*f) : std::string()) + "," + std::to_string(r.trials);
    } catch (const Error&) {
      return std::string(",");
    }
  };
  for (const auto& t : tickers) {
    if (t.error) continue;
    for (const auto& m : t.months) {
      const Series w(t.whitened.begin() + static_cast<std::ptrdiff_t>(m.begin),
                     t.whitened.begin() + static_cast<std::ptrdiff_t>(m.end));
      const Series r(t.raw_returns.begin() + static_cast<std::ptrdiff_t>(m.begin),
                     t.raw_returns.begin() + static_cast<std::ptrdiff_t>(m.end));
      csv += fmt::format("{},{},{},{}\n", csv_field(t.ticker), m.month, cell(w), cell(r));
    }
  }
  in_stage("report", [&] {
    fs::create_directories(cfg.output);
    atomic_write(fs::path(cfg.output) / "strategy_only.csv", csv);
    return 0;
  });
  print_written(cfg.output, {"strategy_only.csv"});
  return report_ticker_errors(tickers) ? 1 : 0;
}

int cmd_report(const Globals& g, bool intermediates) {
  const auto cfg = load_config(g);
  if (!cfg.seed) throw StageFailure{"config", "--seed or a config seed is required", 2};
  const auto bars = load_bars(cfg);
  const auto res = in_stage("efficiency", [&] { return run_pipeline(bars, cfg, true); });
  warn_month_errors(res.reports);
  print_written(cfg.output, in_stage("report", [&] { return emit_reports(res.reports, &res.clusters, cfg.output, cfg); }));
  if (intermediates)
    for (const auto& t : res.tickers)
      print_written(fs::path(cfg.output) / t.ticker,
                    in_stage("report", [&] { return emit_intermediates(t, cfg.output, cfg); }));
  return report_ticker_errors(res.tickers) ? 1 : 0;
}

struct SimulateArgs {
  std::size_t replicates = 100;
  std::size_t n_half = 100000;
  std::vector<std::string> models;  // "s1,pr3" style; empty means all
  std::string variants = "all";
};

int cmd_simulate(const Globals& g, const SimulateArgs& a) {
  if (!g.seed) throw StageFailure{"config", "simulate requires --seed", 2};
  BenchmarkOptions opt;
  opt.replicates = a.replicates;
  opt.n_half = a.n_half;
  opt.seed = *g.seed;
  opt.jobs = g.jobs.value_or(1);
  if (a.variants == "abs") opt.variants = {Variant::AbsOptimized, Variant::AbsFixed, Variant::AbsUnfiltered};
  else if (a.variants == "squared")
    opt.variants = {Variant::SquaredOptimized, Variant::SquaredFixed, Variant::SquaredUnfiltered};
  else if (a.variants != "all") throw StageFailure{"config", "--variants must be all, abs or squared", 2};

  std::vector<std::pair<VolModel, StaleModel>> models;
  for (const auto& m : all_models())
    if (a.models.empty() ||
        std::find(a.models.begin(), a.models.end(), model_id(m.first, m.second)) != a.models.end())
      models.push_back(m);
  if (models.empty()) throw StageFailure{"config", "no model matches --model", 2};

  const auto rows = in_stage("simulate", [&] { return benchmark_estimators(models, opt); });
  const fs::path out = g.out.value_or("out");
  in_stage("report", [&] {
    fs::create_directories(out);
    atomic_write(out / "volatility_table.csv", volatility_table_csv(rows));
    atomic_write(out / "staleness_table.csv", staleness_table_csv(rows));
    return 0;
  });
  print_written(out, {"volatility_table.csv", "staleness_table.csv"});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mkteff: statistical efficiency of intraday price series"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "master seed for every stochastic stage");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--jobs", g.jobs, "worker threads (0 = all cores)");
  app.add_option("--input", g.inputs, "price CSV (repeatable; overrides the config inputs)");
  app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error or off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  auto* ingest = app.add_subcommand("ingest", "clean prices onto the session grid");
  auto* whiten = app.add_subcommand("whiten", "deseasonalize, filter staleness and compute ARMA residuals");

  std::string ticker;
  int month = 0;
  bool intermediates = false;
  auto* analyze = app.add_subcommand("analyze", "monthly entropy verdicts and strategy results");
  analyze->add_option("--ticker", ticker, "restrict to one instrument");
  analyze->add_option("--month", month, "restrict to one month (YYYYMM)");
  analyze->add_flag("--intermediates", intermediates, "also write per-instrument intermediates");

  auto* cluster = app.add_subcommand("cluster", "KL and co-movement distance clustering");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "synthetic benchmark of the volatility estimators");
  simulate->add_option("--replicates", sim.replicates, "replicates per model")->check(CLI::PositiveNumber);
  simulate->add_option("--n-half", sim.n_half, "returns per training half")->check(CLI::PositiveNumber);
  simulate->add_option("--model", sim.models, "model id such as s1,pr3 (repeatable)")->delimiter(';');
  simulate->add_option("--variants", sim.variants, "all, abs or squared");

  auto* strategy = app.add_subcommand("strategy", "simple trading strategy per month");
  bool report_intermediates = false;
  auto* report = app.add_subcommand("report", "full pipeline with clustering and every report file");
  report->add_flag("--intermediates", report_intermediates, "also write per-instrument intermediates");

  CLI11_PARSE(app, argc, argv);

  auto logger = spdlog::stderr_color_mt("mkteff");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::from_str(g.log_level));

  try {
    if (*ingest) return cmd_ingest(g);
    if (*whiten) return cmd_whiten(g);
    if (*analyze) return cmd_analyze(g, ticker, month, intermediates);
    if (*cluster) return cmd_cluster(g);
    if (*simulate) return cmd_simulate(g, sim);
    if (*strategy) return cmd_strategy(g);
    if (*report) return cmd_report(g, report_intermediates);
  } catch (const StageFailure& f) {
    std::cerr << fmt::format("mkteff: error [{}]: {}\n", f.stage, f.message);
    return f.code;
  } catch (const Error& e) {
    std::cerr << fmt::format("mkteff: error [{}]: {}\n", to_string(e.kind()), e.what());
    return 1;
  } catch (const std::exception& e) {
    std::cerr << fmt::format("mkteff: error: {}\n", e.what());
    return 1;
  }
  return 0;
}
