#pragma once

// End-to-end per-instrument pipeline: cleaning, whitening, staleness
// filtering, entropy verdicts, strategy test, clustering and report files.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mkteff/cluster.hpp"
#include "mkteff/efficiency.hpp"
#include "mkteff/ingest.hpp"
#include "mkteff/volstale.hpp"
#include "mkteff/whiten.hpp"

namespace mkteff {

enum class AlphaPolicy { Fixed, Optimized };
enum class ProfileMode { WholePeriod, Trailing };

struct PipelineConfig {
  SessionWindow session;
  int gap_threshold = 120;
  double closure_delta = 1.0;  // minutes credited to the first slot after a closure
  OutlierParams outliers;
  std::optional<double> tick;  // estimated per instrument when absent
  DayScale day_scale = DayScale::StdDev;
  ProfileMode profile_mode = ProfileMode::WholePeriod;
  std::size_t trailing_days = 20;  // profile window in trailing mode
  AlphaPolicy alpha_policy = AlphaPolicy::Fixed;
  double alpha = 0.05;
  EwmaMode ewma_mode = EwmaMode::Abs;
  ArmaOrder first_year_order{0, 1};
  int arma_max_total = 6;
  std::vector<int> alphabets{3, 4};
  std::size_t n_sim = 10000;
  double bound_tolerance = 0.0;  // relative l tolerance for bound reuse
  std::optional<std::uint64_t> seed;  // required by the Monte Carlo stage
  KlOptions kl;
  int cluster_alphabet = 4;
  double kl_threshold = 0.035;
  double comovement_threshold = 0.989;
  std::vector<std::string> inputs;
  std::string output = "out";
  unsigned jobs = 1;
};

/// Parses the JSON configuration tree; unknown keys are rejected.
PipelineConfig parse_config(const std::string& json_text);
std::string config_to_json(const PipelineConfig& config);
/// FNV-1a of the canonical JSON form, as 16 hex digits.
std::string config_hash(const PipelineConfig& config);

struct StageError {
  std::string stage;
  std::string message;
};

struct MonthRange {
  int month = 0;  // YYYYMM
  std::size_t begin = 0;
  std::size_t end = 0;
};

std::vector<MonthRange> month_ranges(const SessionGrid& grid);

struct MonthStaleness {
  std::optional<StalenessVolatilityTrace> trace;
  bool staleness_detected = false;
  double alpha = 0.0;
  std::size_t input_zeros = 0;
  std::size_t retained_zeros = 0;
  std::size_t flagged = 0;
  std::optional<StageError> error;
};

/// Everything computed for one instrument before the per-month analysis.
struct TickerData {
  std::string ticker;
  PriceSeries cleaned;
  CleaningReport cleaning;
  Series raw_returns;
  Series deseasonalized;
  SeasonalProfile profile;
  Series standardized;
  Series whitened;
  std::vector<MonthRange> months;
  std::vector<MonthStaleness> staleness;  // parallel to months
  std::map<int, ArmaOrder> arma_orders;   // year -> order applied
  std::map<int, StageError> arma_errors;  // year -> failure
  std::optional<StageError> error;        // whole-instrument failure
};

TickerData prepare_ticker(const std::vector<RawBar>& bars, const PipelineConfig& config);

struct AlphabetResult {
  int alphabet = 0;
  DiscretizationVerdict verdict;
  std::string most_frequent_block;
};

struct IntervalAnalysis {
  std::vector<AlphabetResult> tests;
  bool inefficient = false;
  std::optional<StrategyResult> strategy_filtered;
  std::optional<StrategyResult> strategy_original;
};

/// Discretization, entropy, Monte Carlo verdict and strategy for one
/// interval of whitened returns; `original` may be empty.
IntervalAnalysis analyze_interval(const Series& whitened, const Series& original,
                                  const std::vector<int>& alphabets, BoundCache& bounds);

struct MonthReport {
  std::string ticker;
  int month = 0;
  std::size_t slots = 0;
  std::size_t prices = 0;
  std::size_t outliers = 0;
  std::optional<MonthStaleness> staleness;
  std::optional<ArmaOrder> arma_order;
  std::optional<IntervalAnalysis> analysis;
  std::optional<StageError> error;
};

MonthReport analyze_month(const TickerData& data, std::size_t month_index,
                          const PipelineConfig& config, BoundCache& bounds);

/// Loads the configured inputs, prepares `ticker` and analyzes `month`
/// (YYYYMM). Failures come back as a stage-tagged error in the report.
MonthReport run_month_pipeline(const PipelineConfig& config, const std::string& ticker, int month);

/// Bars grouped by ticker, in ticker order, from every configured input.
std::map<std::string, std::vector<RawBar>> load_inputs(const PipelineConfig& config);

struct ClusterOutputs {
  std::optional<DistanceMatrix> kl;
  std::optional<Dendrogram> kl_tree;
  std::optional<DistanceMatrix> comovement;
  std::optional<Dendrogram> comovement_tree;
};

ClusterOutputs cluster_tickers(const std::vector<TickerData>& tickers, const PipelineConfig& config);

struct PipelineResult {
  std::vector<TickerData> tickers;
  std::vector<MonthReport> reports;
  ClusterOutputs clusters;
};

PipelineResult run_pipeline(const std::map<std::string, std::vector<RawBar>>& bars,
                            const PipelineConfig& config, bool with_clusters = true);

/// Writes the report files into `out_dir` and returns their names.
std::vector<std::string> emit_reports(const std::vector<MonthReport>& reports,
                                      const ClusterOutputs* clusters,
                                      const std::filesystem::path& out_dir,
                                      const PipelineConfig& config);

/// Distance matrices, linkages, Newick trees and cut assignments only.
std::vector<std::string> emit_clusters(const ClusterOutputs& clusters,
                                       const std::filesystem::path& out_dir,
                                       const PipelineConfig& config);

/// Intermediates of each instrument (cleaned prices, profile, residuals,
/// traces) under out_dir/<ticker>/.
std::vector<std::string> emit_intermediates(const TickerData& data,
                                            const std::filesystem::path& out_dir,
                                            const PipelineConfig& config);

}  // namespace mkteff
