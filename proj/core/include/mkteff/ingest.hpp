#pragma once

// Raw 1-minute bar parsing, trading-session grid construction and cleaning.

#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "mkteff/series.hpp"

namespace mkteff {

/// Calendar date + minute of day.
struct Timestamp {
  int date = 0;    // YYYYMMDD
  int minute = 0;  // minutes since midnight

  friend auto operator<=>(const Timestamp&, const Timestamp&) = default;
  int year() const noexcept { return date / 10000; }
  int month_key() const noexcept { return date / 100; }  // YYYYMM
  std::string to_string() const;  // "YYYY-MM-DD HH:MM"
};

struct RawBar {
  std::string ticker;
  Timestamp time;
  double close = 0.0;
};

struct ColumnMap {
  std::string ticker = "ticker";
  std::string date = "date";
  std::string time = "time";
  std::string close = "close";
};

struct ParseResult {
  std::vector<RawBar> bars;
  std::vector<std::string> warnings;
};

/// Header names are matched case-insensitively, ignoring surrounding
/// angle brackets ("<CLOSE>" matches "close").
ParseResult parse_price_csv(std::istream& in, const ColumnMap& columns = {});

struct SessionWindow {
  int open_minute = 10 * 60;       // first in-session minute label
  int close_minute = 18 * 60 + 40;  // last in-session minute label
  int minutes() const noexcept { return close_minute - open_minute + 1; }
};

struct SessionGrid {
  SessionWindow window;
  int gap_threshold = 120;       // minutes
  std::vector<Timestamp> slots;  // strictly increasing
  /// Time step per slot in minutes: 1 inside a session, the configured
  /// closure delta (default 1) at the first slot of a day and after a gap.
  std::vector<double> delta;
  /// True when the slot follows an overnight boundary or a gap longer than
  /// gap_threshold.
  std::vector<bool> after_closure;

  std::size_t size() const noexcept { return slots.size(); }
  int intraday_index(std::size_t i) const noexcept { return slots[i].minute - window.open_minute; }
};

struct TickSize {
  double value = 0.0;
  int decimals = 0;
};

struct PriceSeries {
  std::string ticker;
  SessionGrid grid;
  Series prices;
  std::optional<TickSize> tick;

  std::size_t size() const noexcept { return prices.size(); }
};

/// Builds the grid from bars of a single ticker and places each
/// in-session bar in its slot.
PriceSeries build_session_grid(const std::vector<RawBar>& bars, const SessionWindow& session = {},
                               int gap_threshold = 120, double closure_delta = 1.0);

struct OutlierParams {
  std::size_t window = 20;  // k
  double trim_percent = 5;  // delta
  double multiplier = 5;    // c
  double slack = 0.05;      // gamma
};

struct CleaningReport {
  std::vector<std::size_t> outlier_slots;
  std::vector<std::size_t> split_slots;
  std::size_t input_prices = 0;
  std::size_t output_prices = 0;

  std::size_t outliers_removed() const noexcept { return outlier_slots.size(); }
};

struct CleanedSeries {
  PriceSeries series;
  CleaningReport report;
};

CleanedSeries detect_outliers(const PriceSeries& series, const OutlierParams& params = {});

/// Slots whose log-return from the previous present price exceeds 0.2 in
/// absolute value.
std::vector<std::size_t> detect_splits(const PriceSeries& series, double threshold = 0.2);

/// Maximum fractional digits, then the modal difference between sorted
/// distinct prices (ties toward the smaller increment).
TickSize estimate_tick_size(const PriceSeries& series);
TickSize estimate_tick_size(const std::vector<double>& prices);

/// Number of fractional digits needed to represent x (at most 8).
int fractional_digits(double x);

/// Log-return per slot against the previous present price; missing where
/// the price is missing or no earlier price exists.
Series log_returns(const Series& prices);

/// Last present price at or before each slot; NaN before the first one.
std::vector<double> carried_prices(const Series& prices);

}  // namespace mkteff
