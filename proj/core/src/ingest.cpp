#include "mkteff/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <string_view>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "mkteff/error.hpp"

namespace mkteff {

namespace {

std::string normalize_header(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '<' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '>' || s.back() == '"' || s.back() == '\r'))
    s.remove_suffix(1);
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto next = line.find(sep, pos);
    out.push_back(line.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  for (auto& f : out) {
    while (!f.empty() && (f.front() == ' ' || f.front() == '"')) f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '"' || f.back() == '\r')) f.remove_suffix(1);
  }
  return out;
}

bool parse_int(std::string_view s, int& out) {
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool valid_date(int yyyymmdd) {
  const int y = yyyymmdd / 10000, m = yyyymmdd / 100 % 100, d = yyyymmdd % 100;
  if (y < 1900 || m < 1 || m > 12 || d < 1) return false;
  static constexpr int kDays[] = {31, 29, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  return d <= kDays[m - 1];
}

// Accepts HHMMSS, HHMM or HH:MM[:SS]; seconds are truncated to the minute.
bool parse_time(std::string_view s, int& minute) {
  std::string digits;
  for (char c : s)
    if (c != ':') digits.push_back(c);
  if (digits.size() == 5 || digits.size() == 3) digits.insert(digits.begin(), '0');
  int v = 0;
  if (!parse_int(digits, v)) return false;
  int hh = 0, mm = 0, ss = 0;
  if (digits.size() == 6) {
    hh = v / 10000, mm = v / 100 % 100, ss = v % 100;
  } else if (digits.size() == 4) {
    hh = v / 100, mm = v % 100;
  } else {
    return false;
  }
  if (hh > 23 || mm > 59 || ss > 59) return false;
  minute = hh * 60 + mm;
  return true;
}

bool parse_price(std::string_view s, double& out) {
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

}  // namespace

std::string Timestamp::to_string() const {
  return fmt::format("{:04d}-{:02d}-{:02d} {:02d}:{:02d}", date / 10000, date / 100 % 100,
                     date % 100, minute / 60, minute % 60);
}

ParseResult parse_price_csv(std::istream& in, const ColumnMap& columns) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") != std::string::npos) break;
  }
  if (in.fail() && line.find_first_not_of(" \t\r") == std::string::npos)
    throw Error(ErrorKind::EmptyInput, "price file is empty");

  const char sep = line.find(';') != std::string::npos ? ';'
                   : line.find('\t') != std::string::npos ? '\t'
                                                           : ',';
  const auto header = split(line, sep);
  auto find_col = [&](const std::string& name) {
    const auto want = normalize_header(name);
    for (std::size_t i = 0; i < header.size(); ++i)
      if (normalize_header(header[i]) == want) return i;
    throw ParseError(line_no, "missing column '" + name + "'");
  };
  const std::size_t c_ticker = find_col(columns.ticker);
  const std::size_t c_date = find_col(columns.date);
  const std::size_t c_time = find_col(columns.time);
  const std::size_t c_close = find_col(columns.close);
  const std::size_t width = std::max({c_ticker, c_date, c_time, c_close}) + 1;

  ParseResult res;
  std::map<std::pair<std::string, Timestamp>, std::size_t> seen;
  std::vector<bool> dropped;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = split(line, sep);
    if (f.size() < width) throw ParseError(line_no, "expected at least " + std::to_string(width) + " fields");
    RawBar bar;
    bar.ticker = std::string(f[c_ticker]);
    if (bar.ticker.empty()) throw ParseError(line_no, "empty ticker");
    if (!parse_int(f[c_date], bar.time.date) || !valid_date(bar.time.date))
      throw ParseError(line_no, "unparseable date '" + std::string(f[c_date]) + "'");
    if (!parse_time(f[c_time], bar.time.minute))
      throw ParseError(line_no, "unparseable time '" + std::string(f[c_time]) + "'");
    if (!parse_price(f[c_close], bar.close))
      throw ParseError(line_no, "non-numeric close '" + std::string(f[c_close]) + "'");
    if (!(bar.close > 0.0)) throw ParseError(line_no, "close must be positive");

    auto key = std::make_pair(bar.ticker, bar.time);
    if (const auto it = seen.find(key); it != seen.end()) {
      auto msg = fmt::format("line {}: duplicate {} {}; keeping the last row", line_no, bar.ticker,
                             bar.time.to_string());
      spdlog::warn(msg);
      res.warnings.push_back(std::move(msg));
      dropped[it->second] = true;
    }
    seen[key] = res.bars.size();
    res.bars.push_back(std::move(bar));
    dropped.push_back(false);
  }
  if (res.bars.empty()) throw Error(ErrorKind::EmptyInput, "price file has no data rows");

  std::size_t w = 0;
  for (std::size_t i = 0; i < res.bars.size(); ++i) {
    if (dropped[i]) continue;
    if (w != i) res.bars[w] = std::move(res.bars[i]);
    ++w;
  }
  res.bars.resize(w);
  return res;
}

PriceSeries build_session_grid(const std::vector<RawBar>& bars, const SessionWindow& session,
                               int gap_threshold, double closure_delta) {
  if (bars.empty()) throw Error(ErrorKind::EmptyInput, "no bars to place on the session grid");
  if (!(closure_delta > 0.0)) throw Error(ErrorKind::Config, "closure delta must be positive");
  if (session.close_minute < session.open_minute)
    throw Error(ErrorKind::Config, "session closes before it opens");

  // date -> (minute -> close); later duplicates overwrite earlier ones
  std::map<int, std::map<int, double>> by_day;
  for (const auto& b : bars) {
    if (b.ticker != bars.front().ticker)
      throw Error(ErrorKind::Config, "build_session_grid expects a single ticker");
    if (b.time.minute < session.open_minute || b.time.minute > session.close_minute) continue;
    by_day[b.time.date][b.time.minute] = b.close;
  }

  PriceSeries ps;
  ps.ticker = bars.front().ticker;
  ps.grid.window = session;
  ps.grid.gap_threshold = gap_threshold;
  bool closure_pending = true;
  for (const auto& [date, minutes] : by_day) {
    closure_pending = true;  // overnight boundary
    int m = session.open_minute;
    auto push_slot = [&](int minute, std::optional<double> price) {
      ps.grid.slots.push_back({date, minute});
      ps.grid.delta.push_back(closure_pending ? closure_delta : 1.0);
      ps.grid.after_closure.push_back(closure_pending);
      ps.prices.push_back(price);
      closure_pending = false;
    };
    for (const auto& [minute, close] : minutes) {
      const int empty_run = minute - m;
      if (empty_run >= gap_threshold) {
        closure_pending = true;
      } else {
        for (int e = m; e < minute; ++e) push_slot(e, std::nullopt);
      }
      push_slot(minute, close);
      m = minute + 1;
    }
    const int tail = session.close_minute + 1 - m;
    if (tail > 0 && tail < gap_threshold)
      for (int e = m; e <= session.close_minute; ++e) push_slot(e, std::nullopt);
  }
  return ps;
}

CleanedSeries detect_outliers(const PriceSeries& series, const OutlierParams& params) {
  const std::size_t k = params.window;
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < series.size(); ++i)
    if (series.prices[i]) idx.push_back(i);
  if (k < 2 || idx.size() < k + 1)
    throw Error(ErrorKind::InsufficientData,
                "outlier detection needs at least k+1 = " + std::to_string(k + 1) + " prices");

  const auto trim = static_cast<std::size_t>(std::ceil(params.trim_percent / 100.0 * static_cast<double>(k) - 1e-12));
  if (2 * trim + 2 > k) throw Error(ErrorKind::Config, "trim leaves fewer than two prices");

  CleanedSeries out;
  out.series = series;
  out.report.input_prices = idx.size();
  std::vector<double> window(k);
  const std::size_t n = idx.size();
  for (std::size_t j = 0; j < n; ++j) {
    // k nearest present prices by position, excluding j, balanced where possible
    std::size_t left = std::min(j, k / 2);
    std::size_t right = std::min(n - 1 - j, k - left);
    left = std::min(j, k - right);
    std::size_t w = 0;
    for (std::size_t a = j - left; a < j; ++a) window[w++] = *series.prices[idx[a]];
    for (std::size_t a = j + 1; a <= j + right; ++a) window[w++] = *series.prices[idx[a]];
    std::sort(window.begin(), window.end());
    const std::size_t lo = trim, hi = k - trim;
    double mean = 0.0;
    for (std::size_t a = lo; a < hi; ++a) mean += window[a];
    mean /= static_cast<double>(hi - lo);
    double ss = 0.0;
    for (std::size_t a = lo; a < hi; ++a) ss += (window[a] - mean) * (window[a] - mean);
    const double sd = std::sqrt(ss / static_cast<double>(hi - lo - 1));
    const double p = *series.prices[idx[j]];
    if (std::abs(p - mean) >= params.multiplier * sd + params.slack) {
      out.report.outlier_slots.push_back(idx[j]);
      out.series.prices[idx[j]].reset();
    }
  }
  out.report.output_prices = n - out.report.outlier_slots.size();
  out.report.split_slots = detect_splits(out.series);
  return out;
}

std::vector<std::size_t> detect_splits(const PriceSeries& series, double threshold) {
  std::vector<std::size_t> out;
  std::optional<double> prev;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& p = series.prices[i];
    if (!p) continue;
    if (prev && std::abs(std::log(*p / *prev)) > threshold) {
      spdlog::warn("{}: possible unadjusted split at {} ({} -> {})", series.ticker,
                   i < series.grid.slots.size() ? series.grid.slots[i].to_string() : std::to_string(i),
                   *prev, *p);
      out.push_back(i);
    }
    prev = p;
  }
  return out;
}

int fractional_digits(double x) {
  for (int d = 0; d < 8; ++d) {
    const double scaled = x * std::pow(10.0, d);
    if (std::abs(scaled - std::round(scaled)) <= 1e-9 * std::max(1.0, std::abs(scaled))) return d;
  }
  return 8;
}

TickSize estimate_tick_size(const std::vector<double>& prices) {
  int decimals = 0;
  for (double p : prices) decimals = std::max(decimals, fractional_digits(p));
  const double scale = std::pow(10.0, decimals);
  std::vector<long long> units;
  units.reserve(prices.size());
  for (double p : prices) units.push_back(std::llround(p * scale));
  std::sort(units.begin(), units.end());
  units.erase(std::unique(units.begin(), units.end()), units.end());
  if (units.size() < 2)
    throw Error(ErrorKind::Degenerate, "tick size needs two distinct prices; supply it explicitly");

  std::map<long long, std::size_t> freq;  // ordered, so ties resolve to the smaller increment
  for (std::size_t i = 1; i < units.size(); ++i) ++freq[units[i] - units[i - 1]];
  long long best = 0;
  std::size_t best_count = 0;
  for (const auto& [diff, count] : freq) {
    if (count > best_count) {
      best = diff;
      best_count = count;
    }
  }
  TickSize tick;
  tick.value = static_cast<double>(best) / scale;
  tick.decimals = decimals;
  return tick;
}

TickSize estimate_tick_size(const PriceSeries& series) {
  return estimate_tick_size(present_values(series.prices));
}

Series log_returns(const Series& prices) {
  Series out(prices.size());
  std::optional<double> prev;
  for (std::size_t i = 0; i < prices.size(); ++i) {
    if (!prices[i]) continue;
    if (prev) out[i] = std::log(*prices[i] / *prev);
    prev = prices[i];
  }
  return out;
}

std::vector<double> carried_prices(const Series& prices) {
  std::vector<double> out(prices.size(), std::numeric_limits<double>::quiet_NaN());
  double last = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < prices.size(); ++i) {
    if (prices[i]) last = *prices[i];
    out[i] = last;
  }
  return out;
}

}  // namespace mkteff
