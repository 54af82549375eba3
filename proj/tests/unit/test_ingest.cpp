#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "mkteff/error.hpp"
#include "mkteff/ingest.hpp"
#include "mkteff/rng.hpp"

using namespace mkteff;

namespace {

ParseResult parse(const std::string& text) {
  std::istringstream in(text);
  return parse_price_csv(in);
}

RawBar bar(int date, int hh, int mm, double close, std::string ticker = "T") {
  return {std::move(ticker), {date, hh * 60 + mm}, close};
}

PriceSeries flat_series(const std::vector<double>& prices) {
  PriceSeries s;
  s.ticker = "T";
  for (std::size_t i = 0; i < prices.size(); ++i) {
    s.grid.slots.push_back({20140115, 600 + static_cast<int>(i)});
    s.grid.delta.push_back(1.0);
    s.grid.after_closure.push_back(i == 0);
    s.prices.emplace_back(prices[i]);
  }
  return s;
}

}  // namespace

TEST(Parse, SingleRow) {
  const auto res = parse("ticker,date,time,close\nGAZP,20140115,100100,147.20\n");
  ASSERT_EQ(res.bars.size(), 1u);
  EXPECT_EQ(res.bars[0].ticker, "GAZP");
  EXPECT_EQ(res.bars[0].time.date, 20140115);
  EXPECT_EQ(res.bars[0].time.minute, 10 * 60 + 1);
  EXPECT_DOUBLE_EQ(res.bars[0].close, 147.20);
  EXPECT_TRUE(res.warnings.empty());
  EXPECT_EQ(res.bars[0].time.to_string(), "2014-01-15 10:01");
}

TEST(Parse, BracketedHeaderCaseInsensitive) {
  const auto res = parse("<TICKER>,<PER>,<DATE>,<TIME>,<CLOSE>\nSBER,1,20140115,100000,99.5\n");
  ASSERT_EQ(res.bars.size(), 1u);
  EXPECT_DOUBLE_EQ(res.bars[0].close, 99.5);
}

TEST(Parse, BadCloseReportsLine) {
  try {
    parse("ticker,date,time,close\nGAZP,20140115,100100,147.20\nGAZP,20140115,100200,abc\n");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_EQ(e.kind(), ErrorKind::Parse);
  }
}

TEST(Parse, MissingColumnAndEmptyFile) {
  EXPECT_THROW(parse("ticker,date,close\nA,20140115,1\n"), ParseError);
  EXPECT_THROW(parse(""), Error);
  EXPECT_THROW(parse("ticker,date,time,close\n"), Error);
}

TEST(Parse, DuplicateKeepsLastWithWarning) {
  const auto res = parse("ticker,date,time,close\nA,20140115,100000,10.0\nA,20140115,100000,10.1\n");
  ASSERT_EQ(res.bars.size(), 1u);
  EXPECT_DOUBLE_EQ(res.bars[0].close, 10.1);
  EXPECT_EQ(res.warnings.size(), 1u);
}

TEST(Parse, TickersKeptApart) {
  const auto res = parse("ticker,date,time,close\nA,20140115,100000,1\nB,20140115,100000,2\nA,20140115,100100,3\n");
  ASSERT_EQ(res.bars.size(), 3u);
  std::size_t a = 0, b = 0;
  for (const auto& x : res.bars) (x.ticker == "A" ? a : b) += 1;
  EXPECT_EQ(a, 2u);
  EXPECT_EQ(b, 1u);
}

TEST(Grid, OvernightBoundaryIsConsecutive) {
  const auto s = build_session_grid({bar(20140115, 18, 40, 10.0), bar(20140116, 10, 0, 10.1)});
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s.grid.slots[1].date, 20140116);
  EXPECT_TRUE(s.grid.after_closure[1]);
  EXPECT_DOUBLE_EQ(s.grid.delta[1], 1.0);
}

TEST(Grid, LongGapIsClosure) {
  const auto s = build_session_grid({bar(20140115, 10, 0, 10.0), bar(20140115, 13, 30, 10.1)});
  ASSERT_GE(s.size(), 2u);
  std::size_t i = 0;
  while (s.grid.slots[i].minute != 13 * 60 + 30) ++i;
  EXPECT_EQ(i, 1u);
  EXPECT_TRUE(s.grid.after_closure[i]);
  EXPECT_DOUBLE_EQ(s.grid.delta[i], 1.0);
}

TEST(Grid, ClosureDeltaIsConfigurable) {
  const auto s = build_session_grid({bar(20140115, 10, 0, 10.0), bar(20140115, 10, 1, 10.05),
                                     bar(20140115, 13, 30, 10.1)},
                                    {}, 120, 5.0);
  ASSERT_EQ(s.size(), 3u);
  EXPECT_DOUBLE_EQ(s.grid.delta[0], 5.0);
  EXPECT_DOUBLE_EQ(s.grid.delta[1], 1.0);
  EXPECT_DOUBLE_EQ(s.grid.delta[2], 5.0);
  EXPECT_THROW(build_session_grid({bar(20140115, 10, 0, 10.0)}, {}, 120, 0.0), Error);
}

TEST(Grid, ShortGapFilledWithAbsent) {
  const auto s = build_session_grid({bar(20140115, 10, 0, 10.0), bar(20140115, 10, 5, 10.1)});
  ASSERT_GE(s.size(), 6u);
  for (int m = 1; m <= 4; ++m) {
    EXPECT_EQ(s.grid.slots[m].minute, 600 + m);
    EXPECT_FALSE(s.prices[m]);
    EXPECT_FALSE(s.grid.after_closure[m]);
  }
  EXPECT_TRUE(s.prices[5]);
}

TEST(Grid, DropsOutOfSessionAndRejectsEmpty) {
  const auto s = build_session_grid({bar(20140115, 9, 59, 1.0), bar(20140115, 10, 0, 2.0), bar(20140115, 18, 41, 3.0)});
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_GE(s.grid.slots[i].minute, 600);
    EXPECT_LE(s.grid.slots[i].minute, 18 * 60 + 40);
  }
  EXPECT_THROW(build_session_grid({}), Error);
}

TEST(Outliers, ConstantSeriesUntouched) {
  const auto out = detect_outliers(flat_series(std::vector<double>(50, 100.0)));
  EXPECT_EQ(out.report.outliers_removed(), 0u);
  EXPECT_EQ(out.report.output_prices, 50u);
}

TEST(Outliers, SingleDeviantRemoved) {
  std::vector<double> p(41, 100.0);
  p[20] = 101.0;
  const auto out = detect_outliers(flat_series(p));
  ASSERT_EQ(out.report.outliers_removed(), 1u);
  EXPECT_EQ(out.report.outlier_slots[0], 20u);
  EXPECT_FALSE(out.series.prices[20]);
}

TEST(Outliers, SpikeRemovedNeighborsKept) {
  auto rng = make_rng(11, {});
  std::normal_distribution<double> z(100.0, 0.1);
  std::vector<double> p(200);
  for (auto& v : p) v = z(rng);
  p[100] = 102.0;
  const auto out = detect_outliers(flat_series(p));
  ASSERT_EQ(out.report.outliers_removed(), 1u);
  EXPECT_EQ(out.report.outlier_slots[0], 100u);
}

TEST(Outliers, BruteForceRuleAgrees) {
  // direct evaluation of the rule with an independent window and trim
  auto rng = make_rng(12, {});
  std::normal_distribution<double> z(50.0, 0.05);
  std::uniform_real_distribution<double> u;
  std::vector<double> p(120);
  for (auto& v : p) v = u(rng) < 0.03 ? 50.0 + (u(rng) < 0.5 ? -1.0 : 1.0) : z(rng);
  const auto out = detect_outliers(flat_series(p));
  std::vector<std::size_t> expect;
  const int n = static_cast<int>(p.size());
  for (int i = 0; i < n; ++i) {
    // ten on each side, topped up from the far side at the edges
    std::vector<double> w;
    int l = i - 1, r = i + 1;
    int need_left = std::min(i, 10), need_right = 20 - need_left;
    if (n - 1 - i < need_right) {
      need_right = n - 1 - i;
      need_left = 20 - need_right;
    }
    for (int a = 0; a < need_left; ++a) w.push_back(p[l--]);
    for (int a = 0; a < need_right; ++a) w.push_back(p[r++]);
    std::sort(w.begin(), w.end());
    w = std::vector<double>(w.begin() + 1, w.end() - 1);
    double m = 0;
    for (double v : w) m += v;
    m /= static_cast<double>(w.size());
    double ss = 0;
    for (double v : w) ss += (v - m) * (v - m);
    const double sd = std::sqrt(ss / static_cast<double>(w.size() - 1));
    if (std::abs(p[i] - m) >= 5 * sd + 0.05) expect.push_back(static_cast<std::size_t>(i));
  }
  EXPECT_EQ(out.report.outlier_slots, expect);
  EXPECT_FALSE(expect.empty());
}

TEST(Outliers, NeedsEnoughPrices) {
  EXPECT_THROW(detect_outliers(flat_series(std::vector<double>(20, 1.0))), Error);
}

TEST(Splits, Examples) {
  EXPECT_EQ(detect_splits(flat_series({100.0, 50.0})).size(), 1u);
  EXPECT_TRUE(detect_splits(flat_series({100.0, 110.0})).empty());
  EXPECT_TRUE(detect_splits(flat_series({100.0})).empty());
}

TEST(Tick, Examples) {
  const auto t = estimate_tick_size(std::vector<double>{10.00, 10.05, 10.10, 10.15});
  EXPECT_NEAR(t.value, 0.05, 1e-12);
  EXPECT_EQ(t.decimals, 2);
  std::vector<double> p{1.00};
  for (int i = 0; i < 8; ++i) p.push_back(p.back() + 0.01);
  for (int i = 0; i < 2; ++i) p.push_back(p.back() + 0.02);
  EXPECT_NEAR(estimate_tick_size(p).value, 0.01, 1e-12);
  EXPECT_THROW(estimate_tick_size(std::vector<double>{5.0, 5.0}), Error);
  // tie between 0.01 and 0.02 resolves to the smaller
  EXPECT_NEAR(estimate_tick_size(std::vector<double>{1.00, 1.01, 1.03}).value, 0.01, 1e-12);
}

TEST(Returns, LogReturnsAndCarry) {
  const Series prices{std::nullopt, 100.0, std::nullopt, 110.0};
  const auto r = log_returns(prices);
  EXPECT_FALSE(r[0]);
  EXPECT_FALSE(r[1]);
  EXPECT_FALSE(r[2]);
  ASSERT_TRUE(r[3]);
  EXPECT_NEAR(*r[3], std::log(1.1), 1e-15);
  const auto c = carried_prices(prices);
  EXPECT_TRUE(std::isnan(c[0]));
  EXPECT_EQ(c[2], 100.0);
  EXPECT_EQ(c[3], 110.0);
}
