#include "mkteff/whiten.hpp"

#include <cmath>

#include "mkteff/error.hpp"

namespace mkteff {

SeasonalProfile intraday_profile(const ReturnMatrix& returns, DayScale scale) {
  SeasonalProfile prof;
  prof.xi.assign(returns.slots, std::nullopt);
  prof.days_per_slot.assign(returns.slots, 0);
  prof.day_scale.assign(returns.days, std::nullopt);
  std::vector<double> sums(returns.slots, 0.0);

  for (std::size_t d = 0; d < returns.days; ++d) {
    double s1 = 0.0, s2 = 0.0;
    std::size_t n = 0;
    for (std::size_t t = 0; t < returns.slots; ++t) {
      if (const auto& r = returns.at(d, t)) {
        s1 += std::abs(*r);
        s2 += *r * *r;
        ++n;
      }
    }
    if (n < 2) continue;
    const double mean = s1 / static_cast<double>(n);
    double sd = std::sqrt(s2 / static_cast<double>(n));
    if (scale == DayScale::StdDev) {
      double ss = 0.0;
      for (std::size_t t = 0; t < returns.slots; ++t)
        if (const auto& r = returns.at(d, t)) ss += (std::abs(*r) - mean) * (std::abs(*r) - mean);
      sd = std::sqrt(ss / static_cast<double>(n));
    }
    if (!(sd > 0.0)) continue;
    prof.day_scale[d] = sd;
    ++prof.days_used;
    for (std::size_t t = 0; t < returns.slots; ++t) {
      if (const auto& r = returns.at(d, t)) {
        sums[t] += std::abs(*r) / sd;
        ++prof.days_per_slot[t];
      }
    }
  }
  if (prof.days_used == 0)
    throw Error(ErrorKind::InsufficientData, "no day has two or more observed returns");
  for (std::size_t t = 0; t < returns.slots; ++t)
    if (prof.days_per_slot[t] > 0) prof.xi[t] = sums[t] / static_cast<double>(prof.days_per_slot[t]);
  return prof;
}

ReturnMatrix deseasonalize(const ReturnMatrix& returns, const SeasonalProfile& profile) {
  if (profile.xi.size() != returns.slots)
    throw Error(ErrorKind::Config, "profile slot layout does not match the returns");
  ReturnMatrix out(returns.days, returns.slots);
  for (std::size_t d = 0; d < returns.days; ++d) {
    for (std::size_t t = 0; t < returns.slots; ++t) {
      const auto& r = returns.at(d, t);
      if (!r || !profile.xi[t]) continue;
      if (*profile.xi[t] == 0.0)
        throw Error(ErrorKind::Degenerate,
                    "seasonal profile is zero at intraday slot " + std::to_string(t));
      out.at(d, t) = *r / *profile.xi[t];
    }
  }
  return out;
}

}  // namespace mkteff
