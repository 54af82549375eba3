#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace mkteff {

/// A grid-aligned real-valued series; std::nullopt marks a missing slot.
using Series = std::vector<std::optional<double>>;

inline std::size_t count_present(std::span<const std::optional<double>> xs) {
  std::size_t n = 0;
  for (const auto& x : xs) n += x.has_value();
  return n;
}

inline std::vector<double> present_values(
    std::span<const std::optional<double>> xs) {
  std::vector<double> out;
  out.reserve(xs.size());
  for (const auto& x : xs)
    if (x) out.push_back(*x);
  return out;
}

inline Series to_series(std::span<const double> xs) {
  return Series(xs.begin(), xs.end());
}

}  // namespace mkteff
