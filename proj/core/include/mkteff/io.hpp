#pragma once

// Report serialization and atomic file output.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mkteff/cluster.hpp"
#include "mkteff/entropy.hpp"
#include "mkteff/ingest.hpp"
#include "mkteff/volstale.hpp"

namespace mkteff {

/// Writes to a temporary sibling and renames it over `path`, so readers
/// never see a partial file. Parent directories are created.
void atomic_write(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view data) noexcept;
std::string hex64(std::uint64_t v);

/// Quotes a CSV field when it contains a separator, quote or newline.
std::string csv_field(std::string_view s);

/// Shortest round-trip decimal form; empty for NaN.
std::string format_double(double x);

/// slot, sigma, p, Z, n_save, missing_flag, retained_zero_flag
std::string trace_csv(const StalenessVolatilityTrace& trace);

/// block, count in code order.
std::string block_distribution_csv(const BlockDistribution& dist);

std::string distance_matrix_csv(const DistanceMatrix& m);

/// id_a, id_b, height, size: one row per merge.
std::string linkage_csv(const Dendrogram& tree);

/// timestamp, price (empty when absent).
std::string price_series_csv(const PriceSeries& series);

/// "ticker,date,time,close" with HHMMSS times and `decimals` places.
std::string bars_csv(const std::vector<RawBar>& bars, int decimals = 2);

std::string cleaning_report_text(const PriceSeries& series, const CleaningReport& report);

}  // namespace mkteff
