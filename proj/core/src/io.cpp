#include "mkteff/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#include <fmt/format.h>

#include "mkteff/error.hpp"

namespace mkteff {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::EmptyInput: return "empty-input";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::InsufficientData: return "insufficient-data";
    case ErrorKind::Degenerate: return "degenerate";
    case ErrorKind::Numerical: return "numerical";
    case ErrorKind::FitFailure: return "fit-failure";
    case ErrorKind::Io: return "io";
    case ErrorKind::Config: return "config";
  }
  return "unknown";
}

void atomic_write(const std::filesystem::path& path, std::string_view content) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      fs::remove(tmp, ec);
      throw Error(ErrorKind::Io, "write failed for " + tmp.string());
    }
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorKind::Io, "cannot move output into place at " + path.string());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::uint64_t fnv1a(std::string_view data) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) { return fmt::format("{:016x}", v); }

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string format_double(double x) {
  if (std::isnan(x)) return "";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

std::string trace_csv(const StalenessVolatilityTrace& tr) {
  std::string out = "slot,sigma,p,Z,n_save,missing_flag,retained_zero_flag\n";
  for (std::size_t t = 0; t < tr.size(); ++t) {
    const bool missing = tr.flagged(t) || tr.state[t] == SlotState::NoTrade;
    out += fmt::format("{},{},{},{},{},{},{}\n", t, format_double(tr.sigma[t]),
                       format_double(tr.p[t]), format_double(tr.z[t]), tr.n_save[t],
                       missing ? 1 : 0, tr.state[t] == SlotState::RetainedZero ? 1 : 0);
  }
  return out;
}

std::string block_distribution_csv(const BlockDistribution& dist) {
  std::string out = "block,count\n";
  for (const auto& [code, count] : dist.counts)
    out += fmt::format("{},{}\n", dist.block_string(code), count);
  return out;
}

std::string distance_matrix_csv(const DistanceMatrix& m) {
  std::string out = "label";
  for (const auto& l : m.labels) out += "," + csv_field(l);
  out += '\n';
  for (std::size_t i = 0; i < m.size(); ++i) {
    out += csv_field(m.labels[i]);
    for (std::size_t j = 0; j < m.size(); ++j) out += "," + format_double(m.at(i, j));
    out += '\n';
  }
  return out;
}

std::string linkage_csv(const Dendrogram& tree) {
  std::string out = "id_a,id_b,height,size\n";
  for (const auto& mg : tree.merges)
    out += fmt::format("{},{},{},{}\n", mg.a, mg.b, format_double(mg.height), mg.size);
  return out;
}

std::string price_series_csv(const PriceSeries& s) {
  const int decimals = s.tick ? s.tick->decimals : 6;
  std::string out = "timestamp,price\n";
  for (std::size_t i = 0; i < s.size(); ++i) {
    out += s.grid.slots[i].to_string();
    out += ',';
    if (s.prices[i]) out += fmt::format("{:.{}f}", *s.prices[i], decimals);
    out += '\n';
  }
  return out;
}

std::string bars_csv(const std::vector<RawBar>& bars, int decimals) {
  std::string out = "ticker,date,time,close\n";
  for (const auto& b : bars)
    out += fmt::format("{},{},{:02d}{:02d}00,{:.{}f}\n", csv_field(b.ticker), b.time.date, b.time.minute / 60,
                       b.time.minute % 60, b.close, decimals);
  return out;
}

std::string cleaning_report_text(const PriceSeries& series, const CleaningReport& r) {
  std::string out = fmt::format("ticker: {}\ninput_prices: {}\noutput_prices: {}\noutliers_removed: {}\n",
                                series.ticker, r.input_prices, r.output_prices, r.outliers_removed());
  auto slot_name = [&](std::size_t i) {
    return i < series.grid.slots.size() ? series.grid.slots[i].to_string() : std::to_string(i);
  };
  out += "outlier_slots:\n";
  for (auto i : r.outlier_slots) out += "  - " + slot_name(i) + "\n";
  out += fmt::format("split_warnings: {}\n", r.split_slots.size());
  for (auto i : r.split_slots) out += "  - " + slot_name(i) + "\n";
  return out;
}

}  // namespace mkteff
