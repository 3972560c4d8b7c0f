#pragma once

// Closing-price ingestion, normalization, log returns and a seeded synthetic
// price generator.
//
// Price file format: comma-separated text with a header row
//   date,<asset1>,<asset2>,...
// followed by one row per trading day with dot-decimal prices. Dates are
// opaque labels compared lexicographically (ISO-8601 sorts correctly). A row
// with an empty field or NA/NaN in any asset column is dropped whole.

#include "dpo/qubo.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dpo {

struct PriceSeries {
  std::string asset_id;
  std::vector<double> prices;
  std::vector<std::string> dates;

  void validate() const {
    if (prices.size() != dates.size()) {
      throw std::invalid_argument("PriceSeries '" + asset_id +
                                  "': dates and prices differ in length");
    }
    for (double p : prices) {
      if (!(p > 0.0) || !std::isfinite(p)) {
        throw std::invalid_argument("PriceSeries '" + asset_id +
                                    "': prices must be finite and > 0");
      }
    }
    for (std::size_t i = 1; i < dates.size(); ++i) {
      if (!(dates[i - 1] < dates[i])) {
        throw std::invalid_argument("PriceSeries '" + asset_id +
                                    "': dates not strictly increasing at '" +
                                    dates[i] + "'");
      }
    }
  }
};

/// Interval returns mu (N_t x N_a) and daily returns (N_t*dt x N_a).
/// Interval t covers daily indices t*dt .. (t+1)*dt - 1.
struct ReturnPanel {
  std::vector<std::string> asset_ids;
  Eigen::MatrixXd interval_returns;
  Eigen::MatrixXd daily_returns;
  std::size_t dt = 1;

  std::size_t n_t() const { return std::size_t(interval_returns.rows()); }
  std::size_t n_a() const { return std::size_t(interval_returns.cols()); }
  std::size_t n_d() const { return std::size_t(daily_returns.rows()); }

  IndexRange interval_days(std::size_t t) const {
    return {t * dt, (t + 1) * dt};
  }

  void validate() const {
    if (dt == 0) throw std::invalid_argument("ReturnPanel: dt must be >= 1");
    if (daily_returns.cols() != interval_returns.cols()) {
      throw std::invalid_argument("ReturnPanel: asset count mismatch");
    }
    if (n_d() != n_t() * dt) {
      throw std::invalid_argument("ReturnPanel: N_d != N_t * dt");
    }
    if (!interval_returns.allFinite() || !daily_returns.allFinite()) {
      throw std::invalid_argument("ReturnPanel: non-finite return");
    }
    if (!asset_ids.empty() && asset_ids.size() != n_a()) {
      throw std::invalid_argument("ReturnPanel: asset id count mismatch");
    }
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(
        start, pos == std::string::npos ? std::string::npos : pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

inline bool is_missing(const std::string& field) {
  if (field.empty()) return true;
  std::string lower;
  for (char c : field) lower.push_back(char(std::tolower((unsigned char)c)));
  return lower == "na" || lower == "nan" || lower == "null";
}

inline double parse_real(const std::string& s, std::size_t line_no) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw std::invalid_argument("load_prices: line " +
                                std::to_string(line_no) +
                                ": malformed number '" + s + "'");
  }
  return v;
}

// Days since 1970-01-01 -> (y, m, d), proleptic Gregorian.
inline void civil_from_days(std::int64_t z, int& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp < 10 ? mp + 3 : mp - 9;
  y = static_cast<int>(yoe + era * 400) + (m <= 2);
}

}  // namespace detail

inline std::vector<PriceSeries> load_prices(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!detail::trim(line).empty()) {
      header = detail::split_csv(line);
      break;
    }
  }
  if (header.size() < 2) {
    throw std::invalid_argument(
        "load_prices: header must be 'date,<asset>,...'");
  }
  std::vector<PriceSeries> series(header.size() - 1);
  for (std::size_t a = 0; a < series.size(); ++a) {
    if (header[a + 1].empty()) {
      throw std::invalid_argument("load_prices: empty asset name in header");
    }
    series[a].asset_id = header[a + 1];
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_csv(line);
    if (fields.size() != header.size()) {
      throw std::invalid_argument("load_prices: line " +
                                  std::to_string(line_no) + ": expected " +
                                  std::to_string(header.size()) + " fields");
    }
    if (fields[0].empty()) {
      throw std::invalid_argument("load_prices: line " +
                                  std::to_string(line_no) + ": missing date");
    }
    bool complete = true;
    std::vector<double> row(series.size());
    for (std::size_t a = 0; a < series.size(); ++a) {
      if (detail::is_missing(fields[a + 1])) {
        complete = false;
        continue;
      }
      row[a] = detail::parse_real(fields[a + 1], line_no);
      if (!(row[a] > 0.0) || !std::isfinite(row[a])) {
        throw std::invalid_argument("load_prices: line " +
                                    std::to_string(line_no) +
                                    ": non-positive price");
      }
    }
    if (!complete) continue;
    for (std::size_t a = 0; a < series.size(); ++a) {
      if (!series[a].dates.empty() && !(series[a].dates.back() < fields[0])) {
        throw std::invalid_argument("load_prices: line " +
                                    std::to_string(line_no) +
                                    ": dates not strictly increasing");
      }
      series[a].dates.push_back(fields[0]);
      series[a].prices.push_back(row[a]);
    }
  }
  return series;
}

inline std::vector<PriceSeries> load_prices(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_prices: cannot open " + path);
  return load_prices(in);
}

/// Writes aligned series in the load_prices format. Round-trips exactly.
inline void write_prices(std::ostream& out,
                         const std::vector<PriceSeries>& series) {
  if (series.empty()) throw std::invalid_argument("write_prices: no series");
  for (const auto& s : series) {
    s.validate();
    if (s.dates != series.front().dates) {
      throw std::invalid_argument("write_prices: series are not date-aligned");
    }
  }
  out << "date";
  for (const auto& s : series) out << ',' << s.asset_id;
  out << '\n';
  out << std::setprecision(17);
  for (std::size_t i = 0; i < series.front().dates.size(); ++i) {
    out << series.front().dates[i];
    for (const auto& s : series) out << ',' << s.prices[i];
    out << '\n';
  }
}

inline PriceSeries normalize_prices(const PriceSeries& s) {
  if (s.prices.empty()) {
    throw std::invalid_argument("normalize_prices: empty series");
  }
  PriceSeries out = s;
  const double first = s.prices.front();
  for (auto& p : out.prices) p /= first;
  out.prices.front() = 1.0;
  return out;
}

/// A constant price-1 series aligned with `dates`.
inline PriceSeries cash_series(const std::vector<std::string>& dates,
                               std::string asset_id = "CASH") {
  return PriceSeries{std::move(asset_id), std::vector<double>(dates.size(), 1.0),
                     dates};
}

/// Adds a zero-return cash asset as the last column.
inline ReturnPanel append_cash_asset(const ReturnPanel& panel,
                                     std::string asset_id = "CASH") {
  ReturnPanel out;
  out.dt = panel.dt;
  out.asset_ids = panel.asset_ids;
  if (out.asset_ids.size() == panel.n_a()) out.asset_ids.push_back(asset_id);
  const auto nt = panel.interval_returns.rows();
  const auto nd = panel.daily_returns.rows();
  const auto na = panel.interval_returns.cols();
  out.interval_returns = Eigen::MatrixXd::Zero(nt, na + 1);
  out.daily_returns = Eigen::MatrixXd::Zero(nd, na + 1);
  out.interval_returns.leftCols(na) = panel.interval_returns;
  out.daily_returns.leftCols(na) = panel.daily_returns;
  return out;
}

inline std::vector<double> daily_log_returns(const PriceSeries& s) {
  std::vector<double> r;
  for (std::size_t i = 1; i < s.prices.size(); ++i) {
    r.push_back(std::log(s.prices[i] / s.prices[i - 1]));
  }
  return r;
}

/// Which end of a longer history is kept when it exceeds N_t*dt + 1 prices.
enum class TrimRule { KeepLeading, KeepTrailing };

inline ReturnPanel compute_returns(const std::vector<PriceSeries>& series,
                                   std::size_t n_t, std::size_t dt,
                                   TrimRule trim = TrimRule::KeepLeading) {
  if (dt == 0 || n_t == 0) {
    throw std::invalid_argument("compute_returns: n_t and dt must be >= 1");
  }
  const std::size_t needed = n_t * dt + 1;
  ReturnPanel panel;
  panel.dt = dt;
  panel.interval_returns = Eigen::MatrixXd::Zero(Eigen::Index(n_t),
                                                 Eigen::Index(series.size()));
  panel.daily_returns = Eigen::MatrixXd::Zero(Eigen::Index(n_t * dt),
                                              Eigen::Index(series.size()));
  for (std::size_t a = 0; a < series.size(); ++a) {
    const auto& s = series[a];
    s.validate();
    if (s.prices.size() < needed) {
      throw std::invalid_argument(
          "compute_returns: asset '" + s.asset_id + "' has " +
          std::to_string(s.prices.size()) + " prices, needs " +
          std::to_string(needed));
    }
    if (a > 0 && s.prices.size() != series[0].prices.size()) {
      throw std::invalid_argument("compute_returns: series are not aligned");
    }
    const std::size_t start =
        trim == TrimRule::KeepLeading ? 0 : s.prices.size() - needed;
    const double* p = s.prices.data() + start;
    for (std::size_t d = 0; d < n_t * dt; ++d) {
      panel.daily_returns(Eigen::Index(d), Eigen::Index(a)) =
          std::log(p[d + 1] / p[d]);
    }
    for (std::size_t t = 0; t < n_t; ++t) {
      panel.interval_returns(Eigen::Index(t), Eigen::Index(a)) =
          std::log(p[(t + 1) * dt] / p[t * dt]);
    }
    panel.asset_ids.push_back(s.asset_id);
  }
  panel.validate();
  return panel;
}

struct SyntheticParams {
  /// Per-asset daily log drift and volatility; a single entry is broadcast.
  std::vector<double> drift{0.0004};
  std::vector<double> volatility{0.015};
  /// Pairwise correlation of daily shocks (one-factor model), in [0, 1).
  double correlation = 0.3;
  double start_price = 100.0;
  /// First calendar date (days since 1970-01-01); weekends are skipped.
  std::int64_t start_day = 19359;  // 2023-01-02
};

/// Business-day labels "YYYY-MM-DD" starting at `start_day`.
inline std::vector<std::string> business_days(std::int64_t start_day,
                                              std::size_t count) {
  std::vector<std::string> out;
  out.reserve(count);
  for (std::int64_t z = start_day; out.size() < count; ++z) {
    // 1970-01-01 was a Thursday; weekday 0 = Monday.
    const auto weekday = ((z % 7) + 7 + 3) % 7;
    if (weekday >= 5) continue;
    int y = 0;
    unsigned m = 0, d = 0;
    detail::civil_from_days(z, y, m, d);
    std::ostringstream os;
    os << std::setfill('0') << std::setw(4) << y << '-' << std::setw(2) << m
       << '-' << std::setw(2) << d;
    out.push_back(os.str());
  }
  return out;
}

/// Correlated geometric random walks: log P_{s+1} = log P_s + drift + vol * e,
/// e = sqrt(c) * common + sqrt(1 - c) * idiosyncratic, all standard normal.
inline std::vector<PriceSeries> generate_synthetic(std::uint64_t seed,
                                                   std::size_t n_assets,
                                                   std::size_t days,
                                                   const SyntheticParams& params = {}) {
  auto per_asset = [&](const std::vector<double>& v, const char* name) {
    if (v.size() != 1 && v.size() != n_assets) {
      throw std::invalid_argument(std::string("generate_synthetic: ") + name +
                                  " needs 1 or n_assets entries");
    }
    std::vector<double> out(n_assets);
    for (std::size_t a = 0; a < n_assets; ++a) {
      out[a] = v.size() == 1 ? v[0] : v[a];
    }
    return out;
  };
  const auto drift = per_asset(params.drift, "drift");
  const auto vol = per_asset(params.volatility, "volatility");
  for (double s : vol) {
    if (!(s >= 0.0) || !std::isfinite(s)) {
      throw std::invalid_argument(
          "generate_synthetic: volatility must be finite and >= 0");
    }
  }
  if (!(params.correlation >= 0.0 && params.correlation < 1.0)) {
    throw std::invalid_argument(
        "generate_synthetic: correlation must lie in [0, 1)");
  }
  if (!(params.start_price > 0.0)) {
    throw std::invalid_argument("generate_synthetic: start price must be > 0");
  }
  if (days == 0) throw std::invalid_argument("generate_synthetic: days == 0");

  const auto dates = business_days(params.start_day, days);
  std::vector<PriceSeries> out(n_assets);
  for (std::size_t a = 0; a < n_assets; ++a) {
    out[a].asset_id = "A" + std::to_string(a + 1);
    out[a].dates = dates;
    out[a].prices.reserve(days);
    out[a].prices.push_back(params.start_price);
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double wc = std::sqrt(params.correlation);
  const double wi = std::sqrt(1.0 - params.correlation);
  std::vector<double> log_price(n_assets, std::log(params.start_price));
  for (std::size_t d = 1; d < days; ++d) {
    const double common = normal(rng);
    for (std::size_t a = 0; a < n_assets; ++a) {
      const double shock = wc * common + wi * normal(rng);
      log_price[a] += drift[a] + vol[a] * shock;
      out[a].prices.push_back(std::exp(log_price[a]));
    }
  }
  return out;
}

}  // namespace dpo
