#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hyspec/error.hpp"

namespace hyspec {

/// Open time interval (start, end).
struct Interval {
  double start = 0.0;
  double end = 0.0;

  double length() const noexcept { return end - start; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

/// Observations of a single asset: arrival times on [0, D] and log prices.
///
/// Invariants: at least two observations, first time is the open (0),
/// times strictly increasing, every value finite.
class TickSeries {
public:
  TickSeries(std::string asset_id, std::vector<double> times, std::vector<double> log_prices)
      : asset_id_(std::move(asset_id)), times_(std::move(times)), log_prices_(std::move(log_prices)) {
    validate();
  }

  const std::string& asset_id() const noexcept { return asset_id_; }
  const std::vector<double>& times() const noexcept { return times_; }
  const std::vector<double>& log_prices() const noexcept { return log_prices_; }
  std::size_t size() const noexcept { return times_.size(); }
  std::size_t num_returns() const noexcept { return times_.size() - 1; }

  /// Return interval k (0-based): (t_k, t_{k+1}).
  Interval interval(std::size_t k) const { return {times_[k], times_[k + 1]}; }
  double increment(std::size_t k) const { return log_prices_[k + 1] - log_prices_[k]; }

  /// Subseries made of the listed observation indices (must be increasing, start at 0).
  TickSeries subset(const std::vector<std::size_t>& indices) const {
    std::vector<double> t, x;
    t.reserve(indices.size());
    x.reserve(indices.size());
    for (std::size_t i : indices) {
      t.push_back(times_.at(i));
      x.push_back(log_prices_.at(i));
    }
    return TickSeries(asset_id_, std::move(t), std::move(x));
  }

  /// Same times, log prices multiplied by `factor`.
  TickSeries scaled(double factor) const {
    std::vector<double> x = log_prices_;
    for (double& v : x) v *= factor;
    return TickSeries(asset_id_, times_, std::move(x));
  }

private:
  void validate() const {
    if (times_.size() != log_prices_.size())
      throw ValidationError("asset '" + asset_id_ + "': times and log prices differ in length");
    if (times_.size() < 2)
      throw ValidationError("asset '" + asset_id_ + "': needs at least two observations (one return)");
    for (std::size_t i = 0; i < times_.size(); ++i) {
      if (!std::isfinite(times_[i]) || !std::isfinite(log_prices_[i]))
        throw ValidationError("asset '" + asset_id_ + "': non-finite value at observation " + std::to_string(i));
    }
    if (times_.front() != 0.0)
      throw ValidationError("asset '" + asset_id_ + "': first observation must be at the open (time 0)");
    for (std::size_t i = 1; i < times_.size(); ++i) {
      if (!(times_[i] > times_[i - 1]))
        throw ValidationError("asset '" + asset_id_ + "': times not strictly increasing at observation " +
                              std::to_string(i));
    }
  }

  std::string asset_id_;
  std::vector<double> times_;
  std::vector<double> log_prices_;
};

/// Asynchronous observations of p assets on [0, horizon]. Immutable.
class TickPanel {
public:
  TickPanel(double horizon, std::vector<TickSeries> series) : horizon_(horizon), series_(std::move(series)) {
    if (!(horizon_ > 0.0) || !std::isfinite(horizon_)) throw ValidationError("panel horizon must be positive");
    if (series_.empty()) throw ValidationError("panel needs at least one asset");
    std::unordered_map<std::string, int> seen;
    for (const auto& s : series_) {
      if (!seen.emplace(s.asset_id(), 0).second)
        throw ValidationError("duplicate asset id '" + s.asset_id() + "'");
      if (s.times().back() > horizon_)
        throw ValidationError("asset '" + s.asset_id() + "' has observations beyond the horizon");
    }
  }

  double horizon() const noexcept { return horizon_; }
  std::size_t size() const noexcept { return series_.size(); }
  const std::vector<TickSeries>& series() const noexcept { return series_; }
  const TickSeries& operator[](std::size_t i) const { return series_[i]; }

  std::vector<std::string> asset_ids() const {
    std::vector<std::string> ids;
    for (const auto& s : series_) ids.push_back(s.asset_id());
    return ids;
  }

private:
  double horizon_;
  std::vector<TickSeries> series_;
};

struct LogReturn {
  Interval interval;
  double increment;
};

inline std::vector<LogReturn> log_returns(const TickSeries& s) {
  std::vector<LogReturn> out;
  out.reserve(s.num_returns());
  for (std::size_t k = 0; k < s.num_returns(); ++k) out.push_back({s.interval(k), s.increment(k)});
  return out;
}

// ---------------------------------------------------------------------------
// Tick CSV: header `asset_id,time,log_price` (or `asset_id,time,price` for raw
// prices). Rows may be in any order across assets.

struct TickCsvOptions {
  bool prices_raw = false;          ///< value column holds prices; take logs
  bool auto_prepend_open = false;   ///< insert (0, first value) when time 0 is missing
  std::optional<double> horizon;    ///< defaults to the largest time in the file
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t next = line.find(',', pos);
    out.push_back(trim(line.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos)));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

/// Shortest-safe round-trip text: 17 significant digits.
inline std::string format_double(double v) {
  char buf[40];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, ptr);
}

}  // namespace detail

inline TickPanel parse_ticks(std::istream& in, const TickCsvOptions& opts = {}) {
  std::string line;
  std::size_t line_no = 0;
  std::string header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!detail::trim(line).empty()) {
      header = line;
      break;
    }
  }
  if (header.empty()) throw ParseError("empty tick file", line_no);
  if (header.size() >= 3 && static_cast<unsigned char>(header[0]) == 0xEF) header.erase(0, 3);  // UTF-8 BOM

  const auto cols = detail::split_commas(header);
  const std::string_view value_col = opts.prices_raw ? "price" : "log_price";
  if (cols.size() != 3 || cols[0] != "asset_id" || cols[1] != "time" || cols[2] != value_col)
    throw ParseError("expected header 'asset_id,time," + std::string(value_col) + "'", line_no);

  // Insertion-ordered grouping by asset id.
  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<std::pair<double, double>>> rows;
  double max_time = 0.0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_commas(line);
    if (fields.size() != 3) throw ParseError("expected 3 fields, got " + std::to_string(fields.size()), line_no);
    if (fields[0].empty()) throw ParseError("empty asset_id", line_no);
    const auto t = detail::parse_double(fields[1]);
    const auto v = detail::parse_double(fields[2]);
    if (!t || !std::isfinite(*t)) throw ParseError("bad time '" + std::string(fields[1]) + "'", line_no);
    if (!v || !std::isfinite(*v)) throw ParseError("bad value '" + std::string(fields[2]) + "'", line_no);
    if (*t < 0.0) throw ParseError("negative time", line_no);
    double x = *v;
    if (opts.prices_raw) {
      if (!(x > 0.0)) throw ParseError("raw price must be positive", line_no);
      x = std::log(x);
    }
    std::string id(fields[0]);
    auto [it, inserted] = rows.try_emplace(id);
    if (inserted) order.push_back(id);
    it->second.emplace_back(*t, x);
    max_time = std::max(max_time, *t);
  }
  if (order.empty()) throw ParseError("tick file has no data rows", line_no);

  std::vector<TickSeries> series;
  series.reserve(order.size());
  for (const auto& id : order) {
    auto& obs = rows[id];
    std::stable_sort(obs.begin(), obs.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t i = 1; i < obs.size(); ++i) {
      if (obs[i].first == obs[i - 1].first)
        throw ValidationError("asset '" + id + "': duplicate time " + detail::format_double(obs[i].first));
    }
    if (obs.front().first != 0.0) {
      if (!opts.auto_prepend_open)
        throw ValidationError("asset '" + id + "': no observation at time 0 (enable auto-prepend of the open)");
      obs.insert(obs.begin(), {0.0, obs.front().second});
    }
    std::vector<double> t, x;
    for (const auto& [ti, xi] : obs) {
      t.push_back(ti);
      x.push_back(xi);
    }
    series.emplace_back(id, std::move(t), std::move(x));
  }
  const double horizon = opts.horizon.value_or(max_time);
  return TickPanel(horizon, std::move(series));
}

inline TickPanel load_ticks(const std::string& path, const TickCsvOptions& opts = {}) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open tick file '" + path + "'");
  return parse_ticks(in, opts);
}

/// Writes `asset_id,time,log_price` rows, assets in panel order.
inline void write_ticks(std::ostream& out, const TickPanel& panel) {
  out << "asset_id,time,log_price\n";
  for (const auto& s : panel.series()) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      out << s.asset_id() << ',' << detail::format_double(s.times()[i]) << ','
          << detail::format_double(s.log_prices()[i]) << '\n';
    }
  }
}

inline void write_ticks(const std::string& path, const TickPanel& panel) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  write_ticks(out, panel);
}

}  // namespace hyspec
