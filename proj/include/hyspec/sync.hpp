#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "hyspec/error.hpp"
#include "hyspec/tickdata.hpp"

namespace hyspec {

/// Common sampling grid from all-refresh sampling.
///
/// `times[j]` is the j-th refresh time (the open at 0 is implicit and not
/// stored). `index[a][j]` is the index of asset a's last observation at or
/// before `times[j]`.
struct RefreshGrid {
  std::vector<double> times;
  std::vector<std::vector<std::size_t>> index;

  std::size_t size() const noexcept { return times.size(); }
};

/// All-refresh sampling. Each refresh time is the instant by which every
/// asset has ticked at least once strictly after the previous refresh time;
/// the walk stops as soon as some asset has no further observation.
inline RefreshGrid refresh_times(const TickPanel& panel) {
  const std::size_t p = panel.size();
  RefreshGrid grid;
  grid.index.resize(p);
  // next[a]: index of asset a's first observation strictly after the last refresh time.
  std::vector<std::size_t> next(p, 1);
  auto exhausted = [&] {
    for (std::size_t a = 0; a < p; ++a)
      if (next[a] >= panel[a].size()) return true;
    return false;
  };
  while (!exhausted()) {
    double t = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < p; ++a) t = std::max(t, panel[a].times()[next[a]]);
    grid.times.push_back(t);
    for (std::size_t a = 0; a < p; ++a) {
      const auto& ts = panel[a].times();
      std::size_t k = next[a];
      while (k + 1 < ts.size() && ts[k + 1] <= t) ++k;
      grid.index[a].push_back(k);
      next[a] = k + 1;
    }
  }
  if (grid.times.empty())
    throw InsufficientDataError("refresh sampling produced no refresh times (some asset never trades after the open)");
  return grid;
}

// ---------------------------------------------------------------------------
// Interval configurations for a synchronized return pair.

/// Length of the intersection of two open intervals; 0 when they are disjoint
/// or only touch at an endpoint.
inline double overlap_length(const Interval& x, const Interval& y) {
  return std::max(0.0, std::min(x.end, y.end) - std::max(x.start, y.start));
}

inline bool intervals_overlap(const Interval& x, const Interval& y) {
  return std::max(x.start, y.start) < std::min(x.end, y.end);
}

/// Configuration of the Y return interval relative to the X interval:
///   1: Y inside X, 2: Y starts first and ends inside X,
///   3: Y starts inside X and ends after, 4: X inside Y.
inline int classify_config(const Interval& x, const Interval& y) {
  if (!(x.length() > 0.0) || !(y.length() > 0.0))
    throw ContractError("classify_config: intervals must have positive length");
  if (!intervals_overlap(x, y)) throw ContractError("classify_config: intervals do not overlap");
  const bool y_starts_later = x.start <= y.start;
  const bool y_ends_earlier = y.end <= x.end;
  if (y_starts_later && y_ends_earlier) return 1;
  if (!y_starts_later && y_ends_earlier) return 2;
  if (y_starts_later) return 3;
  return 4;
}

// ---------------------------------------------------------------------------
// Pairwise synchronization retaining true arrival times.

struct SyncEntry {
  double x_time;
  double y_time;
  double x_logprice;
  double y_logprice;
};

/// Return built from two consecutive synchronized pairs.
struct SyncReturn {
  Interval x_interval;
  Interval y_interval;
  double dx;
  double dy;
  int config;
  double overlap;  ///< L_i
  double weight;   ///< psi_i = sqrt(|x| |y|) / L_i
};

/// Synchronized pairs for two assets. The first entry is the opening pair;
/// returns are formed between consecutive entries.
class SyncPairs {
public:
  explicit SyncPairs(std::vector<SyncEntry> entries) : entries_(std::move(entries)) {
    if (entries_.size() < 2) throw InsufficientDataError("synchronized pairs need at least one return");
    returns_.reserve(entries_.size() - 1);
    for (std::size_t i = 1; i < entries_.size(); ++i) {
      const auto& a = entries_[i - 1];
      const auto& b = entries_[i];
      if (!(b.x_time > a.x_time) || !(b.y_time > a.y_time))
        throw ValidationError("synchronized pair times must be strictly increasing");
      SyncReturn r;
      r.x_interval = {a.x_time, b.x_time};
      r.y_interval = {a.y_time, b.y_time};
      r.dx = b.x_logprice - a.x_logprice;
      r.dy = b.y_logprice - a.y_logprice;
      r.config = classify_config(r.x_interval, r.y_interval);
      r.overlap = overlap_length(r.x_interval, r.y_interval);
      r.weight = std::sqrt(r.x_interval.length() * r.y_interval.length()) / r.overlap;
      returns_.push_back(r);
    }
  }

  const std::vector<SyncEntry>& entries() const noexcept { return entries_; }
  const std::vector<SyncReturn>& returns() const noexcept { return returns_; }

private:
  std::vector<SyncEntry> entries_;
  std::vector<SyncReturn> returns_;
};

/// Pairwise synchronization that keeps each asset's own transaction time.
///
/// Walks both series with cursors at their first post-open ticks. Whichever
/// cursor is later fixes the pair; the other asset contributes its last tick
/// at or before that instant. Both cursors then move one past the pair. The
/// resulting pairs coincide with two-asset refresh sampling.
inline SyncPairs pairwise_sync_a0(const TickSeries& x, const TickSeries& y) {
  const auto& tx = x.times();
  const auto& ty = y.times();
  std::vector<SyncEntry> entries;
  entries.push_back({0.0, 0.0, x.log_prices()[0], y.log_prices()[0]});
  std::size_t kx = 1, ky = 1;
  while (kx < tx.size() && ky < ty.size()) {
    if (ty[ky] > tx[kx]) {
      while (kx + 1 < tx.size() && tx[kx + 1] <= ty[ky]) ++kx;
    } else {
      while (ky + 1 < ty.size() && ty[ky + 1] <= tx[kx]) ++ky;
    }
    entries.push_back({tx[kx], ty[ky], x.log_prices()[kx], y.log_prices()[ky]});
    ++kx;
    ++ky;
  }
  if (entries.size() < 2)
    throw InsufficientDataError("assets '" + x.asset_id() + "' and '" + y.asset_id() +
                                "' produce no synchronized return");
  return SyncPairs(std::move(entries));
}

}  // namespace hyspec
