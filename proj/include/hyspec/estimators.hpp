#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hyspec/error.hpp"
#include "hyspec/matrix.hpp"
#include "hyspec/parallel.hpp"
#include "hyspec/sync.hpp"
#include "hyspec/tickdata.hpp"

namespace hyspec {

enum class EstimatorKind { RCV, HY, SRCV, PROXY_ICV };

inline std::string_view to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::RCV: return "RCV";
    case EstimatorKind::HY: return "HY";
    case EstimatorKind::SRCV: return "SRCV";
    case EstimatorKind::PROXY_ICV: return "PROXY_ICV";
  }
  return "?";
}

inline EstimatorKind estimator_kind_from_string(std::string_view s) {
  if (s == "RCV" || s == "rcv") return EstimatorKind::RCV;
  if (s == "HY" || s == "hy") return EstimatorKind::HY;
  if (s == "SRCV" || s == "srcv") return EstimatorKind::SRCV;
  if (s == "PROXY_ICV" || s == "proxy_icv") return EstimatorKind::PROXY_ICV;
  throw ParseError("unknown estimator kind '" + std::string(s) + "'");
}

/// Symmetric covariance estimate with provenance.
struct CovMatrix {
  EstimatorKind kind = EstimatorKind::HY;
  std::vector<std::string> asset_ids;
  Matrix values;
  /// Per-pair sample counts: synchronized returns (RCV, SRCV) or
  /// contributing overlapping interval pairs (HY).
  std::vector<std::vector<std::size_t>> pair_counts;
  /// SRCV pairs that fell back to the HY value.
  std::vector<std::pair<std::size_t, std::size_t>> flagged_pairs;

  std::size_t dim() const noexcept { return values.rows(); }
};

namespace detail {

inline std::vector<std::vector<std::size_t>> square_counts(std::size_t p) {
  return std::vector<std::vector<std::size_t>>(p, std::vector<std::size_t>(p, 0));
}

inline double realized_variance(const TickSeries& s) {
  double rv = 0.0;
  for (std::size_t k = 0; k < s.num_returns(); ++k) {
    const double d = s.increment(k);
    rv += d * d;
  }
  return rv;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Realized covariance on the refresh grid.

/// Sum of outer products of synchronized return vectors. Prices are last-tick
/// values at each refresh time; the first return starts at the open.
inline CovMatrix rcv(const TickPanel& panel, const RefreshGrid& grid) {
  const std::size_t p = panel.size();
  const std::size_t n = grid.size();
  if (n < 1) throw InsufficientDataError("rcv: refresh grid has no returns");
  if (grid.index.size() != p) throw ContractError("rcv: grid does not match panel");

  std::vector<double> dx(p * n);
  for (std::size_t a = 0; a < p; ++a) {
    const auto& x = panel[a].log_prices();
    std::size_t prev = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t cur = grid.index[a][j];
      dx[a * n + j] = x[cur] - x[prev];
      prev = cur;
    }
  }
  CovMatrix out;
  out.kind = EstimatorKind::RCV;
  out.asset_ids = panel.asset_ids();
  out.values = Matrix(p, p);
  out.pair_counts = detail::square_counts(p);
  for (std::size_t a = 0; a < p; ++a) {
    for (std::size_t b = a; b < p; ++b) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += dx[a * n + j] * dx[b * n + j];
      out.values(a, b) = out.values(b, a) = s;
      out.pair_counts[a][b] = out.pair_counts[b][a] = n;
    }
  }
  return out;
}

inline CovMatrix rcv(const TickPanel& panel) { return rcv(panel, refresh_times(panel)); }

// ---------------------------------------------------------------------------
// Hayashi-Yoshida.

/// Reference HY covariance: full double loop over all return-interval pairs,
/// summing products whose open intervals intersect. O(n_x n_y).
inline double hy_pair_oracle(const TickSeries& x, const TickSeries& y) {
  double s = 0.0;
  for (std::size_t k = 0; k < x.num_returns(); ++k) {
    const Interval ik = x.interval(k);
    for (std::size_t l = 0; l < y.num_returns(); ++l) {
      if (intervals_overlap(ik, y.interval(l))) s += x.increment(k) * y.increment(l);
    }
  }
  return s;
}

struct HySweepResult {
  double value = 0.0;
  std::size_t overlapping_pairs = 0;
};

/// HY covariance by a forward two-pointer sweep, O(n_x + n_y).
///
/// The pointer whose interval ends first advances (both on equal ends), so
/// overlapping pairs are visited in (k, l) lexicographic order, the same order
/// as the double loop in hy_pair_oracle.
inline HySweepResult hy_pair_sweep_detail(const TickSeries& x, const TickSeries& y) {
  const auto& tx = x.times();
  const auto& ty = y.times();
  const auto& px = x.log_prices();
  const auto& py = y.log_prices();
  HySweepResult r;
  std::size_t k = 0, l = 0;
  const std::size_t nx = x.num_returns(), ny = y.num_returns();
  while (k < nx && l < ny) {
    if (std::max(tx[k], ty[l]) < std::min(tx[k + 1], ty[l + 1])) {
      r.value += (px[k + 1] - px[k]) * (py[l + 1] - py[l]);
      ++r.overlapping_pairs;
    }
    if (tx[k + 1] < ty[l + 1]) {
      ++k;
    } else if (ty[l + 1] < tx[k + 1]) {
      ++l;
    } else {
      ++k;
      ++l;
    }
  }
  return r;
}

inline double hy_pair_sweep(const TickSeries& x, const TickSeries& y) { return hy_pair_sweep_detail(x, y).value; }

/// p x p HY matrix; entry (i, j) is the pairwise sweep on raw ticks.
/// Not guaranteed positive semidefinite.
inline CovMatrix hy_matrix(const TickPanel& panel, unsigned threads = 1) {
  const std::size_t p = panel.size();
  CovMatrix out;
  out.kind = EstimatorKind::HY;
  out.asset_ids = panel.asset_ids();
  out.values = Matrix(p, p);
  out.pair_counts = detail::square_counts(p);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = i; j < p; ++j) pairs.emplace_back(i, j);
  parallel_for(pairs.size(), threads, [&](std::size_t q) {
    const auto [i, j] = pairs[q];
    const auto r = hy_pair_sweep_detail(panel[i], panel[j]);
    out.values(i, j) = r.value;
    out.values(j, i) = r.value;
    out.pair_counts[i][j] = r.overlapping_pairs;
    out.pair_counts[j][i] = r.overlapping_pairs;
  });
  return out;
}

/// Ticks of (x, y) that refresh sampling consults: the open and, for every
/// refresh time, each asset's first tick after the previous refresh time (the
/// candidates whose maximum is the refresh time) and its last tick at or
/// before the refresh time, plus each asset's first tick after the final one.
/// Only ticks strictly between those two per window are dropped; each such
/// tick lies inside a single interval of the other asset.
inline std::pair<TickSeries, TickSeries> refresh_reduced_pair(const TickSeries& x, const TickSeries& y) {
  const TickPanel sub(std::max(x.times().back(), y.times().back()), {x, y});
  const RefreshGrid grid = refresh_times(sub);
  auto keep = [&](std::size_t a) {
    std::vector<std::size_t> idx{0};
    std::size_t first_after = 1;
    for (std::size_t mapped : grid.index[a]) {
      if (first_after != idx.back()) idx.push_back(first_after);
      if (mapped != idx.back()) idx.push_back(mapped);
      first_after = mapped + 1;
    }
    if (first_after < sub[a].size()) idx.push_back(first_after);
    return sub[a].subset(idx);
  };
  return {keep(0), keep(1)};
}

struct ReductionCheck {
  double full;
  double reduced;
};

/// HY on raw ticks and on the refresh-reduced ticks; equal in exact arithmetic.
inline ReductionCheck hy_refresh_reduction_check(const TickSeries& x, const TickSeries& y) {
  const auto [rx, ry] = refresh_reduced_pair(x, y);
  return {hy_pair_sweep(x, y), hy_pair_sweep(rx, ry)};
}

// ---------------------------------------------------------------------------
// Scaled realized covariance.

inline double srcv_pair(const SyncPairs& pairs) {
  double s = 0.0;
  for (const auto& r : pairs.returns()) s += r.weight * r.dx * r.dy;
  return s;
}

/// Pairwise SRCV via A0 off the diagonal, realized variances on it. A pair with
/// fewer than two synchronized returns takes its HY value and is flagged.
inline CovMatrix srcv_matrix(const TickPanel& panel, unsigned threads = 1) {
  const std::size_t p = panel.size();
  CovMatrix out;
  out.kind = EstimatorKind::SRCV;
  out.asset_ids = panel.asset_ids();
  out.values = Matrix(p, p);
  out.pair_counts = detail::square_counts(p);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = i; j < p; ++j) pairs.emplace_back(i, j);
  std::vector<char> flagged(pairs.size(), 0);
  parallel_for(pairs.size(), threads, [&](std::size_t q) {
    const auto [i, j] = pairs[q];
    double v = 0.0;
    std::size_t count = 0;
    if (i == j) {
      v = detail::realized_variance(panel[i]);
      count = panel[i].num_returns();
    } else {
      const SyncPairs sp = pairwise_sync_a0(panel[i], panel[j]);
      count = sp.returns().size();
      if (count < 2) {
        v = hy_pair_sweep(panel[i], panel[j]);
        flagged[q] = 1;
      } else {
        v = srcv_pair(sp);
      }
    }
    out.values(i, j) = out.values(j, i) = v;
    out.pair_counts[i][j] = out.pair_counts[j][i] = count;
  });
  for (std::size_t q = 0; q < pairs.size(); ++q)
    if (flagged[q]) out.flagged_pairs.push_back(pairs[q]);
  return out;
}

}  // namespace hyspec
