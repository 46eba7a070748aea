#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "hyspec/error.hpp"
#include "hyspec/estimators.hpp"
#include "hyspec/lsd.hpp"
#include "hyspec/matrix.hpp"
#include "hyspec/parallel.hpp"
#include "hyspec/rng.hpp"
#include "hyspec/spectral.hpp"
#include "hyspec/tickdata.hpp"

namespace hyspec {

/// Driftless diffusion with constant covariance rate `sigma`; increments over
/// dt are N(0, sigma dt).
struct SimConfig {
  std::size_t p = 1;
  std::vector<std::size_t> n_per_asset{2};
  double horizon = 1.0;
  Matrix sigma = Matrix::identity(1);
  std::uint64_t seed = 0;
  std::optional<std::size_t> proxy_grid;

  static SimConfig uniform(std::size_t p, std::size_t n, Matrix sigma, std::uint64_t seed, double horizon = 1.0) {
    SimConfig c;
    c.p = p;
    c.n_per_asset.assign(p, n);
    c.horizon = horizon;
    c.sigma = std::move(sigma);
    c.seed = seed;
    return c;
  }
};

inline constexpr std::uint64_t kPanelStream = 1;
inline constexpr std::uint64_t kProxyStream = 2;

/// Symmetric PSD square root. Eigenvalues in [-1e-12 scale, 0) are clipped to 0;
/// anything more negative is a configuration error.
inline Matrix psd_sqrt(const Matrix& sigma) {
  if (!sigma.square()) throw ValidationError("sigma must be square");
  if (!sigma.all_finite()) throw ValidationError("sigma has non-finite entries");
  if (sigma.asymmetry() > 1e-10 * std::max(1.0, sigma.max_abs())) throw ValidationError("sigma is not symmetric");
  const EigenSystem es = eigen_sym(sigma);
  const double scale = std::max(1.0, es.values.empty() ? 0.0 : std::abs(es.values.front()));
  const std::size_t p = sigma.rows();
  std::vector<double> root(p);
  for (std::size_t k = 0; k < p; ++k) {
    const double lam = es.values[k];
    if (lam < -1e-12 * scale)
      throw ValidationError("sigma is not positive semidefinite (eigenvalue " + detail::format_double(lam) + ")");
    root[k] = lam < 1e-12 ? 0.0 : std::sqrt(lam);
  }
  Matrix out(p, p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < p; ++k) s += es.vectors(i, k) * root[k] * es.vectors(j, k);
      out(i, j) = s;
    }
  return out;
}

namespace detail {

inline void check_config(const SimConfig& cfg) {
  if (cfg.p < 1) throw ValidationError("simulation needs p >= 1");
  if (cfg.n_per_asset.size() != cfg.p) throw ValidationError("n_per_asset must list one count per asset");
  for (std::size_t n : cfg.n_per_asset)
    if (n < 2) throw ValidationError("every asset needs n_i >= 2 observations");
  if (!(cfg.horizon > 0.0) || !std::isfinite(cfg.horizon)) throw ValidationError("horizon must be positive");
  if (cfg.sigma.rows() != cfg.p || cfg.sigma.cols() != cfg.p)
    throw ValidationError("sigma must be " + std::to_string(cfg.p) + "x" + std::to_string(cfg.p));
}

inline std::string asset_name(std::size_t i, std::size_t p) {
  const std::size_t width = std::to_string(p).size();
  std::string num = std::to_string(i + 1);
  return "S" + std::string(width - num.size(), '0') + num;
}

}  // namespace detail

/// Uniform order statistics on [0, D] for the pooled arrival times, correlated
/// Gaussian increments scaled by sqrt(dt), cumulated to log-price paths, then
/// a seeded shuffle of the time indices sliced into per-asset blocks.
inline TickPanel simulate_panel(const SimConfig& cfg) {
  detail::check_config(cfg);
  const Matrix root = psd_sqrt(cfg.sigma);
  const std::size_t p = cfg.p;
  const std::size_t total = std::accumulate(cfg.n_per_asset.begin(), cfg.n_per_asset.end(), std::size_t{0});
  Rng rng(Rng::derive(cfg.seed, kPanelStream));

  std::vector<double> times(total);
  for (double& t : times) t = cfg.horizon * rng.uniform();
  std::sort(times.begin(), times.end());

  // path(j, a): log price of asset a at times[j].
  Matrix path(total, p);
  std::vector<double> level(p, 0.0), z(p);
  double prev = 0.0;
  for (std::size_t j = 0; j < total; ++j) {
    const double scale = std::sqrt(times[j] - prev);
    prev = times[j];
    for (double& v : z) v = rng.normal();
    for (std::size_t a = 0; a < p; ++a) {
      double dx = 0.0;
      for (std::size_t b = 0; b < p; ++b) dx += root(a, b) * z[b];
      level[a] += scale * dx;
      path(j, a) = level[a];
    }
  }

  std::vector<std::size_t> perm(total);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  rng.shuffle(perm);

  std::vector<TickSeries> series;
  series.reserve(p);
  std::size_t offset = 0;
  for (std::size_t a = 0; a < p; ++a) {
    std::vector<std::size_t> idx(perm.begin() + offset, perm.begin() + offset + cfg.n_per_asset[a]);
    offset += cfg.n_per_asset[a];
    std::sort(idx.begin(), idx.end());
    std::vector<double> t{0.0}, x{0.0};
    for (std::size_t j : idx) {
      t.push_back(times[j]);
      x.push_back(path(j, a));
    }
    series.emplace_back(detail::asset_name(a, p), std::move(t), std::move(x));
  }
  return TickPanel(cfg.horizon, std::move(series));
}

/// Realized covariance of an independent path of the same diffusion sampled on
/// a fine synchronous grid of `proxy_grid` steps.
inline CovMatrix proxy_icv(const SimConfig& cfg) {
  detail::check_config(cfg);
  if (!cfg.proxy_grid || *cfg.proxy_grid < 1) throw ValidationError("proxy_icv needs proxy_grid >= 1");
  const Matrix root = psd_sqrt(cfg.sigma);
  const std::size_t p = cfg.p, m = *cfg.proxy_grid;
  const double scale = std::sqrt(cfg.horizon / static_cast<double>(m));
  Rng rng(Rng::derive(cfg.seed, kProxyStream));
  CovMatrix out;
  out.kind = EstimatorKind::PROXY_ICV;
  for (std::size_t a = 0; a < p; ++a) out.asset_ids.push_back(detail::asset_name(a, p));
  out.values = Matrix(p, p);
  out.pair_counts.assign(p, std::vector<std::size_t>(p, m));
  std::vector<double> z(p), dx(p);
  for (std::size_t step = 0; step < m; ++step) {
    for (double& v : z) v = rng.normal();
    for (std::size_t a = 0; a < p; ++a) {
      double s = 0.0;
      for (std::size_t b = 0; b < p; ++b) s += root(a, b) * z[b];
      dx[a] = scale * s;
    }
    for (std::size_t a = 0; a < p; ++a)
      for (std::size_t b = a; b < p; ++b) out.values(a, b) += dx[a] * dx[b];
  }
  for (std::size_t a = 0; a < p; ++a)
    for (std::size_t b = 0; b < a; ++b) out.values(a, b) = out.values(b, a);
  return out;
}

// ---------------------------------------------------------------------------
// Replication study.

/// Linear-interpolation quantile of sorted data (q in [0, 1]).
inline double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw InsufficientDataError("quantile of empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

struct StudyConfig {
  std::size_t p = 30;
  std::size_t n = 500;
  double horizon = 1.0;
  Matrix sigma = Matrix::identity(30);
  std::size_t reps = 10;
  std::uint64_t seed = 0;
  std::size_t proxy_grid = 10000;
  std::size_t lsd_points = 4000;
  double epsilon = 1e-3;
  unsigned threads = 1;
};

struct ReplicationResult {
  std::uint64_t seed = 0;
  std::vector<double> eigenvalues;        ///< HY eigenvalues, descending
  std::vector<double> proxy_eigenvalues;  ///< fine-grid proxy eigenvalues, descending
  double ks_lsd = 0.0;
  double ks_proxy = 0.0;
  std::size_t negative_eigenvalues = 0;
  double width_5_95 = 0.0;
};

struct StudyResult {
  StudyConfig config;
  double c = 0.0;
  CdfSamples lsd;
  std::size_t lsd_failures = 0;
  std::vector<ReplicationResult> reps;
  double mean_ks_lsd = 0.0;
  double mean_ks_proxy = 0.0;
  std::size_t total_negative = 0;
};

/// Limiting CDF for an HY spectrum of `p` assets with `n` ticks each: the
/// c = p/n law with H the ESD of sigma * horizon and unit time weights.
inline LsdCurve study_lsd(const StudyConfig& cfg, const SolverConfig& solver = {}) {
  const double c = static_cast<double>(cfg.p) / static_cast<double>(cfg.n);
  const SpectralMeasure H = esd(cfg.horizon * cfg.sigma);
  LsdModel model{c, H, TauProcess::constant(1.0)};
  const double lam_max = std::max(H.atoms().back(), 0.0);
  const double hi = 1.25 * lam_max * (1.0 + std::sqrt(c)) * (1.0 + std::sqrt(c)) + 1e-6;
  const std::vector<double> grid = linspace(0.0, hi, cfg.lsd_points);
  return lsd_density(model, grid, cfg.epsilon, solver, GridOptions{true, 64, cfg.threads});
}

/// Replications of simulate -> HY -> ESD, each compared with the limiting law
/// and with its own fine-grid proxy spectrum.
inline StudyResult replicate_study(const StudyConfig& cfg) {
  if (cfg.reps < 1) throw ValidationError("study needs reps >= 1");
  if (cfg.n < 2) throw ValidationError("study needs n >= 2");
  StudyResult out;
  out.config = cfg;
  out.c = static_cast<double>(cfg.p) / static_cast<double>(cfg.n);
  const LsdCurve curve = study_lsd(cfg);
  out.lsd = lsd_cdf(curve);
  out.lsd_failures = curve.failures;
  out.reps.resize(cfg.reps);
  parallel_for(cfg.reps, cfg.threads, [&](std::size_t r) {
    SimConfig sim = SimConfig::uniform(cfg.p, cfg.n, cfg.sigma, Rng::derive(cfg.seed, r), cfg.horizon);
    sim.proxy_grid = cfg.proxy_grid;
    ReplicationResult rep;
    rep.seed = sim.seed;
    const TickPanel panel = simulate_panel(sim);
    rep.eigenvalues = eigen_sym(hy_matrix(panel).values).values;
    rep.proxy_eigenvalues = eigen_sym(proxy_icv(sim).values).values;
    const SpectralMeasure hy_esd = esd(rep.eigenvalues);
    rep.ks_lsd = ks_distance(hy_esd, out.lsd);
    rep.ks_proxy = ks_distance(hy_esd, esd(rep.proxy_eigenvalues));
    rep.negative_eigenvalues = static_cast<std::size_t>(
        std::count_if(rep.eigenvalues.begin(), rep.eigenvalues.end(), [](double v) { return v < 0.0; }));
    std::vector<double> sorted(rep.eigenvalues.rbegin(), rep.eigenvalues.rend());
    rep.width_5_95 = quantile_sorted(sorted, 0.95) - quantile_sorted(sorted, 0.05);
    out.reps[r] = std::move(rep);
  });
  for (const auto& rep : out.reps) {
    out.mean_ks_lsd += rep.ks_lsd;
    out.mean_ks_proxy += rep.ks_proxy;
    out.total_negative += rep.negative_eigenvalues;
  }
  out.mean_ks_lsd /= static_cast<double>(cfg.reps);
  out.mean_ks_proxy /= static_cast<double>(cfg.reps);
  return out;
}

}  // namespace hyspec
