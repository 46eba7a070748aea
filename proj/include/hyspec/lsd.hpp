#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "hyspec/error.hpp"
#include "hyspec/parallel.hpp"
#include "hyspec/spectral.hpp"
#include "hyspec/tickdata.hpp"

namespace hyspec {

/// Piecewise-constant nonnegative weight process on [0, 1]. Segment i covers
/// [breakpoints[i], breakpoints[i+1]) and has value values[i].
struct TauProcess {
  std::vector<double> breakpoints{0.0, 1.0};
  std::vector<double> values{1.0};

  static TauProcess constant(double v) { return {{0.0, 1.0}, {v}}; }

  bool well_formed() const {
    if (breakpoints.size() != values.size() + 1 || values.empty()) return false;
    if (breakpoints.front() != 0.0 || breakpoints.back() != 1.0) return false;
    for (std::size_t i = 1; i < breakpoints.size(); ++i)
      if (!(breakpoints[i] > breakpoints[i - 1])) return false;
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
  }
  bool nonnegative() const {
    return std::all_of(values.begin(), values.end(), [](double v) { return v >= 0.0; });
  }
  double length(std::size_t i) const { return breakpoints[i + 1] - breakpoints[i]; }

  /// Integral of the k-th power over [0, 1].
  double integral(int k = 1) const {
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) s += length(i) * std::pow(values[i], k);
    return s;
  }
};

/// Model for the regime p/n -> c > 0.
struct LsdModel {
  double c = 1.0;
  SpectralMeasure H = SpectralMeasure::point_mass(1.0);
  TauProcess tau;
};

/// Model for the regime p/n -> 0 (centred and rescaled estimator).
struct ZeroCModel {
  SpectralMeasure H = SpectralMeasure::point_mass(1.0);
  double tau_bar = 1.0;
};

using AnyLsdModel = std::variant<LsdModel, ZeroCModel>;

struct SolverConfig {
  double tol = 1e-12;       ///< residual bound, relative to max(1, |unknown|)
  int max_iters = 10000;
  double damping = 0.5;     ///< step factor once the residual starts to oscillate
  bool newton = true;       ///< safeguarded Newton steps near the fixed point
  double newton_switch = 1e-3;
};

/// Solution at a single z. `aux` is the companion unknown of the system:
/// the lambda-weighted transform for c > 0, beta for c -> 0.
struct StieltjesPoint {
  Complex z;
  Complex s;
  Complex aux;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

struct FixedPointOutcome {
  Complex u;
  double residual;
  int iterations;
  bool converged;
};

/// Solves u = F(u) on the upper half plane.
///
/// Plain iteration u <- F(u); once the residual F(u) - u reverses direction on
/// two consecutive steps the step is damped. Close to the fixed point a Newton
/// step on F(u) - u is tried and kept only if it stays in the upper half plane
/// and lowers the residual. A Newton answer must also be an attracting fixed
/// point (|F'(u)| <= 1), otherwise it is discarded and plain iteration restarts.
template <class Map, class Deriv>
FixedPointOutcome solve_fixed_point(const Map& F, const Deriv& dF, Complex u0, const SolverConfig& cfg) {
  auto run = [&](bool allow_newton) {
    Complex u = u0;
    double theta = 1.0;
    int reversals = 0;
    bool used_newton = false;
    Complex prev_r = 0.0;
    for (int it = 0; it <= cfg.max_iters; ++it) {
      const Complex r = F(u) - u;
      const double res = std::abs(r);
      const double scale = std::max(1.0, std::abs(u));
      if (!std::isfinite(res)) return std::pair{FixedPointOutcome{u, res, it, false}, used_newton};
      if (res <= cfg.tol * scale) return std::pair{FixedPointOutcome{u, res, it, true}, used_newton};
      if (it == cfg.max_iters) return std::pair{FixedPointOutcome{u, res, it, false}, used_newton};

      if (it > 0 && (r * std::conj(prev_r)).real() < 0.0) {
        if (++reversals >= 2) theta = cfg.damping;
      } else {
        reversals = 0;
      }
      prev_r = r;

      if (allow_newton && res <= cfg.newton_switch * scale) {
        const Complex cand = u + r / (1.0 - dF(u));
        if (std::isfinite(cand.real()) && std::isfinite(cand.imag()) && cand.imag() > 0.0 &&
            std::abs(F(cand) - cand) < res) {
          u = cand;
          used_newton = true;
          continue;
        }
      }
      u += theta * r;
    }
    return std::pair{FixedPointOutcome{u, INFINITY, cfg.max_iters, false}, used_newton};
  };

  auto [out, used_newton] = run(cfg.newton);
  if (out.converged && used_newton && std::abs(dF(out.u)) > 1.0 + 1e-9) {
    auto [retry, ignored] = run(false);
    retry.iterations += out.iterations;
    return retry;
  }
  return out;
}

inline void check_model(const LsdModel& m) {
  if (!(m.c > 0.0) || !std::isfinite(m.c)) throw ContractError("model: aspect ratio c must be positive");
  if (!m.tau.well_formed() || !m.tau.nonnegative()) throw ContractError("model: tau process invalid");
}

inline void check_model(const ZeroCModel& m) {
  if (!(m.tau_bar > 0.0) || !std::isfinite(m.tau_bar)) throw ContractError("model: tau_bar must be positive");
}

inline StieltjesPoint solve_point(const LsdModel& m, Complex z, const SolverConfig& cfg, Complex init) {
  const auto& atoms = m.H.atoms();
  const auto& weights = m.H.weights();
  const double c = m.c;
  // g(u) = int tau / (1 + c tau u) dt and its derivative.
  auto g = [&](Complex u) {
    Complex acc = 0.0;
    for (std::size_t i = 0; i < m.tau.values.size(); ++i) {
      const double v = m.tau.values[i];
      acc += m.tau.length(i) * v / (1.0 + c * v * u);
    }
    return acc;
  };
  auto dg = [&](Complex u) {
    Complex acc = 0.0;
    for (std::size_t i = 0; i < m.tau.values.size(); ++i) {
      const double v = m.tau.values[i];
      const Complex d = 1.0 + c * v * u;
      acc -= m.tau.length(i) * c * v * v / (d * d);
    }
    return acc;
  };
  auto F = [&](Complex u) {
    const Complex gu = g(u);
    Complex acc = 0.0;
    for (std::size_t h = 0; h < atoms.size(); ++h) acc += weights[h] * atoms[h] / (atoms[h] * gu - z);
    return acc;
  };
  auto dF = [&](Complex u) {
    const Complex gu = g(u), dgu = dg(u);
    Complex acc = 0.0;
    for (std::size_t h = 0; h < atoms.size(); ++h) {
      const Complex d = atoms[h] * gu - z;
      acc -= weights[h] * atoms[h] * atoms[h] * dgu / (d * d);
    }
    return acc;
  };
  const auto fp = solve_fixed_point(F, dF, init, cfg);
  const Complex gu = g(fp.u);
  Complex s = 0.0;
  for (std::size_t h = 0; h < atoms.size(); ++h) s += weights[h] / (atoms[h] * gu - z);
  return {z, s, fp.u, fp.residual, fp.iterations, fp.converged};
}

inline StieltjesPoint solve_point(const ZeroCModel& m, Complex z, const SolverConfig& cfg, Complex init) {
  const auto& atoms = m.H.atoms();
  const auto& weights = m.H.weights();
  const double tb = m.tau_bar;
  auto F = [&](Complex b) {
    Complex acc = 0.0;
    for (std::size_t h = 0; h < atoms.size(); ++h) acc -= weights[h] * atoms[h] / (z + tb * atoms[h] * b);
    return acc;
  };
  auto dF = [&](Complex b) {
    Complex acc = 0.0;
    for (std::size_t h = 0; h < atoms.size(); ++h) {
      const Complex d = z + tb * atoms[h] * b;
      acc += weights[h] * tb * atoms[h] * atoms[h] / (d * d);
    }
    return acc;
  };
  const auto fp = solve_fixed_point(F, dF, init, cfg);
  Complex s = 0.0;
  for (std::size_t h = 0; h < atoms.size(); ++h) s -= weights[h] / (z + tb * atoms[h] * fp.u);
  return {z, s, fp.u, fp.residual, fp.iterations, fp.converged};
}

inline StieltjesPoint solve_any(const AnyLsdModel& m, Complex z, const SolverConfig& cfg, Complex init) {
  return std::visit([&](const auto& mm) { return solve_point(mm, z, cfg, init); }, m);
}

inline StieltjesPoint throw_unless_converged(StieltjesPoint pt) {
  if (!pt.converged) {
    std::ostringstream msg;
    msg << "fixed point did not converge at z = (" << pt.z.real() << ", " << pt.z.imag() << "), residual "
        << pt.residual;
    throw ConvergenceError(msg.str(), pt.residual, pt.iterations);
  }
  return pt;
}

}  // namespace detail

inline Complex default_initial_guess(Complex z) { return -1.0 / z; }

/// Regime c > 0. The companion unknown solves
///   u = int lambda / (lambda g(u) - z) dH,  g(u) = int_0^1 tau / (1 + c tau u) dt,
/// and then s(z) = int 1 / (lambda g(u) - z) dH.
inline StieltjesPoint solve_c_positive(const LsdModel& model, Complex z, const SolverConfig& cfg = {},
                                       std::optional<Complex> init = std::nullopt) {
  require_upper_half_plane(z);
  detail::check_model(model);
  return detail::throw_unless_converged(detail::solve_point(model, z, cfg, init.value_or(default_initial_guess(z))));
}

/// Regime c -> 0:
///   beta = -int lambda / (z + tau_bar lambda beta) dH,  s = -int 1 / (z + tau_bar lambda beta) dH.
inline StieltjesPoint solve_c_zero(const ZeroCModel& model, Complex z, const SolverConfig& cfg = {},
                                   std::optional<Complex> init = std::nullopt) {
  require_upper_half_plane(z);
  detail::check_model(model);
  return detail::throw_unless_converged(detail::solve_point(model, z, cfg, init.value_or(default_initial_guess(z))));
}

inline StieltjesPoint solve(const AnyLsdModel& model, Complex z, const SolverConfig& cfg = {},
                            std::optional<Complex> init = std::nullopt) {
  return std::visit([&](const auto& m) {
    if constexpr (std::is_same_v<std::decay_t<decltype(m)>, LsdModel>) return solve_c_positive(m, z, cfg, init);
    else return solve_c_zero(m, z, cfg, init);
  }, model);
}

// ---------------------------------------------------------------------------
// Densities and CDFs on a real grid.

struct GridOptions {
  /// Warm-start each point from its left neighbour's solution.
  bool warm_start = true;
  /// Grid points per warm-start chain (0 = whole grid). Chains are solved
  /// independently, so a fixed chunk keeps results independent of `threads`.
  std::size_t chunk = 64;
  unsigned threads = 1;
};

struct LsdCurve {
  double epsilon = 0.0;
  std::vector<double> x;
  std::vector<StieltjesPoint> points;
  std::vector<double> density;
  std::size_t failures = 0;  ///< points whose solve did not converge (flagged, not fatal)
};

/// Solves the model at x + i eps for every grid point and inverts to a density.
inline LsdCurve lsd_density(const AnyLsdModel& model, std::span<const double> x_grid, double eps = 1e-3,
                            const SolverConfig& cfg = {}, const GridOptions& opts = {}) {
  if (!(eps > 0.0)) throw DomainError("lsd_density: epsilon must be positive");
  std::visit([](const auto& m) { detail::check_model(m); }, model);
  LsdCurve out;
  out.epsilon = eps;
  out.x.assign(x_grid.begin(), x_grid.end());
  out.points.resize(x_grid.size());
  const std::size_t n = x_grid.size();
  const std::size_t chunk = opts.chunk == 0 ? std::max<std::size_t>(n, 1) : opts.chunk;
  const std::size_t chains = (n + chunk - 1) / chunk;
  parallel_for(chains, opts.threads, [&](std::size_t c) {
    std::optional<Complex> warm;
    for (std::size_t i = c * chunk; i < std::min(n, (c + 1) * chunk); ++i) {
      const Complex z(x_grid[i], eps);
      StieltjesPoint pt = detail::solve_any(model, z, cfg, warm.value_or(default_initial_guess(z)));
      if (!pt.converged && warm) pt = detail::solve_any(model, z, cfg, default_initial_guess(z));
      warm = (opts.warm_start && pt.converged) ? std::optional<Complex>(pt.aux) : std::nullopt;
      out.points[i] = pt;
    }
  });
  out.density.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!out.points[i].converged) ++out.failures;
    out.density[i] = std::max(0.0, out.points[i].s.imag() / std::numbers::pi);
  }
  return out;
}

/// Cumulative trapezoid of the density, clamped to [0, 1].
inline CdfSamples lsd_cdf(const LsdCurve& curve) {
  CdfSamples cdf;
  cdf.x = curve.x;
  cdf.F = cumulative_trapezoid(curve.x, curve.density);
  double running = 0.0;
  for (double& f : cdf.F) {
    f = std::clamp(f, 0.0, 1.0);
    running = std::max(running, f);
    f = running;
  }
  return cdf;
}

inline CdfSamples lsd_cdf(const AnyLsdModel& model, std::span<const double> x_grid, double eps = 1e-3,
                          const SolverConfig& cfg = {}, const GridOptions& opts = {}) {
  return lsd_cdf(lsd_density(model, x_grid, eps, cfg, opts));
}

// ---------------------------------------------------------------------------
// Numerically checkable model assumptions. Report only; nothing throws.

struct AssumptionCheck {
  std::string id;
  std::string description;
  bool passed;
  std::string detail;
};

struct AssumptionReport {
  std::vector<AssumptionCheck> checks;

  bool all_passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
  }
  std::vector<std::string> warnings() const {
    std::vector<std::string> out;
    for (const auto& c : checks)
      if (!c.passed) out.push_back(c.id + ": " + c.description + " violated (" + c.detail + ")");
    return out;
  }
  const AssumptionCheck* find(const std::string& id) const {
    for (const auto& c : checks)
      if (c.id == id) return &c;
    return nullptr;
  }
};

namespace detail {

inline bool is_delta_at_zero(const SpectralMeasure& H) {
  double mass_at_zero = 0.0;
  for (std::size_t i = 0; i < H.size(); ++i)
    if (H.atoms()[i] == 0.0) mass_at_zero += H.weights()[i];
  return mass_at_zero >= 1.0 - 1e-12;
}

inline void check_population_measure(AssumptionReport& r, const SpectralMeasure& H, const std::string& id) {
  r.checks.push_back({id, "H is not the delta measure at 0", !is_delta_at_zero(H), "all mass of H sits at 0"});
  const double m2 = H.moment(2);
  r.checks.push_back({id, "H has a finite second moment", std::isfinite(m2), "second moment " + std::to_string(m2)});
  const bool nonneg = H.atoms().empty() || H.atoms().front() >= 0.0;
  r.checks.push_back({id, "H is supported on [0, inf)", nonneg, "smallest atom is negative"});
}

}  // namespace detail

inline AssumptionReport validate_assumptions(const LsdModel& m) {
  AssumptionReport r;
  r.checks.push_back({"A1", "aspect ratio c > 0", m.c > 0.0 && std::isfinite(m.c), "c = " + std::to_string(m.c)});
  detail::check_population_measure(r, m.H, "A2");
  r.checks.push_back({"A5", "tau breakpoints partition [0, 1]", m.tau.well_formed(), "malformed breakpoints/values"});
  r.checks.push_back({"A5", "tau is nonnegative", m.tau.nonnegative(), "negative segment value"});
  const double i1 = m.tau.integral(1), i2 = m.tau.integral(2);
  r.checks.push_back({"A5", "integrals of tau and tau^2 are finite", std::isfinite(i1) && std::isfinite(i2),
                      "int tau = " + std::to_string(i1) + ", int tau^2 = " + std::to_string(i2)});
  r.checks.push_back({"A5", "tau is not identically zero", i1 > 0.0, "int tau = " + std::to_string(i1)});
  return r;
}

inline AssumptionReport validate_assumptions(const ZeroCModel& m) {
  AssumptionReport r;
  detail::check_population_measure(r, m.H, "B3");
  r.checks.push_back({"B6", "tau_bar > 0", m.tau_bar > 0.0 && std::isfinite(m.tau_bar),
                      "tau_bar = " + std::to_string(m.tau_bar)});
  return r;
}

inline AssumptionReport validate_assumptions(const AnyLsdModel& m) {
  return std::visit([](const auto& mm) { return validate_assumptions(mm); }, m);
}

/// Dimension checks available from raw ticks: the refresh sample size n and
/// the implied aspect ratio p / n.
inline AssumptionReport validate_assumptions(const TickPanel& panel, std::size_t refresh_returns) {
  AssumptionReport r;
  const double p = static_cast<double>(panel.size());
  const double n = static_cast<double>(refresh_returns);
  const double c = n > 0 ? p / n : INFINITY;
  r.checks.push_back({"A1", "refresh sample size n >= 1", refresh_returns >= 1, "n = " + std::to_string(refresh_returns)});
  r.checks.push_back({"A1", "aspect ratio p / n is positive and finite", std::isfinite(c) && c > 0.0,
                      "p / n = " + std::to_string(c)});
  std::size_t min_ticks = SIZE_MAX;
  for (const auto& s : panel.series()) min_ticks = std::min(min_ticks, s.num_returns());
  r.checks.push_back({"A1", "refresh sample size does not exceed the smallest per-asset count",
                      refresh_returns <= min_ticks,
                      "n = " + std::to_string(refresh_returns) + ", min n_i = " + std::to_string(min_ticks)});
  return r;
}

}  // namespace hyspec
