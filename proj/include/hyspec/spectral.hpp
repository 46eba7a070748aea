#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "hyspec/error.hpp"
#include "hyspec/matrix.hpp"

namespace hyspec {

using Complex = std::complex<double>;

/// Discrete probability measure on the real line: sorted atoms with weights
/// summing to one.
class SpectralMeasure {
public:
  SpectralMeasure() = default;

  /// Sorts the atoms, merges exact duplicates, and checks the weights.
  SpectralMeasure(std::vector<double> atoms, std::vector<double> weights) {
    if (atoms.size() != weights.size()) throw ValidationError("measure: atoms and weights differ in length");
    if (atoms.empty()) throw ValidationError("measure: no atoms");
    std::vector<std::size_t> order(atoms.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return atoms[a] < atoms[b]; });
    double total = 0.0;
    for (std::size_t i : order) {
      if (!std::isfinite(atoms[i]) || !std::isfinite(weights[i])) throw ValidationError("measure: non-finite entry");
      if (weights[i] < 0.0) throw ValidationError("measure: negative weight");
      total += weights[i];
      if (!atoms_.empty() && atoms_.back() == atoms[i]) {
        weights_.back() += weights[i];
      } else {
        atoms_.push_back(atoms[i]);
        weights_.push_back(weights[i]);
      }
    }
    if (std::abs(total - 1.0) > 1e-12) throw ValidationError("measure: weights must sum to 1");
  }

  static SpectralMeasure point_mass(double at) { return SpectralMeasure({at}, {1.0}); }

  const std::vector<double>& atoms() const noexcept { return atoms_; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  std::size_t size() const noexcept { return atoms_.size(); }

  /// F(x) = mass of (-inf, x].
  double cdf(double x) const {
    const auto it = std::upper_bound(atoms_.begin(), atoms_.end(), x);
    return std::accumulate(weights_.begin(), weights_.begin() + (it - atoms_.begin()), 0.0);
  }
  /// F(x-) = mass of (-inf, x).
  double cdf_left(double x) const {
    const auto it = std::lower_bound(atoms_.begin(), atoms_.end(), x);
    return std::accumulate(weights_.begin(), weights_.begin() + (it - atoms_.begin()), 0.0);
  }

  double moment(int k) const {
    double m = 0.0;
    for (std::size_t i = 0; i < atoms_.size(); ++i) m += weights_[i] * std::pow(atoms_[i], k);
    return m;
  }

  /// Image measure under x -> factor * x.
  SpectralMeasure scaled(double factor) const {
    std::vector<double> a = atoms_;
    for (double& v : a) v *= factor;
    return SpectralMeasure(std::move(a), weights_);
  }

private:
  std::vector<double> atoms_;
  std::vector<double> weights_;
};

/// CDF known at sample points, linear in between and constant beyond the ends.
struct CdfSamples {
  std::vector<double> x;
  std::vector<double> F;

  double operator()(double at) const {
    if (x.empty()) throw ContractError("CdfSamples: empty");
    if (at <= x.front()) return F.front();
    if (at >= x.back()) return F.back();
    const auto it = std::upper_bound(x.begin(), x.end(), at);
    const std::size_t j = static_cast<std::size_t>(it - x.begin());
    const double w = (at - x[j - 1]) / (x[j] - x[j - 1]);
    return F[j - 1] + w * (F[j] - F[j - 1]);
  }
};

// ---------------------------------------------------------------------------
// Symmetric eigendecomposition.

/// Eigenvalues in descending order; column j of `vectors` pairs with values[j].
struct EigenSystem {
  std::vector<double> values;
  Matrix vectors;
  int sweeps = 0;

  std::vector<double> vector(std::size_t j) const { return vectors.column(j); }
};

struct JacobiConfig {
  double relative_off_tolerance = 1e-12;
  int max_sweeps = 100;
  /// |a_ij - a_ji| allowed before the input counts as non-symmetric, relative to max |a_ij|.
  double symmetry_tolerance = 1e-10;
};

namespace detail {

inline double off_diagonal_norm(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (i != j) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

/// Flip so the largest-magnitude component is positive. Near-ties within
/// 1e-12 relative go to the lowest index.
inline void fix_sign(Matrix& v, std::size_t col) {
  double biggest = 0.0;
  for (std::size_t i = 0; i < v.rows(); ++i) biggest = std::max(biggest, std::abs(v(i, col)));
  for (std::size_t i = 0; i < v.rows(); ++i) {
    if (std::abs(v(i, col)) >= biggest * (1.0 - 1e-12)) {
      if (v(i, col) < 0.0)
        for (std::size_t r = 0; r < v.rows(); ++r) v(r, col) = -v(r, col);
      return;
    }
  }
}

}  // namespace detail

/// Cyclic Jacobi eigensolver. Stops when the off-diagonal Frobenius norm is at
/// most `relative_off_tolerance * ||A||_F`.
inline EigenSystem eigen_sym(const Matrix& input, const JacobiConfig& cfg = {}) {
  if (!input.square()) throw ContractError("eigen_sym: matrix is not square");
  if (!input.all_finite()) throw ContractError("eigen_sym: matrix has non-finite entries");
  const double scale = input.max_abs();
  if (input.asymmetry() > cfg.symmetry_tolerance * std::max(scale, 1e-300))
    throw ContractError("eigen_sym: matrix is not symmetric");

  const std::size_t n = input.rows();
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = 0.5 * (input(i, j) + input(j, i));
  Matrix v = Matrix::identity(n);
  const double target = cfg.relative_off_tolerance * a.frobenius_norm();

  int sweep = 0;
  while (detail::off_diagonal_norm(a) > target) {
    if (sweep == cfg.max_sweeps) throw ConvergenceError("eigen_sym: Jacobi did not converge", detail::off_diagonal_norm(a), sweep);
    ++sweep;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });
  EigenSystem es;
  es.sweeps = sweep;
  es.values.resize(n);
  es.vectors = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    es.values[j] = a(order[j], order[j]);
    for (std::size_t i = 0; i < n; ++i) es.vectors(i, j) = v(i, order[j]);
    detail::fix_sign(es.vectors, j);
  }
  return es;
}

/// V diag(values) V^T.
inline Matrix reconstruct(const EigenSystem& es) {
  const std::size_t n = es.values.size();
  Matrix out(n, n);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i) {
      const double vik = es.vectors(i, k) * es.values[k];
      for (std::size_t j = 0; j < n; ++j) out(i, j) += vik * es.vectors(j, k);
    }
  return out;
}

// ---------------------------------------------------------------------------
// Spectral distributions and Stieltjes transforms.

/// Empirical spectral distribution: mass 1/p at each eigenvalue.
inline SpectralMeasure esd(std::span<const double> eigenvalues) {
  if (eigenvalues.empty()) throw ValidationError("esd: no eigenvalues");
  const double w = 1.0 / static_cast<double>(eigenvalues.size());
  return SpectralMeasure(std::vector<double>(eigenvalues.begin(), eigenvalues.end()),
                         std::vector<double>(eigenvalues.size(), w));
}

inline SpectralMeasure esd(const Matrix& m) { return esd(eigen_sym(m).values); }

inline void require_upper_half_plane(Complex z) {
  if (!(z.imag() > 0.0)) throw DomainError("Stieltjes transform needs Im z > 0");
}

/// s(z) = sum_j w_j / (lambda_j - z).
inline Complex stieltjes_of_measure(const SpectralMeasure& m, Complex z) {
  require_upper_half_plane(z);
  Complex s = 0.0;
  for (std::size_t j = 0; j < m.size(); ++j) s += m.weights()[j] / (m.atoms()[j] - z);
  return s;
}

/// Density samples Im s(x + i eps) / pi. Values down to -1e-12 are clipped to
/// zero; anything more negative means `s` is not a Stieltjes transform.
inline std::vector<double> stieltjes_invert(const std::function<Complex(Complex)>& s, std::span<const double> x_grid,
                                            double eps = 1e-3) {
  if (!(eps > 0.0)) throw DomainError("stieltjes_invert: epsilon must be positive");
  std::vector<double> out;
  out.reserve(x_grid.size());
  for (double x : x_grid) {
    double f = s(Complex(x, eps)).imag() / std::numbers::pi;
    if (f < 0.0) {
      if (f < -1e-12) throw ContractError("stieltjes_invert: negative imaginary part (not a Stieltjes transform)");
      f = 0.0;
    }
    out.push_back(f);
  }
  return out;
}

inline double trapezoid(std::span<const double> x, std::span<const double> f) {
  if (x.size() != f.size()) throw ContractError("trapezoid: size mismatch");
  double s = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) s += 0.5 * (f[i] + f[i - 1]) * (x[i] - x[i - 1]);
  return s;
}

inline std::vector<double> cumulative_trapezoid(std::span<const double> x, std::span<const double> f) {
  if (x.size() != f.size()) throw ContractError("cumulative_trapezoid: size mismatch");
  std::vector<double> out(x.size(), 0.0);
  for (std::size_t i = 1; i < x.size(); ++i) out[i] = out[i - 1] + 0.5 * (f[i] + f[i - 1]) * (x[i] - x[i - 1]);
  return out;
}

inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
  if (n < 2) return {lo};
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return out;
}

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov distance. Each overload evaluates at every point where
// either CDF can change slope or jump, so the supremum is exact.

inline double ks_distance(const SpectralMeasure& a, const SpectralMeasure& b) {
  double d = 0.0;
  for (double x : a.atoms()) d = std::max(d, std::abs(a.cdf(x) - b.cdf(x)));
  for (double x : b.atoms()) d = std::max(d, std::abs(a.cdf(x) - b.cdf(x)));
  return d;
}

inline double ks_distance(const SpectralMeasure& a, const CdfSamples& b) {
  double d = 0.0;
  for (double x : a.atoms()) {
    const double g = b(x);
    d = std::max({d, std::abs(a.cdf(x) - g), std::abs(a.cdf_left(x) - g)});
  }
  for (double x : b.x) {
    const double g = b(x);
    d = std::max({d, std::abs(a.cdf(x) - g), std::abs(a.cdf_left(x) - g)});
  }
  return d;
}

inline double ks_distance(const CdfSamples& a, const SpectralMeasure& b) { return ks_distance(b, a); }

inline double ks_distance(const CdfSamples& a, const CdfSamples& b) {
  double d = 0.0;
  for (double x : a.x) d = std::max(d, std::abs(a(x) - b(x)));
  for (double x : b.x) d = std::max(d, std::abs(a(x) - b(x)));
  return d;
}

// ---------------------------------------------------------------------------

struct ScreeModes {
  std::vector<double> scree;                    ///< eigenvalues, descending
  std::vector<std::vector<double>> top_vectors; ///< first k eigenvectors
  std::optional<double> gap_ratio;              ///< lambda_1 / lambda_2, absent if undefined
};

inline ScreeModes scree_and_modes(const EigenSystem& es, std::size_t k) {
  if (k > es.values.size()) throw ContractError("scree_and_modes: k exceeds dimension");
  ScreeModes out;
  out.scree = es.values;
  for (std::size_t j = 0; j < k; ++j) out.top_vectors.push_back(es.vector(j));
  if (es.values.size() >= 2 && es.values[1] != 0.0) out.gap_ratio = es.values[0] / es.values[1];
  return out;
}

}  // namespace hyspec
