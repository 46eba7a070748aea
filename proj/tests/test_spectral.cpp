#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "hyspec/spectral.hpp"
#include "support.hpp"

using namespace hyspec;
using testing_support::Rng;

namespace {

Matrix random_symmetric(Rng& rng, std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) m(i, j) = m(j, i) = rng.normal();
  return m;
}

/// (1/p) tr (A - z I)^{-1} by complex Gaussian elimination, column by column.
Complex resolvent_trace(const Matrix& a, Complex z) {
  const std::size_t n = a.rows();
  Complex acc = 0.0;
  for (std::size_t col = 0; col < n; ++col) {
    std::vector<std::vector<Complex>> m(n, std::vector<Complex>(n + 1));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) m[i][j] = a(i, j) - (i == j ? z : Complex(0.0));
      m[i][n] = i == col ? 1.0 : 0.0;
    }
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t piv = k;
      for (std::size_t i = k + 1; i < n; ++i)
        if (std::abs(m[i][k]) > std::abs(m[piv][k])) piv = i;
      std::swap(m[k], m[piv]);
      for (std::size_t i = k + 1; i < n; ++i) {
        const Complex f = m[i][k] / m[k][k];
        for (std::size_t j = k; j <= n; ++j) m[i][j] -= f * m[k][j];
      }
    }
    std::vector<Complex> x(n);
    for (std::size_t i = n; i-- > 0;) {
      Complex s = m[i][n];
      for (std::size_t j = i + 1; j < n; ++j) s -= m[i][j] * x[j];
      x[i] = s / m[i][i];
    }
    acc += x[col];
  }
  return acc / static_cast<double>(n);
}

}  // namespace

TEST(SpectralMeasure, SortsMergesAndValidates) {
  const SpectralMeasure m({3.0, 1.0, 3.0}, {0.25, 0.5, 0.25});
  EXPECT_EQ(m.atoms(), (std::vector<double>{1.0, 3.0}));
  EXPECT_EQ(m.weights(), (std::vector<double>{0.5, 0.5}));
  EXPECT_THROW(SpectralMeasure({1.0}, {0.9}), Error);
  EXPECT_THROW(SpectralMeasure({1.0, 2.0}, {1.5, -0.5}), Error);
  EXPECT_DOUBLE_EQ(m.cdf(1.0), 0.5);
  EXPECT_DOUBLE_EQ(m.cdf_left(1.0), 0.0);
  EXPECT_DOUBLE_EQ(m.moment(1), 2.0);
}

TEST(EigenSym, DiagonalMatrix) {
  const auto es = eigen_sym(Matrix{{1, 0, 0}, {0, 2, 0}, {0, 0, 3}});
  EXPECT_EQ(es.values, (std::vector<double>{3, 2, 1}));
  EXPECT_EQ(es.vector(0), (std::vector<double>{0, 0, 1}));
  EXPECT_EQ(es.vector(1), (std::vector<double>{0, 1, 0}));
  EXPECT_EQ(es.vector(2), (std::vector<double>{1, 0, 0}));
}

TEST(EigenSym, TwoByTwoClosedForm) {
  const auto es = eigen_sym(Matrix{{2, 1}, {1, 2}});
  EXPECT_NEAR(es.values[0], 3.0, 1e-14);
  EXPECT_NEAR(es.values[1], 1.0, 1e-14);
  const double r = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(es.vectors(0, 0), r, 1e-14);
  EXPECT_NEAR(es.vectors(1, 0), r, 1e-14);
  // Equal magnitudes: the lower index takes the positive sign.
  EXPECT_NEAR(es.vectors(0, 1), r, 1e-14);
  EXPECT_NEAR(es.vectors(1, 1), -r, 1e-14);
}

TEST(EigenSym, RandomReconstructionAndOrthogonality) {
  Rng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix a = random_symmetric(rng, 30);
    const auto es = eigen_sym(a);
    EXPECT_LE((a - reconstruct(es)).frobenius_norm(), 1e-9 * a.frobenius_norm());
    const Matrix vtv = es.vectors.transpose() * es.vectors;
    EXPECT_LE((vtv - Matrix::identity(30)).max_abs(), 1e-10);
    for (std::size_t j = 1; j < 30; ++j) EXPECT_GE(es.values[j - 1], es.values[j]);
  }
}

TEST(EigenSym, SignConventionLargestComponentPositive) {
  Rng rng(32);
  const auto es = eigen_sym(random_symmetric(rng, 12));
  for (std::size_t j = 0; j < 12; ++j) {
    const auto v = es.vector(j);
    std::size_t arg = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
      if (std::abs(v[i]) > std::abs(v[arg]) + 1e-12) arg = i;
    EXPECT_GT(v[arg], 0.0);
  }
}

TEST(EigenSym, TracePreservation) {
  Rng rng(33);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.below(25);
    const Matrix a = random_symmetric(rng, n);
    const auto es = eigen_sym(a);
    double s = 0.0;
    for (double v : es.values) s += v;
    double scale = 0.0;
    for (double v : es.values) scale += std::abs(v);
    EXPECT_LE(std::abs(s - a.trace()), 1e-10 * std::max(1.0, scale));
  }
}

TEST(EigenSym, RejectsNonSymmetric) {
  EXPECT_THROW(eigen_sym(Matrix{{1, 2}, {0, 1}}), ContractError);
  EXPECT_THROW(eigen_sym(Matrix(2, 3)), ContractError);
  // Rounding-level asymmetry is tolerated.
  EXPECT_NO_THROW(eigen_sym(Matrix{{1, 0.5}, {0.5 + 1e-14, 1}}));
}

TEST(Esd, Definition) {
  const std::vector<double> ev{1, 2, 3};
  const auto m = esd(ev);
  EXPECT_NEAR(m.cdf(1.0), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(m.cdf(2.0), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(m.cdf(3.0), 1.0, 1e-15);
  EXPECT_EQ(m.cdf(0.999), 0.0);
  const std::vector<double> fives(7, 5.0);
  EXPECT_EQ(esd(fives).atoms(), (std::vector<double>{5.0}));
  const auto id = esd(Matrix::identity(30));
  ASSERT_EQ(id.size(), 1u);
  EXPECT_NEAR(id.atoms()[0], 1.0, 1e-15);
}

TEST(Esd, IsValidCdf) {
  Rng rng(34);
  const auto m = esd(eigen_sym(random_symmetric(rng, 20)).values);
  double prev = 0.0;
  for (double x = -20; x <= 20; x += 0.01) {
    const double f = m.cdf(x);
    EXPECT_GE(f, prev);
    prev = f;
  }
  EXPECT_EQ(m.cdf(-1e9), 0.0);
  EXPECT_NEAR(m.cdf(1e9), 1.0, 1e-12);
}

TEST(Stieltjes, PointMassAtOne) {
  const Complex s = stieltjes_of_measure(SpectralMeasure::point_mass(1.0), {0.0, 1.0});
  EXPECT_NEAR(s.real(), 0.5, 1e-15);
  EXPECT_NEAR(s.imag(), 0.5, 1e-15);
}

TEST(Stieltjes, TraceOracle) {
  const Matrix a{{1, 0, 0}, {0, 2, 0}, {0, 0, 3}};
  const Complex z(0.0, 2.0);
  const Complex s = stieltjes_of_measure(esd(a), z);
  const Complex direct = (1.0 / (1.0 - z) + 1.0 / (2.0 - z) + 1.0 / (3.0 - z)) / 3.0;
  EXPECT_LE(std::abs(s - direct), 1e-14);
  EXPECT_LE(std::abs(s - resolvent_trace(a, z)), 1e-14);
}

TEST(Stieltjes, RandomMatrixMatchesResolventAndConjugateSymmetry) {
  Rng rng(35);
  const Matrix a = random_symmetric(rng, 8);
  const auto m = esd(a);
  for (Complex z : {Complex(0.3, 0.7), Complex(-2.0, 0.1), Complex(4.0, 3.0)}) {
    const Complex s = stieltjes_of_measure(m, z);
    EXPECT_LE(std::abs(s - resolvent_trace(a, z)), 1e-12);
    EXPECT_LE(std::abs(std::conj(s) - resolvent_trace(a, std::conj(z))), 1e-12);
    EXPECT_GT(s.imag(), 0.0);
  }
}

TEST(Stieltjes, TailAndDomain) {
  Rng rng(36);
  const auto m = esd(eigen_sym(random_symmetric(rng, 10)).values);
  double prev = INFINITY;
  for (double v : {1e2, 1e3, 1e4}) {
    const Complex z(0.0, v);
    const double err = std::abs(z * stieltjes_of_measure(m, z) + 1.0);
    EXPECT_LT(err, prev);
    prev = err;
  }
  EXPECT_LE(prev, 1e-3);
  EXPECT_THROW(stieltjes_of_measure(m, {1.0, 0.0}), DomainError);
  EXPECT_THROW(stieltjes_of_measure(m, {1.0, -1.0}), DomainError);
}

TEST(StieltjesInvert, LorentzianIntegratesToOne) {
  const auto m = SpectralMeasure::point_mass(1.0);
  const auto grid = linspace(-20.0, 22.0, 420001);
  const auto f = stieltjes_invert([&](Complex z) { return stieltjes_of_measure(m, z); }, grid, 1e-3);
  EXPECT_NEAR(trapezoid(grid, f), 1.0, 1e-2);
  std::size_t peak = 0;
  for (std::size_t i = 0; i < f.size(); ++i)
    if (f[i] > f[peak]) peak = i;
  EXPECT_NEAR(grid[peak], 1.0, 1e-4);
  EXPECT_NEAR(f[peak], 1.0 / (std::numbers::pi * 1e-3), 1.0);
}

TEST(StieltjesInvert, SemicircleAtZero) {
  auto semicircle = [](Complex z) {
    Complex r = std::sqrt(z * z - 4.0);
    Complex s = (-z + r) / 2.0;
    if (s.imag() <= 0.0) s = (-z - r) / 2.0;
    return s;
  };
  const std::vector<double> grid{0.0};
  const auto f = stieltjes_invert(semicircle, grid, 1e-4);
  EXPECT_NEAR(f[0], 1.0 / std::numbers::pi, 1e-3);
}

TEST(StieltjesInvert, SymmetricMeasureGivesSymmetricDensity) {
  const SpectralMeasure m({-2.0, -0.5, 0.5, 2.0}, {0.2, 0.3, 0.3, 0.2});
  const auto grid = linspace(-3.0, 3.0, 601);
  const auto f = stieltjes_invert([&](Complex z) { return stieltjes_of_measure(m, z); }, grid, 0.05);
  for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_NEAR(f[i], f[grid.size() - 1 - i], 1e-10);
}

TEST(StieltjesInvert, ClipsRoundingNegativesAndRejectsRealOnes) {
  const std::vector<double> grid{0.0, 1.0};
  const auto f = stieltjes_invert([](Complex) { return Complex(0.0, -1e-13); }, grid, 1e-3);
  EXPECT_EQ(f[0], 0.0);
  EXPECT_THROW(stieltjes_invert([](Complex) { return Complex(0.0, -1.0); }, grid, 1e-3), ContractError);
}

TEST(StieltjesInvert, RecoversSmoothMixtureCdf) {
  // Fine uniform comb on [0, 1] stands in for a smooth density.
  std::vector<double> atoms;
  for (int i = 0; i < 2000; ++i) atoms.push_back((i + 0.5) / 2000.0);
  const auto m = esd(atoms);
  const double eps = 0.01;
  const auto grid = linspace(-3.0, 4.0, 7001);
  const auto f = stieltjes_invert([&](Complex z) { return stieltjes_of_measure(m, z); }, grid, eps);
  const CdfSamples cdf{grid, cumulative_trapezoid(grid, f)};
  EXPECT_LE(ks_distance(m, cdf), 5 * eps);
}

TEST(KsDistance, Examples) {
  const auto d0 = SpectralMeasure::point_mass(0.0), d1 = SpectralMeasure::point_mass(1.0);
  EXPECT_EQ(ks_distance(d1, d1), 0.0);
  EXPECT_EQ(ks_distance(d0, d1), 1.0);
  EXPECT_EQ(ks_distance(d0, SpectralMeasure({0.0, 1.0}, {0.5, 0.5})), 0.5);
}

TEST(KsDistance, StepAgainstSampledCdfUsesBothLimits) {
  // CDF samples of a ramp from 0 to 1 on [0, 1]; a point mass at 0.5 is 0.5 away
  // on either side of the jump.
  const CdfSamples ramp{{0.0, 1.0}, {0.0, 1.0}};
  EXPECT_NEAR(ks_distance(SpectralMeasure::point_mass(0.5), ramp), 0.5, 1e-15);
  EXPECT_EQ(ks_distance(ramp, ramp), 0.0);
  EXPECT_EQ(ramp(-1.0), 0.0);
  EXPECT_EQ(ramp(2.0), 1.0);
  EXPECT_NEAR(ramp(0.25), 0.25, 1e-15);
}

TEST(ScreeModes, DiagonalGapRatio) {
  const auto es = eigen_sym(Matrix{{10, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  const auto sm = scree_and_modes(es, 1);
  ASSERT_TRUE(sm.gap_ratio.has_value());
  EXPECT_NEAR(*sm.gap_ratio, 10.0, 1e-14);
  EXPECT_EQ(sm.top_vectors[0], (std::vector<double>{1, 0, 0}));
}

TEST(ScreeModes, PlantedOneFactor) {
  Rng rng(37);
  std::vector<double> u(30);
  double norm = 0.0;
  for (double& v : u) {
    v = rng.normal();
    norm += v * v;
  }
  for (double& v : u) v /= std::sqrt(norm);
  Matrix a = Matrix::identity(30);
  for (std::size_t i = 0; i < 30; ++i)
    for (std::size_t j = 0; j < 30; ++j) a(i, j) += 5.0 * u[i] * u[j];
  const auto sm = scree_and_modes(eigen_sym(a), 3);
  EXPECT_NEAR(sm.scree[0], 6.0, 1e-10);
  EXPECT_NEAR(*sm.gap_ratio, 6.0, 1e-10);
  double dot = 0.0;
  for (std::size_t i = 0; i < 30; ++i) dot += sm.top_vectors[0][i] * u[i];
  EXPECT_NEAR(std::abs(dot), 1.0, 1e-10);
  for (std::size_t j = 1; j < 30; ++j) EXPECT_GE(sm.scree[j - 1], sm.scree[j]);
}

TEST(ScreeModes, KBeyondDimension) {
  EXPECT_THROW(scree_and_modes(eigen_sym(Matrix::identity(2)), 3), ContractError);
  EXPECT_FALSE(scree_and_modes(eigen_sym(Matrix{{1, 0}, {0, 0}}), 0).gap_ratio.has_value());
}
