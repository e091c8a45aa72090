#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "pinnmhd/spectral.hpp"

using namespace pinnmhd;
using std::numbers::pi;

namespace {

SurfaceCoefficients random_coeffs(const ModeSet& modes, std::mt19937_64& rng,
                                  bool radial = false) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto c = SurfaceCoefficients::zeros(modes, radial);
  for (std::size_t k = 0; k < modes.size(); ++k) {
    if (modes.is_fixed_zero(k)) continue;
    c.values[k] = u(rng) / (1.0 + modes[k].m + std::abs(modes[k].n));
    if (radial) {
      c.d_rho[k] = u(rng);
      c.d_rho2[k] = u(rng);
    }
  }
  return c;
}

// Direct summation, independent of the basis tables.
FieldPoint at(const SurfaceCoefficients& c, double theta, double zeta) {
  FieldPoint p;
  const ModeSet& ms = c.modes;
  const bool cosine = ms.parity() == Parity::kCosine;
  for (std::size_t j = 0; j < ms.size(); ++j) {
    const double phi = fourier_angle(ms[j].m, ms[j].n, ms.n_fp(), theta, zeta);
    const double e = cosine ? std::cos(phi) : std::sin(phi);
    p.value += c.values[j] * e;
  }
  return p;
}

}  // namespace

TEST(ModeSet, AxisymmetricCount) {
  const auto s = ModeSet::build(11, 0, 1, Parity::kCosine);
  ASSERT_EQ(s.size(), 11u);
  for (int m = 0; m < 11; ++m) EXPECT_EQ(s[m], (Mode{m, 0}));
}

TEST(ModeSet, SineOrderingAndFixedZero) {
  const auto s = ModeSet::build(2, 1, 5, Parity::kSine);
  ASSERT_EQ(s.size(), 5u);
  const Mode expected[] = {{0, 0}, {0, 1}, {1, -1}, {1, 0}, {1, 1}};
  for (std::size_t k = 0; k < 5; ++k) EXPECT_EQ(s[k], expected[k]);
  EXPECT_TRUE(s.is_fixed_zero(0));
  for (std::size_t k = 1; k < 5; ++k) EXPECT_FALSE(s.is_fixed_zero(k));
}

TEST(ModeSet, LargeCount) {
  EXPECT_EQ(ModeSet::build(12, 12, 5, Parity::kCosine).size(), 288u);
}

TEST(ModeSet, CountFormulaAndIndex) {
  for (int M = 1; M <= 6; ++M)
    for (int N = 0; N <= 4; ++N) {
      const auto s = ModeSet::build(M, N, 3, Parity::kSine);
      ASSERT_EQ(s.size(), static_cast<std::size_t>(M * (2 * N + 1) - N));
      for (std::size_t k = 0; k < s.size(); ++k)
        EXPECT_EQ(s.index_of(s[k].m, s[k].n), static_cast<std::ptrdiff_t>(k));
      EXPECT_EQ(s.index_of(0, -1), -1);
      EXPECT_EQ(s.index_of(M, 0), -1);
    }
}

TEST(ModeSet, RejectsDegenerate) {
  EXPECT_THROW(ModeSet::build(0, 1, 1, Parity::kCosine), std::invalid_argument);
  EXPECT_THROW(ModeSet::build(2, 1, 0, Parity::kCosine), std::invalid_argument);
  EXPECT_THROW(ModeSet::build(2, -1, 1, Parity::kCosine), std::invalid_argument);
}

TEST(FourierAngle, Examples) {
  EXPECT_DOUBLE_EQ(fourier_angle(2, 1, 5, pi / 2, 0.0), pi);
  EXPECT_EQ(fourier_angle(0, 0, 7, 1.3, 2.1), 0.0);
  EXPECT_DOUBLE_EQ(fourier_angle(1, 1, 5, 0.0, 2 * pi / 5), -2 * pi);
}

TEST(Synthesize, SingleCosineMode) {
  const auto ms = ModeSet::build(2, 0, 1, Parity::kCosine);
  auto c = SurfaceCoefficients::zeros(ms, false);
  c.values[1] = 2.0;
  const auto pts = synthesize(c, AngularGrid::make(4, 1, 1));
  EXPECT_DOUBLE_EQ(pts[0].value, 2.0);
  EXPECT_DOUBLE_EQ(pts[0].d_theta, 0.0);
}

TEST(Synthesize, SingleSineMode) {
  const auto ms = ModeSet::build(2, 0, 1, Parity::kSine);
  auto c = SurfaceCoefficients::zeros(ms, false);
  c.values[1] = 1.0;
  const auto pts = synthesize(c, AngularGrid::make(4, 1, 1));  // node 1: pi/2
  EXPECT_NEAR(pts[1].value, 1.0, 1e-15);
  EXPECT_NEAR(pts[1].d_theta, 0.0, 1e-15);
  EXPECT_NEAR(pts[1].d_theta2, -1.0, 1e-15);
}

TEST(Synthesize, ZeroCoefficientsGiveZero) {
  const auto ms = ModeSet::build(4, 2, 3, Parity::kCosine);
  const auto c = SurfaceCoefficients::zeros(ms, true);
  for (const auto& p : synthesize(c, AngularGrid::make(7, 5, 3)))
    for (int q = 0; q < FieldPoint::kCount; ++q) EXPECT_EQ(p[q], 0.0);
}

TEST(Synthesize, RejectsEmptyGrid) {
  EXPECT_THROW(AngularGrid::make(0, 1, 1), std::invalid_argument);
  const auto c = SurfaceCoefficients::zeros(ModeSet::build(2, 0, 1, Parity::kCosine), false);
  EXPECT_THROW(synthesize(c, AngularGrid{0, 1, 1}), std::invalid_argument);
}

TEST(Synthesize, Linearity) {
  std::mt19937_64 rng(3);
  for (Parity par : {Parity::kCosine, Parity::kSine}) {
    const auto ms = ModeSet::build(5, 2, 4, par);
    const auto c1 = random_coeffs(ms, rng, true);
    const auto c2 = random_coeffs(ms, rng, true);
    const double a = 0.7, b = -1.9;
    auto mix = SurfaceCoefficients::zeros(ms, true);
    for (std::size_t k = 0; k < ms.size(); ++k) {
      mix.values[k] = a * c1.values[k] + b * c2.values[k];
      mix.d_rho[k] = a * c1.d_rho[k] + b * c2.d_rho[k];
      mix.d_rho2[k] = a * c1.d_rho2[k] + b * c2.d_rho2[k];
    }
    const auto grid = AngularGrid::make(13, 9, 4);
    const auto p1 = synthesize(c1, grid), p2 = synthesize(c2, grid),
               pm = synthesize(mix, grid);
    for (std::size_t i = 0; i < pm.size(); ++i)
      for (int q = 0; q < FieldPoint::kCount; ++q) {
        const double ref = a * p1[i][q] + b * p2[i][q];
        const double scale = std::abs(a * p1[i][q]) + std::abs(b * p2[i][q]) + 1e-300;
        EXPECT_LE(std::abs(pm[i][q] - ref), 1e-13 * std::max(scale, 1.0));
      }
  }
}

TEST(Synthesize, AngularDerivativesMatchFiniteDifferences) {
  std::mt19937_64 rng(11);
  const double h = 1e-5;
  for (Parity par : {Parity::kCosine, Parity::kSine}) {
    const auto ms = ModeSet::build(6, 3, 5, par);
    const auto c = random_coeffs(ms, rng);
    const auto grid = AngularGrid::make(9, 7, 5);
    const auto pts = synthesize(c, grid);
    for (int kz = 0; kz < grid.n_zeta; ++kz)
      for (int it = 0; it < grid.n_theta; ++it) {
        const double th = grid.theta(it), ze = grid.zeta(kz);
        const FieldPoint& p = pts[grid.index(it, kz)];
        auto v = [&](double t, double z) { return evaluate(ms, c.values, t, z); };
        const double scale = 1.0 + std::abs(p.value);
        const double fd_t = (v(th + h, ze) - v(th - h, ze)) / (2 * h);
        const double fd_z = (v(th, ze + h) - v(th, ze - h)) / (2 * h);
        EXPECT_NEAR(p.d_theta, fd_t, 1e-7 * (scale + std::abs(fd_t)));
        EXPECT_NEAR(p.d_zeta, fd_z, 1e-7 * 25 * (scale + std::abs(fd_z)));
        auto dt = [&](double t, double z) {
          return evaluate_with_theta(ms, c.values, t, z).second;
        };
        const double fd_tt = (dt(th + h, ze) - dt(th - h, ze)) / (2 * h);
        const double fd_tz = (dt(th, ze + h) - dt(th, ze - h)) / (2 * h);
        EXPECT_NEAR(p.d_theta2, fd_tt, 1e-6 * (scale + std::abs(fd_tt)));
        EXPECT_NEAR(p.d_theta_zeta, fd_tz, 1e-6 * 25 * (scale + std::abs(fd_tz)));
        EXPECT_NEAR(at(c, th, ze).value, p.value, 1e-13 * scale);
      }
  }
}

TEST(Synthesize, ParsevalRoundTrip) {
  std::mt19937_64 rng(5);
  const int M = 5, N = 3, nfp = 2;
  for (Parity par : {Parity::kCosine, Parity::kSine}) {
    const auto ms = ModeSet::build(M, N, nfp, par);
    const auto c = random_coeffs(ms, rng);
    const auto grid = AngularGrid::make(2 * (2 * M + 1), 2 * (2 * N + 1), nfp);
    const auto pts = synthesize(c, grid);
    for (std::size_t k = 0; k < ms.size(); ++k) {
      double acc = 0.0;
      for (int kz = 0; kz < grid.n_zeta; ++kz)
        for (int it = 0; it < grid.n_theta; ++it) {
          const double phi = fourier_angle(ms[k].m, ms[k].n, nfp, grid.theta(it),
                                           grid.zeta(kz));
          const double b = par == Parity::kCosine ? std::cos(phi) : std::sin(phi);
          acc += pts[grid.index(it, kz)].value * b;
        }
      const bool mean = ms[k].m == 0 && ms[k].n == 0;
      const double norm = mean ? 1.0 : 0.5;
      double proj = acc / static_cast<double>(grid.size()) / norm;
      if (ms.is_fixed_zero(k)) proj = acc;
      EXPECT_NEAR(proj, c.values[k], 1e-10) << "mode " << ms[k].m << "," << ms[k].n;
    }
  }
}

TEST(Synthesize, StellaratorSymmetry) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const auto rs = ModeSet::build(6, 3, 3, Parity::kCosine);
  const auto zs = ModeSet::build(6, 3, 3, Parity::kSine);
  const auto r = random_coeffs(rs, rng);
  const auto z = random_coeffs(zs, rng);
  for (int i = 0; i < 200; ++i) {
    const double th = u(rng), ze = u(rng);
    EXPECT_NEAR(evaluate(rs, r.values, th, ze), evaluate(rs, r.values, -th, -ze), 1e-13);
    EXPECT_NEAR(evaluate(zs, z.values, th, ze), -evaluate(zs, z.values, -th, -ze), 1e-13);
  }
}

TEST(Synthesize, RadialPartialsAreSynthesizedFromRadialCoefficients) {
  const auto ms = ModeSet::build(3, 1, 2, Parity::kCosine);
  auto c = SurfaceCoefficients::zeros(ms, true);
  c.d_rho[ms.index_of(2, 1)] = 1.5;
  c.d_rho2[ms.index_of(1, 0)] = -0.5;
  const auto grid = AngularGrid::make(5, 3, 2);
  const auto pts = synthesize(c, grid);
  for (int kz = 0; kz < grid.n_zeta; ++kz)
    for (int it = 0; it < grid.n_theta; ++it) {
      const double phi = fourier_angle(2, 1, 2, grid.theta(it), grid.zeta(kz));
      const auto& p = pts[grid.index(it, kz)];
      EXPECT_NEAR(p.d_rho, 1.5 * std::cos(phi), 1e-14);
      EXPECT_NEAR(p.d_rho_theta, -3.0 * std::sin(phi), 1e-14);
      EXPECT_NEAR(p.d_rho_zeta, 1.5 * 2 * std::sin(phi), 1e-14);
      EXPECT_NEAR(p.d_rho2, -0.5 * std::cos(grid.theta(it)), 1e-14);
      EXPECT_EQ(p.value, 0.0);
    }
}

TEST(Synthesize, AdjointIsTransposeOfSynthesis) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (Parity par : {Parity::kCosine, Parity::kSine}) {
    const auto ms = ModeSet::build(4, 2, 3, par);
    const auto grid = AngularGrid::make(6, 5, 3);
    const BasisTable basis(ms, grid);
    const auto c = random_coeffs(ms, rng, true);
    FieldPoint w;
    for (int q = 0; q < FieldPoint::kCount; ++q) w[q] = u(rng);
    const std::size_t node = 7;
    const FieldPoint p = synthesize_node(c, basis, node);
    double lhs = 0.0;
    for (int q = 0; q < FieldPoint::kCount; ++q) lhs += w[q] * p[q];
    std::vector<double> gv(ms.size()), g1(ms.size()), g2(ms.size());
    synthesize_node_adjoint(ms, basis, node, w, gv, g1, g2);
    double rhs = 0.0;
    for (std::size_t k = 0; k < ms.size(); ++k)
      rhs += gv[k] * c.values[k] + g1[k] * c.d_rho[k] + g2[k] * c.d_rho2[k];
    EXPECT_NEAR(lhs, rhs, 1e-12 * (1.0 + std::abs(lhs)));
  }
}

TEST(SpectralWidth, Examples) {
  const auto rs = ModeSet::build(3, 0, 1, Parity::kCosine);
  const auto zs = ModeSet::build(3, 0, 1, Parity::kSine);
  auto r = SurfaceCoefficients::zeros(rs, false);
  auto z = SurfaceCoefficients::zeros(zs, false);
  r.values[1] = 2.0;
  EXPECT_DOUBLE_EQ(spectral_width(r, z), 4.0);
  r.values = {5.0, 0.0, 0.0};
  EXPECT_DOUBLE_EQ(spectral_width(r, z), 0.0);
  r.values = {0.0, 0.0, 1.0};
  z.values = {0.0, 0.0, 1.0};
  EXPECT_DOUBLE_EQ(spectral_width(r, z), 8.0);
  const auto other = SurfaceCoefficients::zeros(ModeSet::build(4, 0, 1, Parity::kSine), false);
  EXPECT_THROW(spectral_width(r, other), std::invalid_argument);
}
