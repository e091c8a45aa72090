#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "oracle.hpp"
#include "pinnmhd/io.hpp"
#include "pinnmhd/mhdkernel.hpp"

using namespace pinnmhd;

namespace {

constexpr double kPi = std::numbers::pi;

// R = 3 + rho cos(theta), Z = rho sin(theta), lambda = 0.
ModeProfiles circular_profile(double rho, double minor_sign = 1.0) {
  const ModeSet rs = ModeSet::build(2, 0, 1, Parity::kCosine);
  const ModeSet ss = ModeSet::build(2, 0, 1, Parity::kSine);
  ModeProfiles p;
  p.rho = rho;
  p.r = SurfaceCoefficients::zeros(rs, true);
  p.z = SurfaceCoefficients::zeros(ss, true);
  p.lambda = SurfaceCoefficients::zeros(ss, true);
  p.r.values = {3.0, rho};
  p.r.d_rho = {0.0, 1.0};
  p.z.values = {0.0, minor_sign * rho};
  p.z.d_rho = {0.0, minor_sign};
  return p;
}

EquilibriumInput circular_input(double psi_b, double iota) {
  EquilibriumInput in;
  in.M = 2;
  in.r_boundary = {3.0, 1.0};
  in.z_boundary = {0.0, 1.0};
  in.iota.coefficients = {iota};
  in.pressure.coefficients = {0.0};
  in.psi_b = psi_b;
  return in;
}

FieldState circular_state(const CollocationGrid& grid, const EquilibriumInput& in) {
  std::vector<ModeProfiles> prof;
  for (double r : grid.rho) prof.push_back(circular_profile(r));
  return compute_field_state(prof, grid, in);
}

EquilibriumInput stellarator_like() {
  EquilibriumInput in;
  in.M = 4;
  in.N = 2;
  in.n_fp = 3;
  const ModeSet ms = in.modes(Coordinate::kR);
  in.r_boundary.assign(ms.size(), 0.0);
  in.z_boundary.assign(ms.size(), 0.0);
  in.r_boundary[ms.index_of(0, 0)] = 10.0;
  in.r_boundary[ms.index_of(0, 1)] = 0.3;
  in.z_boundary[ms.index_of(0, 1)] = -0.2;
  in.r_boundary[ms.index_of(1, 0)] = 1.0;
  in.z_boundary[ms.index_of(1, 0)] = 1.2;
  in.r_boundary[ms.index_of(1, 1)] = 0.1;
  in.z_boundary[ms.index_of(1, 1)] = 0.1;
  in.pressure.coefficients = {100.0, -100.0};
  in.iota.coefficients = {0.4, 0.1};
  in.psi_b = 0.5;
  return in;
}

NetParams random_params(const EquilibriumInput& in, int width, std::uint64_t seed,
                        double scale) {
  NetParams p = init_params(in, width, seed);
  std::mt19937_64 rng(seed + 100);
  std::normal_distribution<double> g(0.0, scale);
  for (double& v : p.data) v += g(rng);
  return p;
}

CollocationGrid grid_for(const EquilibriumInput& in, int n_rho) {
  return CollocationGrid::midpoints(n_rho, AngularGrid::for_modes(in.M, in.N, in.n_fp));
}

}  // namespace

TEST(Geometry, CircularTorusJacobianAndMetric) {
  const auto in = circular_input(2.0 * kPi, 1.0);
  const auto grid = CollocationGrid::midpoints(4, AngularGrid::make(16, 1, 1));
  const FieldState st = circular_state(grid, in);
  for (const auto& n : st.nodes) {
    const double R = 3.0 + n.rho * std::cos(n.theta);
    EXPECT_NEAR(n.sqrt_g.value, -R / 2.0, 1e-12);
    EXPECT_NEAR(n.g_lo_value(1, 1), n.rho * n.rho, 1e-12);
    EXPECT_NEAR(n.g_lo_value(2, 2), R * R, 1e-12);
    EXPECT_NEAR(n.g_lo_value(0, 0), 0.25 / (n.rho * n.rho), 1e-12);
  }
  // rho = 0.625 is not a node; use a single-surface grid at 0.5.
  CollocationGrid g1{{0.5}, AngularGrid::make(4, 1, 1)};
  const FieldState s1 = circular_state(g1, in);
  EXPECT_NEAR(s1[0].sqrt_g.value, -1.75, 1e-12);
  EXPECT_NEAR(s1[0].g_lo_value(1, 1), 0.25, 1e-12);
  EXPECT_NEAR(s1[0].g_lo_value(2, 2), 12.25, 1e-12);
}

TEST(Field, CircularTorusContravariantComponents) {
  const auto in = circular_input(2.0 * kPi, 1.0);
  CollocationGrid g1{{0.5}, AngularGrid::make(4, 1, 1)};
  const FieldState st = circular_state(g1, in);
  EXPECT_NEAR(st[0].B_up_theta.value, -1.0 / 1.75, 1e-12);
  EXPECT_NEAR(st[0].B_up_zeta.value, -1.0 / 1.75, 1e-12);
  EXPECT_NEAR(st[0].B_up_theta.value, -0.5714, 1e-4);
}

TEST(Field, VanishingLambdaGivesIotaPitch) {
  auto in = circular_input(1.3, 0.0);
  in.iota.coefficients = {0.7, -0.3};
  const auto grid = CollocationGrid::midpoints(5, AngularGrid::make(12, 1, 1));
  const FieldState st = circular_state(grid, in);
  for (const auto& n : st.nodes)
    EXPECT_NEAR(n.B_up_theta.value / n.B_up_zeta.value,
                in.iota(n.rho * n.rho), 1e-13);
}

TEST(Field, TangentToFluxSurfaces) {
  const auto in = stellarator_like();
  const NetParams p = random_params(in, 4, 3, 0.05);
  const FieldState st = compute_field_state(p, in, grid_for(in, 6));
  for (const auto& n : st.nodes) {
    const auto b = n.B_cyl();
    EXPECT_NEAR(dot(b, n.e_up[0]), 0.0, 1e-12 * std::sqrt(n.B2.value * n.g_up[0]));
  }
}

TEST(Geometry, DualBasisAndJacobianIdentities) {
  const auto in = stellarator_like();
  const NetParams p = random_params(in, 4, 5, 0.05);
  const FieldState st = compute_field_state(p, in, grid_for(in, 6));
  for (const auto& n : st.nodes) {
    for (int i = 0; i < 3; ++i) {
      for (int k = 0; k < 3; ++k) {
        double acc = 0.0;
        for (int j = 0; j < 3; ++j) acc += n.g_up_value(i, j) * n.g_lo_value(j, k);
        EXPECT_NEAR(acc, i == k ? 1.0 : 0.0, 1e-10);
      }
    }
    const double triple = dot(n.e_up[0], cross(n.e_up[1], n.e_up[2]));
    EXPECT_NEAR(n.sqrt_g.value * triple, 1.0, 1e-12);
    EXPECT_NEAR(n.sqrt_g.value * n.sqrt_g.value,
                n.g_lo_value(0, 0) * (n.g_lo_value(1, 1) * n.g_lo_value(2, 2) -
                                      n.g_lo_value(1, 2) * n.g_lo_value(1, 2)) -
                    n.g_lo_value(0, 1) * (n.g_lo_value(0, 1) * n.g_lo_value(2, 2) -
                                          n.g_lo_value(1, 2) * n.g_lo_value(0, 2)) +
                    n.g_lo_value(0, 2) * (n.g_lo_value(0, 1) * n.g_lo_value(1, 2) -
                                          n.g_lo_value(1, 1) * n.g_lo_value(0, 2)),
                1e-9 * n.sqrt_g.value * n.sqrt_g.value);
  }
}

TEST(Geometry, VolumeOfCircularTorus) {
  const auto in = circular_input(1.0, 1.0);
  const auto grid = CollocationGrid::midpoints(64, AngularGrid::make(16, 1, 1));
  const FieldState st = circular_state(grid, in);
  EXPECT_NEAR(volume(st), 2.0 * kPi * kPi * 3.0, 1e-3);
  const std::vector<double> ones(st.size(), 1.0);
  EXPECT_NEAR(volume_average(ones, st), 1.0, 1e-12);
}

TEST(Field, ZeroFluxGivesZeroFieldAndCurrent) {
  const auto in = circular_input(1.0, 0.8);
  const auto grid = CollocationGrid::midpoints(4, AngularGrid::make(8, 1, 1));
  std::vector<ModeProfiles> prof;
  for (double r : grid.rho) prof.push_back(circular_profile(r));
  FieldState st = geometry(prof, grid);
  magnetic_field(st, in.iota, 0.0);
  current(st);
  for (const auto& n : st.nodes) {
    EXPECT_EQ(n.B2.value, 0.0);
    for (double j : n.J_up) EXPECT_EQ(j, 0.0);
  }
}

TEST(Force, PurePressureGradient) {
  const auto in = circular_input(1.0, 0.8);
  Polynomial p;
  p.coefficients = {1000.0, -700.0, 50.0};
  const auto grid = CollocationGrid::midpoints(4, AngularGrid::make(8, 1, 1));
  std::vector<ModeProfiles> prof;
  for (double r : grid.rho) prof.push_back(circular_profile(r));
  FieldState st = geometry(prof, grid);
  magnetic_field(st, in.iota, 0.0);
  current(st);
  force(st, p);
  for (const auto& n : st.nodes) {
    const double s = n.rho * n.rho;
    EXPECT_NEAR(n.F_mag, kMu0 * std::abs(p.derivative(s)) * std::sqrt(n.g_up[0]),
                1e-14);
  }
}

TEST(Force, VanishesWithFluxAndPressure) {
  auto in = circular_input(1e-9, 0.8);
  in.pressure.coefficients = {0.0};
  const auto grid = CollocationGrid::midpoints(4, AngularGrid::make(8, 1, 1));
  const FieldState st = circular_state(grid, in);
  for (const auto& n : st.nodes) EXPECT_LT(n.F_mag, 1e-15);
}

TEST(Force, ScalesWithFluxSquared) {
  const auto in = stellarator_like();
  const NetParams p = random_params(in, 3, 9, 0.05);
  const auto grid = grid_for(in, 4);
  const double c = 2.5;
  auto scaled = in;
  scaled.psi_b *= c;
  for (double& q : scaled.pressure.coefficients) q *= c * c;
  const FieldState a = compute_field_state(p, in, grid);
  const FieldState b = compute_field_state(p, scaled, grid);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_NEAR(b[i].B_up_zeta.value, c * a[i].B_up_zeta.value,
                1e-12 * std::abs(c * a[i].B_up_zeta.value));
    for (int k = 0; k < 3; ++k)
      EXPECT_NEAR(b[i].J_up[k], c * a[i].J_up[k],
                  1e-11 * (std::abs(c * a[i].J_up[k]) + 1e-12));
    EXPECT_NEAR(b[i].F_mag, c * c * a[i].F_mag, 1e-11 * c * c * a[i].F_mag);
    EXPECT_NEAR(b[i].grad_B2, c * c * a[i].grad_B2, 1e-11 * c * c * a[i].grad_B2);
  }
  EXPECT_NEAR(normalized_residual(a).volume_average,
              normalized_residual(b).volume_average, 1e-12);
}

TEST(GradB2, GradientMagnitudeOfRadialCoordinate) {
  const auto in = circular_input(1.0, 1.0);
  CollocationGrid g1{{0.5, 0.7}, AngularGrid::make(6, 1, 1)};
  const FieldState st = circular_state(g1, in);
  for (const auto& n : st.nodes) {
    const ad::Dual3<double> s(n.rho * n.rho, 1.0, 0.0, 0.0);
    EXPECT_NEAR(gradient_magnitude(s, n.g_up), std::sqrt(n.g_up[0]), 1e-14);
    EXPECT_NEAR(gradient_magnitude(ad::Dual3<double>(4.0), n.g_up), 0.0, 0.0);
    // |grad s| = 2 rho |grad rho| = 2 rho on a circular cross-section.
    EXPECT_NEAR(std::sqrt(n.g_up[0]), 2.0 * n.rho, 1e-12);
  }
}

TEST(Normalization, Examples) {
  const auto in = circular_input(1.0, 1.0);
  const auto grid = CollocationGrid::midpoints(4, AngularGrid::make(8, 1, 1));
  const FieldState st = circular_state(grid, in);
  const std::vector<double> zero(st.size(), 0.0);
  const std::vector<double> same(st.size(), 3.5);
  EXPECT_EQ(f_norm(zero, st, 2.0).volume_average, 0.0);
  EXPECT_NEAR(f_norm(same, st, 3.5).volume_average, 1.0, 1e-14);
  EXPECT_THROW(f_norm(same, st, 0.0), std::domain_error);
  EXPECT_THROW(f_norm(same, st, std::nan("")), std::domain_error);
}

TEST(Normalization, SurfaceAverages) {
  const auto in = circular_input(1.0, 1.0);
  const auto grid = CollocationGrid::midpoints(5, AngularGrid::make(8, 1, 1));
  const FieldState st = circular_state(grid, in);
  std::vector<double> q(st.size());
  for (std::size_t i = 0; i < st.size(); ++i) q[i] = st[i].rho * 3.0;
  for (std::size_t j = 0; j < grid.rho.size(); ++j)
    EXPECT_NEAR(surface_average(q, st, j), grid.rho[j] * 3.0, 1e-14);
  EXPECT_THROW(surface_average(q, st, 5), std::invalid_argument);
}

TEST(Geometry, JacobianSignChangeIsReported) {
  const auto grid = CollocationGrid::midpoints(3, AngularGrid::make(8, 1, 1));
  std::vector<ModeProfiles> prof;
  prof.push_back(circular_profile(grid.rho[0]));
  prof.push_back(circular_profile(grid.rho[1], -1.0));
  prof.push_back(circular_profile(grid.rho[2]));
  try {
    geometry(prof, grid);
    FAIL() << "expected a Jacobian error";
  } catch (const JacobianError& e) {
    EXPECT_EQ(e.node(), 8u);
  }
  FieldState st;
  st.nodes.resize(3);
  st.nodes[0].sqrt_g.value = 1.0;
  st.nodes[1].sqrt_g.value = 0.0;
  st.nodes[2].sqrt_g.value = 1.0;
  EXPECT_THROW(check_jacobian(st), JacobianError);
}

TEST(Geometry, RejectsBadGrids) {
  const auto grid = CollocationGrid::midpoints(3, AngularGrid::make(8, 1, 1));
  std::vector<ModeProfiles> prof{circular_profile(0.2)};
  EXPECT_THROW(geometry(prof, grid), std::invalid_argument);
  CollocationGrid bad{{0.5, 0.4}, AngularGrid::make(4, 1, 1)};
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  CollocationGrid edge{{0.5, 1.0}, AngularGrid::make(4, 1, 1)};
  EXPECT_THROW(edge.validate(), std::invalid_argument);
}

TEST(Current, AxisymmetricRadialComponent) {
  // With no toroidal dependence, mu0 sqrt(g) J^s = d_theta B_zeta.
  const auto in = io::with_poloidal_resolution(io::dshape_case().input, 4);
  const NetParams p = random_params(in, 3, 2, 0.1);
  const FieldState st = compute_field_state(p, in, grid_for(in, 5));
  for (const auto& n : st.nodes) {
    EXPECT_NEAR(kMu0 * n.sqrt_g.value * n.J_up[0], n.B_lo[2].grad[1],
                1e-12 * (std::abs(n.B_lo[2].grad[1]) + 1e-9));
    EXPECT_EQ(n.B_lo[0].grad[2], 0.0);
  }
}

TEST(Oracle, FiniteDifferenceReferenceAgrees) {
  const auto in = io::with_poloidal_resolution(io::dshape_case().input, 4);
  const NetParams p = random_params(in, 3, 11, 0.1);
  const CollocationGrid grid =
      CollocationGrid::midpoints(4, AngularGrid::make(10, 1, 1));
  const FieldState st = compute_field_state(p, in, grid);
  const auto map = oracle::network_map(p, in);
  const oracle::Physics ph{in.psi_b, in.iota.coefficients, in.pressure.coefficients};
  double worst = 0.0;
  for (const auto& n : st.nodes) {
    const auto o = oracle::evaluate(map, ph, n.rho, n.theta, 1e-3);
    oracle::V3 J;
    for (int c = 0; c < 3; ++c)
      J[c] = n.J_up[0] * n.e_lo[0][c].value + n.J_up[1] * n.e_lo[1][c].value +
             n.J_up[2] * n.e_lo[2][c].value;
    oracle::V3 dJ;
    for (int c = 0; c < 3; ++c) dJ[c] = J[c] - o.curl_B[c] / oracle::kMu0;
    const double ej = oracle::norm(dJ) / (oracle::norm(o.curl_B) / oracle::kMu0);
    const double ef = std::abs(n.F_mag - o.F_mag) / o.F_mag;
    const double eg = std::abs(n.grad_B2 - o.grad_B2) / o.grad_B2;
    worst = std::max({worst, ej, ef, eg});
    EXPECT_NEAR(n.sqrt_g.value, static_cast<double>(o.sqrt_g_s),
                1e-8 * std::abs(static_cast<double>(o.sqrt_g_s)));
  }
  EXPECT_LT(worst, 1e-6);
}
