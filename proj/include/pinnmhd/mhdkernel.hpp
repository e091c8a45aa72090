#ifndef PINNMHD_MHDKERNEL_HPP
#define PINNMHD_MHDKERNEL_HPP

// Geometry, magnetic field, current and force residual of the inverse map
// (s, theta, zeta) -> (R, phi = zeta, Z) on a collocation grid.
//
// Vectors are stored by their cylindrical components (R, phi, Z). The radial
// coordinate of all tensor quantities is s = rho^2. Every derivative comes
// from the Fourier basis (angles) or from the rho-jets of the mode profiles
// (radius); inside a node the Dual3 type carries (d/ds, d/dtheta, d/dzeta) so
// that the partials of the covariant field are exact.

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pinnmhd/jet.hpp"
#include "pinnmhd/netfield.hpp"
#include "pinnmhd/spectral.hpp"

namespace pinnmhd {

class JacobianError : public std::runtime_error {
 public:
  JacobianError(const std::string& what, std::size_t node)
      : std::runtime_error(what), node_(node) {}
  std::size_t node() const { return node_; }

 private:
  std::size_t node_;
};

struct CollocationGrid {
  std::vector<double> rho;
  AngularGrid angular;

  // Midpoints rho_j = (j + 1/2) / n_rho, never touching axis or boundary.
  static CollocationGrid midpoints(int n_rho, const AngularGrid& angular) {
    if (n_rho < 1) throw std::invalid_argument("need at least one surface");
    CollocationGrid g{std::vector<double>(n_rho), angular};
    for (int j = 0; j < n_rho; ++j) g.rho[j] = (j + 0.5) / n_rho;
    return g;
  }

  void validate() const {
    if (rho.empty()) throw std::invalid_argument("empty radial grid");
    for (std::size_t j = 0; j < rho.size(); ++j) {
      if (!(rho[j] > 0.0 && rho[j] < 1.0))
        throw std::invalid_argument("radial nodes must lie in (0, 1)");
      if (j > 0 && !(rho[j] > rho[j - 1]))
        throw std::invalid_argument("radial nodes must increase strictly");
    }
    if (angular.size() == 0) throw std::invalid_argument("empty angular grid");
  }

  std::size_t size() const { return rho.size() * angular.size(); }
  std::size_t surface_of(std::size_t node) const {
    return node / angular.size();
  }

  // Radial cell widths: edges halfway between nodes, closed by 0 and 1.
  std::vector<double> rho_widths() const {
    std::vector<double> w(rho.size());
    for (std::size_t j = 0; j < rho.size(); ++j) {
      const double lo = j == 0 ? 0.0 : 0.5 * (rho[j - 1] + rho[j]);
      const double hi = j + 1 == rho.size() ? 1.0 : 0.5 * (rho[j] + rho[j + 1]);
      w[j] = hi - lo;
    }
    return w;
  }
};

// Indices into the ten synthesized partials of a coordinate, matching the
// member order of FieldPoint.
enum Partial : int {
  kValue = 0,
  kT = 1,
  kZ = 2,
  kTT = 3,
  kTZ = 4,
  kZZ = 5,
  kP = 6,  // d/drho
  kPT = 7,
  kPZ = 8,
  kPP = 9,
};

template <class T>
using Partials = std::array<T, 10>;

inline Partials<double> to_partials(const FieldPoint& p) {
  Partials<double> out;
  for (int i = 0; i < 10; ++i) out[i] = p[i];
  return out;
}

template <class T>
using Vec3 = std::array<T, 3>;

template <class T>
Vec3<T> cross(const Vec3<T>& a, const Vec3<T>& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2],
          a[0] * b[1] - a[1] * b[0]};
}

template <class T>
T dot(const Vec3<T>& a, const Vec3<T>& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

// Symmetric 3x3 storage: (ss, s theta, s zeta, theta theta, theta zeta,
// zeta zeta).
inline constexpr int sym_index(int i, int j) {
  if (i > j) std::swap(i, j);
  return i == 0 ? j : (i == 1 ? 2 + j : 5);
}

template <class T>
struct NodeState {
  double rho = 0.0;
  double theta = 0.0;
  double zeta = 0.0;

  T R{0.0};
  T Z{0.0};
  T lambda{0.0};
  // Covariant basis e_s, e_theta, e_zeta; each component carries its own
  // gradient in (s, theta, zeta).
  std::array<Vec3<ad::Dual3<T>>, 3> e_lo{};
  std::array<Vec3<T>, 3> e_up{};
  ad::Dual3<T> sqrt_g{0.0};
  std::array<ad::Dual3<T>, 6> g_lo{};
  std::array<T, 6> g_up{};
  ad::Dual3<T> lambda_theta{0.0};
  ad::Dual3<T> lambda_zeta{0.0};

  ad::Dual3<T> iota{0.0};
  ad::Dual3<T> B_up_theta{0.0};
  ad::Dual3<T> B_up_zeta{0.0};
  std::array<ad::Dual3<T>, 3> B_lo{};
  ad::Dual3<T> B2{0.0};  // |B|^2

  Vec3<T> J_up{};
  T F_s{0.0};
  T F_h{0.0};
  T e_h_sq{0.0};
  T F_mag{0.0};
  T grad_B2{0.0};  // |grad |B|^2| / (2 mu0)

  T g_lo_value(int i, int j) const { return g_lo[sym_index(i, j)].value; }
  T g_up_value(int i, int j) const { return g_up[sym_index(i, j)]; }
  T mod_B() const {
    using std::sqrt;
    return sqrt(B2.value);
  }
  // Cylindrical components of B = B^theta e_theta + B^zeta e_zeta.
  Vec3<T> B_cyl() const {
    Vec3<T> b;
    for (int c = 0; c < 3; ++c)
      b[c] = B_up_theta.value * e_lo[1][c].value +
             B_up_zeta.value * e_lo[2][c].value;
    return b;
  }
};

// Fills position, basis vectors, Jacobian and both metric forms from the
// synthesized partials of R, Z, lambda (radial partials are in rho).
template <class T>
NodeState<T> geometry_node(double rho, double theta, double zeta,
                           const Partials<T>& r, const Partials<T>& z,
                           const Partials<T>& l) {
  using D = ad::Dual3<T>;
  NodeState<T> st;
  st.rho = rho;
  st.theta = theta;
  st.zeta = zeta;
  st.R = r[kValue];
  st.Z = z[kValue];
  st.lambda = l[kValue];

  const double inv2 = 0.5 / rho;
  const double inv4sq = 0.25 / (rho * rho);
  // Converts rho-partials into s-partials and packs the gradient of each
  // first derivative.
  auto pack = [&](const Partials<T>& x, D& xs, D& xt, D& xz) {
    const T d_s = inv2 * x[kP];
    const T d_ss = inv4sq * (x[kPP] - x[kP] / rho);
    const T d_st = inv2 * x[kPT];
    const T d_sz = inv2 * x[kPZ];
    xs = D(d_s, d_ss, d_st, d_sz);
    xt = D(x[kT], d_st, x[kTT], x[kTZ]);
    xz = D(x[kZ], d_sz, x[kTZ], x[kZZ]);
  };
  D Rs, Rt, Rz, Zs, Zt, Zz, Ls, Lt, Lz;
  pack(r, Rs, Rt, Rz);
  pack(z, Zs, Zt, Zz);
  pack(l, Ls, Lt, Lz);
  const D R(r[kValue], Rs.value, Rt.value, Rz.value);

  st.e_lo[0] = {Rs, D(0.0), Zs};
  st.e_lo[1] = {Rt, D(0.0), Zt};
  st.e_lo[2] = {Rz, R, Zz};
  st.sqrt_g = R * (Rt * Zs - Rs * Zt);

  st.g_lo[0] = Rs * Rs + Zs * Zs;
  st.g_lo[1] = Rs * Rt + Zs * Zt;
  st.g_lo[2] = Rs * Rz + Zs * Zz;
  st.g_lo[3] = Rt * Rt + Zt * Zt;
  st.g_lo[4] = Rt * Rz + Zt * Zz;
  st.g_lo[5] = Rz * Rz + R * R + Zz * Zz;

  Vec3<T> es, et, ez;
  for (int c = 0; c < 3; ++c) {
    es[c] = st.e_lo[0][c].value;
    et[c] = st.e_lo[1][c].value;
    ez[c] = st.e_lo[2][c].value;
  }
  const T inv_sqrt_g = 1.0 / st.sqrt_g.value;
  const Vec3<T> cs = cross(et, ez);
  const Vec3<T> ct = cross(ez, es);
  const Vec3<T> cz = cross(es, et);
  for (int c = 0; c < 3; ++c) {
    st.e_up[0][c] = cs[c] * inv_sqrt_g;
    st.e_up[1][c] = ct[c] * inv_sqrt_g;
    st.e_up[2][c] = cz[c] * inv_sqrt_g;
  }
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j)
      st.g_up[sym_index(i, j)] = dot(st.e_up[i], st.e_up[j]);

  st.lambda_theta = Lt;
  st.lambda_zeta = Lz;
  return st;
}

// B^theta = psi' (iota - d_zeta lambda) / sqrt(g),
// B^zeta  = psi' (1 + d_theta lambda) / sqrt(g), B_i = B^theta g_i,theta +
// B^zeta g_i,zeta, with psi' = d psi / d s.
template <class T>
void magnetic_field_node(NodeState<T>& st, const Polynomial& iota,
                         double flux_derivative) {
  using D = ad::Dual3<T>;
  const double s = st.rho * st.rho;
  st.iota = D(T(iota(s)), T(iota.derivative(s)), T(0.0), T(0.0));
  const D scale = D(flux_derivative) / st.sqrt_g;
  st.B_up_theta = scale * (st.iota - st.lambda_zeta);
  st.B_up_zeta = scale * (D(1.0) + st.lambda_theta);
  for (int i = 0; i < 3; ++i)
    st.B_lo[i] = st.B_up_theta * st.g_lo[sym_index(i, 1)] +
                 st.B_up_zeta * st.g_lo[sym_index(i, 2)];
  st.B2 = st.B_up_theta * st.B_lo[1] + st.B_up_zeta * st.B_lo[2];
}

// mu0 J^i = (d_j B_k - d_k B_j) / sqrt(g) for cyclic (i, j, k).
template <class T>
Vec3<T> curl_B_up(const NodeState<T>& st) {
  const auto& b = st.B_lo;
  const T inv = 1.0 / st.sqrt_g.value;
  return {(b[2][1] - b[1][2]) * inv, (b[0][2] - b[2][0]) * inv,
          (b[1][0] - b[0][1]) * inv};
}

template <class T>
void current_node(NodeState<T>& st) {
  const Vec3<T> c = curl_B_up(st);
  for (int i = 0; i < 3; ++i) st.J_up[i] = c[i] / kMu0;
}

// F = (curl B) x B - mu0 grad p = F_s e^s + F_h e^h with
// F_s = sqrt(g) (curlB^theta B^zeta - curlB^zeta B^theta) - mu0 p'(s),
// F_h = -curlB^s, e^h = sqrt(g) (B^zeta e^theta - B^theta e^zeta).
// |F| = sqrt(F_s^2 |e^s|^2 + F_h^2 |e^h|^2).
template <class T>
void force_node(NodeState<T>& st, double p_prime) {
  using std::sqrt;
  const Vec3<T> c = curl_B_up(st);
  const T& bt = st.B_up_theta.value;
  const T& bz = st.B_up_zeta.value;
  const T& jac = st.sqrt_g.value;
  st.F_s = jac * (c[1] * bz - c[2] * bt) - kMu0 * p_prime;
  st.F_h = -c[0];
  st.e_h_sq = (jac * jac) * (bz * bz * st.g_up[sym_index(1, 1)] -
                             2.0 * (bt * bz) * st.g_up[sym_index(1, 2)] +
                             bt * bt * st.g_up[sym_index(2, 2)]);
  st.F_mag = sqrt(st.F_s * st.F_s * st.g_up[0] + st.F_h * st.F_h * st.e_h_sq);
}

// |grad q| from the flux-coordinate gradient of q and the inverse metric.
template <class T>
T gradient_magnitude(const ad::Dual3<T>& q, const std::array<T, 6>& g_up) {
  using std::sqrt;
  T acc(0.0);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      acc += q.grad[i] * g_up[sym_index(i, j)] * q.grad[j];
  return sqrt(acc);
}

template <class T>
void grad_B2_node(NodeState<T>& st) {
  st.grad_B2 = gradient_magnitude(st.B2, st.g_up) / (2.0 * kMu0);
}

// Full per-node pipeline.
template <class T>
NodeState<T> evaluate_node(double rho, double theta, double zeta,
                           const Partials<T>& r, const Partials<T>& z,
                           const Partials<T>& l, const EquilibriumInput& input) {
  NodeState<T> st = geometry_node(rho, theta, zeta, r, z, l);
  magnetic_field_node(st, input.iota, input.flux_derivative());
  current_node(st);
  force_node(st, input.pressure.derivative(rho * rho));
  grad_B2_node(st);
  return st;
}

struct FieldState {
  CollocationGrid grid;
  std::vector<NodeState<double>> nodes;

  const NodeState<double>& operator[](std::size_t i) const { return nodes[i]; }
  std::size_t size() const { return nodes.size(); }
};

// Jacobian must be nonzero and single-signed; throws naming the first node
// that breaks it.
inline void check_jacobian(const FieldState& state) {
  int sign = 0;
  for (std::size_t i = 0; i < state.size(); ++i) {
    const double j = state.nodes[i].sqrt_g.value;
    if (!(std::isfinite(j)) || j == 0.0)
      throw JacobianError("Jacobian vanishes at node " + std::to_string(i), i);
    const int s = j > 0.0 ? 1 : -1;
    if (sign == 0) sign = s;
    if (s != sign)
      throw JacobianError("Jacobian changes sign at node " + std::to_string(i),
                          i);
  }
}

// Geometric part of the state from per-surface profiles (one per rho node).
inline FieldState geometry(std::span<const ModeProfiles> profiles,
                           const CollocationGrid& grid) {
  grid.validate();
  if (profiles.size() != grid.rho.size())
    throw std::invalid_argument("one profile per radial node required");
  FieldState state{grid, {}};
  state.nodes.resize(grid.size());
  const AngularGrid& ang = grid.angular;
  const BasisTable basis_r(profiles[0].r.modes, ang);
  const BasisTable basis_s(profiles[0].z.modes, ang);
  for (std::size_t j = 0; j < grid.rho.size(); ++j) {
    const ModeProfiles& p = profiles[j];
    if (!p.r.has_radial() || !p.z.has_radial() || !p.lambda.has_radial())
      throw std::invalid_argument("profiles need radial derivatives");
    for (int kz = 0; kz < ang.n_zeta; ++kz) {
      for (int it = 0; it < ang.n_theta; ++it) {
        const std::size_t a = ang.index(it, kz);
        const auto r = to_partials(synthesize_node(p.r, basis_r, a));
        const auto z = to_partials(synthesize_node(p.z, basis_s, a));
        const auto l = to_partials(synthesize_node(p.lambda, basis_s, a));
        state.nodes[j * ang.size() + a] =
            geometry_node(grid.rho[j], ang.theta(it), ang.zeta(kz), r, z, l);
      }
    }
  }
  check_jacobian(state);
  return state;
}

inline void magnetic_field(FieldState& state, const Polynomial& iota,
                           double flux_derivative) {
  for (auto& n : state.nodes) magnetic_field_node(n, iota, flux_derivative);
}

inline void current(FieldState& state) {
  for (auto& n : state.nodes) current_node(n);
}

inline void force(FieldState& state, const Polynomial& pressure) {
  for (auto& n : state.nodes)
    force_node(n, pressure.derivative(n.rho * n.rho));
}

inline std::vector<double> grad_B2_magnitude(FieldState& state) {
  std::vector<double> out(state.size());
  for (std::size_t i = 0; i < state.size(); ++i) {
    grad_B2_node(state.nodes[i]);
    out[i] = state.nodes[i].grad_B2;
  }
  return out;
}

// Everything from profiles in one call.
inline FieldState compute_field_state(std::span<const ModeProfiles> profiles,
                                      const CollocationGrid& grid,
                                      const EquilibriumInput& input) {
  FieldState state = geometry(profiles, grid);
  magnetic_field(state, input.iota, input.flux_derivative());
  current(state);
  force(state, input.pressure);
  grad_B2_magnitude(state);
  return state;
}

inline FieldState compute_field_state(const NetParams& params,
                                      const EquilibriumInput& input,
                                      const CollocationGrid& grid) {
  std::vector<ModeProfiles> profiles;
  profiles.reserve(grid.rho.size());
  for (double rho : grid.rho) profiles.push_back(mode_profiles(params, input, rho));
  return compute_field_state(profiles, grid, input);
}

// Sum in a fixed pairwise tree so the result does not depend on how the
// terms were produced.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

// Quadrature weights |sqrt(g_s)| ds dtheta dzeta per node (midpoint in rho,
// ds = 2 rho drho; uniform sums in the angles).
inline std::vector<double> volume_weights(const FieldState& state) {
  const auto widths = state.grid.rho_widths();
  const AngularGrid& ang = state.grid.angular;
  const double dang = (2.0 * std::numbers::pi / ang.n_theta) *
                      (2.0 * std::numbers::pi / (ang.n_fp * ang.n_zeta));
  std::vector<double> w(state.size());
  for (std::size_t i = 0; i < state.size(); ++i) {
    const std::size_t j = state.grid.surface_of(i);
    w[i] = std::abs(state.nodes[i].sqrt_g.value) * 2.0 * state.grid.rho[j] *
           widths[j] * dang;
  }
  return w;
}

// Plasma volume over the full torus.
inline double volume(const FieldState& state) {
  return state.grid.angular.n_fp * pairwise_sum(volume_weights(state));
}

inline double volume_average(std::span<const double> q,
                             const FieldState& state) {
  if (q.size() != state.size())
    throw std::invalid_argument("one value per node required");
  const auto w = volume_weights(state);
  std::vector<double> qw(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) qw[i] = q[i] * w[i];
  return pairwise_sum(qw) / pairwise_sum(w);
}

inline double surface_average(std::span<const double> q,
                              const FieldState& state, std::size_t surface) {
  const std::size_t na = state.grid.angular.size();
  if (q.size() != state.size() || surface >= state.grid.rho.size())
    throw std::invalid_argument("bad surface average request");
  std::vector<double> qw(na);
  std::vector<double> w(na);
  for (std::size_t a = 0; a < na; ++a) {
    const std::size_t i = surface * na + a;
    w[a] = std::abs(state.nodes[i].sqrt_g.value);
    qw[a] = q[i] * w[a];
  }
  return pairwise_sum(qw) / pairwise_sum(w);
}

struct NormalizedResidual {
  std::vector<double> per_node;
  double volume_average = 0.0;
};

// F_norm = |force| / normalizer per node, and its volume average.
inline NormalizedResidual f_norm(std::span<const double> force_density,
                                 const FieldState& state, double normalizer) {
  if (!(normalizer > 0.0) || !std::isfinite(normalizer))
    throw std::domain_error("force normalizer must be positive");
  NormalizedResidual out;
  out.per_node.resize(force_density.size());
  for (std::size_t i = 0; i < force_density.size(); ++i)
    out.per_node[i] = force_density[i] / normalizer;
  out.volume_average = volume_average(out.per_node, state);
  return out;
}

// |J x B - grad p| per node (the stored F carries one factor mu0).
inline std::vector<double> force_density(const FieldState& state) {
  std::vector<double> f(state.size());
  for (std::size_t i = 0; i < state.size(); ++i)
    f[i] = state.nodes[i].F_mag / kMu0;
  return f;
}

// <|grad |B|^2| / (2 mu0)>_vol.
inline double magnetic_pressure_gradient_scale(const FieldState& state) {
  std::vector<double> g(state.size());
  for (std::size_t i = 0; i < state.size(); ++i) g[i] = state.nodes[i].grad_B2;
  return volume_average(g, state);
}

inline NormalizedResidual normalized_residual(const FieldState& state) {
  return f_norm(force_density(state), state,
                magnetic_pressure_gradient_scale(state));
}

}  // namespace pinnmhd

#endif  // PINNMHD_MHDKERNEL_HPP
