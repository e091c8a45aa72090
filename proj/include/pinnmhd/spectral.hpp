#ifndef PINNMHD_SPECTRAL_HPP
#define PINNMHD_SPECTRAL_HPP

// Stellarator-symmetric Fourier mode sets and direct-summation synthesis.
//
// A coordinate X(theta, zeta) on one surface is
//
//   X = sum_k X_k cos(m_k theta - n_k N_FP zeta)   (cosine parity, R)
//   X = sum_k X_k sin(m_k theta - n_k N_FP zeta)   (sine parity, lambda, Z)
//
// All angular derivatives are taken by differentiating the basis.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pinnmhd {

enum class Parity { kCosine, kSine };

struct Mode {
  int m = 0;
  int n = 0;
  friend bool operator==(const Mode&, const Mode&) = default;
};

class ModeSet {
 public:
  ModeSet() = default;

  // Modes ordered by m ascending, then n ascending; m = 0 keeps n >= 0 only.
  static ModeSet build(int M, int N, int n_fp, Parity parity) {
    if (M < 1) throw std::invalid_argument("mode set needs M >= 1");
    if (N < 0) throw std::invalid_argument("mode set needs N >= 0");
    if (n_fp < 1) throw std::invalid_argument("mode set needs N_FP >= 1");
    ModeSet set;
    set.M_ = M;
    set.N_ = N;
    set.n_fp_ = n_fp;
    set.parity_ = parity;
    set.entries_.reserve(static_cast<std::size_t>(M * (2 * N + 1) - N));
    for (int m = 0; m < M; ++m) {
      for (int n = (m == 0 ? 0 : -N); n <= N; ++n) set.entries_.push_back({m, n});
    }
    return set;
  }

  int M() const { return M_; }
  int N() const { return N_; }
  int n_fp() const { return n_fp_; }
  Parity parity() const { return parity_; }
  std::size_t size() const { return entries_.size(); }
  const Mode& operator[](std::size_t k) const { return entries_[k]; }
  std::span<const Mode> entries() const { return entries_; }

  // Sine (0,0) is identically zero as a basis function.
  bool is_fixed_zero(std::size_t k) const {
    return parity_ == Parity::kSine && entries_[k].m == 0 && entries_[k].n == 0;
  }

  // Position of (m, n), or -1 when the mode is not in the set.
  std::ptrdiff_t index_of(int m, int n) const {
    if (m < 0 || m >= M_ || n < -N_ || n > N_ || (m == 0 && n < 0)) return -1;
    if (m == 0) return n;
    return static_cast<std::ptrdiff_t>((N_ + 1) + (m - 1) * (2 * N_ + 1) +
                                       (n + N_));
  }

  bool same_shape(const ModeSet& o) const {
    return M_ == o.M_ && N_ == o.N_ && n_fp_ == o.n_fp_;
  }

 private:
  int M_ = 0;
  int N_ = 0;
  int n_fp_ = 1;
  Parity parity_ = Parity::kCosine;
  std::vector<Mode> entries_;
};

inline double fourier_angle(int m, int n, int n_fp, double theta,
                            double zeta) {
  return m * theta - static_cast<double>(n) * n_fp * zeta;
}

struct SurfaceCoefficients {
  ModeSet modes;
  std::vector<double> values;
  std::vector<double> d_rho;   // empty when radial derivatives are absent
  std::vector<double> d_rho2;  // empty when radial derivatives are absent

  static SurfaceCoefficients zeros(const ModeSet& modes, bool with_radial) {
    SurfaceCoefficients c{modes, std::vector<double>(modes.size(), 0.0), {},
                          {}};
    if (with_radial) {
      c.d_rho.assign(modes.size(), 0.0);
      c.d_rho2.assign(modes.size(), 0.0);
    }
    return c;
  }

  bool has_radial() const { return !d_rho.empty(); }

  void validate() const {
    const std::size_t k = modes.size();
    if (values.size() != k || (has_radial() && (d_rho.size() != k ||
                                                d_rho2.size() != k)))
      throw std::invalid_argument("coefficient length does not match mode set");
    for (std::size_t i = 0; i < k; ++i) {
      if (modes.is_fixed_zero(i) && values[i] != 0.0)
        throw std::invalid_argument("sine (0,0) coefficient must be zero");
    }
  }
};

// Uniform endpoint-exclusive angular grid over one field period.
struct AngularGrid {
  int n_theta = 0;
  int n_zeta = 0;
  int n_fp = 1;

  static AngularGrid make(int n_theta, int n_zeta, int n_fp) {
    if (n_theta < 1 || n_zeta < 1)
      throw std::invalid_argument("angular grid with zero nodes");
    if (n_fp < 1) throw std::invalid_argument("angular grid needs N_FP >= 1");
    return {n_theta, n_zeta, n_fp};
  }

  // Default density: 4M poloidal and max(1, 4N) toroidal nodes.
  static AngularGrid for_modes(int M, int N, int n_fp) {
    return make(4 * M, N == 0 ? 1 : 4 * N, n_fp);
  }

  std::size_t size() const {
    return static_cast<std::size_t>(n_theta) * static_cast<std::size_t>(n_zeta);
  }
  double theta(int i) const { return 2.0 * std::numbers::pi * i / n_theta; }
  double zeta(int k) const {
    return 2.0 * std::numbers::pi * k / (static_cast<double>(n_fp) * n_zeta);
  }
  // Node ordering: theta fastest.
  std::size_t index(int i, int k) const {
    return static_cast<std::size_t>(k) * n_theta + i;
  }
};

// Value and partials of a synthesized coordinate at one node.
struct FieldPoint {
  double value = 0.0;
  double d_theta = 0.0;
  double d_zeta = 0.0;
  double d_theta2 = 0.0;
  double d_theta_zeta = 0.0;
  double d_zeta2 = 0.0;
  double d_rho = 0.0;
  double d_rho_theta = 0.0;
  double d_rho_zeta = 0.0;
  double d_rho2 = 0.0;

  static constexpr int kCount = 10;
  double& operator[](int i) { return (&value)[i]; }
  double operator[](int i) const { return (&value)[i]; }
};

// Precomputed trigonometric basis of a mode set on an angular grid.
class BasisTable {
 public:
  BasisTable() = default;
  BasisTable(const ModeSet& modes, const AngularGrid& grid)
      : modes_(modes), grid_(grid) {
    const std::size_t k = modes.size();
    cos_.resize(k * grid.size());
    sin_.resize(k * grid.size());
    for (int kz = 0; kz < grid.n_zeta; ++kz) {
      for (int it = 0; it < grid.n_theta; ++it) {
        const std::size_t node = grid.index(it, kz);
        for (std::size_t j = 0; j < k; ++j) {
          const double phi = fourier_angle(modes[j].m, modes[j].n, grid.n_fp,
                                           grid.theta(it), grid.zeta(kz));
          cos_[node * k + j] = std::cos(phi);
          sin_[node * k + j] = std::sin(phi);
        }
      }
    }
  }

  const ModeSet& modes() const { return modes_; }
  const AngularGrid& grid() const { return grid_; }
  std::span<const double> cos_at(std::size_t node) const {
    return {cos_.data() + node * modes_.size(), modes_.size()};
  }
  std::span<const double> sin_at(std::size_t node) const {
    return {sin_.data() + node * modes_.size(), modes_.size()};
  }

 private:
  ModeSet modes_;
  AngularGrid grid_;
  std::vector<double> cos_;
  std::vector<double> sin_;
};

namespace detail {

// Writes the value and angular partials of one coefficient vector into the
// slots {value, d_theta, d_zeta, d_theta2, d_theta_zeta, d_zeta2} starting at
// `out`. For cosine parity the "even" basis is cos and the derivative basis is
// sin; for sine parity the roles flip and the first-derivative sign changes.
inline void synthesize_angular(const ModeSet& modes, std::span<const double> c,
                               std::span<const double> cs,
                               std::span<const double> sn, double* out,
                               bool full) {
  const bool cosine = modes.parity() == Parity::kCosine;
  const std::span<const double> even = cosine ? cs : sn;
  const std::span<const double> odd = cosine ? sn : cs;
  // d/dphi of the even basis is sign * odd basis.
  const double sign = cosine ? -1.0 : 1.0;
  double v = 0, dt = 0, dz = 0, dtt = 0, dtz = 0, dzz = 0;
  const double nfp = modes.n_fp();
  for (std::size_t j = 0; j < modes.size(); ++j) {
    const double a = c[j];
    if (a == 0.0) continue;
    const double m = modes[j].m;
    const double nn = modes[j].n * nfp;
    v += a * even[j];
    const double od = sign * a * odd[j];
    dt += m * od;
    dz -= nn * od;
    if (full) {
      const double ev = a * even[j];
      dtt -= m * m * ev;
      dtz += m * nn * ev;
      dzz -= nn * nn * ev;
    }
  }
  out[0] = v;
  out[1] = dt;
  out[2] = dz;
  if (full) {
    out[3] = dtt;
    out[4] = dtz;
    out[5] = dzz;
  }
}

}  // namespace detail

// Synthesizes one node. Radial partials are filled when `coeffs` carries
// radial derivative coefficients.
inline FieldPoint synthesize_node(const SurfaceCoefficients& coeffs,
                                  const BasisTable& basis, std::size_t node) {
  FieldPoint p;
  const auto cs = basis.cos_at(node);
  const auto sn = basis.sin_at(node);
  double slots[6];
  detail::synthesize_angular(coeffs.modes, coeffs.values, cs, sn, slots, true);
  p.value = slots[0];
  p.d_theta = slots[1];
  p.d_zeta = slots[2];
  p.d_theta2 = slots[3];
  p.d_theta_zeta = slots[4];
  p.d_zeta2 = slots[5];
  if (coeffs.has_radial()) {
    detail::synthesize_angular(coeffs.modes, coeffs.d_rho, cs, sn, slots,
                               false);
    p.d_rho = slots[0];
    p.d_rho_theta = slots[1];
    p.d_rho_zeta = slots[2];
    detail::synthesize_angular(coeffs.modes, coeffs.d_rho2, cs, sn, slots,
                               false);
    p.d_rho2 = slots[0];
  }
  return p;
}

// Adjoint of synthesize_node: accumulates d(loss)/d(coefficient) given
// d(loss)/d(field partial) at one node.
inline void synthesize_node_adjoint(const ModeSet& modes,
                                    const BasisTable& basis, std::size_t node,
                                    const FieldPoint& adj,
                                    std::span<double> g_values,
                                    std::span<double> g_d_rho,
                                    std::span<double> g_d_rho2) {
  const auto cs = basis.cos_at(node);
  const auto sn = basis.sin_at(node);
  const bool cosine = modes.parity() == Parity::kCosine;
  const std::span<const double> even = cosine ? cs : sn;
  const std::span<const double> odd = cosine ? sn : cs;
  const double sign = cosine ? -1.0 : 1.0;
  const double nfp = modes.n_fp();
  for (std::size_t j = 0; j < modes.size(); ++j) {
    if (modes.is_fixed_zero(j)) continue;
    const double m = modes[j].m;
    const double nn = modes[j].n * nfp;
    const double e = even[j];
    const double o = sign * odd[j];
    g_values[j] += adj.value * e + (adj.d_theta * m - adj.d_zeta * nn) * o +
                   (-adj.d_theta2 * m * m + adj.d_theta_zeta * m * nn -
                    adj.d_zeta2 * nn * nn) *
                       e;
    g_d_rho[j] += adj.d_rho * e + (adj.d_rho_theta * m - adj.d_rho_zeta * nn) * o;
    g_d_rho2[j] += adj.d_rho2 * e;
  }
}

// Synthesizes every node of the grid, theta fastest.
inline std::vector<FieldPoint> synthesize(const SurfaceCoefficients& coeffs,
                                          const AngularGrid& grid) {
  coeffs.validate();
  if (grid.size() == 0) throw std::invalid_argument("grid with zero nodes");
  const BasisTable basis(coeffs.modes, grid);
  std::vector<FieldPoint> out(grid.size());
  for (std::size_t node = 0; node < grid.size(); ++node)
    out[node] = synthesize_node(coeffs, basis, node);
  return out;
}

// Point evaluation of the value only, for exports and root finding.
inline double evaluate(const ModeSet& modes, std::span<const double> values,
                       double theta, double zeta) {
  double v = 0.0;
  for (std::size_t j = 0; j < modes.size(); ++j) {
    const double phi =
        fourier_angle(modes[j].m, modes[j].n, modes.n_fp(), theta, zeta);
    v += values[j] *
         (modes.parity() == Parity::kCosine ? std::cos(phi) : std::sin(phi));
  }
  return v;
}

// Value and first theta derivative at a point.
inline std::pair<double, double> evaluate_with_theta(
    const ModeSet& modes, std::span<const double> values, double theta,
    double zeta) {
  double v = 0.0;
  double dt = 0.0;
  const bool cosine = modes.parity() == Parity::kCosine;
  for (std::size_t j = 0; j < modes.size(); ++j) {
    const double phi =
        fourier_angle(modes[j].m, modes[j].n, modes.n_fp(), theta, zeta);
    const double c = std::cos(phi);
    const double s = std::sin(phi);
    v += values[j] * (cosine ? c : s);
    dt += values[j] * modes[j].m * (cosine ? -s : c);
  }
  return {v, dt};
}

// sum_mn m^2 (R_mn^2 + Z_mn^2).
inline double spectral_width(const SurfaceCoefficients& r,
                             const SurfaceCoefficients& z) {
  if (!r.modes.same_shape(z.modes) || r.values.size() != z.values.size() ||
      r.values.size() != r.modes.size())
    throw std::invalid_argument("spectral width needs matching mode sets");
  double total = 0.0;
  for (std::size_t j = 0; j < r.modes.size(); ++j) {
    const double m = r.modes[j].m;
    total += m * m * (r.values[j] * r.values[j] + z.values[j] * z.values[j]);
  }
  return total;
}

}  // namespace pinnmhd

#endif  // PINNMHD_SPECTRAL_HPP
