#ifndef PINNMHD_NETFIELD_HPP
#define PINNMHD_NETFIELD_HPP

// Neural parametrization of the radial profiles of the Fourier modes.
//
// Each coordinate X in {R, lambda, Z} owns a two-hidden-layer tanh network
// NN_X : (-1, 1) -> R^K fed with f(rho) = 2 rho^2 - 1. The mode profiles are
//
//   R_mn(rho)      = rho^m [R_b,mn + (1 - rho^2) NN_R,mn(f(rho))]
//   Z_mn(rho)      = rho^m [Z_b,mn + (1 - rho^2) NN_Z,mn(f(rho))]
//   lambda_mn(rho) = rho^m  NN_lambda,mn(f(rho))
//
// so the boundary is imposed exactly and every mode is regular at the axis.
// Radial derivatives up to second order come from pushing a Jet2 in rho
// through the whole composition.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pinnmhd/jet.hpp"
#include "pinnmhd/spectral.hpp"

namespace pinnmhd {

inline constexpr double kMu0 = 4.0e-7 * std::numbers::pi;

enum class Coordinate { kR = 0, kLambda = 1, kZ = 2 };
inline constexpr std::array<Coordinate, 3> kCoordinates = {
    Coordinate::kR, Coordinate::kLambda, Coordinate::kZ};

inline Parity parity_of(Coordinate c) {
  return c == Coordinate::kR ? Parity::kCosine : Parity::kSine;
}

// Polynomial in s = rho^2, coefficients in ascending powers.
struct Polynomial {
  std::vector<double> coefficients;

  double operator()(double s) const {
    double v = 0.0;
    for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it)
      v = v * s + *it;
    return v;
  }
  double derivative(double s) const {
    double v = 0.0;
    for (std::size_t i = coefficients.size(); i-- > 1;)
      v = v * s + static_cast<double>(i) * coefficients[i];
    return v;
  }
  friend bool operator==(const Polynomial&, const Polynomial&) = default;
};

struct EquilibriumInput {
  int M = 1;
  int N = 0;
  int n_fp = 1;
  // Boundary coefficients expanded onto the (M, N) mode sets; entries beyond
  // the prescribed boundary resolution are zero.
  std::vector<double> r_boundary;
  std::vector<double> z_boundary;
  // Axis guess per toroidal mode n = 0..N; empty when not provided.
  std::vector<double> r_axis;
  std::vector<double> z_axis;
  Polynomial pressure;  // Pa
  Polynomial iota;
  double psi_b = 1.0;  // total toroidal flux, Wb

  ModeSet modes(Coordinate c) const {
    return ModeSet::build(M, N, n_fp, parity_of(c));
  }
  std::size_t mode_count() const {
    return static_cast<std::size_t>(M * (2 * N + 1) - N);
  }
  bool has_axis() const { return !r_axis.empty(); }
  // d psi / d s used by the contravariant field.
  double flux_derivative() const { return psi_b / (2.0 * std::numbers::pi); }

  // Highest poloidal and toroidal mode numbers carrying boundary data.
  std::pair<int, int> boundary_resolution() const;

  void validate() const;

  friend bool operator==(const EquilibriumInput&,
                         const EquilibriumInput&) = default;
};

namespace detail {

inline double cross2(double ax, double ay, double bx, double by) {
  return ax * by - ay * bx;
}

inline bool segments_cross(const std::array<double, 2>& p1,
                           const std::array<double, 2>& p2,
                           const std::array<double, 2>& q1,
                           const std::array<double, 2>& q2) {
  const double d1 = cross2(q2[0] - q1[0], q2[1] - q1[1], p1[0] - q1[0],
                           p1[1] - q1[1]);
  const double d2 = cross2(q2[0] - q1[0], q2[1] - q1[1], p2[0] - q1[0],
                           p2[1] - q1[1]);
  const double d3 = cross2(p2[0] - p1[0], p2[1] - p1[1], q1[0] - p1[0],
                           q1[1] - p1[1]);
  const double d4 = cross2(p2[0] - p1[0], p2[1] - p1[1], q2[0] - p1[0],
                           q2[1] - p1[1]);
  return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0)) && d1 != 0 &&
         d2 != 0 && d3 != 0 && d4 != 0;
}

}  // namespace detail

// True when the closed polyline has no pair of crossing non-adjacent edges.
inline bool is_simple_polygon(std::span<const std::array<double, 2>> pts) {
  const std::size_t n = pts.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = pts[i];
    const auto& b = pts[(i + 1) % n];
    for (std::size_t j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;
      if (detail::segments_cross(a, b, pts[j], pts[(j + 1) % n])) return false;
    }
  }
  return true;
}

inline std::pair<int, int> EquilibriumInput::boundary_resolution() const {
  const ModeSet set = modes(Coordinate::kR);
  int mb = 0;
  int nb = 0;
  for (std::size_t k = 0; k < set.size(); ++k) {
    if (r_boundary[k] != 0.0 || z_boundary[k] != 0.0) {
      mb = std::max(mb, set[k].m);
      nb = std::max(nb, std::abs(set[k].n));
    }
  }
  return {mb, nb};
}

inline void EquilibriumInput::validate() const {
  if (M < 1 || N < 0 || n_fp < 1)
    throw std::invalid_argument("invalid spectral resolution");
  const std::size_t k = mode_count();
  if (r_boundary.size() != k || z_boundary.size() != k)
    throw std::invalid_argument("boundary length does not match mode set");
  if (z_boundary[0] != 0.0)
    throw std::invalid_argument("Z boundary (0,0) sine coefficient must be 0");
  if (has_axis() && (r_axis.size() != static_cast<std::size_t>(N + 1) ||
                     z_axis.size() != static_cast<std::size_t>(N + 1)))
    throw std::invalid_argument("axis guess needs N+1 toroidal entries");
  if (psi_b == 0.0) throw std::invalid_argument("psi_b must be nonzero");
  if (!has_axis() && r_boundary[0] == 0.0)
    throw std::invalid_argument(
        "no axis guess and no m=0 boundary modes to derive one from");
  const ModeSet rs = modes(Coordinate::kR);
  const ModeSet zs = modes(Coordinate::kZ);
  const int samples = 4 * M;
  std::vector<std::array<double, 2>> curve(samples);
  for (int i = 0; i < samples; ++i) {
    const double th = 2.0 * std::numbers::pi * i / samples;
    curve[i] = {evaluate(rs, r_boundary, th, 0.0),
                evaluate(zs, z_boundary, th, 0.0)};
  }
  if (!is_simple_polygon(curve))
    throw std::invalid_argument("boundary at zeta=0 self-intersects");
}

// Flat parameter vector of the three networks in the order R, lambda, Z.
// Per network: W0 (n), b0 (n), W1 (n x n, row-major), b1 (n), W2 (K x n,
// row-major), b2 (K).
struct NetLayout {
  int width = 1;
  int outputs = 1;

  std::size_t per_net() const {
    const std::size_t n = width;
    const std::size_t k = outputs;
    return 3 * n + n * n + k * n + k;
  }
  std::size_t total() const { return 3 * per_net(); }
  std::size_t net_offset(Coordinate c) const {
    return static_cast<std::size_t>(c) * per_net();
  }
  std::size_t w0() const { return 0; }
  std::size_t b0() const { return width; }
  std::size_t w1() const { return 2 * static_cast<std::size_t>(width); }
  std::size_t b1() const {
    return w1() + static_cast<std::size_t>(width) * width;
  }
  std::size_t w2() const { return b1() + width; }
  std::size_t b2() const {
    return w2() + static_cast<std::size_t>(outputs) * width;
  }
  friend bool operator==(const NetLayout&, const NetLayout&) = default;
};

struct NetParams {
  NetLayout layout;
  std::vector<double> data;

  std::span<const double> net(Coordinate c) const {
    return {data.data() + layout.net_offset(c), layout.per_net()};
  }
  std::span<double> net(Coordinate c) {
    return {data.data() + layout.net_offset(c), layout.per_net()};
  }
  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
  friend bool operator==(const NetParams&, const NetParams&) = default;
};

// f(rho) = 2 rho^2 - 1 with its first and second derivative.
inline ad::Jet2<double> input_map(double rho) {
  return {2.0 * rho * rho - 1.0, 4.0 * rho, 4.0};
}

// Two-layer tanh network evaluated on a jet input; returns the K outputs with
// the derivatives carried by `f`.
template <class T>
std::vector<ad::Jet2<T>> mlp_forward(std::span<const T> net,
                                     const NetLayout& layout,
                                     const ad::Jet2<double>& f) {
  using ad::Jet2;
  const int n = layout.width;
  const int k = layout.outputs;
  std::vector<Jet2<T>> a0(n);
  for (int i = 0; i < n; ++i) {
    const T& w = net[layout.w0() + i];
    const Jet2<T> z{w * f.value + net[layout.b0() + i], w * f.d1, w * f.d2};
    a0[i] = tanh(z);
  }
  std::vector<Jet2<T>> a1(n);
  for (int i = 0; i < n; ++i) {
    const std::size_t row = layout.w1() + static_cast<std::size_t>(i) * n;
    T v = net[layout.b1() + i];
    T d1(0.0);
    T d2(0.0);
    for (int j = 0; j < n; ++j) {
      const T& w = net[row + j];
      v += w * a0[j].value;
      d1 += w * a0[j].d1;
      d2 += w * a0[j].d2;
    }
    a1[i] = tanh(Jet2<T>{v, d1, d2});
  }
  std::vector<Jet2<T>> out(k);
  for (int o = 0; o < k; ++o) {
    const std::size_t row = layout.w2() + static_cast<std::size_t>(o) * n;
    T v = net[layout.b2() + o];
    T d1(0.0);
    T d2(0.0);
    for (int j = 0; j < n; ++j) {
      const T& w = net[row + j];
      v += w * a1[j].value;
      d1 += w * a1[j].d1;
      d2 += w * a1[j].d2;
    }
    out[o] = Jet2<T>{v, d1, d2};
  }
  return out;
}

// Convenience form: outputs and d/df, d^2/df^2 at a plain input value.
inline std::vector<ad::Jet2<double>> mlp_forward(std::span<const double> net,
                                                 const NetLayout& layout,
                                                 double f) {
  return mlp_forward<double>(net, layout, ad::jet_lift(f));
}

inline NetParams init_params(const EquilibriumInput& input, int width,
                             std::uint64_t seed) {
  if (width < 1) throw std::invalid_argument("network width must be >= 1");
  input.validate();
  NetParams params;
  params.layout = {width, static_cast<int>(input.mode_count())};
  params.data.assign(params.layout.total(), 0.0);
  const NetLayout& layout = params.layout;
  const ModeSet modes = input.modes(Coordinate::kR);

  for (Coordinate c : kCoordinates) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed),
                      static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(c)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, 0.01);
    std::span<double> net = params.net(c);
    for (int i = 0; i < width; ++i) net[layout.w0() + i] = normal(rng);
    for (int i = 0; i < width * width; ++i) net[layout.w1() + i] = normal(rng);
    for (int i = 0; i < layout.outputs * width; ++i)
      net[layout.w2() + i] = normal(rng);

    // Shift the last bias so that the network term at the axis (f = -1)
    // equals axis - boundary for m = 0 modes of R and Z and zero otherwise.
    const auto raw = mlp_forward(std::span<const double>(net), layout, -1.0);
    for (std::size_t k = 0; k < modes.size(); ++k) {
      double target = 0.0;
      if (c != Coordinate::kLambda && modes[k].m == 0 && input.has_axis()) {
        const auto& axis = c == Coordinate::kR ? input.r_axis : input.z_axis;
        const auto& bnd =
            c == Coordinate::kR ? input.r_boundary : input.z_boundary;
        target = axis[modes[k].n] - bnd[k];
      }
      net[layout.b2() + k] = target - raw[k].value;
    }
  }
  return params;
}

template <class T>
struct ModeProfilesT {
  double rho = 0.0;
  // Indexed by coordinate, then mode; each a jet in rho.
  std::array<std::vector<ad::Jet2<T>>, 3> modes;
};

// Evaluates the composed mode profiles of all three coordinates at rho.
template <class T>
ModeProfilesT<T> mode_profiles(std::span<const T> params,
                               const NetLayout& layout,
                               const EquilibriumInput& input, double rho) {
  using ad::Jet2;
  if (!(rho > 0.0 && rho < 1.0))
    throw std::domain_error("mode profiles need rho in (0, 1)");
  const ModeSet modes = input.modes(Coordinate::kR);
  const Jet2<double> f = input_map(rho);
  const Jet2<double> r = ad::jet_lift(rho);
  const Jet2<double> distance = Jet2<double>(1.0) - r * r;
  std::array<Jet2<double>, 64> rho_pow{};
  const int max_m = std::min(input.M, 64);
  for (int m = 0; m < max_m; ++m) rho_pow[m] = ad::pow(r, m);

  ModeProfilesT<T> out;
  out.rho = rho;
  for (Coordinate c : kCoordinates) {
    const std::size_t off = layout.net_offset(c);
    const std::span<const T> net = params.subspan(off, layout.per_net());
    const auto nn = mlp_forward<T>(net, layout, f);
    auto& dst = out.modes[static_cast<int>(c)];
    dst.resize(modes.size());
    const std::vector<double>* bnd = c == Coordinate::kR   ? &input.r_boundary
                                     : c == Coordinate::kZ ? &input.z_boundary
                                                           : nullptr;
    for (std::size_t k = 0; k < modes.size(); ++k) {
      if (c != Coordinate::kR && k == 0) {  // sine (0,0)
        dst[k] = Jet2<T>(0.0);
        continue;
      }
      const int m = modes[k].m;
      const Jet2<double> pm =
          m < 64 ? rho_pow[m] : ad::pow(r, m);
      // X = rho^m * b + (rho^m * distance) * NN
      const Jet2<double> factor = c == Coordinate::kLambda ? pm : pm * distance;
      const auto& h = nn[k];
      Jet2<T> x{factor.value * h.value,
                factor.d1 * h.value + factor.value * h.d1,
                factor.d2 * h.value + 2.0 * factor.d1 * h.d1 +
                    factor.value * h.d2};
      if (bnd != nullptr && (*bnd)[k] != 0.0) {
        const double b = (*bnd)[k];
        x.value += T(pm.value * b);
        x.d1 += T(pm.d1 * b);
        x.d2 += T(pm.d2 * b);
      }
      dst[k] = x;
    }
  }
  return out;
}

// Plain-double profiles as synthesis-ready coefficients.
struct ModeProfiles {
  double rho = 0.0;
  SurfaceCoefficients r;
  SurfaceCoefficients lambda;
  SurfaceCoefficients z;

  const SurfaceCoefficients& operator[](Coordinate c) const {
    return c == Coordinate::kR ? r : c == Coordinate::kLambda ? lambda : z;
  }
};

inline ModeProfiles mode_profiles(const NetParams& params,
                                  const EquilibriumInput& input, double rho) {
  const auto jets = mode_profiles<double>(params.data, params.layout, input, rho);
  ModeProfiles out;
  out.rho = rho;
  for (Coordinate c : kCoordinates) {
    SurfaceCoefficients sc =
        SurfaceCoefficients::zeros(input.modes(c), /*with_radial=*/true);
    const auto& src = jets.modes[static_cast<int>(c)];
    for (std::size_t k = 0; k < src.size(); ++k) {
      sc.values[k] = src[k].value;
      sc.d_rho[k] = src[k].d1;
      sc.d_rho2[k] = src[k].d2;
    }
    (c == Coordinate::kR ? out.r : c == Coordinate::kLambda ? out.lambda
                                                            : out.z) =
        std::move(sc);
  }
  return out;
}

// Values only, valid on the closed interval [0, 1]; used for exports where
// the axis and the boundary itself are wanted.
inline std::array<std::vector<double>, 3> mode_values(
    const NetParams& params, const EquilibriumInput& input, double rho) {
  const ModeSet modes = input.modes(Coordinate::kR);
  const double f = 2.0 * rho * rho - 1.0;
  const double distance = 1.0 - rho * rho;
  std::array<std::vector<double>, 3> out;
  for (Coordinate c : kCoordinates) {
    auto& dst = out[static_cast<int>(c)];
    dst.assign(modes.size(), 0.0);
    const auto nn = mlp_forward(params.net(c), params.layout, f);
    for (std::size_t k = 0; k < modes.size(); ++k) {
      if (c != Coordinate::kR && k == 0) continue;
      const double pm = std::pow(rho, modes[k].m);
      if (c == Coordinate::kLambda) {
        dst[k] = pm * nn[k].value;
      } else {
        const double b = c == Coordinate::kR ? input.r_boundary[k]
                                             : input.z_boundary[k];
        dst[k] = pm * (b + distance * nn[k].value);
      }
    }
  }
  return out;
}

}  // namespace pinnmhd

#endif  // PINNMHD_NETFIELD_HPP
