#ifndef PINNMHD_LOSS_HPP
#define PINNMHD_LOSS_HPP

// Mean force-residual loss over the collocation grid and its exact gradient
// with respect to all network parameters.
//
// The gradient is assembled in three pieces per surface:
//   1. a tape through the three networks and the rho-jets of the profiles,
//   2. one small tape per angular node through the field kernel, giving the
//      sensitivity of |F| to the 30 synthesized partials of R, Z, lambda,
//   3. the (linear) adjoint of Fourier synthesis, mapping node sensitivities
//      back onto the profile jets, which then seed the backward sweep of 1.
// Surfaces are independent; their contributions are reduced in surface order
// so results do not depend on the number of worker threads.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <thread>
#include <utility>
#include <vector>

#include "pinnmhd/autodiff.hpp"
#include "pinnmhd/mhdkernel.hpp"
#include "pinnmhd/netfield.hpp"
#include "pinnmhd/spectral.hpp"

namespace pinnmhd {

struct LossResult {
  double loss = 0.0;
  std::vector<double> gradient;  // empty unless requested
  bool finite = true;
  // +1 / -1 when every node's Jacobian has that sign, 0 otherwise.
  int jacobian_sign = 0;
  std::size_t first_bad_node = 0;

  bool ok() const { return finite && jacobian_sign != 0; }
};

class LossEvaluator {
 public:
  LossEvaluator(EquilibriumInput input, CollocationGrid grid, int threads = 1)
      : input_(std::move(input)),
        grid_(std::move(grid)),
        threads_(std::max(1, threads)) {
    input_.validate();
    grid_.validate();
    if (grid_.angular.n_fp != input_.n_fp)
      throw std::invalid_argument("grid and input disagree on N_FP");
    basis_cos_ = BasisTable(input_.modes(Coordinate::kR), grid_.angular);
    basis_sin_ = BasisTable(input_.modes(Coordinate::kZ), grid_.angular);
  }

  const EquilibriumInput& input() const { return input_; }
  const CollocationGrid& grid() const { return grid_; }
  int threads() const { return threads_; }
  void set_threads(int t) { threads_ = std::max(1, t); }

  LossResult evaluate(const NetParams& params, bool with_gradient) const {
    const std::size_t n_surf = grid_.rho.size();
    std::vector<SurfaceResult> parts(n_surf);
    auto work = [&](std::size_t j) {
      parts[j] = with_gradient ? surface_gradient(params, j)
                               : surface_value(params, j);
    };
    run_parallel(n_surf, work);

    LossResult out;
    const double inv_nodes = 1.0 / static_cast<double>(grid_.size());
    std::vector<double> sums(n_surf);
    int sign = parts[0].sign;
    for (std::size_t j = 0; j < n_surf; ++j) {
      sums[j] = parts[j].sum;
      if (!parts[j].finite && out.finite) {
        out.finite = false;
        out.first_bad_node = j * grid_.angular.size() + parts[j].bad_node;
      }
      if (parts[j].sign != sign || parts[j].sign == 0) {
        if (sign != 0)
          out.first_bad_node = j * grid_.angular.size() + parts[j].bad_node;
        sign = 0;
      }
    }
    out.jacobian_sign = sign;
    out.loss = pairwise_sum(sums) * inv_nodes;
    if (!std::isfinite(out.loss)) out.finite = false;
    if (with_gradient) {
      out.gradient.assign(params.layout.total(), 0.0);
      for (std::size_t j = 0; j < n_surf; ++j)
        for (std::size_t i = 0; i < out.gradient.size(); ++i)
          out.gradient[i] += parts[j].gradient[i];
      for (double& g : out.gradient) g *= inv_nodes;
    }
    return out;
  }

  double value(const NetParams& params) const {
    return evaluate(params, false).loss;
  }

 private:
  struct SurfaceResult {
    double sum = 0.0;
    bool finite = true;
    int sign = 0;
    std::size_t bad_node = 0;
    std::vector<double> gradient;
  };

  template <class Fn>
  void run_parallel(std::size_t n, Fn& fn) const {
    const std::size_t workers = std::min<std::size_t>(threads_, n);
    if (workers <= 1) {
      for (std::size_t j = 0; j < n; ++j) fn(j);
      return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t j = w; j < n; j += workers) fn(j);
      });
    }
    for (auto& t : pool) t.join();
  }

  static void track_sign(SurfaceResult& r, double jac, std::size_t node) {
    const int s = jac > 0.0 ? 1 : (jac < 0.0 ? -1 : 0);
    if (node == 0) {
      r.sign = s;
      if (s == 0) r.bad_node = 0;
    } else if (r.sign != 0 && s != r.sign) {
      r.sign = 0;
      r.bad_node = node;
    }
  }

  SurfaceResult surface_value(const NetParams& params, std::size_t j) const {
    SurfaceResult r;
    const double rho = grid_.rho[j];
    const ModeProfiles prof = mode_profiles(params, input_, rho);
    const AngularGrid& ang = grid_.angular;
    std::vector<double> f(ang.size());
    for (int kz = 0; kz < ang.n_zeta; ++kz) {
      for (int it = 0; it < ang.n_theta; ++it) {
        const std::size_t a = ang.index(it, kz);
        const auto st = evaluate_node<double>(
            rho, ang.theta(it), ang.zeta(kz),
            to_partials(synthesize_node(prof.r, basis_cos_, a)),
            to_partials(synthesize_node(prof.z, basis_sin_, a)),
            to_partials(synthesize_node(prof.lambda, basis_sin_, a)), input_);
        track_sign(r, st.sqrt_g.value, a);
        f[a] = st.F_mag;
        if (!std::isfinite(f[a]) && r.finite) {
          r.finite = false;
          r.bad_node = a;
        }
      }
    }
    r.sum = pairwise_sum(f);
    return r;
  }

  SurfaceResult surface_gradient(const NetParams& params,
                                 std::size_t j) const {
    using ad::Jet2;
    using ad::Tape;
    using ad::TapeScope;
    using ad::Var;
    SurfaceResult r;
    const double rho = grid_.rho[j];
    const NetLayout& layout = params.layout;
    const std::size_t K = input_.mode_count();

    thread_local Tape net_tape;
    thread_local Tape node_tape;

    // 1. networks and profile jets on the surface tape
    TapeScope net_scope(net_tape);
    std::vector<Var> leaves;
    leaves.reserve(params.data.size());
    for (double p : params.data) leaves.push_back(Var::leaf(p));
    const ModeProfilesT<Var> jets = mode_profiles<Var>(
        std::span<const Var>(leaves), layout, input_, rho);

    std::array<SurfaceCoefficients, 3> coeffs;
    for (Coordinate c : kCoordinates) {
      const int ci = static_cast<int>(c);
      coeffs[ci] = SurfaceCoefficients::zeros(input_.modes(c), true);
      for (std::size_t k = 0; k < K; ++k) {
        coeffs[ci].values[k] = jets.modes[ci][k].value.value();
        coeffs[ci].d_rho[k] = jets.modes[ci][k].d1.value();
        coeffs[ci].d_rho2[k] = jets.modes[ci][k].d2.value();
      }
    }

    // 2. per-node kernel tapes and synthesis adjoint
    std::array<std::vector<double>, 9> adj_coef;
    for (auto& v : adj_coef) v.assign(K, 0.0);
    const AngularGrid& ang = grid_.angular;
    std::vector<double> f(ang.size());
    {
      TapeScope node_scope(node_tape);
      for (int kz = 0; kz < ang.n_zeta; ++kz) {
        for (int it = 0; it < ang.n_theta; ++it) {
          const std::size_t a = ang.index(it, kz);
          const std::array<const BasisTable*, 3> basis = {
              &basis_cos_, &basis_sin_, &basis_sin_};
          std::array<FieldPoint, 3> pts;
          for (int ci = 0; ci < 3; ++ci)
            pts[ci] = synthesize_node(coeffs[ci], *basis[ci], a);

          node_tape.clear();
          std::array<Partials<Var>, 3> in;
          for (int ci = 0; ci < 3; ++ci)
            for (int q = 0; q < FieldPoint::kCount; ++q)
              in[ci][q] = Var::leaf(pts[ci][q]);
          // coordinate order in the kernel call is R, Z, lambda
          const auto st = evaluate_node<Var>(rho, ang.theta(it), ang.zeta(kz),
                                             in[0], in[2], in[1], input_);
          track_sign(r, st.sqrt_g.value.value(), a);
          f[a] = st.F_mag.value();
          if (!std::isfinite(f[a])) {
            if (r.finite) r.bad_node = a;
            r.finite = false;
            continue;
          }
          const auto& adj = node_tape.backward(st.F_mag.index());
          for (int ci = 0; ci < 3; ++ci) {
            FieldPoint g;
            for (int q = 0; q < FieldPoint::kCount; ++q)
              g[q] = adj[in[ci][q].index()];
            synthesize_node_adjoint(coeffs[ci].modes, *basis[ci], a, g,
                                    adj_coef[3 * ci], adj_coef[3 * ci + 1],
                                    adj_coef[3 * ci + 2]);
          }
        }
      }
    }
    r.sum = pairwise_sum(f);

    // 3. seed the profile jets and sweep the network tape
    std::vector<std::pair<std::int32_t, double>> seeds;
    seeds.reserve(9 * K);
    for (int ci = 0; ci < 3; ++ci) {
      for (std::size_t k = 0; k < K; ++k) {
        const Jet2<Var>& x = jets.modes[ci][k];
        seeds.emplace_back(x.value.index(), adj_coef[3 * ci][k]);
        seeds.emplace_back(x.d1.index(), adj_coef[3 * ci + 1][k]);
        seeds.emplace_back(x.d2.index(), adj_coef[3 * ci + 2][k]);
      }
    }
    const auto& adj = net_tape.backward_seeded(seeds);
    r.gradient.resize(leaves.size());
    for (std::size_t i = 0; i < leaves.size(); ++i)
      r.gradient[i] = adj[leaves[i].index()];
    return r;
  }

  EquilibriumInput input_;
  CollocationGrid grid_;
  int threads_ = 1;
  BasisTable basis_cos_;
  BasisTable basis_sin_;
};

// The same mean residual with every parameter-dependent operation carried
// out in the scalar type T (for instance long double), by direct summation.
// Serves as a higher-precision reference for finite-difference checks.
template <class T>
T loss_value(std::span<const T> params, const NetLayout& layout,
             const EquilibriumInput& input, const CollocationGrid& grid) {
  const AngularGrid& ang = grid.angular;
  const ModeSet modes = input.modes(Coordinate::kR);
  const T nfp = static_cast<T>(ang.n_fp);
  T total(0);
  for (double rho : grid.rho) {
    const ModeProfilesT<T> jets = mode_profiles<T>(params, layout, input, rho);
    for (int kz = 0; kz < ang.n_zeta; ++kz) {
      for (int it = 0; it < ang.n_theta; ++it) {
        const T th = T(2) * std::numbers::pi_v<T> * it / ang.n_theta;
        const T ze = T(2) * std::numbers::pi_v<T> * kz / (nfp * ang.n_zeta);
        std::array<Partials<T>, 3> q;
        for (int ci = 0; ci < 3; ++ci) {
          q[ci].fill(T(0));
          const bool cosine = ci == static_cast<int>(Coordinate::kR);
          for (std::size_t k = 0; k < modes.size(); ++k) {
            const T m = static_cast<T>(modes[k].m);
            const T nn = static_cast<T>(modes[k].n) * nfp;
            const T phi = m * th - nn * ze;
            const T e = cosine ? std::cos(phi) : std::sin(phi);
            const T o = cosine ? -std::sin(phi) : std::cos(phi);
            const auto& j = jets.modes[ci][k];
            q[ci][kValue] += j.value * e;
            q[ci][kT] += m * j.value * o;
            q[ci][kZ] -= nn * j.value * o;
            q[ci][kTT] -= m * m * j.value * e;
            q[ci][kTZ] += m * nn * j.value * e;
            q[ci][kZZ] -= nn * nn * j.value * e;
            q[ci][kP] += j.d1 * e;
            q[ci][kPT] += m * j.d1 * o;
            q[ci][kPZ] -= nn * j.d1 * o;
            q[ci][kPP] += j.d2 * e;
          }
        }
        const auto st = evaluate_node<T>(rho, static_cast<double>(th),
                                         static_cast<double>(ze), q[0], q[2],
                                         q[1], input);
        total += st.F_mag;
      }
    }
  }
  return total / static_cast<T>(grid.size());
}

}  // namespace pinnmhd

#endif  // PINNMHD_LOSS_HPP
