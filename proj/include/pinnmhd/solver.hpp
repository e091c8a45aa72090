#ifndef PINNMHD_SOLVER_HPP
#define PINNMHD_SOLVER_HPP

// Two-stage minimization of the force-residual loss: decoupled-weight-decay
// Adam followed by dense BFGS with a strong-Wolfe line search.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pinnmhd/loss.hpp"
#include "pinnmhd/mhdkernel.hpp"
#include "pinnmhd/netfield.hpp"

namespace pinnmhd {

enum class Termination {
  kParamStall,
  kGradTol,
  kTargetReached,
  kMaxIter,
  kDiverged,
};

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::kParamStall: return "param-stall";
    case Termination::kGradTol: return "grad-tol";
    case Termination::kTargetReached: return "target-reached";
    case Termination::kMaxIter: return "max-iter";
    case Termination::kDiverged: return "diverged";
  }
  return "unknown";
}

struct AdamWSettings {
  double step = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
  int max_iterations = 5000;

  friend bool operator==(const AdamWSettings&, const AdamWSettings&) = default;
};

struct BfgsSettings {
  int max_iterations = 5000;
  double c1 = 1e-4;  // sufficient decrease
  double c2 = 0.9;   // curvature
  int max_line_search = 30;

  friend bool operator==(const BfgsSettings&, const BfgsSettings&) = default;
};

struct SolverConfig {
  int width = 8;
  int n_rho = 50;
  int n_theta = 0;  // 0: 4M
  int n_zeta = 0;   // 0: max(1, 4N)
  AdamWSettings adamw;
  BfgsSettings bfgs;
  double param_tolerance = 1e-12;
  double grad_tolerance = 1e-12;
  // Stop once F_vol_norm <= target * (1 + target_rtol); 0 disables.
  double target_fvol = 0.0;
  double target_rtol = 0.005;
  int target_cadence = 25;
  std::uint64_t seed = 0;
  int checkpoint_every = 500;
  int threads = 1;

  void validate() const {
    if (width < 1 || n_rho < 1 || n_theta < 0 || n_zeta < 0)
      throw std::invalid_argument("invalid solver grid or width");
    if (adamw.max_iterations < 0 || bfgs.max_iterations < 0)
      throw std::invalid_argument("iteration counts must be non-negative");
    if (!(adamw.step > 0.0) || !(adamw.epsilon > 0.0) ||
        !(param_tolerance > 0.0) || !(grad_tolerance > 0.0) ||
        !(target_rtol > 0.0) || !(bfgs.c1 > 0.0) || !(bfgs.c2 > bfgs.c1) ||
        !(bfgs.c2 < 1.0) || target_fvol < 0.0 || target_cadence < 1 ||
        bfgs.max_line_search < 1)
      throw std::invalid_argument("solver tolerances must be positive");
    if (adamw.beta1 < 0.0 || adamw.beta1 >= 1.0 || adamw.beta2 < 0.0 ||
        adamw.beta2 >= 1.0)
      throw std::invalid_argument("decay rates must lie in [0, 1)");
  }

  CollocationGrid grid(const EquilibriumInput& in) const {
    AngularGrid ang = AngularGrid::for_modes(in.M, in.N, in.n_fp);
    if (n_theta > 0) ang.n_theta = n_theta;
    if (n_zeta > 0) ang.n_zeta = n_zeta;
    return CollocationGrid::midpoints(n_rho, ang);
  }

  friend bool operator==(const SolverConfig&, const SolverConfig&) = default;
};

struct HistoryEntry {
  int iteration = 0;
  int stage = 0;  // 1: AdamW, 2: BFGS
  double loss = 0.0;
  double wall_seconds = 0.0;
};

// Generic objective over a flat parameter vector.
struct Evaluation {
  double value = 0.0;
  std::vector<double> gradient;
  bool ok = true;
};
using Objective = std::function<Evaluation(std::span<const double>)>;

// Called every accepted iteration with the global iteration counter; return
// true to stop (target reached).
using IterationHook = std::function<bool(int, std::span<const double>)>;

struct StageResult {
  std::vector<double> x;
  std::vector<HistoryEntry> history;
  Termination reason = Termination::kMaxIter;
  int iterations = 0;
  std::string diagnostic;
};

namespace detail {
inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}
}  // namespace detail

inline StageResult adamw_stage(std::vector<double> x, const Objective& f,
                               const AdamWSettings& s,
                               const IterationHook& hook = {},
                               int first_iteration = 0) {
  const auto t0 = std::chrono::steady_clock::now();
  StageResult out;
  std::vector<double> m(x.size(), 0.0);
  std::vector<double> v(x.size(), 0.0);
  double b1t = 1.0;
  double b2t = 1.0;
  for (int it = 1; it <= s.max_iterations; ++it) {
    const Evaluation e = f(x);
    if (!e.ok || !std::isfinite(e.value)) {
      out.reason = Termination::kDiverged;
      out.diagnostic = "non-finite loss or Jacobian sign flip at AdamW iteration " +
                       std::to_string(it);
      break;
    }
    b1t *= s.beta1;
    b2t *= s.beta2;
    const double lr = s.step;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double g = e.gradient[i];
      m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g;
      v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g * g;
      const double mhat = m[i] / (1.0 - b1t);
      const double vhat = v[i] / (1.0 - b2t);
      x[i] -= lr * s.weight_decay * x[i];
      x[i] -= lr * mhat / (std::sqrt(vhat) + s.epsilon);
    }
    out.iterations = it;
    out.history.push_back(
        {first_iteration + it, 1, e.value, detail::seconds_since(t0)});
    if (hook && hook(first_iteration + it, x)) {
      out.reason = Termination::kTargetReached;
      break;
    }
  }
  out.x = std::move(x);
  return out;
}

namespace detail {

struct LinePoint {
  double alpha = 0.0;
  double value = 0.0;
  double slope = 0.0;
  std::vector<double> gradient;
  bool ok = false;
};

// Minimizer of the cubic through (a, fa, da), (b, fb, db), clamped to the
// interior of [a, b]; falls back to bisection.
inline double cubic_step(double a, double fa, double da, double b, double fb,
                         double db) {
  const double d1 = da + db - 3.0 * (fa - fb) / (a - b);
  const double disc = d1 * d1 - da * db;
  double t = 0.5 * (a + b);
  if (disc >= 0.0) {
    const double d2 = std::copysign(std::sqrt(disc), b - a);
    const double denom = db - da + 2.0 * d2;
    if (denom != 0.0) t = b - (b - a) * (db + d2 - d1) / denom;
  }
  const double lo = std::min(a, b);
  const double hi = std::max(a, b);
  const double margin = 0.1 * (hi - lo);
  if (!std::isfinite(t) || t < lo + margin || t > hi - margin)
    t = 0.5 * (a + b);
  return t;
}

// Strong-Wolfe line search along direction p from x (value f0, slope g0).
inline std::optional<LinePoint> strong_wolfe(const Objective& f,
                                             std::span<const double> x,
                                             std::span<const double> p,
                                             double f0, double g0,
                                             double alpha0,
                                             const BfgsSettings& s) {
  std::vector<double> trial(x.size());
  int evals = 0;
  auto eval_at = [&](double alpha) {
    for (std::size_t i = 0; i < x.size(); ++i) trial[i] = x[i] + alpha * p[i];
    ++evals;
    Evaluation e = f(trial);
    LinePoint lp;
    lp.alpha = alpha;
    lp.ok = e.ok && std::isfinite(e.value);
    lp.value = lp.ok ? e.value : std::numeric_limits<double>::infinity();
    if (lp.ok) {
      double d = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) d += e.gradient[i] * p[i];
      lp.slope = d;
      lp.gradient = std::move(e.gradient);
    }
    return lp;
  };

  auto zoom = [&](LinePoint lo, LinePoint hi) -> std::optional<LinePoint> {
    while (evals < s.max_line_search) {
      double a;
      if (hi.ok)
        a = cubic_step(lo.alpha, lo.value, lo.slope, hi.alpha, hi.value,
                       hi.slope);
      else
        a = 0.5 * (lo.alpha + hi.alpha);
      if (std::abs(hi.alpha - lo.alpha) < 1e-16 * std::max(1.0, lo.alpha))
        return std::nullopt;
      LinePoint cur = eval_at(a);
      if (!cur.ok || cur.value > f0 + s.c1 * a * g0 || cur.value >= lo.value) {
        hi = std::move(cur);
      } else {
        if (std::abs(cur.slope) <= -s.c2 * g0) return cur;
        if (cur.slope * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
        lo = std::move(cur);
      }
    }
    // Budget spent: settle for sufficient decrease alone.
    if (lo.alpha > 0.0) return lo;
    return std::nullopt;
  };

  LinePoint prev;
  prev.alpha = 0.0;
  prev.value = f0;
  prev.slope = g0;
  prev.ok = true;
  double alpha = alpha0;
  for (int i = 0; evals < s.max_line_search; ++i) {
    LinePoint cur = eval_at(alpha);
    if (!cur.ok || cur.value > f0 + s.c1 * alpha * g0 ||
        (i > 0 && cur.value >= prev.value))
      return zoom(prev, cur);
    if (std::abs(cur.slope) <= -s.c2 * g0) return cur;
    if (cur.slope >= 0.0) return zoom(cur, prev);
    prev = std::move(cur);
    alpha *= 2.0;
  }
  if (prev.alpha > 0.0) return prev;
  return std::nullopt;
}

}  // namespace detail

inline StageResult bfgs_stage(std::vector<double> x, const Objective& f,
                              const BfgsSettings& s, double param_tolerance,
                              double grad_tolerance,
                              const IterationHook& hook = {},
                              int first_iteration = 0) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t n = x.size();
  StageResult out;
  Evaluation cur = f(x);
  if (!cur.ok || !std::isfinite(cur.value)) {
    out.reason = Termination::kDiverged;
    out.diagnostic = "BFGS start point is not finite";
    out.x = std::move(x);
    return out;
  }
  // Dense inverse Hessian approximation, row-major; identity until the first
  // curvature pair rescales it.
  std::vector<double> H(n * n, 0.0);
  auto reset_h = [&](double scale) {
    std::fill(H.begin(), H.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) H[i * n + i] = scale;
  };
  reset_h(1.0);
  bool scaled = false;
  bool fell_back = false;
  std::vector<double> p(n), sv(n), yv(n), hy(n);

  auto grad_inf = [](const std::vector<double>& g) {
    double m = 0.0;
    for (double v : g) m = std::max(m, std::abs(v));
    return m;
  };

  out.reason = Termination::kMaxIter;
  for (int it = 1; it <= s.max_iterations; ++it) {
    if (grad_inf(cur.gradient) < grad_tolerance) {
      out.reason = Termination::kGradTol;
      break;
    }
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      const double* row = &H[i * n];
      for (std::size_t k = 0; k < n; ++k) acc -= row[k] * cur.gradient[k];
      p[i] = acc;
    }
    double slope = 0.0;
    for (std::size_t i = 0; i < n; ++i) slope += p[i] * cur.gradient[i];
    if (!(slope < 0.0)) {
      reset_h(scaled ? H[0] : 1.0);
      for (std::size_t i = 0; i < n; ++i) p[i] = -cur.gradient[i];
      slope = 0.0;
      for (std::size_t i = 0; i < n; ++i) slope += p[i] * cur.gradient[i];
    }
    double alpha0 = 1.0;
    if (!scaled) {
      // First step: move at most unit length in parameter space.
      alpha0 = std::min(1.0, 1.0 / std::max(grad_inf(cur.gradient), 1e-300));
    }
    auto step = detail::strong_wolfe(f, x, p, cur.value, slope, alpha0, s);
    if (!step) {
      if (fell_back) {
        out.diagnostic = "line search failed twice";
        out.reason = Termination::kParamStall;
        break;
      }
      // One steepest-descent retry from a reset curvature model.
      fell_back = true;
      reset_h(1.0);
      scaled = false;
      --it;
      continue;
    }
    fell_back = false;
    double max_dx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sv[i] = step->alpha * p[i];
      yv[i] = step->gradient[i] - cur.gradient[i];
      x[i] += sv[i];
      max_dx = std::max(max_dx, std::abs(sv[i]));
    }
    cur.value = step->value;
    cur.gradient = std::move(step->gradient);
    out.iterations = it;
    out.history.push_back(
        {first_iteration + it, 2, cur.value, detail::seconds_since(t0)});

    double ys = 0.0;
    double yy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      ys += yv[i] * sv[i];
      yy += yv[i] * yv[i];
    }
    if (ys > 0.0) {
      if (!scaled) {
        reset_h(ys / yy);
        scaled = true;
      }
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        const double* row = &H[i * n];
        for (std::size_t k = 0; k < n; ++k) acc += row[k] * yv[k];
        hy[i] = acc;
      }
      double yhy = 0.0;
      for (std::size_t i = 0; i < n; ++i) yhy += yv[i] * hy[i];
      const double rho = 1.0 / ys;
      const double c = (rho * rho) * yhy + rho;
      for (std::size_t i = 0; i < n; ++i) {
        double* row = &H[i * n];
        const double si = sv[i];
        const double hyi = hy[i];
        for (std::size_t k = 0; k < n; ++k)
          row[k] += c * si * sv[k] - rho * (hyi * sv[k] + si * hy[k]);
      }
    }
    if (hook && hook(first_iteration + it, x)) {
      out.reason = Termination::kTargetReached;
      break;
    }
    if (max_dx < param_tolerance) {
      out.reason = Termination::kParamStall;
      break;
    }
  }
  out.x = std::move(x);
  return out;
}

struct Solution {
  NetParams params;
  EquilibriumInput input;
  SolverConfig config;
  std::vector<HistoryEntry> history;
  double f_vol_norm = 0.0;
  std::vector<double> rho;
  std::vector<double> f_norm_profile;  // surface averages of F_norm
  Termination reason = Termination::kMaxIter;
  std::string diagnostic;
  int adamw_iterations = 0;
  int bfgs_iterations = 0;
};

struct Metrics {
  double f_vol_norm = 0.0;
  std::vector<double> rho;
  std::vector<double> f_norm_profile;
  double volume = 0.0;
  double beta = 0.0;  // 2 mu0 <p> / <B^2>
};

inline Metrics compute_metrics(const NetParams& params,
                               const EquilibriumInput& input,
                               const CollocationGrid& grid) {
  const FieldState st = compute_field_state(params, input, grid);
  const NormalizedResidual res = normalized_residual(st);
  Metrics m;
  m.f_vol_norm = res.volume_average;
  m.rho = grid.rho;
  for (std::size_t j = 0; j < grid.rho.size(); ++j)
    m.f_norm_profile.push_back(surface_average(res.per_node, st, j));
  m.volume = volume(st);
  std::vector<double> p(st.size()), b2(st.size());
  for (std::size_t i = 0; i < st.size(); ++i) {
    p[i] = input.pressure(st[i].rho * st[i].rho);
    b2[i] = st[i].B2.value;
  }
  m.beta = 2.0 * kMu0 * volume_average(p, st) / volume_average(b2, st);
  return m;
}

using CheckpointHook = std::function<void(const NetParams&, int iteration)>;

inline Objective make_objective(const LossEvaluator& ev, const NetLayout& layout,
                                int reference_sign) {
  return [&ev, layout, reference_sign](std::span<const double> x) {
    NetParams p{layout, std::vector<double>(x.begin(), x.end())};
    LossResult r = ev.evaluate(p, true);
    Evaluation e;
    e.value = r.loss;
    e.gradient = std::move(r.gradient);
    e.ok = r.finite && r.jacobian_sign == reference_sign;
    return e;
  };
}

inline Solution solve(const EquilibriumInput& input, const SolverConfig& config,
                      const CheckpointHook& checkpoint = {}) {
  config.validate();
  input.validate();
  const CollocationGrid grid = config.grid(input);
  const LossEvaluator ev(input, grid, config.threads);

  Solution sol;
  sol.input = input;
  sol.config = config;
  sol.params = init_params(input, config.width, config.seed);
  const NetLayout layout = sol.params.layout;

  const LossResult first = ev.evaluate(sol.params, false);
  if (!first.ok())
    throw JacobianError("initial guess has overlapping surfaces",
                        first.first_bad_node);
  const int sign = first.jacobian_sign;
  const Objective objective = make_objective(ev, layout, sign);

  auto target_hit = [&](std::span<const double> x) {
    if (config.target_fvol <= 0.0) return false;
    const NetParams p{layout, std::vector<double>(x.begin(), x.end())};
    const double fv = compute_metrics(p, input, grid).f_vol_norm;
    return fv <= config.target_fvol * (1.0 + config.target_rtol);
  };
  std::vector<double> last_good = sol.params.data;
  const IterationHook hook = [&](int it, std::span<const double> x) {
    last_good.assign(x.begin(), x.end());
    if (checkpoint && config.checkpoint_every > 0 &&
        it % config.checkpoint_every == 0)
      checkpoint(NetParams{layout, last_good}, it);
    return it % config.target_cadence == 0 && target_hit(x);
  };

  auto finish = [&](std::vector<double> x, Termination reason) {
    sol.params.data = std::move(x);
    sol.reason = reason;
    const Metrics m = compute_metrics(sol.params, input, grid);
    sol.f_vol_norm = m.f_vol_norm;
    sol.rho = m.rho;
    sol.f_norm_profile = m.f_norm_profile;
    if (sol.history.empty())
      sol.history.push_back({0, 0, ev.value(sol.params), 0.0});
    if (checkpoint) checkpoint(sol.params, sol.adamw_iterations + sol.bfgs_iterations);
    return sol;
  };

  if (target_hit(sol.params.data))
    return finish(sol.params.data, Termination::kTargetReached);

  StageResult s1 = adamw_stage(sol.params.data, objective, config.adamw, hook);
  sol.adamw_iterations = s1.iterations;
  sol.history = s1.history;
  if (s1.reason == Termination::kDiverged) {
    sol.diagnostic = s1.diagnostic;
    return finish(last_good, Termination::kDiverged);
  }
  if (s1.reason == Termination::kTargetReached)
    return finish(std::move(s1.x), Termination::kTargetReached);

  StageResult s2 = bfgs_stage(std::move(s1.x), objective, config.bfgs,
                              config.param_tolerance, config.grad_tolerance,
                              hook, s1.iterations);
  sol.bfgs_iterations = s2.iterations;
  const double offset = sol.history.empty() ? 0.0 : sol.history.back().wall_seconds;
  for (auto& h : s2.history) h.wall_seconds += offset;
  sol.history.insert(sol.history.end(), s2.history.begin(), s2.history.end());
  sol.diagnostic = s2.diagnostic;
  if (s2.reason == Termination::kDiverged)
    return finish(last_good, Termination::kDiverged);
  return finish(std::move(s2.x), s2.reason);
}

}  // namespace pinnmhd

#endif  // PINNMHD_SOLVER_HPP
