#ifndef PINNMHD_AUTODIFF_HPP
#define PINNMHD_AUTODIFF_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "pinnmhd/jet.hpp"
#include "pinnmhd/reverse.hpp"

namespace pinnmhd::ad {

class NonFiniteLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ValueAndGradient {
  double value = 0.0;
  std::vector<double> gradient;
};

// Value and exact gradient of `loss`, a callable taking std::span<const Var>
// and returning Var, by one forward recording and one backward sweep.
template <class Loss>
ValueAndGradient loss_gradient(Loss&& loss, std::span<const double> params) {
  Tape tape;
  TapeScope scope(tape);
  std::vector<Var> x;
  x.reserve(params.size());
  for (double p : params) x.push_back(Var::leaf(p));
  const Var out = loss(std::span<const Var>(x));
  if (!std::isfinite(out.value())) throw NonFiniteLoss("loss is not finite");
  const auto& adj = tape.backward(out.index());
  ValueAndGradient r{out.value(), std::vector<double>(params.size(), 0.0)};
  for (std::size_t i = 0; i < x.size(); ++i) r.gradient[i] = adj[x[i].index()];
  return r;
}

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t samples = 0;
};

namespace detail {

template <class Real, class Value>
GradCheckReport grad_check_impl(const Value& value,
                                std::span<const double> params,
                                std::span<const double> gradient, double step,
                                std::size_t samples, std::uint64_t seed) {
  if (!(step > 0.0)) throw std::invalid_argument("step must be positive");
  if (gradient.size() != params.size())
    throw std::invalid_argument("gradient and parameters differ in length");
  std::vector<std::size_t> idx(params.size());
  std::iota(idx.begin(), idx.end(), 0);
  if (samples < idx.size()) {
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(samples);
    std::sort(idx.begin(), idx.end());
  }
  std::vector<Real> x(params.begin(), params.end());
  const Real h = static_cast<Real>(step);
  GradCheckReport rep;
  rep.samples = idx.size();
  for (std::size_t i : idx) {
    const Real x0 = x[i];
    x[i] = x0 + h;
    const Real up = value(std::span<const Real>(x));
    x[i] = x0 - h;
    const Real down = value(std::span<const Real>(x));
    x[i] = x0;
    const double fd = static_cast<double>((up - down) / (2 * h));
    const double denom =
        std::max({std::abs(gradient[i]), std::abs(fd), 1e-8});
    const double err = std::abs(gradient[i] - fd) / denom;
    if (err > rep.max_relative_error) {
      rep.max_relative_error = err;
      rep.worst_index = i;
    }
  }
  return rep;
}

}  // namespace detail

// Compares `gradient` against central differences of `value` at `samples`
// distinct random entries (all entries when samples >= size). Relative error
// uses max(|analytic|, |numeric|, 1e-8) as denominator.
inline GradCheckReport grad_check(
    const std::function<double(std::span<const double>)>& value,
    std::span<const double> params, std::span<const double> gradient,
    double step, std::size_t samples, std::uint64_t seed = 0) {
  return detail::grad_check_impl<double>(value, params, gradient, step,
                                         samples, seed);
}

// Same check with the perturbed parameters and the loss difference carried
// in extended precision, which keeps the central difference above rounding
// noise for small gradient entries.
inline GradCheckReport grad_check_extended(
    const std::function<long double(std::span<const long double>)>& value,
    std::span<const double> params, std::span<const double> gradient,
    double step, std::size_t samples, std::uint64_t seed = 0) {
  return detail::grad_check_impl<long double>(value, params, gradient, step,
                                              samples, seed);
}

}  // namespace pinnmhd::ad

#endif  // PINNMHD_AUTODIFF_HPP
