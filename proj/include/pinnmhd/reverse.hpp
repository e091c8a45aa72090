#ifndef PINNMHD_REVERSE_HPP
#define PINNMHD_REVERSE_HPP

// Tape-based reverse accumulation for scalar expressions.
//
// Every arithmetic operation on a `Var` appends at most one node to the tape
// that is active on the calling thread. A node stores up to two parent
// indices and the local partial derivatives with respect to them, so the
// backward sweep is a single pass over the node array in reverse order.
// Values that do not depend on any leaf (index < 0) never touch the tape.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace pinnmhd::ad {

class Tape {
 public:
  struct Node {
    std::int32_t lhs;
    std::int32_t rhs;
    double d_lhs;
    double d_rhs;
  };

  void clear() { nodes_.clear(); }
  void reserve(std::size_t n) { nodes_.reserve(n); }
  std::size_t size() const { return nodes_.size(); }

  std::int32_t push(std::int32_t lhs, double d_lhs, std::int32_t rhs,
                    double d_rhs) {
    nodes_.push_back({lhs, rhs, d_lhs, d_rhs});
    return static_cast<std::int32_t>(nodes_.size() - 1);
  }

  std::int32_t leaf() { return push(-1, 0.0, -1, 0.0); }

  // Seeds the adjoint of `output` with one and sweeps backwards. The returned
  // buffer is indexed by node id and stays valid until the next call.
  const std::vector<double>& backward(std::int32_t output) {
    adjoints_.assign(nodes_.size(), 0.0);
    if (output < 0) return adjoints_;
    adjoints_[output] = 1.0;
    return sweep(output);
  }

  // Backward sweep from several seeded outputs at once.
  template <class Seeds>
  const std::vector<double>& backward_seeded(const Seeds& seeds) {
    adjoints_.assign(nodes_.size(), 0.0);
    std::int32_t last = -1;
    for (const auto& [index, weight] : seeds) {
      if (index < 0) continue;
      adjoints_[index] += weight;
      if (index > last) last = index;
    }
    if (last < 0) return adjoints_;
    return sweep(last);
  }

 private:
  const std::vector<double>& sweep(std::int32_t from) {
    for (std::int32_t i = from; i >= 0; --i) {
      const double a = adjoints_[i];
      if (a == 0.0) continue;
      const Node& node = nodes_[i];
      if (node.lhs >= 0) adjoints_[node.lhs] += a * node.d_lhs;
      if (node.rhs >= 0) adjoints_[node.rhs] += a * node.d_rhs;
    }
    return adjoints_;
  }

  std::vector<Node> nodes_;
  std::vector<double> adjoints_;
};

namespace detail {
inline Tape*& active_tape() {
  thread_local Tape* tape = nullptr;
  return tape;
}
}  // namespace detail

// Makes `tape` the recording target for the current thread while in scope.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape) : previous_(detail::active_tape()) {
    tape.clear();
    detail::active_tape() = &tape;
  }
  ~TapeScope() { detail::active_tape() = previous_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

class Var {
 public:
  Var() = default;
  Var(double value) : value_(value) {}  // NOLINT: implicit constant lift
  Var(double value, std::int32_t index) : value_(value), index_(index) {}

  static Var leaf(double value) {
    Tape* tape = detail::active_tape();
    if (tape == nullptr) throw std::logic_error("no active tape");
    return Var(value, tape->leaf());
  }

  double value() const { return value_; }
  std::int32_t index() const { return index_; }
  bool is_constant() const { return index_ < 0; }

  Var& operator+=(const Var& o) { return *this = *this + o; }
  Var& operator-=(const Var& o) { return *this = *this - o; }
  Var& operator*=(const Var& o) { return *this = *this * o; }
  Var& operator/=(const Var& o) { return *this = *this / o; }

  // Result node with partials d_a, d_b with respect to a and b.
  static Var record(double value, const Var& a, double d_a, const Var& b,
                    double d_b) {
    const bool use_a = a.index_ >= 0;
    const bool use_b = b.index_ >= 0;
    if (!use_a && !use_b) return Var(value);
    Tape* tape = detail::active_tape();
    if (use_a && use_b)
      return Var(value, tape->push(a.index_, d_a, b.index_, d_b));
    if (use_a) return Var(value, tape->push(a.index_, d_a, -1, 0.0));
    return Var(value, tape->push(b.index_, d_b, -1, 0.0));
  }

  static Var record(double value, const Var& a, double d_a) {
    if (a.index_ < 0) return Var(value);
    return Var(value, detail::active_tape()->push(a.index_, d_a, -1, 0.0));
  }

  friend Var operator+(const Var& a, const Var& b) {
    return record(a.value_ + b.value_, a, 1.0, b, 1.0);
  }
  friend Var operator-(const Var& a, const Var& b) {
    return record(a.value_ - b.value_, a, 1.0, b, -1.0);
  }
  friend Var operator*(const Var& a, const Var& b) {
    return record(a.value_ * b.value_, a, b.value_, b, a.value_);
  }
  friend Var operator/(const Var& a, const Var& b) {
    const double inv = 1.0 / b.value_;
    const double q = a.value_ * inv;
    return record(q, a, inv, b, -q * inv);
  }
  friend Var operator-(const Var& a) { return record(-a.value_, a, -1.0); }
  friend Var operator+(const Var& a) { return a; }

  friend bool operator<(const Var& a, const Var& b) {
    return a.value_ < b.value_;
  }
  friend bool operator>(const Var& a, const Var& b) {
    return a.value_ > b.value_;
  }

 private:
  double value_ = 0.0;
  std::int32_t index_ = -1;
};

inline Var sqrt(const Var& a) {
  const double r = std::sqrt(a.value());
  // The derivative at zero is taken as zero; sqrt only appears on norms where
  // that is the subgradient of the minimum.
  return Var::record(r, a, r > 0.0 ? 0.5 / r : 0.0);
}

inline Var tanh(const Var& a) {
  const double t = std::tanh(a.value());
  return Var::record(t, a, 1.0 - t * t);
}

inline Var sin(const Var& a) {
  return Var::record(std::sin(a.value()), a, std::cos(a.value()));
}

inline Var cos(const Var& a) {
  return Var::record(std::cos(a.value()), a, -std::sin(a.value()));
}

inline Var abs(const Var& a) {
  return Var::record(std::abs(a.value()), a, a.value() < 0.0 ? -1.0 : 1.0);
}

inline double value_of(double x) { return x; }
inline double value_of(const Var& x) { return x.value(); }

}  // namespace pinnmhd::ad

#endif  // PINNMHD_REVERSE_HPP
