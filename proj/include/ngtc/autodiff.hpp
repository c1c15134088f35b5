/*
 Copyright 2026 The ngtc authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#ifndef NGTC_AUTODIFF_HPP
#define NGTC_AUTODIFF_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

// Reverse-mode automatic differentiation on a run-time tape.
//
// Scalar operations record at most two parents with cached partials; a
// reverse sweep then accumulates adjoints in one pass.  Vector-valued
// subgraphs that would be wasteful to trace element-wise (the equilibrium
// network step) register a hook: a block of output leaves plus a callback
// that, when the sweep reaches the block, reads the output adjoints and
// writes input adjoints and parameter gradients directly with dense linear
// algebra.  Branches (clamps, guards, sign choices) evaluate on values, so a
// gradient is the exact derivative along the executed path.

namespace ngtc::ad {

class Tape {
 public:
  static constexpr uint32_t kConst = 0xffffffffu;

  Tape() {
    nodes_.reserve(1 << 16);
    val_.reserve(1 << 16);
  }

  // The tape that newly created variables record onto.  Thread-local so
  // independent rollouts may run on independent tapes concurrently.
  static Tape*& active() {
    thread_local Tape* t = nullptr;
    return t;
  }

  struct Scope {
    explicit Scope(Tape& t) : prev_(active()) { active() = &t; }
    ~Scope() { active() = prev_; }
    Tape* prev_;
  };

  uint32_t leaf(double v) {
    nodes_.push_back(Node{kConst, kConst, 0.0, 0.0});
    val_.push_back(v);
    return static_cast<uint32_t>(val_.size() - 1);
  }

  uint32_t unary(double v, uint32_t a, double pa) {
    nodes_.push_back(Node{a, kConst, pa, 0.0});
    val_.push_back(v);
    return static_cast<uint32_t>(val_.size() - 1);
  }

  uint32_t binary(double v, uint32_t a, double pa, uint32_t b, double pb) {
    nodes_.push_back(Node{a, b, pa, pb});
    val_.push_back(v);
    return static_cast<uint32_t>(val_.size() - 1);
  }

  // Register a callback fired by backward() once every node with index
  // >= fire_at has been processed (i.e. all adjoints flowing into the
  // callback's output block are final).
  void add_hook(uint32_t fire_at, std::function<void(Tape&)> fn) {
    hooks_.push_back(Hook{fire_at, std::move(fn)});
  }

  size_t size() const { return val_.size(); }
  double value(uint32_t i) const { return val_[i]; }
  double adjoint(uint32_t i) const { return i == kConst ? 0.0 : adj_[i]; }
  void add_adjoint(uint32_t i, double a) {
    if (i != kConst) adj_[i] += a;
  }

  void backward(uint32_t root) {
    adj_.assign(val_.size(), 0.0);
    adj_[root] = 1.0;
    size_t h = hooks_.size();
    for (uint32_t i = static_cast<uint32_t>(nodes_.size()); i-- > 0;) {
      while (h > 0 && hooks_[h - 1].fire_at == i) hooks_[--h].fn(*this);
      const Node& n = nodes_[i];
      const double a = adj_[i];
      if (a == 0.0) continue;
      if (n.a0 != kConst) adj_[n.a0] += n.p0 * a;
      if (n.a1 != kConst) adj_[n.a1] += n.p1 * a;
    }
    while (h > 0) hooks_[--h].fn(*this);
  }

  void clear() {
    nodes_.clear();
    val_.clear();
    adj_.clear();
    hooks_.clear();
  }

 private:
  struct Node {
    uint32_t a0, a1;
    double p0, p1;
  };
  struct Hook {
    uint32_t fire_at;
    std::function<void(Tape&)> fn;
  };

  std::vector<Node> nodes_;
  std::vector<double> val_;
  std::vector<double> adj_;
  std::vector<Hook> hooks_;
};

// A taped scalar: cached value plus node index (kConst for literals, which
// never allocate tape storage).
struct Var {
  double v = 0.0;
  uint32_t i = Tape::kConst;

  Var() = default;
  Var(double value) : v(value) {}  // NOLINT: implicit literal lift
  Var(double value, uint32_t idx) : v(value), i(idx) {}

  // A differentiable input: gets its own tape slot so its adjoint is
  // addressable after backward().
  static Var input(double value) { return Var(value, Tape::active()->leaf(value)); }

  double value() const { return v; }
  bool is_const() const { return i == Tape::kConst; }

  Var& operator+=(const Var& o);
  Var& operator-=(const Var& o);
  Var& operator*=(const Var& o);
  Var& operator/=(const Var& o);
  Var operator-() const;
};

inline double value_of(const Var& x) { return x.v; }
inline bool finite_value(const Var& x) { return std::isfinite(x.v); }

namespace detail {
inline Var lift1(double v, const Var& a, double pa) {
  if (a.is_const()) return Var(v);
  return Var(v, Tape::active()->unary(v, a.i, pa));
}
inline Var lift2(double v, const Var& a, double pa, const Var& b, double pb) {
  const bool ca = a.is_const(), cb = b.is_const();
  if (ca && cb) return Var(v);
  Tape& t = *Tape::active();
  if (cb) return Var(v, t.unary(v, a.i, pa));
  if (ca) return Var(v, t.unary(v, b.i, pb));
  return Var(v, t.binary(v, a.i, pa, b.i, pb));
}
}  // namespace detail

inline Var operator+(const Var& a, const Var& b) {
  // Adding a literal is adjoint routing with factor one: reuse the node.
  if (b.is_const() && !a.is_const()) return Var(a.v + b.v, a.i);
  if (a.is_const() && !b.is_const()) return Var(a.v + b.v, b.i);
  return detail::lift2(a.v + b.v, a, 1.0, b, 1.0);
}
inline Var operator-(const Var& a, const Var& b) {
  if (b.is_const() && !a.is_const()) return Var(a.v - b.v, a.i);
  return detail::lift2(a.v - b.v, a, 1.0, b, -1.0);
}
inline Var operator*(const Var& a, const Var& b) {
  return detail::lift2(a.v * b.v, a, b.v, b, a.v);
}
inline Var operator/(const Var& a, const Var& b) {
  const double inv = 1.0 / b.v;
  return detail::lift2(a.v * inv, a, inv, b, -a.v * inv * inv);
}

inline Var operator+(const Var& a, double b) { return a + Var(b); }
inline Var operator+(double a, const Var& b) { return Var(a) + b; }
inline Var operator-(const Var& a, double b) { return a - Var(b); }
inline Var operator-(double a, const Var& b) { return Var(a) - b; }
inline Var operator*(const Var& a, double b) { return a * Var(b); }
inline Var operator*(double a, const Var& b) { return Var(a) * b; }
inline Var operator/(const Var& a, double b) { return a / Var(b); }
inline Var operator/(double a, const Var& b) { return Var(a) / b; }

inline Var Var::operator-() const { return detail::lift1(-v, *this, -1.0); }
inline Var& Var::operator+=(const Var& o) { return *this = *this + o; }
inline Var& Var::operator-=(const Var& o) { return *this = *this - o; }
inline Var& Var::operator*=(const Var& o) { return *this = *this * o; }
inline Var& Var::operator/=(const Var& o) { return *this = *this / o; }

inline bool operator<(const Var& a, const Var& b) { return a.v < b.v; }
inline bool operator>(const Var& a, const Var& b) { return a.v > b.v; }
inline bool operator<=(const Var& a, const Var& b) { return a.v <= b.v; }
inline bool operator>=(const Var& a, const Var& b) { return a.v >= b.v; }
inline bool operator==(const Var& a, const Var& b) { return a.v == b.v; }
inline bool operator!=(const Var& a, const Var& b) { return a.v != b.v; }
inline bool operator<(const Var& a, double b) { return a.v < b; }
inline bool operator>(const Var& a, double b) { return a.v > b; }
inline bool operator<=(const Var& a, double b) { return a.v <= b; }
inline bool operator>=(const Var& a, double b) { return a.v >= b; }
inline bool operator<(double a, const Var& b) { return a < b.v; }
inline bool operator>(double a, const Var& b) { return a > b.v; }

inline Var sqrt(const Var& a) {
  const double s = std::sqrt(a.v);
  return detail::lift1(s, a, 0.5 / s);
}
inline Var sin(const Var& a) { return detail::lift1(std::sin(a.v), a, std::cos(a.v)); }
inline Var cos(const Var& a) { return detail::lift1(std::cos(a.v), a, -std::sin(a.v)); }
inline Var tan(const Var& a) {
  const double c = std::cos(a.v);
  return detail::lift1(std::tan(a.v), a, 1.0 / (c * c));
}
inline Var exp(const Var& a) {
  const double e = std::exp(a.v);
  return detail::lift1(e, a, e);
}
inline Var log(const Var& a) { return detail::lift1(std::log(a.v), a, 1.0 / a.v); }
inline Var log1p(const Var& a) { return detail::lift1(std::log1p(a.v), a, 1.0 / (1.0 + a.v)); }
inline Var tanh(const Var& a) {
  const double t = std::tanh(a.v);
  return detail::lift1(t, a, 1.0 - t * t);
}
inline Var atan2(const Var& y, const Var& x) {
  const double d = x.v * x.v + y.v * y.v;
  return detail::lift2(std::atan2(y.v, x.v), y, x.v / d, x, -y.v / d);
}
inline Var abs(const Var& a) { return detail::lift1(std::fabs(a.v), a, a.v >= 0.0 ? 1.0 : -1.0); }
inline Var fabs(const Var& a) { return abs(a); }
inline Var min(const Var& a, const Var& b) { return a.v <= b.v ? a : b; }
inline Var max(const Var& a, const Var& b) { return a.v >= b.v ? a : b; }
inline Var clamp(const Var& x, double lo, double hi) {
  if (x.v < lo) return Var(lo);
  if (x.v > hi) return Var(hi);
  return x;
}
inline Var pow(const Var& a, double e) {
  return detail::lift1(std::pow(a.v, e), a, e * std::pow(a.v, e - 1.0));
}
inline Var sq(const Var& a) { return a * a; }
inline bool isfinite(const Var& a) { return std::isfinite(a.v); }

// Eigen interoperability helpers.
inline const Var& conj(const Var& a) { return a; }
inline const Var& real(const Var& a) { return a; }
inline Var imag(const Var&) { return Var(0.0); }
inline Var abs2(const Var& a) { return a * a; }

}  // namespace ngtc::ad

namespace Eigen {

template <>
struct NumTraits<ngtc::ad::Var> : NumTraits<double> {
  typedef ngtc::ad::Var Real;
  typedef ngtc::ad::Var NonInteger;
  typedef ngtc::ad::Var Nested;
  typedef ngtc::ad::Var Literal;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 1,
    AddCost = 3,
    MulCost = 3,
  };
};

template <typename BinaryOp>
struct ScalarBinaryOpTraits<ngtc::ad::Var, double, BinaryOp> {
  typedef ngtc::ad::Var ReturnType;
};
template <typename BinaryOp>
struct ScalarBinaryOpTraits<double, ngtc::ad::Var, BinaryOp> {
  typedef ngtc::ad::Var ReturnType;
};

}  // namespace Eigen

#endif  // NGTC_AUTODIFF_HPP
