#pragma once

// Truncated multivariate Taylor numbers. Jet<1> carries a value and a
// gradient, Jet<2> also carries the Hessian. Evaluating any expression on
// seeded variables yields exact derivatives up to the stored order.

#include <array>
#include <cmath>
#include <type_traits>

namespace nullfold {

inline constexpr int kMaxJetVars = 6;

template <int Order>
class Jet {
  static_assert(Order == 1 || Order == 2, "Jet supports orders 1 and 2");

 public:
  Jet() = default;
  Jet(double value) : v_(value) {}  // NOLINT: constants promote implicitly

  static Jet variable(double value, int index, int nvars) {
    Jet j(value);
    j.n_ = nvars;
    j.g_[index] = 1.0;
    return j;
  }

  double value() const { return v_; }
  int nvars() const { return n_; }
  double d(int i) const { return g_[i]; }
  double dd(int i, int j) const {
    if constexpr (Order == 2) return h_[i * kMaxJetVars + j];
    return 0.0;
  }

  // Derivative with respect to variable i, one order lower in the Hessian part.
  Jet<1> partial(int i) const {
    Jet<1> out(g_[i]);
    if constexpr (Order == 2) {
      out.set_size(n_);
      for (int k = 0; k < n_; ++k) out.set_d(k, h_[i * kMaxJetVars + k]);
    }
    return out;
  }

  Jet<1> truncate() const {
    Jet<1> out(v_);
    out.set_size(n_);
    for (int k = 0; k < n_; ++k) out.set_d(k, g_[k]);
    return out;
  }

  void set_size(int n) { n_ = n; }
  void set_d(int i, double x) { g_[i] = x; }
  void set_dd(int i, int j, double x) {
    if constexpr (Order == 2) h_[i * kMaxJetVars + j] = x;
  }

  // f(this) given f, f', f'' at the current value.
  Jet chain(double f0, double f1, double f2) const {
    Jet r(f0);
    r.n_ = n_;
    for (int i = 0; i < n_; ++i) r.g_[i] = f1 * g_[i];
    if constexpr (Order == 2) {
      for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j) {
          const int k = i * kMaxJetVars + j;
          r.h_[k] = f1 * h_[k] + f2 * g_[i] * g_[j];
        }
    }
    return r;
  }

  Jet& operator+=(const Jet& o) {
    v_ += o.v_;
    widen(o.n_);
    for (int i = 0; i < o.n_; ++i) g_[i] += o.g_[i];
    if constexpr (Order == 2)
      for (int i = 0; i < o.n_; ++i)
        for (int j = 0; j < o.n_; ++j) h_[i * kMaxJetVars + j] += o.h_[i * kMaxJetVars + j];
    return *this;
  }
  Jet& operator-=(const Jet& o) {
    v_ -= o.v_;
    widen(o.n_);
    for (int i = 0; i < o.n_; ++i) g_[i] -= o.g_[i];
    if constexpr (Order == 2)
      for (int i = 0; i < o.n_; ++i)
        for (int j = 0; j < o.n_; ++j) h_[i * kMaxJetVars + j] -= o.h_[i * kMaxJetVars + j];
    return *this;
  }
  Jet& operator*=(const Jet& o) {
    const int n = n_ > o.n_ ? n_ : o.n_;
    if constexpr (Order == 2) {
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          const int k = i * kMaxJetVars + j;
          h_[k] = v_ * o.h_[k] + o.v_ * h_[k] + g_[i] * o.g_[j] + g_[j] * o.g_[i];
        }
    }
    for (int i = 0; i < n; ++i) g_[i] = v_ * o.g_[i] + o.v_ * g_[i];
    v_ *= o.v_;
    n_ = n;
    return *this;
  }
  Jet& operator/=(const Jet& o) {
    const double inv = 1.0 / o.v_;
    return *this *= o.chain(inv, -inv * inv, 2.0 * inv * inv * inv);
  }
  Jet& operator*=(double s) {
    v_ *= s;
    for (int i = 0; i < n_; ++i) g_[i] *= s;
    if constexpr (Order == 2)
      for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j) h_[i * kMaxJetVars + j] *= s;
    return *this;
  }

  Jet operator-() const {
    Jet r = *this;
    r *= -1.0;
    return r;
  }

  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator*(Jet a, const Jet& b) { return a *= b; }
  friend Jet operator/(Jet a, const Jet& b) { return a /= b; }
  friend Jet operator+(Jet a, double b) { a.v_ += b; return a; }
  friend Jet operator+(double b, Jet a) { a.v_ += b; return a; }
  friend Jet operator-(Jet a, double b) { a.v_ -= b; return a; }
  friend Jet operator-(double b, const Jet& a) { return (-a) + b; }
  friend Jet operator*(Jet a, double b) { return a *= b; }
  friend Jet operator*(double b, Jet a) { return a *= b; }
  friend Jet operator/(Jet a, double b) { return a *= 1.0 / b; }
  friend Jet operator/(double b, const Jet& a) { return Jet(b) / a; }

  friend bool operator<(const Jet& a, const Jet& b) { return a.v_ < b.v_; }
  friend bool operator>(const Jet& a, const Jet& b) { return a.v_ > b.v_; }

  friend Jet sin(const Jet& a) {
    const double s = std::sin(a.v_), c = std::cos(a.v_);
    return a.chain(s, c, -s);
  }
  friend Jet cos(const Jet& a) {
    const double s = std::sin(a.v_), c = std::cos(a.v_);
    return a.chain(c, -s, -c);
  }
  friend Jet tan(const Jet& a) {
    const double t = std::tan(a.v_), sec2 = 1.0 + t * t;
    return a.chain(t, sec2, 2.0 * t * sec2);
  }
  friend Jet exp(const Jet& a) {
    const double e = std::exp(a.v_);
    return a.chain(e, e, e);
  }
  friend Jet log(const Jet& a) {
    const double inv = 1.0 / a.v_;
    return a.chain(std::log(a.v_), inv, -inv * inv);
  }
  friend Jet sqrt(const Jet& a) {
    const double r = std::sqrt(a.v_);
    return a.chain(r, 0.5 / r, -0.25 / (r * a.v_));
  }
  friend Jet sinh(const Jet& a) {
    const double s = std::sinh(a.v_), c = std::cosh(a.v_);
    return a.chain(s, c, s);
  }
  friend Jet cosh(const Jet& a) {
    const double s = std::sinh(a.v_), c = std::cosh(a.v_);
    return a.chain(c, s, c);
  }
  friend Jet tanh(const Jet& a) {
    const double t = std::tanh(a.v_), s2 = 1.0 - t * t;
    return a.chain(t, s2, -2.0 * t * s2);
  }
  friend Jet abs(const Jet& a) {
    const double s = a.v_ < 0.0 ? -1.0 : 1.0;
    return a.chain(std::abs(a.v_), s, 0.0);
  }
  // Constant exponent; keeps negative bases valid for integral exponents.
  friend Jet pow(const Jet& a, double c) {
    if (c == 0.0) return Jet(1.0);
    if (c == 1.0) return a;
    if (c == 2.0) return a * a;
    const double p2 = std::pow(a.v_, c - 2.0);
    const double p1 = p2 * a.v_;
    return a.chain(p1 * a.v_, c * p1, c * (c - 1.0) * p2);
  }
  friend Jet pow(const Jet& a, const Jet& b) {
    if (b.n_ == 0) return pow(a, b.v_);
    return exp(b * log(a));
  }

 private:
  void widen(int n) {
    if (n > n_) n_ = n;
  }

  double v_ = 0.0;
  int n_ = 0;
  std::array<double, kMaxJetVars> g_{};
  struct Empty {};
  [[no_unique_address]] std::conditional_t<Order == 2, std::array<double, kMaxJetVars * kMaxJetVars>, Empty> h_{};
};

using Jet1 = Jet<1>;
using Jet2 = Jet<2>;

inline double value_of(double x) { return x; }
template <int O>
double value_of(const Jet<O>& x) { return x.value(); }

}  // namespace nullfold
