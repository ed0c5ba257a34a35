#include "nullfold/ode.hpp"

#include <algorithm>

namespace nullfold {

namespace {

// Dormand–Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

class Stepper {
 public:
  Stepper(const OdeRhs& f, std::size_t n, IntegrationStats& stats)
      : f_(f), stats_(stats), k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n), ynew(n) {}

  void eval(double t, const std::vector<double>& y, std::vector<double>& out) {
    f_(t, y.data(), out.data());
    ++stats_.rhs_evaluations;
  }

  // One Dormand–Prince trial step; returns the scaled error norm. k1 must hold f(t,y).
  double dopri(double t, double h, const std::vector<double>& y, const IntegratorControls& c) {
    const std::size_t n = y.size();
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * a21 * k1[i];
    eval(t + c2 * h, tmp, k2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
    eval(t + c3 * h, tmp, k3);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    eval(t + c4 * h, tmp, k4);
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    eval(t + c5 * h, tmp, k5);
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
    eval(t + h, tmp, k6);
    for (std::size_t i = 0; i < n; ++i)
      ynew[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
    eval(t + h, ynew, k7);
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e =
          h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
      const double sc = c.atol + c.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
      err += (e / sc) * (e / sc);
    }
    return std::sqrt(err / static_cast<double>(n));
  }

  void rk4(double t, double h, std::vector<double>& y) {
    const std::size_t n = y.size();
    eval(t, y, k1);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
    eval(t + 0.5 * h, tmp, k2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
    eval(t + 0.5 * h, tmp, k3);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * k3[i];
    eval(t + h, tmp, k4);
    for (std::size_t i = 0; i < n; ++i) y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }

  const OdeRhs& f_;
  IntegrationStats& stats_;
  std::vector<double> k1, k2, k3, k4, k5, k6, k7, tmp, ynew;
};

}  // namespace

IntegrationStats integrate(const OdeRhs& f, std::vector<double> y, double t0,
                           std::span<const double> targets, const IntegratorControls& c,
                           const OdeObserver& observe) {
  IntegrationStats stats;
  if (targets.empty()) return stats;
  const double dir = targets.back() >= t0 ? 1.0 : -1.0;
  for (std::size_t k = 0; k < targets.size(); ++k) {
    const double prev = k == 0 ? t0 : targets[k - 1];
    if ((targets[k] - prev) * dir < 0.0)
      throw Error(ErrorKind::Configuration, "sample times must be monotone away from the start");
  }
  Stepper st(f, y.size(), stats);
  double t = t0;
  if (!all_finite(y)) throw IntegrationFailure(t, "non-finite initial state");

  if (!c.adaptive) {
    for (std::size_t k = 0; k < targets.size(); ++k) {
      const double span = targets[k] - t;
      if (span != 0.0) {
        const int m = std::max(1, c.rk4_steps_per_sample);
        const double h = span / m;
        for (int s = 0; s < m; ++s) {
          st.rk4(t, h, y);
          t = s + 1 == m ? targets[k] : t + h;
          ++stats.steps;
          if (!all_finite(y)) throw IntegrationFailure(t - h, "non-finite state in fixed-step integration");
        }
      }
      observe(k, t, y.data());
    }
    return stats;
  }

  double h = dir * std::min(std::abs(c.initial_step), std::abs(targets.back() - t0) + 1e-300);
  st.eval(t, y, st.k1);
  std::size_t next = 0;
  while (next < targets.size() && targets[next] == t) observe(next++, t, y.data());
  while (next < targets.size()) {
    const double target = targets[next];
    bool clipped = false;
    double step = h;
    if ((t + step - target) * dir > 0.0) {
      step = target - t;
      clipped = true;
    }
    if (std::abs(step) < c.min_step * std::max(1.0, std::abs(t)))
      throw IntegrationFailure(t, "step size underflow at t = " + std::to_string(t));
    if (++stats.steps > c.max_steps) throw IntegrationFailure(t, "step budget exhausted");
    const double err = st.dopri(t, step, y, c);
    if (!std::isfinite(err) || !all_finite(st.ynew)) {
      ++stats.rejected;
      h = step * 0.25;
      continue;
    }
    if (err <= 1.0) {
      t = clipped ? target : t + step;
      y.swap(st.ynew);
      st.k1.swap(st.k7);
      const double grow = err == 0.0 ? 5.0 : std::min(5.0, std::max(0.2, 0.9 * std::pow(err, -0.2)));
      // A clipped step says nothing about the natural step size; keep the larger one.
      const double proposal = step * grow;
      h = clipped ? (std::abs(proposal) > std::abs(h) ? proposal : h) : proposal;
      while (next < targets.size() && targets[next] == t) observe(next++, t, y.data());
    } else {
      ++stats.rejected;
      h = step * std::max(0.2, 0.9 * std::pow(err, -0.2));
    }
  }
  return stats;
}

}  // namespace nullfold
