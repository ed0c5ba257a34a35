#include "nullfold/geodesic.hpp"

#include <algorithm>
#include <cmath>

#include "nullfold/curvature.hpp"

namespace nullfold {

void geodesic_rhs(const MetricField& m, const double* y, double* dydt) {
  const int d = m.dim();
  double g[kMaxDim * kMaxDim], gamma[kMaxDim * kMaxDim * kMaxDim];
  kernel::christoffel(m, y, g, gamma);
  const double* v = y + d;
  for (int mu = 0; mu < d; ++mu) {
    dydt[mu] = v[mu];
    double a = 0.0;
    for (int n = 0; n < d; ++n)
      for (int r = 0; r < d; ++r) a += gamma[(mu * d + n) * d + r] * v[n] * v[r];
    dydt[d + mu] = -a;
  }
}

Trajectory geodesic_flow_at(const MetricField& metric, const Point& p, const TangentVector& v,
                            const std::vector<double>& times, const IntegratorControls& controls) {
  const int d = metric.dim();
  if (p.dim() != d || static_cast<int>(v.components.size()) != d)
    throw Error(ErrorKind::Configuration, "geodesic initial data dimension mismatch");
  for (double c : v.components)
    if (!std::isfinite(c)) throw IntegrationFailure(0.0, "non-finite initial velocity");
  Trajectory tr;
  tr.initial_norm = metric.inner(p, v.components, v.components);
  std::vector<double> y(2 * d);
  std::copy(p.coords.begin(), p.coords.end(), y.begin());
  std::copy(v.components.begin(), v.components.end(), y.begin() + d);

  auto rhs = [&](double, const double* s, double* ds) { geodesic_rhs(metric, s, ds); };
  auto obs = [&](std::size_t, double t, const double* s) {
    GeodesicSample gs;
    gs.t = t;
    gs.position = Point(std::vector<double>(s, s + d));
    gs.velocity.assign(s + d, s + 2 * d);
    const double nrm = metric.inner(gs.position, gs.velocity, gs.velocity);
    tr.max_norm_drift = std::max(tr.max_norm_drift, std::abs(nrm - tr.initial_norm));
    tr.samples.push_back(std::move(gs));
  };
  // Split into the forward and backward branches from 0.
  std::vector<double> fwd, bwd;
  for (double t : times) (t >= 0.0 ? fwd : bwd).push_back(t);
  std::sort(fwd.begin(), fwd.end());
  std::sort(bwd.begin(), bwd.end(), std::greater<>());
  if (!bwd.empty()) {
    auto s = integrate(rhs, y, 0.0, bwd, controls, obs);
    tr.stats.steps += s.steps;
    std::reverse(tr.samples.begin(), tr.samples.end());
  }
  if (!fwd.empty()) {
    auto s = integrate(rhs, y, 0.0, fwd, controls, obs);
    tr.stats.steps += s.steps;
  }
  return tr;
}

Trajectory geodesic_flow(const MetricField& metric, const Point& p, const TangentVector& v,
                         double t_end, const GeodesicControls& controls) {
  const int n = std::max(1, controls.samples);
  std::vector<double> times;
  for (int k = 0; k <= n; ++k) times.push_back(t_end * k / n);
  times.back() = t_end;
  return geodesic_flow_at(metric, p, v, times, controls.integrator);
}

}  // namespace nullfold
