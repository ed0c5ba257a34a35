#pragma once

#include <vector>

#include "nullfold/metric.hpp"
#include "nullfold/ode.hpp"

namespace nullfold {

struct GeodesicSample {
  double t = 0.0;
  Point position;
  std::vector<double> velocity;
};

struct Trajectory {
  std::vector<GeodesicSample> samples;
  double initial_norm = 0.0;  // g(v,v) at the start
  double max_norm_drift = 0.0;  // max |g(γ',γ') − g(v,v)| over samples
  IntegrationStats stats;
};

// Tighter than the generic integrator defaults: at rtol 1e-8 the null norm of
// backward GRW generators drifts past 1e-8.
inline IntegratorControls geodesic_integrator_defaults() {
  IntegratorControls c;
  c.rtol = 1e-10;
  c.atol = 1e-12;
  return c;
}

struct GeodesicControls {
  IntegratorControls integrator = geodesic_integrator_defaults();
  int samples = 64;  // evenly spaced on (0, t_end], plus t = 0
};

// y = (x, v); y' = (v, −Γ(v,v)).
void geodesic_rhs(const MetricField& m, const double* y, double* dydt);

Trajectory geodesic_flow(const MetricField& metric, const Point& p, const TangentVector& v,
                         double t_end, const GeodesicControls& controls = {});

// Same flow sampled at explicit parameter values (monotone away from 0).
Trajectory geodesic_flow_at(const MetricField& metric, const Point& p, const TangentVector& v,
                            const std::vector<double>& times,
                            const IntegratorControls& controls = geodesic_integrator_defaults());

}  // namespace nullfold
