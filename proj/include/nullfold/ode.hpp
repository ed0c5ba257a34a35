#pragma once

// Explicit Runge–Kutta integrators: Dormand–Prince 5(4) with step-size
// control, and classical fixed-step RK4. Steps are clipped so every requested
// sample time is hit exactly.

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "nullfold/error.hpp"

namespace nullfold {

struct IntegratorControls {
  bool adaptive = true;
  double rtol = 1e-8;
  double atol = 1e-10;
  double initial_step = 1e-2;
  double min_step = 1e-13;
  long max_steps = 5'000'000;
  int rk4_steps_per_sample = 16;  // fixed mode: substeps between consecutive samples
};

using OdeRhs = std::function<void(double t, const double* y, double* dydt)>;
using OdeObserver = std::function<void(std::size_t index, double t, const double* y)>;

struct IntegrationStats {
  long steps = 0;
  long rejected = 0;
  long rhs_evaluations = 0;
};

// Integrates y' = f(t,y) from t0 through `targets` (all ≥ t0 ascending or all
// ≤ t0 descending), calling `observe` at each target. Throws
// IntegrationFailure carrying the last accepted time on breakdown.
IntegrationStats integrate(const OdeRhs& f, std::vector<double> y, double t0,
                           std::span<const double> targets, const IntegratorControls& controls,
                           const OdeObserver& observe);

}  // namespace nullfold
