#pragma once

#include <vector>

#include "nullfold/metric.hpp"

namespace nullfold {

// Γ^μ_{νρ} stored as [μ][ν][ρ].
class Connection {
 public:
  Connection() = default;
  explicit Connection(int dim) : dim_(dim), c_(dim * dim * dim, 0.0) {}
  int dim() const { return dim_; }
  double operator()(int mu, int nu, int rho) const { return c_[(mu * dim_ + nu) * dim_ + rho]; }
  double& operator()(int mu, int nu, int rho) { return c_[(mu * dim_ + nu) * dim_ + rho]; }
  const std::vector<double>& data() const { return c_; }
  std::vector<double>& data() { return c_; }
  double max_abs() const;

 private:
  int dim_ = 0;
  std::vector<double> c_;
};

struct CurvatureSample {
  Point at;
  Connection christoffel;
  std::vector<double> riemann;  // R^μ_{νρσ} as [μ][ν][ρ][σ]
  std::vector<double> ricci;    // R_{νσ}

  int dim() const { return at.dim(); }
  double R(int mu, int nu, int rho, int sigma) const {
    const int d = dim();
    return riemann[((mu * d + nu) * d + rho) * d + sigma];
  }
  double Ric(int nu, int sigma) const { return ricci[nu * dim() + sigma]; }
  double max_abs() const;
  // max |R^μ_{νρσ} + R^μ_{ρσν} + R^μ_{σνρ}| relative to max |R|.
  double bianchi_residual() const;
  double antisymmetry_residual() const;
  double lower_symmetry_residual() const;  // of Γ
};

Connection christoffel_at(const MetricField& metric, const Point& p);
CurvatureSample riemann_at(const MetricField& metric, const Point& p);

// Independent central-difference evaluations from metric components only.
Connection christoffel_fd(const MetricField& metric, const Point& p);
CurvatureSample riemann_fd(const MetricField& metric, const Point& p);

// Maximal componentwise difference relative to max(1e-300, max |reference|).
double relative_difference(const std::vector<double>& a, const std::vector<double>& reference);

namespace kernel {

// Fast paths on raw buffers (d ≤ kMaxDim) used inside integrators.
// g: d×d, ginv: d×d, gamma: d³, dgamma: [σ][μ][ν][ρ] = ∂_σΓ^μ_{νρ}.
void christoffel(const MetricField& m, const double* x, double* g, double* gamma);
void christoffel_with_derivative(const MetricField& m, const double* x, double* g,
                                 double* gamma, double* dgamma);
void riemann_from(int d, const double* gamma, const double* dgamma, double* riemann);
// Inverts a d×d matrix; throws DegenerateMetric on a vanishing pivot.
void invert(int d, const double* a, double* inv);

void christoffel_from_derivs(int d, const double* g, const double* dg, double* ginv,
                             double* gamma);

}  // namespace kernel

}  // namespace nullfold
