#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nullfold/expression.hpp"
#include "nullfold/jet.hpp"

namespace nullfold {

// Riemann convention used throughout: R(X,Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_[X,Y] Z,
// stored as R^μ_{νρσ} with R(∂_ρ,∂_σ)∂_ν = R^μ_{νρσ} ∂_μ and Ric_{νσ} = R^μ_{νμσ}.
// Signature (−,+,…,+).

inline constexpr int kMaxDim = kMaxJetVars;

struct Point {
  std::vector<double> coords;

  Point() = default;
  explicit Point(std::vector<double> c) : coords(std::move(c)) {}
  Point(std::initializer_list<double> c) : coords(c) {}
  int dim() const { return static_cast<int>(coords.size()); }
  double operator[](int i) const { return coords[i]; }
  double& operator[](int i) { return coords[i]; }
};

struct TangentVector {
  Point base;
  std::vector<double> components;
};

struct Interval {
  double lo = -1.0;
  double hi = 1.0;
};

class MetricField {
 public:
  virtual ~MetricField() = default;

  int dim() const { return static_cast<int>(coordinates_.size()); }
  const std::vector<std::string>& coordinates() const { return coordinates_; }
  const std::vector<Interval>& domain() const { return domain_; }
  void set_domain(std::vector<Interval> d) { domain_ = std::move(d); }
  std::optional<double> constant_curvature() const { return constant_curvature_; }
  void set_constant_curvature(std::optional<double> c) { constant_curvature_ = c; }
  virtual std::string kind() const = 0;

  // Row-major d×d components g_{μν}.
  virtual void components(const double* x, double* g) const = 0;
  virtual void components(const Jet1* x, Jet1* g) const = 0;
  virtual void components(const Jet2* x, Jet2* g) const = 0;

  Eigen::MatrixXd matrix(std::span<const double> x) const;
  Eigen::MatrixXd matrix(const Point& p) const { return matrix(p.coords); }
  double inner(const Point& p, std::span<const double> a, std::span<const double> b) const;

 protected:
  MetricField(std::vector<std::string> coordinates, std::vector<Interval> domain)
      : coordinates_(std::move(coordinates)), domain_(std::move(domain)) {}

 private:
  std::vector<std::string> coordinates_;
  std::vector<Interval> domain_;
  std::optional<double> constant_curvature_;
};

using MetricPtr = std::shared_ptr<const MetricField>;

template <class Derived>
class MetricFieldImpl : public MetricField {
 public:
  using MetricField::MetricField;
  void components(const double* x, double* g) const override { self().fill(x, g); }
  void components(const Jet1* x, Jet1* g) const override { self().fill(x, g); }
  void components(const Jet2* x, Jet2* g) const override { self().fill(x, g); }

 private:
  const Derived& self() const { return static_cast<const Derived&>(*this); }
};

class MinkowskiMetric final : public MetricFieldImpl<MinkowskiMetric> {
 public:
  explicit MinkowskiMetric(int dim);
  std::string kind() const override { return "minkowski"; }
  template <class S>
  void fill(const S* x, S* g) const;
};

// −dt² + f(t)²(ds² + δ(s,x,y)²(dx²+dy²)) on the chart (t, s, x, y).
class GrwTwistedMetric final : public MetricFieldImpl<GrwTwistedMetric> {
 public:
  GrwTwistedMetric(const Expression& f, const Expression& delta);
  std::string kind() const override { return "grw_twisted"; }
  template <class S>
  void fill(const S* x, S* g) const;
  const BoundExpression& warp() const { return f_; }
  const BoundExpression& twist() const { return delta_; }

 private:
  BoundExpression f_, delta_;
};

// Brinkmann form −2 du dv + H(u,x,y) du² + dx² + dy² on (u, v, x, y).
class PpWaveMetric final : public MetricFieldImpl<PpWaveMetric> {
 public:
  explicit PpWaveMetric(const Expression& h);
  std::string kind() const override { return "pp_wave"; }
  template <class S>
  void fill(const S* x, S* g) const;

 private:
  BoundExpression h_;
};

// e^{2u} times a base metric.
class ConformalMetric final : public MetricFieldImpl<ConformalMetric> {
 public:
  ConformalMetric(MetricPtr base, const Expression& u);
  std::string kind() const override { return "conformal"; }
  template <class S>
  void fill(const S* x, S* g) const;
  const MetricField& base() const { return *base_; }
  const BoundExpression& factor() const { return u_; }

 private:
  MetricPtr base_;
  BoundExpression u_;
};

// User-supplied component matrix; (i,j) and (j,i) entries are averaged.
class ExplicitMetric final : public MetricFieldImpl<ExplicitMetric> {
 public:
  ExplicitMetric(std::vector<std::string> coordinates,
                 const std::vector<std::vector<Expression>>& rows);
  std::string kind() const override { return "explicit"; }
  template <class S>
  void fill(const S* x, S* g) const;
  // max |a_ij − a_ji| of the raw user matrix at x.
  double asymmetry(const double* x) const;

 private:
  int d_;
  std::vector<BoundExpression> upper_, lower_;  // row-major, both halves kept
};

MetricPtr conformal_rescale(MetricPtr metric, const Expression& u);

// Value and coordinate derivatives of g at a point, by exact jets.
struct MetricDerivatives {
  int dim = 0;
  std::vector<double> g;    // [μ][ν]
  std::vector<double> dg;   // [ρ][μ][ν] = ∂_ρ g_{μν}
  std::vector<double> ddg;  // [ρ][σ][μ][ν] = ∂_ρ∂_σ g_{μν} (empty unless order 2)
};

MetricDerivatives metric_derivatives(const MetricField& m, std::span<const double> x, int order);

}  // namespace nullfold
