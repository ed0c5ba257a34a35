#include "nullfold/metric.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace nullfold {

Eigen::MatrixXd MetricField::matrix(std::span<const double> x) const {
  const int d = dim();
  Eigen::MatrixXd g(d, d);
  double buf[kMaxDim * kMaxDim];
  components(x.data(), buf);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) g(i, j) = buf[i * d + j];
  return g;
}

double MetricField::inner(const Point& p, std::span<const double> a, std::span<const double> b) const {
  const int d = dim();
  double buf[kMaxDim * kMaxDim];
  components(p.coords.data(), buf);
  double s = 0.0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) s += a[i] * buf[i * d + j] * b[j];
  return s;
}

namespace {

std::vector<std::string> minkowski_names(int dim) {
  std::vector<std::string> names{"t"};
  if (dim == 4) return {"t", "x", "y", "z"};
  for (int i = 1; i < dim; ++i) names.push_back("x" + std::to_string(i));
  return names;
}

template <class S>
void zero(S* g, int d) {
  for (int i = 0; i < d * d; ++i) g[i] = S(0.0);
}

}  // namespace

MinkowskiMetric::MinkowskiMetric(int dim)
    : MetricFieldImpl(minkowski_names(dim), std::vector<Interval>(dim, Interval{-2.0, 2.0})) {
  set_constant_curvature(0.0);
}

template <class S>
void MinkowskiMetric::fill(const S*, S* g) const {
  const int d = dim();
  zero(g, d);
  g[0] = S(-1.0);
  for (int i = 1; i < d; ++i) g[i * d + i] = S(1.0);
}

GrwTwistedMetric::GrwTwistedMetric(const Expression& f, const Expression& delta)
    : MetricFieldImpl({"t", "s", "x", "y"},
                      {{1.0 / std::numbers::e, std::numbers::e}, {-1.0, 1.0}, {-2.0, 2.0}, {-2.0, 2.0}}),
      f_(f.bind({"t"})),
      delta_(delta.bind({"s", "x", "y"})) {}

template <class S>
void GrwTwistedMetric::fill(const S* x, S* g) const {
  zero(g, 4);
  const S f = f_.eval(x);
  const S dl = delta_.eval(x + 1);
  const S f2 = f * f;
  const S fd2 = f2 * dl * dl;
  g[0] = S(-1.0);
  g[5] = f2;
  g[10] = fd2;
  g[15] = fd2;
}

PpWaveMetric::PpWaveMetric(const Expression& h)
    : MetricFieldImpl({"u", "v", "x", "y"}, std::vector<Interval>(4, Interval{-1.0, 1.0})),
      h_(h.bind({"u", "x", "y"})) {}

template <class S>
void PpWaveMetric::fill(const S* x, S* g) const {
  zero(g, 4);
  const S args[3] = {x[0], x[2], x[3]};
  g[0] = h_.eval(args);
  g[1] = S(-1.0);
  g[4] = S(-1.0);
  g[10] = S(1.0);
  g[15] = S(1.0);
}

ConformalMetric::ConformalMetric(MetricPtr base, const Expression& u)
    : MetricFieldImpl(base->coordinates(), base->domain()),
      base_(std::move(base)),
      u_(u.bind(base_->coordinates())) {}

template <class S>
void ConformalMetric::fill(const S* x, S* g) const {
  using std::exp;
  base_->components(x, g);
  const S w = exp(2.0 * u_.eval(x));
  const int d = dim();
  for (int i = 0; i < d * d; ++i) g[i] = w * g[i];
}

ExplicitMetric::ExplicitMetric(std::vector<std::string> coordinates,
                               const std::vector<std::vector<Expression>>& rows)
    : MetricFieldImpl(coordinates, std::vector<Interval>(coordinates.size(), Interval{-1.0, 1.0})),
      d_(static_cast<int>(coordinates.size())) {
  for (int i = 0; i < d_; ++i)
    for (int j = 0; j < d_; ++j) {
      upper_.push_back(rows[i][j].bind(this->coordinates()));
      lower_.push_back(rows[j][i].bind(this->coordinates()));
    }
}

template <class S>
void ExplicitMetric::fill(const S* x, S* g) const {
  for (int k = 0; k < d_ * d_; ++k) g[k] = 0.5 * (upper_[k].eval(x) + lower_[k].eval(x));
}

double ExplicitMetric::asymmetry(const double* x) const {
  double r = 0.0;
  for (int k = 0; k < d_ * d_; ++k) r = std::max(r, std::abs(upper_[k](std::span<const double>(x, d_)) - lower_[k](std::span<const double>(x, d_))));
  return r;
}

MetricPtr conformal_rescale(MetricPtr metric, const Expression& u) {
  return std::make_shared<ConformalMetric>(std::move(metric), u);
}

MetricDerivatives metric_derivatives(const MetricField& m, std::span<const double> x, int order) {
  const int d = m.dim();
  MetricDerivatives out;
  out.dim = d;
  out.g.resize(d * d);
  out.dg.resize(d * d * d);
  if (order >= 2) {
    Jet2 xs[kMaxDim], gs[kMaxDim * kMaxDim];
    for (int i = 0; i < d; ++i) xs[i] = Jet2::variable(x[i], i, d);
    m.components(xs, gs);
    out.ddg.resize(d * d * d * d);
    for (int k = 0; k < d * d; ++k) {
      out.g[k] = gs[k].value();
      for (int r = 0; r < d; ++r) {
        out.dg[r * d * d + k] = gs[k].d(r);
        for (int s = 0; s < d; ++s) out.ddg[(r * d + s) * d * d + k] = gs[k].dd(r, s);
      }
    }
  } else {
    Jet1 xs[kMaxDim], gs[kMaxDim * kMaxDim];
    for (int i = 0; i < d; ++i) xs[i] = Jet1::variable(x[i], i, d);
    m.components(xs, gs);
    for (int k = 0; k < d * d; ++k) {
      out.g[k] = gs[k].value();
      for (int r = 0; r < d; ++r) out.dg[r * d * d + k] = gs[k].d(r);
    }
  }
  return out;
}

}  // namespace nullfold

namespace nullfold {
#define NULLFOLD_INSTANTIATE_FILL(Class)                              \
  template void Class::fill<double>(const double*, double*) const; \
  template void Class::fill<Jet1>(const Jet1*, Jet1*) const;       \
  template void Class::fill<Jet2>(const Jet2*, Jet2*) const;
NULLFOLD_INSTANTIATE_FILL(MinkowskiMetric)
NULLFOLD_INSTANTIATE_FILL(GrwTwistedMetric)
NULLFOLD_INSTANTIATE_FILL(PpWaveMetric)
NULLFOLD_INSTANTIATE_FILL(ConformalMetric)
NULLFOLD_INSTANTIATE_FILL(ExplicitMetric)
#undef NULLFOLD_INSTANTIATE_FILL
}  // namespace nullfold
