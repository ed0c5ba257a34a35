#include "nullfold/curvature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nullfold/error.hpp"

namespace nullfold {

double Connection::max_abs() const {
  double m = 0.0;
  for (double v : c_) m = std::max(m, std::abs(v));
  return m;
}

double CurvatureSample::max_abs() const {
  double m = 0.0;
  for (double v : riemann) m = std::max(m, std::abs(v));
  return m;
}

double CurvatureSample::bianchi_residual() const {
  const int d = dim();
  double r = 0.0;
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b)
      for (int c = 0; c < d; ++c)
        for (int e = 0; e < d; ++e) r = std::max(r, std::abs(R(a, b, c, e) + R(a, c, e, b) + R(a, e, b, c)));
  return r / std::max(max_abs(), 1.0);
}

double CurvatureSample::antisymmetry_residual() const {
  const int d = dim();
  double r = 0.0;
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b)
      for (int c = 0; c < d; ++c)
        for (int e = 0; e < d; ++e) r = std::max(r, std::abs(R(a, b, c, e) + R(a, b, e, c)));
  return r;
}

double CurvatureSample::lower_symmetry_residual() const {
  const int d = dim();
  double r = 0.0;
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b)
      for (int c = 0; c < d; ++c) r = std::max(r, std::abs(christoffel(a, b, c) - christoffel(a, c, b)));
  return r;
}

namespace kernel {

void invert(int d, const double* a, double* inv) {
  double m[kMaxDim * kMaxDim];
  std::copy(a, a + d * d, m);
  for (int i = 0; i < d * d; ++i) inv[i] = 0.0;
  for (int i = 0; i < d; ++i) inv[i * d + i] = 1.0;
  double scale = 0.0;
  for (int i = 0; i < d * d; ++i) scale = std::max(scale, std::abs(a[i]));
  for (int col = 0; col < d; ++col) {
    int piv = col;
    for (int r = col + 1; r < d; ++r)
      if (std::abs(m[r * d + col]) > std::abs(m[piv * d + col])) piv = r;
    const double p = m[piv * d + col];
    if (!(std::abs(p) > 1e-14 * scale))
      throw Error(ErrorKind::DegenerateMetric, "metric matrix is singular at the evaluation point");
    if (piv != col)
      for (int k = 0; k < d; ++k) {
        std::swap(m[piv * d + k], m[col * d + k]);
        std::swap(inv[piv * d + k], inv[col * d + k]);
      }
    const double ip = 1.0 / p;
    for (int k = 0; k < d; ++k) {
      m[col * d + k] *= ip;
      inv[col * d + k] *= ip;
    }
    for (int r = 0; r < d; ++r) {
      if (r == col) continue;
      const double f = m[r * d + col];
      if (f == 0.0) continue;
      for (int k = 0; k < d; ++k) {
        m[r * d + k] -= f * m[col * d + k];
        inv[r * d + k] -= f * inv[col * d + k];
      }
    }
  }
}

void christoffel_from_derivs(int d, const double* g, const double* dg, double* ginv,
                             double* gamma) {
  invert(d, g, ginv);
  const int dd = d * d;
  double low[kMaxDim * kMaxDim * kMaxDim];
  for (int s = 0; s < d; ++s)
    for (int n = 0; n < d; ++n)
      for (int r = n; r < d; ++r) {
        const double v = 0.5 * (dg[n * dd + s * d + r] + dg[r * dd + s * d + n] - dg[s * dd + n * d + r]);
        low[(s * d + n) * d + r] = v;
        low[(s * d + r) * d + n] = v;
      }
  for (int mu = 0; mu < d; ++mu)
    for (int n = 0; n < d; ++n)
      for (int r = 0; r < d; ++r) {
        double acc = 0.0;
        for (int s = 0; s < d; ++s) acc += ginv[mu * d + s] * low[(s * d + n) * d + r];
        gamma[(mu * d + n) * d + r] = acc;
      }
}

void christoffel(const MetricField& m, const double* x, double* g, double* gamma) {
  const int d = m.dim();
  Jet1 xs[kMaxDim], gs[kMaxDim * kMaxDim];
  for (int i = 0; i < d; ++i) xs[i] = Jet1::variable(x[i], i, d);
  m.components(xs, gs);
  double dg[kMaxDim * kMaxDim * kMaxDim];
  const int dd = d * d;
  for (int k = 0; k < dd; ++k) {
    g[k] = gs[k].value();
    for (int r = 0; r < d; ++r) dg[r * dd + k] = gs[k].d(r);
  }
  double ginv[kMaxDim * kMaxDim];
  christoffel_from_derivs(d, g, dg, ginv, gamma);
}

void christoffel_with_derivative(const MetricField& m, const double* x, double* g,
                                 double* gamma, double* dgamma) {
  const int d = m.dim();
  const int dd = d * d;
  Jet2 xs[kMaxDim], gs[kMaxDim * kMaxDim];
  for (int i = 0; i < d; ++i) xs[i] = Jet2::variable(x[i], i, d);
  m.components(xs, gs);
  double dg[kMaxDim * kMaxDim * kMaxDim];
  for (int k = 0; k < dd; ++k) {
    g[k] = gs[k].value();
    for (int r = 0; r < d; ++r) dg[r * dd + k] = gs[k].d(r);
  }
  double ginv[kMaxDim * kMaxDim];
  christoffel_from_derivs(d, g, dg, ginv, gamma);
  // ∂_κΓ^μ_{νρ} = g^{μσ}(∂_κΓ_{σνρ} − ∂_κ g_{σβ} Γ^β_{νρ})
  for (int k = 0; k < d; ++k) {
    double w[kMaxDim * kMaxDim * kMaxDim];
    auto dd2 = [&](int a, int b, int mu, int nu) { return gs[mu * d + nu].dd(a, b); };
    for (int s = 0; s < d; ++s)
      for (int n = 0; n < d; ++n)
        for (int r = 0; r < d; ++r) {
          double v = 0.5 * (dd2(k, n, s, r) + dd2(k, r, s, n) - dd2(k, s, n, r));
          for (int b = 0; b < d; ++b) v -= dg[k * dd + s * d + b] * gamma[(b * d + n) * d + r];
          w[(s * d + n) * d + r] = v;
        }
    for (int mu = 0; mu < d; ++mu)
      for (int n = 0; n < d; ++n)
        for (int r = 0; r < d; ++r) {
          double acc = 0.0;
          for (int s = 0; s < d; ++s) acc += ginv[mu * d + s] * w[(s * d + n) * d + r];
          dgamma[((k * d + mu) * d + n) * d + r] = acc;
        }
  }
}

void riemann_from(int d, const double* gamma, const double* dgamma, double* riemann) {
  auto G = [&](int a, int b, int c) { return gamma[(a * d + b) * d + c]; };
  auto dG = [&](int k, int a, int b, int c) { return dgamma[((k * d + a) * d + b) * d + c]; };
  for (int mu = 0; mu < d; ++mu)
    for (int nu = 0; nu < d; ++nu)
      for (int rho = 0; rho < d; ++rho)
        for (int sg = 0; sg < d; ++sg) {
          double v = dG(rho, mu, sg, nu) - dG(sg, mu, rho, nu);
          for (int l = 0; l < d; ++l) v += G(mu, rho, l) * G(l, sg, nu) - G(mu, sg, l) * G(l, rho, nu);
          riemann[((mu * d + nu) * d + rho) * d + sg] = v;
        }
}

}  // namespace kernel

namespace {

void fill_ricci(CurvatureSample& s) {
  const int d = s.dim();
  s.ricci.assign(d * d, 0.0);
  for (int n = 0; n < d; ++n)
    for (int sg = 0; sg < d; ++sg) {
      double acc = 0.0;
      for (int mu = 0; mu < d; ++mu) acc += s.R(mu, n, mu, sg);
      s.ricci[n * d + sg] = acc;
    }
}

double fd_step(double x, double power) {
  return std::max(std::abs(x), 1.0) * std::pow(std::numeric_limits<double>::epsilon(), power);
}

}  // namespace

Connection christoffel_at(const MetricField& metric, const Point& p) {
  const int d = metric.dim();
  if (p.dim() != d) throw Error(ErrorKind::Configuration, "point dimension does not match metric");
  Connection c(d);
  double g[kMaxDim * kMaxDim];
  kernel::christoffel(metric, p.coords.data(), g, c.data().data());
  return c;
}

CurvatureSample riemann_at(const MetricField& metric, const Point& p) {
  const int d = metric.dim();
  if (p.dim() != d) throw Error(ErrorKind::Configuration, "point dimension does not match metric");
  CurvatureSample s;
  s.at = p;
  s.christoffel = Connection(d);
  std::vector<double> dgamma(d * d * d * d);
  double g[kMaxDim * kMaxDim];
  kernel::christoffel_with_derivative(metric, p.coords.data(), g, s.christoffel.data().data(),
                                      dgamma.data());
  s.riemann.assign(d * d * d * d, 0.0);
  kernel::riemann_from(d, s.christoffel.data().data(), dgamma.data(), s.riemann.data());
  fill_ricci(s);
  return s;
}

Connection christoffel_fd(const MetricField& metric, const Point& p) {
  const int d = metric.dim();
  const int dd = d * d;
  double g[kMaxDim * kMaxDim], dg[kMaxDim * kMaxDim * kMaxDim];
  metric.components(p.coords.data(), g);
  for (int r = 0; r < d; ++r) {
    const double h = fd_step(p[r], 1.0 / 3.0);
    std::vector<double> xp = p.coords, xm = p.coords;
    xp[r] += h;
    xm[r] -= h;
    double gp[kMaxDim * kMaxDim], gm[kMaxDim * kMaxDim];
    metric.components(xp.data(), gp);
    metric.components(xm.data(), gm);
    const double span = xp[r] - xm[r];
    for (int k = 0; k < dd; ++k) dg[r * dd + k] = (gp[k] - gm[k]) / span;
  }
  Connection c(d);
  double ginv[kMaxDim * kMaxDim];
  kernel::christoffel_from_derivs(d, g, dg, ginv, c.data().data());
  return c;
}

namespace {

// Fourth-order central stencil (−f₂ + 8f₁ − 8f₋₁ + f₋₂)/12h, applied entry by entry.
template <class F>
void stencil5(const Point& p, int k, double h, int n, F&& sample, double* out) {
  std::vector<double> a(n), b(n), c(n), e(n);
  const double steps[4] = {2 * h, h, -h, -2 * h};
  std::vector<double>* bufs[4] = {&a, &b, &c, &e};
  for (int j = 0; j < 4; ++j) {
    Point q = p;
    q[k] += steps[j];
    sample(q, bufs[j]->data());
  }
  for (int i = 0; i < n; ++i) out[i] = (-a[i] + 8 * b[i] - 8 * c[i] + e[i]) / (12 * h);
}

Connection christoffel_fd5(const MetricField& metric, const Point& p) {
  const int d = metric.dim();
  const int dd = d * d;
  double g[kMaxDim * kMaxDim], dg[kMaxDim * kMaxDim * kMaxDim];
  metric.components(p.coords.data(), g);
  for (int r = 0; r < d; ++r)
    stencil5(p, r, fd_step(p[r], 0.25), dd,
             [&](const Point& q, double* out) { metric.components(q.coords.data(), out); }, dg + r * dd);
  Connection c(d);
  double ginv[kMaxDim * kMaxDim];
  kernel::christoffel_from_derivs(d, g, dg, ginv, c.data().data());
  return c;
}

}  // namespace

CurvatureSample riemann_fd(const MetricField& metric, const Point& p) {
  const int d = metric.dim();
  const int d3 = d * d * d;
  CurvatureSample s;
  s.at = p;
  s.christoffel = christoffel_fd5(metric, p);
  // Nested fourth-order stencils; the outer step is wider since the inner Γ carries ε^{3/4} noise.
  std::vector<double> dgamma(d3 * d);
  for (int k = 0; k < d; ++k)
    stencil5(p, k, fd_step(p[k], 0.2), d3,
             [&](const Point& q, double* out) {
               const Connection c = christoffel_fd5(metric, q);
               std::copy(c.data().begin(), c.data().end(), out);
             },
             dgamma.data() + k * d3);
  s.riemann.assign(d3 * d, 0.0);
  kernel::riemann_from(d, s.christoffel.data().data(), dgamma.data(), s.riemann.data());
  fill_ricci(s);
  return s;
}

double relative_difference(const std::vector<double>& a, const std::vector<double>& reference) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::abs(a[i] - reference[i]));
    den = std::max(den, std::abs(reference[i]));
  }
  if (num == 0.0) return 0.0;
  return num / std::max(den, 1e-300);
}

}  // namespace nullfold
