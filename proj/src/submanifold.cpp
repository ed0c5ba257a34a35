#include "nullfold/submanifold.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "nullfold/curvature.hpp"
#include "nullfold/error.hpp"
#include "nullfold/parallel.hpp"

namespace nullfold {

namespace {

using std::abs;
using std::sqrt;

template <class T>
T inner(int d, const T* g, const T* a, const T* b) {
  T s(0.0);
  for (int m = 0; m < d; ++m)
    for (int k = 0; k < d; ++k) s += g[m * d + k] * a[m] * b[k];
  return s;
}

// Gauss–Jordan with value-based partial pivoting; works for doubles and jets.
template <class T>
void invert_small(int n, const T* a, T* inv) {
  std::vector<T> m(a, a + n * n);
  for (int i = 0; i < n * n; ++i) inv[i] = T(0.0);
  for (int i = 0; i < n; ++i) inv[i * n + i] = T(1.0);
  for (int c = 0; c < n; ++c) {
    int p = c;
    for (int r = c + 1; r < n; ++r)
      if (std::abs(value_of(m[r * n + c])) > std::abs(value_of(m[p * n + c]))) p = r;
    if (std::abs(value_of(m[p * n + c])) < 1e-300)
      throw Error(ErrorKind::NotSpacelike, "induced metric is singular");
    if (p != c)
      for (int k = 0; k < n; ++k) {
        std::swap(m[p * n + k], m[c * n + k]);
        std::swap(inv[p * n + k], inv[c * n + k]);
      }
    const T piv = m[c * n + c];
    for (int k = 0; k < n; ++k) {
      m[c * n + k] = m[c * n + k] / piv;
      inv[c * n + k] = inv[c * n + k] / piv;
    }
    for (int r = 0; r < n; ++r) {
      if (r == c) continue;
      const T f = m[r * n + c];
      for (int k = 0; k < n; ++k) {
        m[r * n + k] -= f * m[c * n + k];
        inv[r * n + k] -= f * inv[c * n + k];
      }
    }
  }
}

// Removes the tangential part of v (length d), given e (d×n row-major [μ][a]) and h⁻¹.
template <class T>
std::vector<T> project_normal(int d, int n, const T* g, const T* e, const T* hinv, const T* v) {
  std::vector<T> ge(n, T(0.0));
  std::vector<T> ea(d);
  for (int a = 0; a < n; ++a) {
    for (int m = 0; m < d; ++m) ea[m] = e[m * n + a];
    ge[a] = inner(d, g, v, ea.data());
  }
  std::vector<T> out(v, v + d);
  for (int a = 0; a < n; ++a) {
    T c(0.0);
    for (int b = 0; b < n; ++b) c += hinv[a * n + b] * ge[b];
    for (int m = 0; m < d; ++m) out[m] -= c * e[m * n + a];
  }
  return out;
}

template <class T>
struct FrameParts {
  std::vector<T> h, hinv, Zp, N, xi, eta;
  T gzz, gnn;
};

// Null normal pair from the gauge field Z and the branch vector B.
template <class T>
FrameParts<T> null_frame(int d, int n, const T* g, const T* e, const T* Z, const T* B, Branch branch,
                         bool need_frame) {
  FrameParts<T> f;
  f.h.assign(n * n, T(0.0));
  std::vector<T> ea(d), eb(d);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      for (int m = 0; m < d; ++m) {
        ea[m] = e[m * n + a];
        eb[m] = e[m * n + b];
      }
      f.h[a * n + b] = inner(d, g, ea.data(), eb.data());
    }
  if (!need_frame) return f;
  f.hinv.assign(n * n, T(0.0));
  invert_small(n, f.h.data(), f.hinv.data());
  f.Zp = project_normal(d, n, g, e, f.hinv.data(), Z);
  f.gzz = inner(d, g, f.Zp.data(), f.Zp.data());
  const auto Bp = project_normal(d, n, g, e, f.hinv.data(), B);
  if (!(value_of(f.gzz) < 0.0)) {
    f.gnn = T(0.0);
    return f;
  }
  const T c = inner(d, g, Bp.data(), f.Zp.data()) / f.gzz;
  f.N.resize(d);
  for (int m = 0; m < d; ++m) f.N[m] = Bp[m] - c * f.Zp[m];
  f.gnn = inner(d, g, f.N.data(), f.N.data());
  if (!(value_of(f.gnn) > 0.0)) return f;
  const T s = sqrt(-f.gzz);
  const T nn = sqrt(f.gnn);
  const double sign = branch == Branch::Outgoing ? 1.0 : -1.0;
  f.xi.resize(d);
  f.eta.resize(d);
  for (int m = 0; m < d; ++m) f.xi[m] = (f.Zp[m] / s + sign * f.N[m] / nn) / s;
  // Rescale so g(ξ, Z) = −1 exactly, then η = Z^⊥ + ½ g(Z^⊥,Z^⊥) ξ.
  const T gxz = inner(d, g, f.xi.data(), Z);
  for (int m = 0; m < d; ++m) f.xi[m] = -f.xi[m] / gxz;
  for (int m = 0; m < d; ++m) f.eta[m] = f.Zp[m] + 0.5 * f.gzz * f.xi[m];
  return f;
}

void check_chart(const Embedding& emb, const std::vector<double>& u) {
  if (static_cast<int>(u.size()) != emb.dim())
    throw Error(ErrorKind::Configuration, "chart point has the wrong number of parameters");
  for (int a = 0; a < emb.dim(); ++a) {
    const auto& p = emb.chart()[a];
    if (p.periodic) continue;
    const double slack = 1e-9 * std::max(1.0, p.max - p.min);
    if (u[a] < p.min - slack || u[a] > p.max + slack)
      throw Error(ErrorKind::Configuration, "chart point outside the range of '" + p.name + "'");
  }
}

// Chart-point jets: x as Jet2, tangent vectors as Jet1.
struct EmbeddedJets {
  std::vector<Jet2> x2;
  std::vector<Jet1> x1, e1;  // e1 is [μ][a]
};

EmbeddedJets embed_jets(const Embedding& emb, const std::vector<double>& u) {
  const int n = emb.dim(), d = emb.ambient_dim();
  std::vector<Jet2> uj(n);
  for (int a = 0; a < n; ++a) uj[a] = Jet2::variable(u[a], a, n);
  EmbeddedJets J;
  J.x2.resize(d);
  emb.evaluate(uj.data(), J.x2.data());
  J.x1.resize(d);
  J.e1.resize(d * n);
  for (int m = 0; m < d; ++m) {
    J.x1[m] = J.x2[m].truncate();
    J.x1[m].set_size(n);
    for (int a = 0; a < n; ++a) {
      J.e1[m * n + a] = J.x2[m].partial(a);
      J.e1[m * n + a].set_size(n);
    }
  }
  return J;
}

double condition_number(const Eigen::MatrixXd& h) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h, Eigen::EigenvaluesOnly);
  const auto ev = es.eigenvalues();
  return ev.maxCoeff() / ev.minCoeff();
}

Eigen::VectorXd vec(const std::vector<double>& v) { return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size()); }

double inner_at(const Eigen::MatrixXd& g, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.dot(g * b);
}

// Orthonormal-frame matrix of an h-self-adjoint operator A (columns act on e_a).
Eigen::MatrixXd onb_operator(const Eigen::MatrixXd& h, const Eigen::MatrixXd& A) {
  const Eigen::MatrixXd C = orthonormal_coefficients(h);
  return C.inverse() * A * C;
}

}  // namespace

Embedding::Embedding(std::vector<ChartParameter> chart, const std::vector<Expression>& map)
    : chart_(std::move(chart)), source_(map) {
  if (chart_.empty()) throw Error(ErrorKind::Configuration, "embedding chart has no parameters");
  if (static_cast<int>(chart_.size()) > kMaxJetVars)
    throw Error(ErrorKind::Configuration, "embedding chart has too many parameters");
  std::vector<std::string> names;
  for (const auto& p : chart_) {
    if (!(p.max > p.min)) throw Error(ErrorKind::Configuration, "empty range for chart parameter '" + p.name + "'");
    if (p.periodic && p.pole)
      throw Error(ErrorKind::Configuration, "chart parameter '" + p.name + "' cannot be both periodic and polar");
    names.push_back(p.name);
  }
  for (const auto& e : map) map_.push_back(e.bind(names));
}

Point Embedding::point(const std::vector<double>& u) const {
  std::vector<double> x(map_.size());
  evaluate(u.data(), x.data());
  return Point(std::move(x));
}

double FrameResiduals::max() const { return std::max({null_xi, null_eta, cross, tangency}); }

double FormResiduals::max() const { return std::max({relation, trace, trace_H, decomposition, mean_norm}); }

Eigen::VectorXd ExtrinsicState::normal(double a, double b) const {
  return a * vec(frame.xi) + b * vec(frame.eta);
}

Eigen::MatrixXd orthonormal_coefficients(const Eigen::MatrixXd& h) {
  Eigen::LLT<Eigen::MatrixXd> llt(h);
  if (llt.info() != Eigen::Success) throw Error(ErrorKind::NotSpacelike, "induced metric is not positive definite");
  const Eigen::MatrixXd L = llt.matrixL();
  // C = L^{-T}: C^T h C = I.
  return L.transpose().triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(h.rows(), h.cols()));
}

void induced_metric(const Embedding& emb, const std::vector<double>& u, const MetricField& metric,
                    Eigen::MatrixXd& h, std::vector<double>& dh) {
  const int n = emb.dim(), d = emb.ambient_dim();
  if (d != metric.dim()) throw Error(ErrorKind::Configuration, "embedding and metric dimensions differ");
  const auto J = embed_jets(emb, u);
  std::vector<Jet1> g(d * d);
  metric.components(J.x1.data(), g.data());
  const auto f = null_frame<Jet1>(d, n, g.data(), J.e1.data(), nullptr, nullptr, Branch::Outgoing, false);
  h.resize(n, n);
  dh.assign(n * n * n, 0.0);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      h(a, b) = f.h[a * n + b].value();
      for (int c = 0; c < n; ++c) dh[(c * n + a) * n + b] = f.h[a * n + b].d(c);
    }
}

namespace {

ExtrinsicState build_state(const Embedding& emb, const std::vector<double>& u, const MetricField& metric,
                           const FrameOptions& options) {
  const int n = emb.dim(), d = emb.ambient_dim();

  const auto J = embed_jets(emb, u);
  std::vector<Jet1> g1(d * d);
  metric.components(J.x1.data(), g1.data());
  std::vector<double> x(d), g(d * d), e(d * n);
  for (int m = 0; m < d; ++m) x[m] = J.x1[m].value();
  for (int i = 0; i < d * d; ++i) g[i] = g1[i].value();
  for (int i = 0; i < d * n; ++i) e[i] = J.e1[i].value();

  ExtrinsicState s;
  s.at = u;
  s.x = Point(x);
  s.n = n;
  s.d = d;
  s.e = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(e.data(), d, n);
  s.ddx.assign(d * n * n, 0.0);
  for (int m = 0; m < d; ++m)
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) s.ddx[(m * n + a) * n + b] = J.x2[m].dd(a, b);

  // Spacelike check before anything divides by h.
  Eigen::MatrixXd h(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) h(a, b) = (s.e.col(a).transpose() * Eigen::Map<const Eigen::MatrixXd>(g.data(), d, d) * s.e.col(b))(0, 0);
  {
    Eigen::LLT<Eigen::MatrixXd> llt(h);
    if (llt.info() != Eigen::Success || !h.allFinite())
      throw Error(ErrorKind::NotSpacelike, "induced metric is not positive definite");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() <= 0.0) throw Error(ErrorKind::NotSpacelike, "induced metric is not positive definite");
  }
  s.h_condition = condition_number(h);

  std::vector<double> Zc(d, 0.0);
  if (options.gauge_z) {
    if (static_cast<int>(options.gauge_z->size()) != d)
      throw Error(ErrorKind::Configuration, "gauge vector has the wrong dimension");
    Zc = *options.gauge_z;
  } else {
    Zc[0] = 1.0;
  }
  std::vector<Jet1> Z1(Zc.begin(), Zc.end());

  // Branch vector candidates, tried in order on values.
  std::vector<std::vector<Jet1>> candidates;
  if (options.branch_vector) {
    if (static_cast<int>(options.branch_vector->size()) != d)
      throw Error(ErrorKind::Configuration, "branch vector has the wrong dimension");
    candidates.emplace_back(options.branch_vector->begin(), options.branch_vector->end());
  } else {
    std::vector<Jet1> radial(d, Jet1(0.0));
    for (int m = 1; m < d; ++m) radial[m] = J.x1[m];
    candidates.push_back(radial);
    for (int m = d - 1; m >= 1; --m) {
      std::vector<Jet1> axis(d, Jet1(0.0));
      axis[m] = Jet1(1.0);
      candidates.push_back(axis);
    }
  }

  FrameParts<Jet1> f;
  bool ok = false;
  double last_gzz = 0.0;
  for (const auto& B : candidates) {
    f = null_frame<Jet1>(d, n, g1.data(), J.e1.data(), Z1.data(), B.data(), options.branch, true);
    last_gzz = f.gzz.value();
    if (!(last_gzz < 0.0)) break;
    double bb = 0.0;
    for (const auto& c : B) bb += c.value() * c.value();
    if (f.gnn.value() > 1e-12 * std::max(bb, 1e-300) * std::abs(last_gzz) && !f.xi.empty()) {
      ok = true;
      break;
    }
  }
  if (!(last_gzz < 0.0))
    throw Error(ErrorKind::FrameDegeneracy, "normal part of the gauge field is not timelike");
  if (!ok) throw Error(ErrorKind::FrameDegeneracy, "no branch vector separates the null normals");

  s.h = h;
  s.h_inv.resize(n, n);
  s.dh.assign(n * n * n, 0.0);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      s.h_inv(a, b) = f.hinv[a * n + b].value();
      for (int c = 0; c < n; ++c) s.dh[(c * n + a) * n + b] = f.h[a * n + b].d(c);
    }
  s.frame.Z = Zc;
  s.frame.xi.resize(d);
  s.frame.eta.resize(d);
  s.dxi.resize(d, n);
  s.deta.resize(d, n);
  for (int m = 0; m < d; ++m) {
    s.frame.xi[m] = f.xi[m].value();
    s.frame.eta[m] = f.eta[m].value();
    for (int a = 0; a < n; ++a) {
      s.dxi(m, a) = f.xi[m].d(a);
      s.deta(m, a) = f.eta[m].d(a);
    }
  }

  const Eigen::Map<const Eigen::MatrixXd> G(g.data(), d, d);
  const Eigen::VectorXd xi = vec(s.frame.xi), eta = vec(s.frame.eta);
  // Scale the residuals by the frame size so they read as relative errors.
  const double scale = std::max(1.0, xi.squaredNorm() + eta.squaredNorm());
  s.frame_residuals.null_xi = std::abs(inner_at(G, xi, xi)) / scale;
  s.frame_residuals.null_eta = std::abs(inner_at(G, eta, eta)) / scale;
  s.frame_residuals.cross = std::abs(inner_at(G, xi, eta) + 1.0) / scale;
  for (int a = 0; a < n; ++a) {
    const Eigen::VectorXd ea = s.e.col(a);
    const double sc = std::sqrt(scale) * std::max(1.0, ea.norm());
    s.frame_residuals.tangency =
        std::max({s.frame_residuals.tangency, std::abs(inner_at(G, xi, ea)) / sc, std::abs(inner_at(G, eta, ea)) / sc});
  }
  return s;
}

}  // namespace

ExtrinsicState embed_and_frame(const Embedding& emb, const std::vector<double>& u, const MetricField& metric,
                               const FrameOptions& options) {
  if (emb.ambient_dim() != metric.dim())
    throw Error(ErrorKind::Configuration, "embedding and metric dimensions differ");
  if (emb.dim() != emb.ambient_dim() - 2) throw Error(ErrorKind::Configuration, "embedding must have codimension two");
  if (options.check_range) check_chart(emb, u);
  return build_state(emb, u, metric, options);
}

std::vector<double> rotation_form(const ExtrinsicState& s, const MetricField& metric) {
  const int d = s.d, n = s.n;
  std::vector<double> g(d * d), gamma(d * d * d);
  kernel::christoffel(metric, s.x.coords.data(), g.data(), gamma.data());
  std::vector<double> tau(n, 0.0);
  for (int a = 0; a < n; ++a) {
    // ∇_{e_a} ξ = ∂_a ξ + Γ(e_a, ξ)
    std::vector<double> D(d);
    for (int m = 0; m < d; ++m) {
      double v = s.dxi(m, a);
      for (int k = 0; k < d; ++k)
        for (int r = 0; r < d; ++r) v += gamma[(m * d + k) * d + r] * s.e(k, a) * s.frame.xi[r];
      D[m] = v;
    }
    tau[a] = -inner(d, g.data(), D.data(), s.frame.eta.data());
  }
  return tau;
}

void fundamental_forms(ExtrinsicState& s, const MetricField& metric) {
  if (s.h_condition > 1e10)
    throw Error(ErrorKind::Conditioning, "induced metric condition number exceeds 1e10");
  const int d = s.d, n = s.n;
  std::vector<double> g(d * d), gamma(d * d * d);
  kernel::christoffel(metric, s.x.coords.data(), g.data(), gamma.data());
  const Eigen::Map<const Eigen::MatrixXd> G(g.data(), d, d);
  const Eigen::VectorXd xi = vec(s.frame.xi), eta = vec(s.frame.eta);

  auto gamma_apply = [&](const Eigen::VectorXd& X, const Eigen::VectorXd& Y) {
    Eigen::VectorXd r = Eigen::VectorXd::Zero(d);
    for (int m = 0; m < d; ++m)
      for (int k = 0; k < d; ++k)
        for (int q = 0; q < d; ++q) r[m] += gamma[(m * d + k) * d + q] * X[k] * Y[q];
    return r;
  };

  std::vector<Eigen::VectorXd> V(n * n);
  s.II_xi.resize(n, n);
  s.II_eta.resize(n, n);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      Eigen::VectorXd v(d);
      for (int m = 0; m < d; ++m) v[m] = s.ddx[(m * n + a) * n + b];
      v += gamma_apply(s.e.col(a), s.e.col(b));
      V[a * n + b] = v;
      s.II_xi(a, b) = -inner_at(G, v, eta);
      s.II_eta(a, b) = -inner_at(G, v, xi);
      mean += s.h_inv(a, b) * v / n;
    }
  s.A_xi = -s.h_inv * s.II_eta;
  s.A_eta = -s.h_inv * s.II_xi;

  auto weingarten = [&](const Eigen::VectorXd& zeta, const Eigen::MatrixXd& dzeta) {
    Eigen::MatrixXd W(n, n);
    Eigen::MatrixXd gz(n, n);  // gz(b, a) = g(∇_a ζ, e_b)
    for (int a = 0; a < n; ++a) {
      const Eigen::VectorXd D = dzeta.col(a) + gamma_apply(s.e.col(a), zeta);
      for (int b = 0; b < n; ++b) gz(b, a) = inner_at(G, D, s.e.col(b));
    }
    W = -s.h_inv * gz;
    return W;
  };
  s.W_xi = weingarten(xi, s.dxi);
  s.W_eta = weingarten(eta, s.deta);

  s.H_xi = (s.h_inv * s.II_xi).trace() / n;
  s.H_eta = (s.h_inv * s.II_eta).trace() / n;
  s.H = s.H_xi * xi + s.H_eta * eta;
  {
    Eigen::VectorXd ge(n);
    for (int a = 0; a < n; ++a) ge[a] = inner_at(G, mean, s.e.col(a));
    s.H_direct = mean - s.e * (s.h_inv * ge);
  }
  s.theta_xi = n * s.H_eta;
  s.theta_eta = n * s.H_xi;
  s.gHH = -2.0 * s.H_xi * s.H_eta;
  s.tau = rotation_form(s, metric);
  s.has_forms = true;
}

FormResiduals form_residuals(const ExtrinsicState& s, const MetricField& metric) {
  const int d = s.d, n = s.n;
  const Eigen::MatrixXd G = metric.matrix(s.x);
  const Eigen::VectorXd xi = vec(s.frame.xi), eta = vec(s.frame.eta);
  FormResiduals r;
  // g(A e_a, e_b) = (h A)_{ba}; g(II_ab, ξ) = −II_eta, g(II_ab, η) = −II_xi.
  const Eigen::MatrixXd lhs_xi = (s.h * s.W_xi).transpose(), lhs_eta = (s.h * s.W_eta).transpose();
  r.relation = std::max((lhs_xi + s.II_eta).cwiseAbs().maxCoeff(), (lhs_eta + s.II_xi).cwiseAbs().maxCoeff());
  r.trace = std::max(std::abs(s.theta_xi + s.W_xi.trace()), std::abs(s.theta_eta + s.W_eta.trace()));
  r.trace_H = std::max(std::abs(s.theta_xi + n * inner_at(G, xi, s.H_direct)),
                       std::abs(s.theta_eta + n * inner_at(G, eta, s.H_direct)));
  const Eigen::VectorXd decomposed =
      -inner_at(G, eta, s.H_direct) * xi - inner_at(G, xi, s.H_direct) * eta;
  r.decomposition = std::max((decomposed - s.H_direct).cwiseAbs().maxCoeff(), (s.H - s.H_direct).cwiseAbs().maxCoeff());
  r.mean_norm = std::abs(inner_at(G, s.H_direct, s.H_direct) +
                         2.0 * inner_at(G, xi, s.H_direct) * inner_at(G, eta, s.H_direct));
  (void)d;
  return r;
}

ShearReport shear_analysis(ExtrinsicState& s) {
  if (!s.has_forms) throw Error(ErrorKind::Configuration, "shear analysis needs fundamental forms");
  const int n = s.n;
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  s.IIo_xi = s.II_xi - s.h * s.H_xi;
  s.IIo_eta = s.II_eta - s.h * s.H_eta;
  // g(ξ,H) = −H_eta, g(η,H) = −H_xi.
  s.Ao_xi = s.A_xi + s.H_eta * I;
  s.Ao_eta = s.A_eta + s.H_xi * I;
  s.sigma2_xi = (s.Ao_xi * s.Ao_xi).trace();
  s.sigma2_eta = (s.Ao_eta * s.Ao_eta).trace();
  s.IIo_norm2 = -2.0 * (s.h_inv * s.IIo_xi * s.h_inv * s.IIo_eta).trace();
  s.tau_ext = n > 1 ? s.gHH - s.IIo_norm2 / (n * (n - 1.0)) : std::numeric_limits<double>::quiet_NaN();
  s.has_shear = true;

  const Eigen::MatrixXd C = orthonormal_coefficients(s.h);
  const Eigen::MatrixXd Px = C.transpose() * s.IIo_xi * C, Pe = C.transpose() * s.IIo_eta * C;
  const Eigen::MatrixXd Qx = C.transpose() * s.II_xi * C, Qe = C.transpose() * s.II_eta * C;

  ShearReport rep;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c)
        for (int e = 0; e < n; ++e)
          rep.isotropy_residual =
              std::max(rep.isotropy_residual, std::abs(Px(a, b) * Pe(c, e) + Px(c, e) * Pe(a, b)));

  double io = 0.0, ii = 0.0;
  int ba = 0, bb = 0;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      const double m = std::hypot(Px(a, b), Pe(a, b));
      if (m > io) {
        io = m;
        ba = a;
        bb = b;
      }
      ii = std::max(ii, std::hypot(Qx(a, b), Qe(a, b)));
    }
  auto& F = rep.finder;
  if (io < 1e-7 * (1.0 + ii)) {
    F.umbilical_point = true;
    return rep;
  }
  F.a = Px(ba, bb) / io;
  F.b = Pe(ba, bb) / io;
  F.null_residual = std::abs(2.0 * F.a * F.b);
  const Eigen::MatrixXd Ao = C.inverse() * (F.a * s.Ao_xi + F.b * s.Ao_eta) * C;
  F.shape_residual = Ao.cwiseAbs().maxCoeff() / io;
  const Eigen::VectorXd dir = s.normal(F.a, F.b);
  F.direction = dir / dir.norm();
  F.found = F.null_residual < 1e-6 && F.shape_residual < 1e-6;
  return rep;
}

UmbilicityVerdict umbilicity_test(const ExtrinsicState& s, double a, double b, double tol) {
  if (!s.has_forms) throw Error(ErrorKind::Configuration, "umbilicity test needs fundamental forms");
  return umbilicity_of(s.h, s.shape(a, b), tol);
}

UmbilicityVerdict umbilicity_of(const Eigen::MatrixXd& h, const Eigen::MatrixXd& A, double tol) {
  const Eigen::MatrixXd S = onb_operator(h, A);
  const int n = static_cast<int>(h.rows());
  UmbilicityVerdict v;
  v.rho = S.trace() / n;
  v.residual = (S - v.rho * Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff();
  v.is_umbilical = v.residual < tol * std::max(1.0, std::abs(v.rho));
  return v;
}

IntrinsicCurvature intrinsic_curvature(const Embedding& emb, const std::vector<double>& u, const MetricField& metric) {
  const int n = emb.dim();
  auto gamma_at = [&](const std::vector<double>& p) {
    Eigen::MatrixXd h;
    std::vector<double> dh;
    induced_metric(emb, p, metric, h, dh);
    std::vector<double> hv(n * n), hinv(n * n), gam(n * n * n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) hv[a * n + b] = h(a, b);
    kernel::christoffel_from_derivs(n, hv.data(), dh.data(), hinv.data(), gam.data());
    return std::make_pair(gam, hinv);
  };
  auto [gamma, hinv] = gamma_at(u);
  std::vector<double> dgamma(n * n * n * n, 0.0);
  // Fourth-order stencil: near sphere-type poles Γ_h grows like 1/sinθ and a
  // second-order difference loses several digits.
  for (int c = 0; c < n; ++c) {
    const double step = std::max(1.0, std::abs(u[c])) * std::cbrt(std::numeric_limits<double>::epsilon());
    auto at = [&](double k) {
      auto v = u;
      v[c] += k * step;
      return gamma_at(v).first;
    };
    const auto g2 = at(2), g1 = at(1), m1 = at(-1), m2 = at(-2);
    for (int i = 0; i < n * n * n; ++i)
      dgamma[c * n * n * n + i] = (-g2[i] + 8.0 * g1[i] - 8.0 * m1[i] + m2[i]) / (12.0 * step);
  }
  IntrinsicCurvature out;
  out.riemann.assign(n * n * n * n, 0.0);
  kernel::riemann_from(n, gamma.data(), dgamma.data(), out.riemann.data());
  for (int b = 0; b < n; ++b)
    for (int e = 0; e < n; ++e) {
      double ric = 0.0;
      for (int a = 0; a < n; ++a) ric += out.riemann[((a * n + b) * n + a) * n + e];
      out.scalar += hinv[b * n + e] * ric;
    }
  out.gauss = n == 2 ? out.scalar / 2.0 : std::numeric_limits<double>::quiet_NaN();
  return out;
}

double ambient_sectional(const MetricField& metric, const Point& p, const Eigen::VectorXd& X, const Eigen::VectorXd& Y) {
  const int d = metric.dim();
  const auto R = riemann_at(metric, p);
  const Eigen::MatrixXd G = metric.matrix(p);
  Eigen::VectorXd RY = Eigen::VectorXd::Zero(d);  // R(X,Y)Y
  for (int m = 0; m < d; ++m)
    for (int v = 0; v < d; ++v)
      for (int r = 0; r < d; ++r)
        for (int q = 0; q < d; ++q) RY[m] += R.R(m, v, r, q) * Y[v] * X[r] * Y[q];
  const double den = inner_at(G, X, X) * inner_at(G, Y, Y) - std::pow(inner_at(G, X, Y), 2);
  return inner_at(G, RY, X) / den;
}

double tau_ext_by_definition(const ExtrinsicState& s, const IntrinsicCurvature& in, const MetricField& metric) {
  const int n = s.n;
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  const Eigen::MatrixXd C = orthonormal_coefficients(s.h);
  double sum = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const Eigen::VectorXd X = C.col(i), Y = C.col(j);
      Eigen::VectorXd RY = Eigen::VectorXd::Zero(n);
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
          for (int c = 0; c < n; ++c)
            for (int e = 0; e < n; ++e) RY[a] += in.riemann[((a * n + b) * n + c) * n + e] * Y[b] * X[c] * Y[e];
      const double K = RY.dot(s.h * X);  // X, Y orthonormal
      const double Kt = ambient_sectional(metric, s.x, s.e * X, s.e * Y);
      sum += K - Kt;
    }
  return 2.0 * sum / (n * (n - 1.0));
}

namespace {

bool same_branch(const ExtrinsicState& a, const ExtrinsicState& b) {
  const Eigen::VectorXd xa = vec(a.frame.xi).normalized(), ea = vec(a.frame.eta).normalized();
  const Eigen::VectorXd xb = vec(b.frame.xi).normalized();
  return (xb - xa).norm() < (xb - ea).norm();
}

// Bisects the chart segment between two states until each hop is short enough
// for the nearest-direction test to be meaningful.
bool continuous(const Embedding& emb, const MetricField& metric, const FrameOptions& options,
                const std::vector<double>& ua, const ExtrinsicState& a, const std::vector<double>& ub,
                const ExtrinsicState& b, int depth) {
  if (same_branch(a, b) && same_branch(b, a)) return true;
  if (depth == 0) return false;
  std::vector<double> um(ua.size());
  for (std::size_t i = 0; i < ua.size(); ++i) um[i] = 0.5 * (ua[i] + ub[i]);
  const auto m = build_state(emb, um, metric, options);
  return continuous(emb, metric, options, ua, a, um, m, depth - 1) &&
         continuous(emb, metric, options, um, m, ub, b, depth - 1);
}

}  // namespace

void frame_continuity_probe(const Embedding& emb, const MetricField& metric, const FrameOptions& options,
                            const std::vector<ExtrinsicState>& states, const ChartGrid& grid) {
  for (std::size_t i = 0; i < states.size(); ++i) {
    for (int a = 0; a < static_cast<int>(grid.counts.size()); ++a) {
      const auto j = grid.neighbor(i, a, 1);
      if (!j || *j == i) continue;
      auto ui = grid.nodes[i], uj = grid.nodes[*j];
      if (uj[a] < ui[a]) {  // periodic wrap
        const auto& p = emb.chart()[a];
        uj[a] += p.max - p.min;
      }
      if (!continuous(emb, metric, options, ui, states[i], uj, states[*j], 6))
        throw Error(ErrorKind::FrameContinuity, "null normal branch flips between neighbouring grid nodes");
    }
  }
}

RotationReport rotation_form_and_curvature(const Embedding& emb, const MetricField& metric, const ChartGrid& grid,
                                           const FrameOptions& options, double tol, double step) {
  const int n = emb.dim(), d = emb.ambient_dim();
  std::vector<ExtrinsicState> states(grid.size());
  RotationReport rep;
  rep.nodes.resize(grid.size());
  parallel_for(grid.size(), [&](std::size_t k) {
    const auto& u = grid.nodes[k];
    auto s = embed_and_frame(emb, u, metric, options);
    fundamental_forms(s, metric);
    RotationNode node;
    node.u = u;
    node.tau = s.tau;
    std::vector<double> dtau_partial(n * n);  // [a][b] = ∂_a τ_b
    for (int a = 0; a < n; ++a) {
      auto up = u, dn = u;
      up[a] += step;
      dn[a] -= step;
      // Displaced points may leave a bounded chart range by one step.
      const auto tp = rotation_form(build_state(emb, up, metric, options), metric);
      const auto tm = rotation_form(build_state(emb, dn, metric, options), metric);
      for (int b = 0; b < n; ++b) dtau_partial[a * n + b] = (tp[b] - tm[b]) / (2.0 * step);
    }
    node.dtau.assign(n * n, 0.0);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) node.dtau[a * n + b] = dtau_partial[a * n + b] - dtau_partial[b * n + a];

    const auto R = riemann_at(metric, s.x);
    const Eigen::MatrixXd G = metric.matrix(s.x);
    const Eigen::VectorXd eta = vec(s.frame.eta);
    const Eigen::MatrixXd shape_cross = s.A_eta.transpose() * s.h * s.A_xi;  // g(A_η e_a, A_ξ e_b)
    node.curvature.assign(n * n, 0.0);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        Eigen::VectorXd Rx = Eigen::VectorXd::Zero(d);
        for (int m = 0; m < d; ++m)
          for (int v = 0; v < d; ++v)
            for (int r = 0; r < d; ++r)
              for (int q = 0; q < d; ++q) Rx[m] += R.R(m, v, r, q) * s.frame.xi[v] * s.e(r, a) * s.e(q, b);
        const double c = inner_at(G, Rx, eta);
        node.curvature[a * n + b] = c;
        const double dt = node.dtau[a * n + b];
        node.identity_residual = std::max(node.identity_residual, std::abs(c + dt));
        node.ricci_residual =
            std::max(node.ricci_residual, std::abs(c + dt + shape_cross(a, b) - shape_cross(b, a)));
        node.normal_curvature = std::max(node.normal_curvature, std::abs(c));
      }
    rep.nodes[k] = std::move(node);
    states[k] = std::move(s);
  });
  frame_continuity_probe(emb, metric, options, states, grid);
  for (const auto& node : rep.nodes) {
    rep.max_identity_residual = std::max(rep.max_identity_residual, node.identity_residual);
    rep.max_ricci_residual = std::max(rep.max_ricci_residual, node.ricci_residual);
    rep.max_normal_curvature = std::max(rep.max_normal_curvature, node.normal_curvature);
    for (double v : node.dtau) rep.max_dtau = std::max(rep.max_dtau, std::abs(v));
    for (double v : node.tau) rep.max_tau = std::max(rep.max_tau, std::abs(v));
  }
  rep.parallel_rescalable = rep.max_dtau < tol;
  rep.normal_curvature_vanishes = rep.max_normal_curvature < tol;
  return rep;
}

GaussBonnetReport gauss_bonnet(const Embedding& emb, const MetricField& metric, const ChartGrid& grid,
                               const FrameOptions& options, double umbilic_tol) {
  const int n = emb.dim();
  if (n != 2) throw Error(ErrorKind::Configuration, "Euler characteristic needs a two-dimensional leaf");
  const auto& chart = emb.chart();

  // A parameter whose range ends where the induced metric degenerates is a
  // pole and must be flagged as such.
  std::vector<double> mid(n);
  for (int a = 0; a < n; ++a) mid[a] = 0.5 * (chart[a].min + chart[a].max);
  Eigen::MatrixXd h0;
  std::vector<double> dh;
  induced_metric(emb, mid, metric, h0, dh);
  const double det_mid = std::abs(h0.determinant());
  for (int a = 0; a < n; ++a) {
    if (chart[a].periodic || chart[a].pole) continue;
    for (double end : {chart[a].min, chart[a].max}) {
      auto u = mid;
      u[a] = end;
      Eigen::MatrixXd h;
      induced_metric(emb, u, metric, h, dh);
      if (std::abs(h.determinant()) < 1e-8 * det_mid)
        throw Error(ErrorKind::ChartMetadata,
                    "induced metric degenerates at an end of '" + chart[a].name + "' but it is not flagged as a pole");
    }
  }
  if (!grid.compact || grid.windowed)
    throw Error(ErrorKind::NonCompactDomain, "Euler characteristic needs a compact chart (periodic or polar parameters)");

  const std::size_t N = grid.size();
  GaussBonnetReport rep;
  rep.K_intrinsic.assign(N, 0.0);
  rep.K_extrinsic.assign(N, 0.0);
  std::vector<double> area(N), scal_res(N), det(N);
  std::vector<char> umbilic(N);
  const auto c = metric.constant_curvature();
  parallel_for(N, [&](std::size_t k) {
    auto s = embed_and_frame(emb, grid.nodes[k], metric, options);
    fundamental_forms(s, metric);
    const auto in = intrinsic_curvature(emb, grid.nodes[k], metric);
    const Eigen::MatrixXd C = orthonormal_coefficients(s.h);
    const double Kt = ambient_sectional(metric, s.x, s.e * C.col(0), s.e * C.col(1));
    rep.K_intrinsic[k] = in.gauss;
    rep.K_extrinsic[k] = Kt + s.gHH;
    det[k] = std::sqrt(s.h.determinant());
    if (c) scal_res[k] = std::abs(in.scalar - n * (n - 1.0) * (*c + s.gHH));
    umbilic[k] = umbilicity_test(s, 1, 0, umbilic_tol).is_umbilical || umbilicity_test(s, 0, 1, umbilic_tol).is_umbilical;
  });
  double chi = 0, chi_in = 0, A = 0;
  bool all_umbilic = true;
  for (std::size_t k = 0; k < N; ++k) {
    const double w = grid.weights[k] * det[k];
    chi += w * rep.K_extrinsic[k];
    chi_in += w * rep.K_intrinsic[k];
    A += w;
    rep.max_pointwise_residual = std::max(rep.max_pointwise_residual, std::abs(rep.K_intrinsic[k] - rep.K_extrinsic[k]));
    all_umbilic = all_umbilic && umbilic[k];
  }
  rep.chi = chi / (2.0 * std::numbers::pi);
  rep.chi_intrinsic = chi_in / (2.0 * std::numbers::pi);
  rep.area = A;
  rep.umbilic_section_present = all_umbilic;
  if (c) rep.scal_residual = *std::max_element(scal_res.begin(), scal_res.end());
  return rep;
}

}  // namespace nullfold
