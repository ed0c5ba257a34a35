#include "nullfold/hypersurface.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "nullfold/curvature.hpp"
#include "nullfold/parallel.hpp"

namespace nullfold {

namespace {

using SmallMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double dot(int d, const double* g, const double* a, const double* b) {
  double s = 0.0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) s += g[i * d + j] * a[i] * b[j];
  return s;
}

double enorm(int d, const double* a) {
  double s = 0.0;
  for (int i = 0; i < d; ++i) s += a[i] * a[i];
  return std::sqrt(s);
}

// Γ^μ_{νρ} a^ν b^ρ
void contract(int d, const double* gamma, const double* a, const double* b, double* out) {
  for (int mu = 0; mu < d; ++mu) {
    double s = 0.0;
    for (int n = 0; n < d; ++n)
      for (int r = 0; r < d; ++r) s += gamma[(mu * d + n) * d + r] * a[n] * b[r];
    out[mu] = s;
  }
}

// Offsets into the bundled ODE state.
struct Layout {
  int d, n;
  int X() const { return 0; }
  int V() const { return d; }
  int J() const { return 2 * d; }
  int W() const { return 2 * d + d * n; }
  int sat(int k) const { return 2 * d + 2 * d * n + 2 * d * k; }
  int acc() const { return 2 * d + 2 * d * n + 4 * d * n; }
  int size() const { return acc() + 3; }
};

// Column a of a d×n [μ][a] buffer.
void column(int d, int n, const double* m, int a, double* out) {
  for (int mu = 0; mu < d; ++mu) out[mu] = m[mu * n + a];
}

struct Geometry {
  int d;
  double g[kMaxDim * kMaxDim];
  double gamma[kMaxDim * kMaxDim * kMaxDim];
  double dgamma[kMaxDim * kMaxDim * kMaxDim * kMaxDim];
};

// ∇_U of a Jacobi-type field with coordinate data (J, W = dJ/dt), in buffers [μ][a].
void covariant_first(const Geometry& geo, int n, const double* v, const double* J, const double* W, double* Jp) {
  const int d = geo.d;
  double Ja[kMaxDim], tmp[kMaxDim];
  for (int a = 0; a < n; ++a) {
    column(d, n, J, a, Ja);
    contract(d, geo.gamma, Ja, v, tmp);
    for (int mu = 0; mu < d; ++mu) Jp[mu * n + a] = W[mu * n + a] + tmp[mu];
  }
}

// ∇_U∇_U J from J, W, Ẇ, the velocity v and acceleration acc of the curve.
void covariant_second(const Geometry& geo, int n, const double* v, const double* acc, const double* J,
                      const double* W, const double* Wdot, double* Jpp) {
  const int d = geo.d;
  double Ja[kMaxDim], Wa[kMaxDim], Jp[kMaxDim], t1[kMaxDim], t2[kMaxDim], t3[kMaxDim], t4[kMaxDim];
  for (int a = 0; a < n; ++a) {
    column(d, n, J, a, Ja);
    column(d, n, W, a, Wa);
    contract(d, geo.gamma, Ja, v, t1);
    for (int mu = 0; mu < d; ++mu) Jp[mu] = Wa[mu] + t1[mu];
    contract(d, geo.gamma, Wa, v, t2);
    contract(d, geo.gamma, Ja, acc, t3);
    contract(d, geo.gamma, v, Jp, t4);
    for (int mu = 0; mu < d; ++mu) {
      double dG = 0.0;
      for (int s = 0; s < d; ++s)
        for (int nu = 0; nu < d; ++nu)
          for (int r = 0; r < d; ++r)
            dG += geo.dgamma[((s * d + mu) * d + nu) * d + r] * v[s] * Ja[nu] * v[r];
      Jpp[mu * n + a] = Wdot[mu * n + a] + dG + t2[mu] + t3[mu] + t4[mu];
    }
  }
}

// Screen Gram matrix, B and θ from J and ∇_U J.
void screen_forms(int d, int n, const double* g, const double* J, const double* Jp, SmallMat& gram, SmallMat& B,
                  double& theta) {
  gram.resize(n, n);
  B.resize(n, n);
  double Ja[kMaxDim], Jb[kMaxDim], Pa[kMaxDim];
  for (int a = 0; a < n; ++a) {
    column(d, n, J, a, Ja);
    column(d, n, Jp, a, Pa);
    for (int b = 0; b < n; ++b) {
      column(d, n, J, b, Jb);
      gram(a, b) = dot(d, g, Ja, Jb);
      B(a, b) = -dot(d, g, Pa, Jb);
    }
  }
  theta = -(gram.inverse() * B).trace();
}

struct Bundle {
  const MetricField& metric;
  Layout L;
  std::optional<BoundExpression> density;

  void rhs(const double* y, double* dy, Geometry& geo) const {
    const int d = L.d, n = L.n;
    geo.d = d;
    kernel::christoffel_with_derivative(metric, y + L.X(), geo.g, geo.gamma, geo.dgamma);
    const double* v = y + L.V();
    const double* J = y + L.J();
    const double* W = y + L.W();
    double acc[kMaxDim];
    contract(d, geo.gamma, v, v, acc);
    for (int mu = 0; mu < d; ++mu) {
      dy[L.X() + mu] = v[mu];
      dy[L.V() + mu] = -acc[mu];
    }
    // Jacobi system in coordinates: J' = W, W' = −∂_σΓ J^σ v v − 2 Γ(W, v).
    double Wa[kMaxDim], Ja[kMaxDim], t[kMaxDim];
    for (int a = 0; a < n; ++a) {
      column(d, n, J, a, Ja);
      column(d, n, W, a, Wa);
      contract(d, geo.gamma, Wa, v, t);
      for (int mu = 0; mu < d; ++mu) {
        double dG = 0.0;
        for (int s = 0; s < d; ++s)
          for (int nu = 0; nu < d; ++nu)
            for (int r = 0; r < d; ++r)
              dG += geo.dgamma[((s * d + mu) * d + nu) * d + r] * Ja[s] * v[nu] * v[r];
        dy[L.J() + mu * n + a] = Wa[mu];
        dy[L.W() + mu * n + a] = -dG - 2.0 * t[mu];
      }
    }
    for (int k = 0; k < 2 * n; ++k) geodesic_rhs(metric, y + L.sat(k), dy + L.sat(k));
    double Jp[kMaxDim * kMaxDim];
    covariant_first(geo, n, v, J, W, Jp);
    SmallMat gram, B;
    double theta = 0.0;
    screen_forms(d, n, geo.g, J, Jp, gram, B, theta);
    dy[L.acc()] = theta;
    dy[L.acc() + 1] = -theta / n;
    dy[L.acc() + 2] = density ? density->eval(y + L.X()) : 0.0;
  }
};

}  // namespace

double LeafSample::omega() const { return std::exp(-2.0 * int_mu); }

std::vector<double> make_t_grid(double t_min, double t_max, int steps) {
  if (!(t_min <= 0.0 && t_max >= 0.0) || t_max - t_min <= 0.0 || steps < 1)
    throw Error(ErrorKind::Configuration, "t range must contain 0 and have positive length");
  const double len = t_max - t_min;
  int back = t_min < 0.0 ? std::max(1, static_cast<int>(std::lround(steps * (-t_min) / len))) : 0;
  int fwd = t_max > 0.0 ? std::max(1, steps - back) : 0;
  if (t_max > 0.0 && back + fwd > steps && back > 1) --back;
  std::vector<double> t;
  for (int k = back; k >= 1; --k) t.push_back(t_min * k / back);
  t.push_back(0.0);
  for (int k = 1; k <= fwd; ++k) t.push_back(t_max * k / fwd);
  if (fwd > 0) t.back() = t_max;
  if (back > 0) t.front() = t_min;
  return t;
}

GeneratorSeed seed_generator(const Embedding& emb, const std::vector<double>& u, const MetricField& metric,
                             const FrameOptions& options, const FanControls& controls) {
  const ExtrinsicState s = embed_and_frame(emb, u, metric, options);
  const int d = s.d, n = s.n;
  GeneratorSeed seed;
  seed.u = u;
  seed.n = n;
  seed.x = s.x.coords;
  seed.Z = s.frame.Z;

  std::optional<BoundExpression> f;
  std::vector<std::string> names;
  for (const auto& c : emb.chart()) names.push_back(c.name);
  if (controls.rescale) f = controls.rescale->bind(names);
  auto factor = [&](const std::vector<double>& at) {
    if (!f) return 1.0;
    const double value = f->eval(at.data());
    if (!std::isfinite(value) || value == 0.0)
      throw Error(ErrorKind::InvalidRescale, "generator rescaling vanishes or is not finite on S");
    return value;
  };
  const double f0 = factor(u);
  seed.v.resize(d);
  for (int mu = 0; mu < d; ++mu) seed.v[mu] = f0 * s.frame.xi[mu];
  seed.J.assign(d * n, 0.0);
  seed.W.assign(d * n, 0.0);
  for (int a = 0; a < n; ++a) {
    const double dfa = f ? f->derivative(u, a) : 0.0;
    for (int mu = 0; mu < d; ++mu) {
      seed.J[mu * n + a] = s.e(mu, a);
      seed.W[mu * n + a] = dfa * s.frame.xi[mu] + f0 * s.dxi(mu, a);
    }
  }

  FrameOptions unchecked = options;
  unchecked.check_range = false;
  const double h = controls.satellite_step;
  for (int a = 0; a < n; ++a)
    for (int sign : {1, -1}) {
      std::vector<double> w = u;
      w[a] += sign * h;
      const ExtrinsicState sat = embed_and_frame(emb, w, metric, unchecked);
      const double fs = factor(w);
      seed.sat_x.insert(seed.sat_x.end(), sat.x.coords.begin(), sat.x.coords.end());
      for (int mu = 0; mu < d; ++mu) seed.sat_v.push_back(fs * sat.frame.xi[mu]);
    }
  return seed;
}

Generator integrate_generator(const GeneratorSeed& seed, const MetricField& metric, const std::vector<double>& times,
                              const FanControls& controls) {
  const int d = metric.dim(), n = seed.n;
  const Layout L{d, n};
  Bundle bundle{metric, L, std::nullopt};
  if (controls.parameter_density) bundle.density = controls.parameter_density->bind(metric.coordinates());

  std::vector<double> y(L.size(), 0.0);
  std::copy(seed.x.begin(), seed.x.end(), y.begin() + L.X());
  std::copy(seed.v.begin(), seed.v.end(), y.begin() + L.V());
  std::copy(seed.J.begin(), seed.J.end(), y.begin() + L.J());
  std::copy(seed.W.begin(), seed.W.end(), y.begin() + L.W());
  for (int k = 0; k < 2 * n; ++k) {
    std::copy(seed.sat_x.begin() + k * d, seed.sat_x.begin() + (k + 1) * d, y.begin() + L.sat(k));
    std::copy(seed.sat_v.begin() + k * d, seed.sat_v.begin() + (k + 1) * d, y.begin() + L.sat(k) + d);
  }

  Generator gen;
  gen.u = seed.u;
  gen.samples.resize(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) gen.samples[i].t = times[i];

  const double h = controls.satellite_step;
  auto rhs = [&](double, const double* s, double* ds) {
    Geometry geo;
    bundle.rhs(s, ds, geo);
  };

  auto postprocess = [&](LeafSample& out, const double* s) {
    Geometry geo;
    std::vector<double> ds(L.size());
    bundle.rhs(s, ds.data(), geo);
    const double* x = s + L.X();
    const double* v = s + L.V();
    const double* J = s + L.J();
    const double* W = s + L.W();
    const double* acc = ds.data() + L.V();
    out.valid = true;
    out.x.assign(x, x + d);
    out.v.assign(v, v + d);
    out.J.assign(J, J + d * n);
    out.Jp.assign(d * n, 0.0);
    out.Jpp.assign(d * n, 0.0);
    covariant_first(geo, n, v, J, W, out.Jp.data());
    covariant_second(geo, n, v, acc, J, W, ds.data() + L.W(), out.Jpp.data());

    // Finite-difference frame from the satellites.
    std::vector<double> Wfd(d * n), Wdot_fd(d * n);
    out.J_fd.assign(d * n, 0.0);
    for (int a = 0; a < n; ++a) {
      const double* p = s + L.sat(2 * a);
      const double* m = s + L.sat(2 * a + 1);
      const double* dp = ds.data() + L.sat(2 * a) + d;
      const double* dm = ds.data() + L.sat(2 * a + 1) + d;
      for (int mu = 0; mu < d; ++mu) {
        out.J_fd[mu * n + a] = (p[mu] - m[mu]) / (2 * h);
        Wfd[mu * n + a] = (p[d + mu] - m[d + mu]) / (2 * h);
        Wdot_fd[mu * n + a] = (dp[mu] - dm[mu]) / (2 * h);
      }
    }
    out.Jpp_fd.assign(d * n, 0.0);
    covariant_second(geo, n, v, acc, out.J_fd.data(), Wfd.data(), Wdot_fd.data(), out.Jpp_fd.data());

    SmallMat gram, B;
    screen_forms(d, n, geo.g, J, out.Jp.data(), gram, B, out.theta);
    out.mu = -out.theta / n;
    {
      // B' = −g(J''_a, J_b) − g(J'_a, J'_b), ĝ' = −B − Bᵀ.
      SmallMat dB(n, n);
      double Jb2[kMaxDim], Pa2[kMaxDim], Pb2[kMaxDim], Qa[kMaxDim];
      for (int a = 0; a < n; ++a) {
        column(d, n, out.Jpp.data(), a, Qa);
        column(d, n, out.Jp.data(), a, Pa2);
        for (int b = 0; b < n; ++b) {
          column(d, n, J, b, Jb2);
          column(d, n, out.Jp.data(), b, Pb2);
          dB(a, b) = -dot(d, geo.g, Qa, Jb2) - dot(d, geo.g, Pa2, Pb2);
        }
      }
      const SmallMat gi = gram.inverse();
      const SmallMat dg = -(B + B.transpose());
      out.theta_dot = -(-(gi * dg * gi * B) + gi * dB).trace();
    }
    out.gram.resize(n * n);
    out.B.resize(n * n);
    out.gram_fd.resize(n * n);
    double Ja[kMaxDim], Pa[kMaxDim], Fa[kMaxDim], Fb[kMaxDim];
    out.B_asymmetry = out.B_radical = out.containment = out.frame_mismatch = 0.0;
    for (int a = 0; a < n; ++a) {
      column(d, n, J, a, Ja);
      column(d, n, out.Jp.data(), a, Pa);
      column(d, n, out.J_fd.data(), a, Fa);
      for (int b = 0; b < n; ++b) {
        column(d, n, out.J_fd.data(), b, Fb);
        out.gram[a * n + b] = gram(a, b);
        out.B[a * n + b] = B(a, b);
        out.gram_fd[a * n + b] = dot(d, geo.g, Fa, Fb);
        out.B_asymmetry = std::max(out.B_asymmetry, std::abs(B(a, b) - B(b, a)));
      }
      out.B_radical = std::max(out.B_radical, std::abs(dot(d, geo.g, Pa, v)));
      out.containment = std::max({out.containment, std::abs(dot(d, geo.g, v, Ja)), std::abs(dot(d, geo.g, v, Fa))});
      double diff[kMaxDim];
      for (int mu = 0; mu < d; ++mu) diff[mu] = Fa[mu] - Ja[mu];
      out.frame_mismatch = std::max(out.frame_mismatch, enorm(d, diff) / enorm(d, Ja));
    }
    out.null_norm = dot(d, geo.g, v, v);
    out.int_theta = s[L.acc()];
    out.int_mu = s[L.acc() + 1];
    out.parameter = s[L.acc() + 2];

    // Curvature terms.
    std::vector<double> R(d * d * d * d);
    kernel::riemann_from(d, geo.gamma, geo.dgamma, R.data());
    auto Rijk = [&](int mu, int nu, int r, int sg) { return R[((mu * d + nu) * d + r) * d + sg]; };
    out.ricci_UU = 0.0;
    for (int nu = 0; nu < d; ++nu)
      for (int sg = 0; sg < d; ++sg) {
        double ric = 0.0;
        for (int mu = 0; mu < d; ++mu) ric += Rijk(mu, nu, mu, sg);
        out.ricci_UU += ric * v[nu] * v[sg];
      }
    const double vscale = 1.0 + enorm(d, v) * enorm(d, v);
    auto jacobi_residual = [&](const double* Jf, const double* Jppf) {
      double worst = 0.0;
      for (int a = 0; a < n; ++a) {
        double Ja2[kMaxDim], res[kMaxDim];
        column(d, n, Jf, a, Ja2);
        for (int mu = 0; mu < d; ++mu) {
          double r = Jppf[mu * n + a];
          for (int nu = 0; nu < d; ++nu)
            for (int rr = 0; rr < d; ++rr)
              for (int sg = 0; sg < d; ++sg) r += Rijk(mu, nu, rr, sg) * v[nu] * Ja2[rr] * v[sg];
          res[mu] = r;
        }
        worst = std::max(worst, enorm(d, res) / (enorm(d, Ja2) * vscale));
      }
      return worst;
    };
    out.jacobi_raw = jacobi_residual(out.J_fd.data(), out.Jpp_fd.data());
    out.jacobi_transport = jacobi_residual(J, out.Jpp.data());

    // Transverse null V with g(U,V) = −1 and V ⊥ J_a, from the gauge field.
    SmallMat ginv = gram.inverse();
    std::vector<double> Zp(seed.Z);
    std::vector<double> gJZ(n);
    for (int a = 0; a < n; ++a) {
      column(d, n, J, a, Ja);
      gJZ[a] = dot(d, geo.g, Ja, seed.Z.data());
    }
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int mu = 0; mu < d; ++mu) Zp[mu] -= J[mu * n + a] * ginv(a, b) * gJZ[b];
    const double c = dot(d, geo.g, v, seed.Z.data());
    const double zz = dot(d, geo.g, Zp.data(), Zp.data());
    std::vector<double> V(d);
    for (int mu = 0; mu < d; ++mu) V[mu] = -Zp[mu] / c + zz / (2 * c * c) * v[mu];
    out.tau.resize(n);
    for (int a = 0; a < n; ++a) {
      column(d, n, out.Jp.data(), a, Pa);
      out.tau[a] = -dot(d, geo.g, Pa, V.data());
    }
  };

  auto observer = [&](const std::vector<std::size_t>& order) {
    return [&, order](std::size_t k, double, const double* s) { postprocess(gen.samples[order[k]], s); };
  };

  std::vector<std::size_t> fwd, bwd;
  for (std::size_t i = 0; i < times.size(); ++i) (times[i] >= 0.0 ? fwd : bwd).push_back(i);
  std::sort(fwd.begin(), fwd.end(), [&](auto a, auto b) { return times[a] < times[b]; });
  std::sort(bwd.begin(), bwd.end(), [&](auto a, auto b) { return times[a] > times[b]; });
  auto run = [&](const std::vector<std::size_t>& order) {
    if (order.empty()) return;
    std::vector<double> targets;
    for (auto i : order) targets.push_back(times[i]);
    try {
      integrate(rhs, y, 0.0, targets, controls.integrator, observer(order));
    } catch (const IntegrationFailure& e) {
      gen.failed = true;
      if (gen.last_valid == 0.0 || std::abs(e.last_valid()) < std::abs(gen.last_valid)) gen.last_valid = e.last_valid();
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DegenerateMetric) throw;
      gen.failed = true;
    }
  };
  run(bwd);
  run(fwd);

  // Caustics: outward from t = 0 along each branch, everything past the first
  // collapse of the Gram determinant is masked.
  std::size_t zero = fwd.empty() ? bwd.front() : fwd.front();
  double det0 = 1.0;
  if (gen.samples[zero].valid) {
    det0 = Eigen::Map<const Eigen::MatrixXd>(gen.samples[zero].gram.data(), n, n).determinant();
  }
  for (const auto* order : {&fwd, &bwd}) {
    bool hit = false;
    for (auto i : *order) {
      LeafSample& s = gen.samples[i];
      if (!s.valid) continue;
      const double det = Eigen::Map<const Eigen::MatrixXd>(s.gram.data(), n, n).determinant();
      if (!std::isfinite(det) || det < controls.caustic_ratio * det0 || !std::isfinite(s.theta)) hit = true;
      s.caustic = hit;
    }
  }
  return gen;
}

HypersurfaceGrid build_hypersurface(const Embedding& emb, const MetricField& metric, const ChartGrid& grid,
                                    const std::vector<double>& t, const FrameOptions& options,
                                    const FanControls& controls) {
  if (!std::is_sorted(t.begin(), t.end()) || std::adjacent_find(t.begin(), t.end()) != t.end())
    throw Error(ErrorKind::Configuration, "t grid must be strictly ascending");
  const auto z = std::find(t.begin(), t.end(), 0.0);
  if (z == t.end()) throw Error(ErrorKind::Configuration, "t grid must contain 0");

  HypersurfaceGrid out;
  out.n = emb.dim();
  out.d = metric.dim();
  out.grid = grid;
  out.t = t;
  out.t0 = static_cast<std::size_t>(z - t.begin());
  out.generators.resize(grid.size());
  out.theta_xi.resize(grid.size());
  out.sigma2_xi.resize(grid.size());

  parallel_for(grid.size(), [&](std::size_t i) {
    ExtrinsicState s = embed_and_frame(emb, grid.nodes[i], metric, options);
    fundamental_forms(s, metric);
    shear_analysis(s);
    out.theta_xi[i] = s.theta_xi;
    out.sigma2_xi[i] = s.sigma2_xi;
    const GeneratorSeed seed = seed_generator(emb, grid.nodes[i], metric, options, controls);
    out.generators[i] = integrate_generator(seed, metric, t, controls);
    out.generators[i].weight = grid.weights[i];
  });

  for (std::size_t i = 0; i < out.generators.size(); ++i) {
    const Generator& g = out.generators[i];
    out.any_failure = out.any_failure || g.failed;
    for (const auto& s : g.samples)
      if (s.valid && !s.caustic && s.frame_mismatch > controls.cross_check_tol)
        throw Error(ErrorKind::TransportInconsistency,
                    "finite-difference and transported leaf frames disagree (" + std::to_string(s.frame_mismatch) +
                        " at t = " + std::to_string(s.t) + ")");
  }
  return out;
}

namespace {

bool usable(const LeafSample& s) { return s.valid && !s.caustic; }

// Contiguous usable index range around t0, as [lo, hi].
std::pair<std::size_t, std::size_t> usable_range(const Generator& g, std::size_t t0) {
  if (!usable(g.samples[t0])) return {t0, t0};
  std::size_t lo = t0, hi = t0;
  while (lo > 0 && usable(g.samples[lo - 1])) --lo;
  while (hi + 1 < g.samples.size() && usable(g.samples[hi + 1])) ++hi;
  return {lo, hi};
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

Eigen::MatrixXd as_matrix(const std::vector<double>& v, int n) {
  return Eigen::Map<const Eigen::MatrixXd>(v.data(), n, n);
}

}  // namespace

UmbilicityReport total_umbilicity_check(const HypersurfaceGrid& grid) {
  UmbilicityReport r;
  const int n = grid.n;
  for (const auto& g : grid.generators) {
    for (const auto& s : g.samples) {
      if (!usable(s)) continue;
      ++r.nodes;
      const double gn = max_abs(s.gram);
      for (int k = 0; k < n * n; ++k)
        r.max_residual = std::max(r.max_residual, std::abs(s.B[k] - s.mu * s.gram[k]) / (1.0 + std::abs(s.mu) * gn));
      r.max_B = std::max(r.max_B, max_abs(s.B));
      r.max_theta = std::max(r.max_theta, std::abs(s.theta));
      r.max_asymmetry = std::max(r.max_asymmetry, s.B_asymmetry);
      r.max_radical = std::max(r.max_radical, s.B_radical);
      r.max_containment = std::max(r.max_containment, s.containment);
      r.max_null_norm = std::max(r.max_null_norm, std::abs(s.null_norm));
      r.max_frame_mismatch = std::max(r.max_frame_mismatch, s.frame_mismatch);
      const Eigen::MatrixXd h = as_matrix(s.gram, n);
      const Eigen::MatrixXd A = h.inverse() * as_matrix(s.B, n);
      r.max_leaf_umbilicity = std::max(r.max_leaf_umbilicity, umbilicity_of(h, A, 1e-6).residual);
    }
    const auto [lo, hi] = usable_range(g, grid.t0);
    if (hi - lo + 1 < 5) continue;
    std::vector<double> tt(grid.t.begin() + lo, grid.t.begin() + hi + 1);
    for (int k = 0; k < n * n; ++k) {
      std::vector<double> f;
      for (std::size_t i = lo; i <= hi; ++i) f.push_back(g.samples[i].gram_fd[k]);
      const auto df = sampled_derivative(tt, f);
      for (std::size_t i = lo; i <= hi; ++i) {
        const auto& s = g.samples[i];
        r.max_lie = std::max(r.max_lie, std::abs(df[i - lo] + 2.0 * s.B[k]) / (1.0 + max_abs(s.B)));
      }
    }
  }
  return r;
}

ConformalFactorReport conformal_factor_check(const HypersurfaceGrid& grid, double tol) {
  ConformalFactorReport r;
  r.min_omega = std::numeric_limits<double>::infinity();
  double max_mu = 0.0;
  for (const auto& g : grid.generators) {
    const auto& s0 = g.samples[grid.t0];
    if (!usable(s0)) continue;
    const double g0 = max_abs(s0.gram);
    for (const auto& s : g.samples) {
      if (!usable(s)) continue;
      const double om = s.omega();
      for (std::size_t k = 0; k < s.gram.size(); ++k)
        r.max_residual = std::max(r.max_residual, std::abs(s.gram[k] - om * s0.gram[k]) / (om * g0));
      r.min_omega = std::min(r.min_omega, om);
      r.max_omega_deviation = std::max(r.max_omega_deviation, std::abs(om - 1.0));
      r.max_abs_mu_integral = std::max(r.max_abs_mu_integral, std::abs(s.int_mu));
      max_mu = std::max(max_mu, std::abs(s.mu));
    }
  }
  if (!std::isfinite(r.min_omega)) r.min_omega = kNaN;
  r.isometric_leaves = r.max_abs_mu_integral < tol;
  r.constant_omega = r.max_omega_deviation < tol && max_mu < tol;
  return r;
}

std::vector<std::pair<std::size_t, std::size_t>> isometric_leaf_pairs(const HypersurfaceGrid& grid, double tol) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  const std::size_t T = grid.t.size();
  std::vector<bool> ok(T, true);
  for (std::size_t k = 0; k < T; ++k)
    for (const auto& g : grid.generators) ok[k] = ok[k] && usable(g.samples[k]);
  for (std::size_t i = 0; i < T; ++i)
    for (std::size_t j = i + 1; j < T; ++j) {
      if (!ok[i] || !ok[j]) continue;
      bool all = true;
      for (const auto& g : grid.generators)
        if (std::abs(g.samples[j].int_mu - g.samples[i].int_mu) >= tol) {
          all = false;
          break;
        }
      if (all) out.emplace_back(i, j);
    }
  return out;
}

double VolumeSeries::max_pairwise_relative() const {
  double m = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (!std::isfinite(vol[k]) || !std::isfinite(pred1[k]) || !std::isfinite(pred2[k])) continue;
    const double scale = std::abs(vol[k]);
    m = std::max({m, std::abs(vol[k] - pred1[k]) / scale, std::abs(vol[k] - pred2[k]) / scale,
                  std::abs(pred1[k] - pred2[k]) / scale});
  }
  return m;
}

VolumeSeries volume_series(const HypersurfaceGrid& grid) {
  if (!grid.grid.compact && !grid.grid.windowed)
    throw Error(ErrorKind::NonCompactDomain, "leaf volumes need a compact chart or an explicit window");
  VolumeSeries v;
  v.windowed = grid.grid.windowed;
  const std::size_t T = grid.t.size();
  const int n = grid.n;
  v.t = grid.t;
  v.vol.assign(T, kNaN);
  v.pred1.assign(T, kNaN);
  v.pred2.assign(T, kNaN);
  v.Theta.assign(T, kNaN);
  v.Theta_dot.assign(T, kNaN);
  std::vector<double> root0(grid.generators.size());
  for (std::size_t i = 0; i < grid.generators.size(); ++i)
    root0[i] = std::sqrt(as_matrix(grid.generators[i].samples[grid.t0].gram, n).determinant());
  std::vector<bool> ok(T, true);
  for (std::size_t k = 0; k < T; ++k) {
    double vol = 0.0, p1 = 0.0, th = 0.0, th2 = 0.0;
    for (std::size_t i = 0; i < grid.generators.size(); ++i) {
      const auto& g = grid.generators[i];
      const auto& s = g.samples[k];
      if (!usable(s)) {
        ok[k] = false;
        break;
      }
      const double w = g.weight;
      vol += w * std::sqrt(std::max(0.0, as_matrix(s.gram, n).determinant()));
      const double e = w * root0[i] * std::exp(s.int_theta);
      p1 += e;
      th += e * s.theta;
      th2 += e * (s.theta_dot + s.theta * s.theta);
    }
    if (!ok[k]) continue;
    v.vol[k] = vol;
    v.pred1[k] = p1;
    v.Theta[k] = th / p1;
    v.Theta_dot[k] = th2 / p1 - v.Theta[k] * v.Theta[k];
  }
  if (!ok[grid.t0]) return v;
  std::size_t lo = grid.t0, hi = grid.t0;
  while (lo > 0 && ok[lo - 1]) --lo;
  while (hi + 1 < T && ok[hi + 1]) ++hi;
  std::vector<double> tt(grid.t.begin() + lo, grid.t.begin() + hi + 1);
  std::vector<double> th(v.Theta.begin() + lo, v.Theta.begin() + hi + 1);
  std::vector<double> dth(v.Theta_dot.begin() + lo, v.Theta_dot.begin() + hi + 1);
  const auto I = cumulative_integral(tt, th, dth, grid.t0 - lo);
  for (std::size_t k = lo; k <= hi; ++k) v.pred2[k] = v.vol[grid.t0] * std::exp(I[k - lo]);
  return v;
}

JacobiReport jacobi_verify(const HypersurfaceGrid& grid) {
  JacobiReport r;
  const int n = grid.n, d = grid.d;
  const std::size_t T = grid.t.size();
  for (const auto& g : grid.generators) {
    auto [lo, hi] = usable_range(g, grid.t0);
    if (hi - lo + 1 < 5) continue;
    // Keep stencils away from a caustic or a failure at the range ends.
    const std::size_t keep_lo = lo > 0 ? lo + 2 : lo;
    const std::size_t keep_hi = hi + 1 < T ? hi - 2 : hi;
    std::vector<double> tt(grid.t.begin() + lo, grid.t.begin() + hi + 1);
    std::vector<std::vector<double>> dtau(n);
    for (int a = 0; a < n; ++a) {
      std::vector<double> f;
      for (std::size_t i = lo; i <= hi; ++i) f.push_back(g.samples[i].tau[a]);
      dtau[a] = sampled_derivative(tt, f);
    }
    for (std::size_t i = keep_lo; i <= keep_hi && i <= hi; ++i) {
      const auto& s = g.samples[i];
      ++r.samples;
      r.max_raw_fd = std::max(r.max_raw_fd, s.jacobi_raw);
      r.max_raw_transport = std::max(r.max_raw_transport, s.jacobi_transport);
      double v2 = 0.0, J2;
      for (int mu = 0; mu < d; ++mu) v2 += s.v[mu] * s.v[mu];
      for (int a = 0; a < n; ++a) {
        const double f = dtau[a][i - lo] - s.mu * s.tau[a];
        r.max_f = std::max(r.max_f, std::abs(f));
        double res2 = 0.0;
        J2 = 0.0;
        for (int mu = 0; mu < d; ++mu) {
          const double J = s.J[mu * n + a];
          const double res = s.Jpp[mu * n + a] + s.ricci_UU / n * J - f * s.v[mu];
          res2 += res * res;
          J2 += J * J;
        }
        r.max_ricci_form = std::max(r.max_ricci_form, std::sqrt(res2 / J2) / (1.0 + v2));
      }
    }
  }
  return r;
}

RescaleReport rescale_invariance(const Embedding& emb, const MetricField& metric, const ChartGrid& grid,
                                 const std::vector<double>& s, const FrameOptions& options, const Expression& f,
                                 const FanControls& controls) {
  FanControls scaled = controls;
  scaled.rescale = f;
  const HypersurfaceGrid bar = build_hypersurface(emb, metric, grid, s, options, scaled);
  std::vector<std::string> names;
  for (const auto& c : emb.chart()) names.push_back(c.name);
  const BoundExpression fb = f.bind(names);
  FanControls base = controls;
  base.rescale.reset();
  const int n = bar.n;

  std::vector<RescaleReport> per(grid.size());
  parallel_for(grid.size(), [&](std::size_t i) {
    const double fp = fb.eval(grid.nodes[i].data());
    std::vector<double> times;
    for (double si : s) times.push_back(fp * si);
    const GeneratorSeed seed = seed_generator(emb, grid.nodes[i], metric, options, base);
    const Generator g = integrate_generator(seed, metric, times, base);
    RescaleReport& r = per[i];
    for (std::size_t k = 0; k < s.size(); ++k) {
      const auto& a = bar.generators[i].samples[k];
      const auto& b = g.samples[k];
      if (!usable(a) || !usable(b)) continue;
      r.omega = std::max(r.omega, std::abs(a.omega() - b.omega()) / b.omega());
      const double gn = max_abs(b.gram);
      for (int q = 0; q < n * n; ++q) r.gram = std::max(r.gram, std::abs(a.gram[q] - b.gram[q]) / gn);
      for (std::size_t mu = 0; mu < a.x.size(); ++mu) r.position = std::max(r.position, std::abs(a.x[mu] - b.x[mu]));
    }
  });
  RescaleReport r;
  for (const auto& p : per) {
    r.omega = std::max(r.omega, p.omega);
    r.gram = std::max(r.gram, p.gram);
    r.position = std::max(r.position, p.position);
  }
  return r;
}

ConformalLawReport conformal_change_laws(const Embedding& emb, MetricPtr metric, const ChartGrid& grid,
                                         const std::vector<double>& t, const FrameOptions& options,
                                         const Expression& u, const FanControls& controls) {
  const MetricPtr star = conformal_rescale(metric, u);
  FanControls sc = controls;
  sc.parameter_density = Expression::parse("exp(-2*(" + u.to_string() + "))");
  const HypersurfaceGrid fan_star = build_hypersurface(emb, *star, grid, t, options, sc);
  const BoundExpression ub = u.bind(metric->coordinates());
  FanControls base = controls;
  base.parameter_density.reset();
  const int n = fan_star.n, d = fan_star.d;

  std::vector<ConformalLawReport> per(grid.size());
  parallel_for(grid.size(), [&](std::size_t i) {
    const auto& gs = fan_star.generators[i];
    std::vector<double> lambda;
    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k < t.size(); ++k)
      if (usable(gs.samples[k])) {
        lambda.push_back(gs.samples[k].parameter);
        idx.push_back(k);
      }
    if (lambda.empty()) return;
    const GeneratorSeed seed = seed_generator(emb, grid.nodes[i], *metric, options, base);
    const Generator g = integrate_generator(seed, *metric, lambda, base);
    const double up = ub.eval(seed.x.data());
    ConformalLawReport& r = per[i];
    for (std::size_t m = 0; m < idx.size(); ++m) {
      const auto& a = gs.samples[idx[m]];
      const auto& b = g.samples[m];
      if (!usable(b)) continue;
      const double uq = ub.eval(b.x.data());
      double Uu = 0.0;
      for (int mu = 0; mu < d; ++mu) Uu += ub.derivative(b.x, mu) * b.v[mu];
      const double e2u = std::exp(2.0 * uq);
      // Expansion and second form of the * fan with respect to the base field U.
      const double theta_star = e2u * a.theta;
      const double theta_stated = b.theta - n * Uu;
      const double theta_direct = b.theta + n * Uu;
      r.theta_stated = std::max(r.theta_stated, std::abs(theta_star - theta_stated) / (1.0 + std::abs(theta_stated)));
      r.theta_direct = std::max(r.theta_direct, std::abs(theta_star - theta_direct) / (1.0 + std::abs(theta_direct)));
      double Bs = 0.0, Bd = 0.0, Bs_scale = 0.0, Bd_scale = 0.0;
      for (int q = 0; q < n * n; ++q) {
        const double B_star = e2u * a.B[q];
        const double ls = e2u * (b.B[q] + Uu * b.gram[q]);
        const double ld = e2u * (b.B[q] - Uu * b.gram[q]);
        Bs = std::max(Bs, std::abs(B_star - ls));
        Bd = std::max(Bd, std::abs(B_star - ld));
        Bs_scale = std::max(Bs_scale, std::abs(ls));
        Bd_scale = std::max(Bd_scale, std::abs(ld));
      }
      r.B_stated = std::max(r.B_stated, Bs / (1.0 + Bs_scale));
      r.B_direct = std::max(r.B_direct, Bd / (1.0 + Bd_scale));
      const double om_star = a.omega();
      const double om = b.omega();
      const double od = std::exp(2.0 * (uq - up)) * om;
      r.omega_stated = std::max(r.omega_stated, std::abs(om_star - om) / om);
      r.omega_direct = std::max(r.omega_direct, std::abs(om_star - od) / od);
      for (int mu = 0; mu < d; ++mu) r.position = std::max(r.position, std::abs(a.x[mu] - b.x[mu]));
    }
  });
  ConformalLawReport r;
  for (const auto& p : per) {
    r.theta_stated = std::max(r.theta_stated, p.theta_stated);
    r.B_stated = std::max(r.B_stated, p.B_stated);
    r.omega_stated = std::max(r.omega_stated, p.omega_stated);
    r.theta_direct = std::max(r.theta_direct, p.theta_direct);
    r.B_direct = std::max(r.B_direct, p.B_direct);
    r.omega_direct = std::max(r.omega_direct, p.omega_direct);
    r.position = std::max(r.position, p.position);
  }
  return r;
}

RestrictionReport restriction_check(const HypersurfaceGrid& grid) {
  RestrictionReport r;
  const int n = grid.n;
  for (std::size_t i = 0; i < grid.generators.size(); ++i) {
    const auto& s = grid.generators[i].samples[grid.t0];
    if (!s.valid) continue;
    r.theta = std::max(r.theta, std::abs(s.theta - grid.theta_xi[i]));
    const Eigen::MatrixXd h = as_matrix(s.gram, n);
    Eigen::MatrixXd A = h.inverse() * as_matrix(s.B, n);
    A -= (A.trace() / n) * Eigen::MatrixXd::Identity(n, n);
    const double sigma2 = (A * A).trace();
    r.shear = std::max(r.shear, std::abs(sigma2 - grid.sigma2_xi[i]));
  }
  return r;
}

}  // namespace nullfold
