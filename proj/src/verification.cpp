#include "nullfold/verification.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <set>

#include "nullfold/curvature.hpp"
#include "nullfold/error.hpp"
#include "nullfold/parallel.hpp"

namespace nullfold {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

// Shared by the consistency checks that compare two classifications.
constexpr double kUmbilicTol = 1e-6;
constexpr double kIsotropyTol = 1e-8;

struct Outcome {
  double residual = 0;
  std::string note;
  std::vector<std::string> series;
  bool skipped = false;
};

bool usable(const LeafSample& s) { return s.valid && !s.caustic; }

double max_abs(const Eigen::MatrixXd& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

// Lazily computed objects shared between checks.
class Context {
 public:
  explicit Context(const Scenario& sc) : sc_(sc), r_(resolve_scenario(sc)) {
    controls_.integrator = sc.integrator;
    // The cross-check is reported as a check rather than thrown.
    controls_.cross_check_tol = kInf;
  }

  const Scenario& sc() const { return sc_; }
  const MetricField& metric() const { return *r_.spacetime.metric; }
  MetricPtr metric_ptr() const { return r_.spacetime.metric; }
  const Embedding& emb() const { return r_.embedding; }
  const ChartGrid& grid() const { return r_.grid; }
  const std::vector<double>& t() const { return r_.t; }
  const FrameOptions& options() const { return sc_.frame; }
  const FanControls& controls() const { return controls_; }
  int n() const { return r_.embedding.dim(); }

  // Ambient conformal factor for the invariance checks.
  Expression conformal_u() const {
    if (sc_.transformations.conformal) return Expression::parse(*sc_.transformations.conformal);
    return Expression::parse("0.1*" + metric().coordinates()[0]);
  }

  const std::vector<ExtrinsicState>& states() {
    if (!states_) {
      std::vector<ExtrinsicState> s(grid().size());
      std::vector<ShearReport> sh(grid().size());
      parallel_for(grid().size(), [&](std::size_t k) {
        s[k] = embed_and_frame(emb(), grid().nodes[k], metric(), options());
        fundamental_forms(s[k], metric());
        sh[k] = shear_analysis(s[k]);
      });
      states_ = std::move(s);
      shear_ = std::move(sh);
      add_extrinsic_series();
    }
    return *states_;
  }
  const std::vector<ShearReport>& shear() {
    states();
    return shear_;
  }
  const std::vector<FormResiduals>& forms() {
    if (!forms_) {
      const auto& s = states();
      std::vector<FormResiduals> f(s.size());
      parallel_for(s.size(), [&](std::size_t k) { f[k] = form_residuals(s[k], metric()); });
      forms_ = std::move(f);
    }
    return *forms_;
  }
  const std::vector<double>& tau_by_definition() {
    if (!tau_def_) {
      const auto& s = states();
      std::vector<double> tau(s.size());
      parallel_for(s.size(), [&](std::size_t k) {
        const auto in = intrinsic_curvature(emb(), grid().nodes[k], metric());
        tau[k] = tau_ext_by_definition(s[k], in, metric());
      });
      tau_def_ = std::move(tau);
    }
    return *tau_def_;
  }
  const std::vector<ExtrinsicState>& conformal_states() {
    if (!conf_states_) {
      const MetricPtr star = conformal_rescale(metric_ptr(), conformal_u());
      std::vector<ExtrinsicState> s(grid().size());
      parallel_for(grid().size(), [&](std::size_t k) {
        s[k] = embed_and_frame(emb(), grid().nodes[k], *star, options());
        fundamental_forms(s[k], *star);
      });
      conf_states_ = std::move(s);
    }
    return *conf_states_;
  }
  const RotationReport& rotation() {
    if (!rotation_) rotation_ = rotation_form_and_curvature(emb(), metric(), grid(), options());
    return *rotation_;
  }
  const RotationReport& conformal_rotation() {
    if (!conf_rotation_) {
      const MetricPtr star = conformal_rescale(metric_ptr(), conformal_u());
      conf_rotation_ = rotation_form_and_curvature(emb(), *star, grid(), options());
    }
    return *conf_rotation_;
  }
  const GaussBonnetReport& gauss_bonnet_report() {
    if (!gb_) gb_ = gauss_bonnet(emb(), metric(), grid(), options());
    return *gb_;
  }
  const HypersurfaceGrid& fan() {
    if (!fan_) {
      fan_ = build_hypersurface(emb(), metric(), grid(), t(), options(), controls_);
      add_fan_series();
    }
    return *fan_;
  }
  const UmbilicityReport& umbilicity() {
    if (!um_) um_ = total_umbilicity_check(fan());
    return *um_;
  }
  const ConformalFactorReport& conformal_factor(double tol) {
    if (!cf_) cf_ = conformal_factor_check(fan(), tol);
    return *cf_;
  }
  const VolumeSeries& volumes() {
    if (!vol_) {
      vol_ = volume_series(fan());
      add_volume_series();
    }
    return *vol_;
  }
  const JacobiReport& jacobi() {
    if (!jac_) jac_ = jacobi_verify(fan());
    return *jac_;
  }
  const RestrictionReport& restriction() {
    if (!restr_) restr_ = restriction_check(fan());
    return *restr_;
  }
  const ConformalLawReport& laws() {
    if (!laws_) laws_ = conformal_change_laws(emb(), metric_ptr(), grid(), t(), options(), conformal_u(), controls_);
    return *laws_;
  }
  // Worst case over the scenario's rescalings.
  const RescaleReport& rescale() {
    if (!rescale_) {
      RescaleReport worst;
      for (const auto& f : sc_.transformations.rescale) {
        const auto r = rescale_invariance(emb(), metric(), grid(), t(), options(), Expression::parse(f), controls_);
        worst.omega = std::max(worst.omega, r.omega);
        worst.gram = std::max(worst.gram, r.gram);
        worst.position = std::max(worst.position, r.position);
      }
      rescale_ = worst;
    }
    return *rescale_;
  }

  // Reference profile along the fan: max |x − ref| / max(|ref|, floor).
  double profile_residual(const std::string& expr, const std::function<double(const LeafSample&)>& value,
                          bool initial_leaf_only = false, bool absolute = false) {
    auto names = metric().coordinates();
    names.push_back("lam");
    const BoundExpression e = Expression::parse(expr).bind(names);
    const auto& f = fan();
    double worst = 0.0;
    std::vector<double> vars(names.size());
    for (const auto& g : f.generators)
      for (std::size_t k = 0; k < g.samples.size(); ++k) {
        const auto& s = g.samples[k];
        if (!usable(s) || (initial_leaf_only && k != f.t0)) continue;
        std::copy(s.x.begin(), s.x.end(), vars.begin());
        vars.back() = s.t;
        const double ref = e.eval(vars.data());
        const double scale = absolute ? 1.0 : std::max(std::abs(ref), sc_.oracles.relative_floor);
        const double r = std::abs(value(s) - ref) / scale;
        worst = std::isnan(r) ? r : std::max(worst, r);
        if (std::isnan(worst)) return worst;
      }
    return worst;
  }

  std::vector<Series> take_series() { return std::move(series_); }

 private:
  std::vector<std::string> node_columns() const {
    static const char* names[] = {"node_u", "node_v", "node_w"};
    std::vector<std::string> out;
    for (int a = 0; a < n(); ++a) out.push_back(a < 3 ? names[a] : "node_" + std::to_string(a + 1));
    return out;
  }

  void add_extrinsic_series() {
    Series s;
    s.name = "extrinsic";
    s.columns = node_columns();
    for (const char* c : {"theta_xi", "theta_eta", "gHH", "sigma2_xi", "sigma2_eta", "tau_ext", "frame_residual"})
      s.columns.push_back(c);
    for (std::size_t k = 0; k < states_->size(); ++k) {
      const auto& st = (*states_)[k];
      std::vector<double> row = grid().nodes[k];
      for (double v : {st.theta_xi, st.theta_eta, st.gHH, st.sigma2_xi, st.sigma2_eta, st.tau_ext,
                       st.frame_residuals.max()})
        row.push_back(v);
      s.rows.push_back(std::move(row));
    }
    series_.push_back(std::move(s));
  }

  void add_fan_series() {
    const auto& f = *fan_;
    const std::pair<const char*, double (*)(const LeafSample&)> fields[] = {
        {"theta", [](const LeafSample& s) { return s.theta; }},
        {"mu", [](const LeafSample& s) { return s.mu; }},
        {"omega", [](const LeafSample& s) { return s.omega(); }}};
    for (const auto& [name, get] : fields) {
      Series s;
      s.name = name;
      s.long_format = true;
      s.columns = {"t"};
      for (const auto& c : node_columns()) s.columns.push_back(c);
      s.columns.push_back("value");
      for (std::size_t k = 0; k < f.t.size(); ++k)
        for (std::size_t i = 0; i < f.generators.size(); ++i) {
          const auto& smp = f.generators[i].samples[k];
          std::vector<double> row{f.t[k]};
          for (double u : grid().nodes[i]) row.push_back(u);
          row.push_back(usable(smp) ? get(smp) : kNaN);
          s.rows.push_back(std::move(row));
        }
      series_.push_back(std::move(s));
    }
  }

  void add_volume_series() {
    Series s;
    s.name = "volumes";
    s.columns = {"t", "Vol", "Vol_pred1", "Vol_pred2", "Theta"};
    const auto& v = *vol_;
    for (std::size_t k = 0; k < v.t.size(); ++k) s.rows.push_back({v.t[k], v.vol[k], v.pred1[k], v.pred2[k], v.Theta[k]});
    series_.push_back(std::move(s));
  }

  const Scenario& sc_;
  ResolvedScenario r_;
  FanControls controls_;
  std::optional<std::vector<ExtrinsicState>> states_, conf_states_;
  std::vector<ShearReport> shear_;
  std::optional<std::vector<FormResiduals>> forms_;
  std::optional<std::vector<double>> tau_def_;
  std::optional<RotationReport> rotation_, conf_rotation_;
  std::optional<GaussBonnetReport> gb_;
  std::optional<HypersurfaceGrid> fan_;
  std::optional<UmbilicityReport> um_;
  std::optional<ConformalFactorReport> cf_;
  std::optional<VolumeSeries> vol_;
  std::optional<JacobiReport> jac_;
  std::optional<RestrictionReport> restr_;
  std::optional<ConformalLawReport> laws_;
  std::optional<RescaleReport> rescale_;
  std::vector<Series> series_;
};

using Applies = std::function<std::optional<std::string>(const Scenario&)>;  // reason it does not apply
using Eval = std::function<Outcome(Context&, double tol)>;

struct CheckImpl {
  CheckInfo info;
  Applies applies;
  Eval eval;
};

std::optional<std::string> always(const Scenario&) { return std::nullopt; }

bool compact_chart(const Scenario& sc) {
  for (const auto& c : sc.chart)
    if (!c.periodic && !c.pole) return false;
  return true;
}

Outcome value(double r, std::vector<std::string> series = {}) {
  Outcome o;
  o.residual = r;
  o.series = std::move(series);
  return o;
}

template <class F>
double max_over(std::size_t n, F f) {
  double m = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double v = f(k);
    if (std::isnan(v)) return v;
    m = std::max(m, v);
  }
  return m;
}

std::vector<CheckImpl> build_registry() {
  std::vector<CheckImpl> R;
  auto add = [&](CheckInfo info, Applies applies, Eval eval) {
    R.push_back({std::move(info), std::move(applies), std::move(eval)});
  };
  const std::vector<std::string> theta_series{"theta.csv"}, mu_series{"mu.csv"}, omega_series{"omega.csv"},
      vol_series{"volumes.csv"}, ext_series{"extrinsic.csv"};

  // Frames.
  add({"christoffel_cross_check", Stage::Frames, {}, 1e-6, Comparison::AtMost, {},
       "exact-mode vs central-difference Christoffel symbols at 100 seeded points, relative"},
      always, [](Context& c, double) {
        const auto pts = probe_points(c.metric(), 100, c.sc().seed);
        return value(max_over(pts.size(), [&](std::size_t k) {
          return relative_difference(christoffel_at(c.metric(), pts[k]).data(),
                                     christoffel_fd(c.metric(), pts[k]).data());
        }));
      });
  add({"frame_algebra", Stage::Frames, {}, 1e-9, Comparison::AtMost, {"submanifold/frame-algebra"},
       "null normal frame: |g(ξ,ξ)|, |g(η,η)|, |g(ξ,η)+1|, |g(ξ,e_a)|, |g(η,e_a)|"},
      always, [ext_series](Context& c, double) {
        const auto& s = c.states();
        return value(max_over(s.size(), [&](std::size_t k) { return s[k].frame_residuals.max(); }), ext_series);
      });
  add({"frame_continuity", Stage::Frames, {"frame_algebra"}, 0.0, Comparison::AtMost, {},
       "1 if ξ jumps to the other null branch between grid neighbours"},
      always, [](Context& c, double) {
        try {
          frame_continuity_probe(c.emb(), c.metric(), c.options(), c.states(), c.grid());
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::FrameContinuity) throw;
          Outcome o = value(1.0);
          o.note = e.what();
          return o;
        }
        return value(0.0);
      });

  // Forms.
  add({"shape_relation", Stage::Forms, {"frame_algebra"}, 1e-8, Comparison::AtMost, {"submanifold/relation"},
       "g(A_ζ e_a, e_b) = g(II(e_a,e_b), ζ) for ζ = ξ, η"},
      always, [](Context& c, double) {
        const auto& f = c.forms();
        return value(max_over(f.size(), [&](std::size_t k) { return f[k].relation; }));
      });
  add({"expansion_trace", Stage::Forms, {"frame_algebra"}, 1e-9, Comparison::AtMost, {"submanifold/trace-consistency"},
       "|θ_ζ + tr A_ζ| and |θ_ζ + n g(ζ,H)|"},
      always, [](Context& c, double) {
        const auto& f = c.forms();
        return value(max_over(f.size(), [&](std::size_t k) { return std::max(f[k].trace, f[k].trace_H); }));
      });
  add({"mean_curvature_decomposition", Stage::Forms, {"frame_algebra"}, 1e-8, Comparison::AtMost, {},
       "H = −g(η,H) ξ − g(ξ,H) η against the direct normal projection"},
      always, [](Context& c, double) {
        const auto& f = c.forms();
        return value(max_over(f.size(), [&](std::size_t k) { return f[k].decomposition; }));
      });
  add({"mean_curvature_norm", Stage::Forms, {"frame_algebra"}, 1e-8, Comparison::AtMost, {},
       "g(H,H) = −2 g(ξ,H) g(η,H)"},
      always, [](Context& c, double) {
        const auto& f = c.forms();
        return value(max_over(f.size(), [&](std::size_t k) { return f[k].mean_norm; }));
      });
  add({"shape_operator_oracle", Stage::Forms, {"frame_algebra"}, 1e-4, Comparison::AtMost, {},
       "A_ξ against the reference matrix, relative"},
      [](const Scenario& sc) -> std::optional<std::string> {
        if (!sc.oracles.A_xi) return "needs oracles.A_xi";
        return std::nullopt;
      },
      [](Context& c, double) {
        const auto& ref = *c.sc().oracles.A_xi;
        const int n = c.n();
        if (static_cast<int>(ref.size()) != n)
          throw Error(ErrorKind::Configuration, c.sc().source + ": oracles.A_xi: expected a " + std::to_string(n) +
                                                    "x" + std::to_string(n) + " matrix");
        Eigen::MatrixXd A(n, n);
        for (int a = 0; a < n; ++a)
          for (int b = 0; b < n; ++b) A(a, b) = ref[a][b];
        const double scale = std::max(1.0, max_abs(A));
        const auto& s = c.states();
        return value(max_over(s.size(), [&](std::size_t k) { return max_abs(s[k].A_xi - A) / scale; }));
      });
  add({"expansion_xi_oracle", Stage::Forms, {"frame_algebra"}, 1e-4, Comparison::AtMost, {},
       "θ_ξ against the reference value, relative"},
      [](const Scenario& sc) -> std::optional<std::string> {
        if (!sc.oracles.theta_xi) return "needs oracles.theta_xi";
        return std::nullopt;
      },
      [](Context& c, double) {
        const double ref = *c.sc().oracles.theta_xi;
        const auto& s = c.states();
        return value(max_over(s.size(), [&](std::size_t k) {
          return std::abs(s[k].theta_xi - ref) / std::max(std::abs(ref), c.sc().oracles.relative_floor);
        }));
      });
  add({"mean_curvature_norm_oracle", Stage::Forms, {"frame_algebra"}, 1e-4, Comparison::AtMost, {},
       "g(H,H) against the reference value, relative"},
      [](const Scenario& sc) -> std::optional<std::string> {
        if (!sc.oracles.gHH) return "needs oracles.gHH";
        return std::nullopt;
      },
      [](Context& c, double) {
        const double ref = *c.sc().oracles.gHH;
        const auto& s = c.states();
        return value(max_over(s.size(), [&](std::size_t k) {
          return std::abs(s[k].gHH - ref) / std::max(std::abs(ref), c.sc().oracles.relative_floor);
        }));
      });

  // Shear.
  add({"shear_positivity", Stage::Shear, {"expansion_trace"}, 1e-12, Comparison::AtMost, {"submanifold/shear-positivity"},
       "max(0, −σ²_ζ) for ζ = ξ, η"},
      always, [](Context& c, double) {
        const auto& s = c.states();
        return value(max_over(s.size(), [&](std::size_t k) {
          return std::max({0.0, -s[k].sigma2_xi, -s[k].sigma2_eta});
        }));
      });
  add({"shear_umbilicity_consistency", Stage::Shear, {"expansion_trace"}, 0.0, Comparison::AtMost,
       {"submanifold/shear-positivity"},
       "nodes where σ²_ζ < tol² and the umbilicity test (tol 1e-6) disagree, outside a factor-of-2 band"},
      always, [](Context& c, double) {
        const auto& s = c.states();
        double bad = 0;
        for (const auto& st : s)
          for (auto [sig, a, b] : {std::tuple{st.sigma2_xi, 1.0, 0.0}, std::tuple{st.sigma2_eta, 0.0, 1.0}}) {
            const auto v = umbilicity_test(st, a, b, kUmbilicTol);
            if (sig < 0.25 * kUmbilicTol * kUmbilicTol && !v.is_umbilical) ++bad;
            if (sig > 2 * kUmbilicTol * kUmbilicTol * std::max(1.0, v.rho * v.rho) && v.is_umbilical) ++bad;
          }
        return value(bad);
      });
  add({"shear_isotropy", Stage::Shear, {"expansion_trace"}, 0.0, Comparison::AtMost, {"submanifold/shear-isotropy"},
       "non-umbilical nodes where (isotropy residual < 1e-8) and the umbilical-direction finder disagree"},
      always, [](Context& c, double) {
        const auto& sh = c.shear();
        double bad = 0, examined = 0;
        for (const auto& r : sh) {
          if (r.finder.umbilical_point) continue;
          ++examined;
          if ((r.isotropy_residual < kIsotropyTol) != r.finder.found) ++bad;
        }
        Outcome o = value(bad);
        o.note = std::to_string(static_cast<long>(examined)) + " non-umbilical nodes";
        return o;
      });
  add({"traceless_gauss", Stage::Shear, {"expansion_trace"}, 1e-6, Comparison::AtMost, {},
       "g(II̊,II̊) = n(n−1)(g(H,H) − τ_ext) with τ_ext from sectional curvatures, relative to max(1, g(II̊,II̊))"},
      always, [](Context& c, double) {
        const auto& s = c.states();
        const auto& tau = c.tau_by_definition();
        const int n = c.n();
        return value(max_over(s.size(), [&](std::size_t k) {
          return std::abs(s[k].IIo_norm2 - n * (n - 1) * (s[k].gHH - tau[k])) / std::max(1.0, std::abs(s[k].IIo_norm2));
        }));
      });
  add({"tau_ext", Stage::Shear, {"expansion_trace"}, 1e-6, Comparison::AtMost, {"submanifold/tau-ext"},
       "|τ_ext − g(H,H)| where an umbilical null direction is verified"},
      always, [](Context& c, double) {
        const auto& sh = c.shear();
        const auto& s = c.states();
        const auto& tau = c.tau_by_definition();
        return value(max_over(s.size(), [&](std::size_t k) {
          const bool umbilic = sh[k].finder.found || sh[k].finder.umbilical_point;
          return umbilic ? std::abs(tau[k] - s[k].gHH) : 0.0;
        }));
      });
  add({"pseudo_umbilical", Stage::Shear, {"expansion_trace"}, 1e-6, Comparison::AtMost, {"submanifold/pseudo-umbilical"},
       "trace-free residual of A_H where A_ξ is umbilical and θ_ξ vanishes"},
      always, [](Context& c, double) {
        const auto& s = c.states();
        double worst = 0;
        long candidates = 0;
        for (const auto& st : s) {
          if (!umbilicity_test(st, 1, 0, kUmbilicTol).is_umbilical || std::abs(st.theta_xi) >= kUmbilicTol) continue;
          ++candidates;
          const auto v = umbilicity_test(st, st.H_xi, st.H_eta, kUmbilicTol);
          worst = std::max(worst, v.residual / std::max(1.0, std::abs(v.rho)));
        }
        Outcome o = value(worst);
        o.note = std::to_string(candidates) + " nodes with umbilical ξ and vanishing θ_ξ";
        return o;
      });
  add({"conformal_umbilicity", Stage::Shear, {"expansion_trace"}, 0.0, Comparison::AtMost,
       {"submanifold/conformal-umbilicity"},
       "nodes where the ξ umbilicity verdict (tol 1e-6) changes under the ambient conformal change"},
      always, [](Context& c, double) {
        const auto& s = c.states();
        const auto& s2 = c.conformal_states();
        double bad = 0;
        for (std::size_t k = 0; k < s.size(); ++k)
          if (umbilicity_test(s[k], 1, 0, kUmbilicTol).is_umbilical !=
              umbilicity_test(s2[k], 1, 0, kUmbilicTol).is_umbilical)
            ++bad;
        Outcome o = value(bad);
        o.note = "u = " + c.conformal_u().to_string();
        return o;
      });
  add({"rotation_identity", Stage::Shear, {"frame_continuity"}, 1e-4, Comparison::AtMost, {},
       "g(R(e_a,e_b)ξ, η) = −dτ(e_a,e_b) at nodes where ξ or η is umbilical"},
      always, [](Context& c, double) {
        const auto& rot = c.rotation();
        const auto& s = c.states();
        double worst = 0;
        long used = 0;
        for (std::size_t k = 0; k < s.size(); ++k) {
          if (!umbilicity_test(s[k], 1, 0, kUmbilicTol).is_umbilical &&
              !umbilicity_test(s[k], 0, 1, kUmbilicTol).is_umbilical)
            continue;
          ++used;
          worst = std::max(worst, rot.nodes[k].identity_residual);
        }
        Outcome o = value(worst);
        o.note = std::to_string(used) + " of " + std::to_string(s.size()) + " nodes";
        return o;
      });
  add({"ricci_normal_identity", Stage::Shear, {"frame_continuity"}, 1e-6, Comparison::AtMost, {},
       "g(R(e_a,e_b)ξ,η) + dτ + g(A_η e_a, A_ξ e_b) − g(A_η e_b, A_ξ e_a) = 0"},
      always, [](Context& c, double) { return value(c.rotation().max_ricci_residual); });
  add({"dtau_conformal_invariance", Stage::Shear, {"frame_continuity"}, 1e-6, Comparison::AtMost, {},
       "max |dτ − dτ*| under the ambient conformal change"},
      always, [](Context& c, double) {
        const auto& a = c.rotation();
        const auto& b = c.conformal_rotation();
        Outcome o = value(max_over(a.nodes.size(), [&](std::size_t k) {
          double m = 0;
          for (std::size_t i = 0; i < a.nodes[k].dtau.size(); ++i)
            m = std::max(m, std::abs(a.nodes[k].dtau[i] - b.nodes[k].dtau[i]));
          return m;
        }));
        o.note = "u = " + c.conformal_u().to_string();
        return o;
      });
  add({"gauss_curvature_relation", Stage::Shear, {"expansion_trace"}, 1e-3, Comparison::AtMost, {},
       "pointwise |K − (K̃ + g(H,H))| on a compact surface with an umbilical null section"},
      [](const Scenario& sc) -> std::optional<std::string> {
        if (sc.chart.size() != 2 || !compact_chart(sc)) return "needs a compact two-dimensional chart";
        return std::nullopt;
      },
      [](Context& c, double) {
        const auto& gb = c.gauss_bonnet_report();
        if (!gb.umbilic_section_present) {
          Outcome o;
          o.skipped = true;
          o.residual = kNaN;
          o.note = "no umbilical null section verified; relation not asserted";
          return o;
        }
        return value(gb.max_pointwise_residual);
      });
  add({"gauss_bonnet", Stage::Shear, {"gauss_curvature_relation"}, 1e-2, Comparison::AtMost, {},
       "|χ − χ_ref| with χ = (1/2π) ∫ (K̃ + g(H,H)) dμ"},
      [](const Scenario& sc) -> std::optional<std::string> {
        if (sc.chart.size() != 2 || !compact_chart(sc)) return "needs a compact two-dimensional chart";
        if (!sc.oracles.chi) return "needs oracles.chi";
        return std::nullopt;
      },
      [](Context& c, double) {
        const auto& gb = c.gauss_bonnet_report();
        Outcome o = value(std::abs(gb.chi - *c.sc().oracles.chi));
        o.note = "chi = " + std::to_string(gb.chi);
        return o;
      });

  // Hypersurface.
  add({"hypersurface_build", Stage::Hypersurface, {"frame_algebra"}, 0.0, Comparison::AtMost, {},
       "generators whose integration broke down"},
      always, [theta_series](Context& c, double) {
        const auto& f = c.fan();
        double failed = 0;
        for (const auto& g : f.generators) failed += g.failed ? 1 : 0;
        return value(failed, theta_series);
      });
  add({"null_norm", Stage::Hypersurface, {"hypersurface_build"}, 1e-8, Comparison::AtMost, {},
       "|g(U,U)| along the generators"},
      always, [](Context& c, double) { return value(c.umbilicity().max_null_norm); });
  add({"lightlike_containment", Stage::Hypersurface, {"hypersurface_build"}, 1e-6, Comparison::AtMost,
       {"nullfold/lightlike-containment"}, "|g(U, e_a)| over both leaf frames"},
      always, [](Context& c, double) { return value(c.umbilicity().max_containment); });
  add({"frame_cross_check", Stage::Hypersurface, {"hypersurface_build"}, 1e-5, Comparison::AtMost,
       {"nullfold/frame-cross-check"}, "finite-difference vs Jacobi-transported leaf frames, relative"},
      always, [](Context& c, double) { return value(c.umbilicity().max_frame_mismatch); });
  add({"b_symmetry", Stage::Hypersurface, {"hypersurface_build"}, 1e-8, Comparison::AtMost, {},
       "|B_ab − B_ba| and |B(X, U)|"},
      always, [](Context& c, double) {
        const auto& u = c.umbilicity();
        return value(std::max(u.max_asymmetry, u.max_radical));
      });
  add({"expansion_restriction", Stage::Hypersurface, {"hypersurface_build"}, 1e-8, Comparison::AtMost,
       {"nullfold/expansion-restriction"}, "|θ_U(0) − θ_ξ| and |σ²_U(0) − σ²_ξ|"},
      always, [](Context& c, double) {
        const auto& r = c.restriction();
        return value(std::max(r.theta, r.shear));
      });
  add({"total_umbilicity", Stage::Hypersurface, {"lightlike_containment", "frame_cross_check"}, 1e-6,
       Comparison::AtMost, {}, "(B − μĝ)/(1 + |μ| ‖ĝ‖), max-norm"},
      always, [theta_series](Context& c, double) { return value(c.umbilicity().max_residual, theta_series); });
  add({"lie_derivative", Stage::Hypersurface, {"hypersurface_build"}, 1e-4, Comparison::AtMost, {},
       "|L_U ĝ + 2B| with L_U ĝ from t-differences of the finite-difference Gram"},
      always, [](Context& c, double) { return value(c.umbilicity().max_lie); });
  add({"leaf_umbilicity", Stage::Hypersurface, {"total_umbilicity"}, 1e-6, Comparison::AtMost, {"nullfold/leaf-umbilicity"},
       "trace-free residual of the screen shape operator of U on every leaf"},
      always, [](Context& c, double) { return value(c.umbilicity().max_leaf_umbilicity); });
  add({"totally_geodesic", Stage::Hypersurface, {"hypersurface_build"}, 1e-9, Comparison::AtMost, {},
       "max |B|"},
      [](const Scenario& sc) -> std::optional<std::string> {
        if (!sc.oracles.totally_geodesic) return "needs oracles.totally_geodesic";
        return std::nullopt;
      },
      [](Context& c, double) { return value(c.umbilicity().max_B); });
  add({"theta_profile", Stage::Hypersurface, {"hypersurface_build"}, 1e-4, Comparison::AtMost, {},
       "θ_U against the reference profile, relative with floor"},
      [](const Scenario& sc) -> std::optional<std::string> {
        if (!sc.oracles.theta) return "needs oracles.theta";
        return std::nullopt;
      },
      [theta_series](Context& c, double) {
        return value(c.profile_residual(*c.sc().oracles.theta, [](const LeafSample& s) { return s.theta; }),
                     theta_series);
      });
  add({"theta_initial_leaf", Stage::Hypersurface, {"hypersurface_build"}, 1e-6, Comparison::AtMost, {},
       "|θ_U − θ_ref| on the leaf t = 0, absolute"},
      [](const Scenario& sc) -> std::optional<std::string> {
        if (!sc.oracles.theta) return "needs oracles.theta";
        return std::nullopt;
      },
      [theta_series](Context& c, double) {
        return value(c.profile_residual(*c.sc().oracles.theta, [](const LeafSample& s) { return s.theta; }, true, true),
                     theta_series);
      });
  add({"expansion_nonzero", Stage::Hypersurface, {"hypersurface_build"}, 0.1, Comparison::AtLeast, {},
       "max |θ_U| must reach the lower bound (not totally geodesic)"},
      [](const Scenario& sc) -> std::optional<std::string> {
        if (!sc.oracles.not_totally_geodesic) return "needs oracles.not_totally_geodesic";
        return std::nullopt;
      },
      [theta_series](Context& c, double) { return value(c.umbilicity().max_theta, theta_series); });
  add({"mu_profile", Stage::Hypersurface, {"hypersurface_build"}, 1e-4, Comparison::AtMost, {},
       "μ against the reference profile, relative with floor"},
      [](const Scenario& sc) -> std::optional<std::string> {
        if (!sc.oracles.mu) return "needs oracles.mu";
        return std::nullopt;
      },
      [mu_series](Context& c, double) {
        return value(c.profile_residual(*c.sc().oracles.mu, [](const LeafSample& s) { return s.mu; }), mu_series);
      });

  // Ω.
  add({"conformal_factor", Stage::Omega, {"total_umbilicity"}, 1e-6, Comparison::AtMost, {},
       "|ĝ(t) − Ω ĝ(0)| / (Ω ‖ĝ(0)‖) with Ω = exp(−2∫μ)"},
      always, [omega_series](Context& c, double tol) { return value(c.conformal_factor(tol).max_residual, omega_series); });
  add({"omega_positivity", Stage::Omega, {"total_umbilicity"}, 0.0, Comparison::AtMost, {"nullfold/positivity"},
       "samples with Ω ≤ 0 or not finite"},
      always, [omega_series](Context& c, double) {
        const auto& f = c.fan();
        double bad = 0;
        for (const auto& g : f.generators)
          for (const auto& s : g.samples)
            if (usable(s) && !(s.omega() > 0 && std::isfinite(s.omega()))) ++bad;
        return value(bad, omega_series);
      });
  add({"omega_profile", Stage::Omega, {"total_umbilicity"}, 1e-4, Comparison::AtMost, {},
       "Ω against the reference profile, relative"},
      [](const Scenario& sc) -> std::optional<std::string> {
        if (!sc.oracles.omega) return "needs oracles.omega";
        return std::nullopt;
      },
      [omega_series](Context& c, double) {
        return value(c.profile_residual(*c.sc().oracles.omega, [](const LeafSample& s) { return s.omega(); }),
                     omega_series);
      });
  add({"constant_omega", Stage::Omega, {"total_umbilicity"}, 1e-9, Comparison::AtMost, {},
       "max |Ω − 1| and max |μ|"},
      [](const Scenario& sc) -> std::optional<std::string> {
        if (!sc.oracles.totally_geodesic) return "needs oracles.totally_geodesic";
        return std::nullopt;
      },
      [omega_series](Context& c, double) {
        const auto& f = c.fan();
        double m = 0;
        for (const auto& g : f.generators)
          for (const auto& s : g.samples)
            if (usable(s)) m = std::max({m, std::abs(s.omega() - 1.0), std::abs(s.mu)});
        return value(m, omega_series);
      });
  add({"leaf_isometry", Stage::Omega, {"total_umbilicity"}, 1e-9, Comparison::AtMost, {},
       "|ĝ(t) − ĝ(0)| / ‖ĝ(0)‖: every leaf isometric to S"},
      [](const Scenario& sc) -> std::optional<std::string> {
        if (!sc.oracles.totally_geodesic) return "needs oracles.totally_geodesic";
        return std::nullopt;
      },
      [](Context& c, double) {
        const auto& f = c.fan();
        double m = 0;
        for (const auto& g : f.generators) {
          const auto& s0 = g.samples[f.t0];
          double scale = 0;
          for (double x : s0.gram) scale = std::max(scale, std::abs(x));
          for (const auto& s : g.samples)
            if (usable(s))
              for (std::size_t k = 0; k < s.gram.size(); ++k) m = std::max(m, std::abs(s.gram[k] - s0.gram[k]) / scale);
        }
        return value(m);
      });

  // Volumes.
  const Applies volume_domain = [](const Scenario& sc) -> std::optional<std::string> {
    if (!compact_chart(sc) && !sc.window) return "needs a compact chart or a window";
    return std::nullopt;
  };
  add({"volume_consistency", Stage::Volumes, {"hypersurface_build"}, 1e-4, Comparison::AtMost,
       {"nullfold/volume-consistency"}, "direct quadrature vs ∫ e^{∫θ} dV vs Vol(0) e^{∫Θ}, pairwise relative"},
      volume_domain, [vol_series](Context& c, double) { return value(c.volumes().max_pairwise_relative(), vol_series); });
  add({"volume_positivity", Stage::Volumes, {"hypersurface_build"}, 0.0, Comparison::AtMost, {"nullfold/positivity"},
       "leaves with Vol ≤ 0"},
      volume_domain, [vol_series](Context& c, double) {
        double bad = 0;
        for (double v : c.volumes().vol)
          if (std::isfinite(v) && !(v > 0)) ++bad;
        return value(bad, vol_series);
      });
  add({"volume_profile", Stage::Volumes, {"hypersurface_build"}, 1e-4, Comparison::AtMost, {},
       "Vol(S_t) against the reference profile in lam, relative"},
      [volume_domain](const Scenario& sc) -> std::optional<std::string> {
        if (auto r = volume_domain(sc)) return r;
        if (!sc.oracles.volume) return "needs oracles.volume";
        return std::nullopt;
      },
      [vol_series](Context& c, double) {
        const auto& v = c.volumes();
        const BoundExpression e = Expression::parse(*c.sc().oracles.volume).bind({"lam"});
        double m = 0;
        for (std::size_t k = 0; k < v.t.size(); ++k) {
          if (!std::isfinite(v.vol[k])) continue;
          const double ref = e({v.t[k]});
          m = std::max(m, std::abs(v.vol[k] - ref) / std::max(std::abs(ref), c.sc().oracles.relative_floor));
        }
        return value(m, vol_series);
      });
  add({"volume_constant", Stage::Volumes, {"hypersurface_build"}, 1e-9, Comparison::AtMost, {},
       "|Vol(S_t) − Vol(S)| / Vol(S)"},
      [volume_domain](const Scenario& sc) -> std::optional<std::string> {
        if (auto r = volume_domain(sc)) return r;
        if (!sc.oracles.totally_geodesic) return "needs oracles.totally_geodesic";
        return std::nullopt;
      },
      [vol_series](Context& c, double) {
        const auto& v = c.volumes();
        const double v0 = v.vol[c.fan().t0];
        double m = 0;
        for (double x : v.vol)
          if (std::isfinite(x)) m = std::max(m, std::abs(x - v0) / v0);
        return value(m, vol_series);
      });

  // Jacobi fields.
  add({"jacobi_equation", Stage::Jacobi, {"hypersurface_build"}, 1e-6, Comparison::AtMost, {},
       "|J'' + R(J,U)U| for the transported fields, relative"},
      always, [](Context& c, double) { return value(c.jacobi().max_raw_transport); });
  add({"jacobi_fd", Stage::Jacobi, {"frame_cross_check"}, 1e-4, Comparison::AtMost, {},
       "|J'' + R(J,U)U| for the finite-difference fields, relative"},
      always, [](Context& c, double) { return value(c.jacobi().max_raw_fd); });
  add({"jacobi_ricci", Stage::Jacobi, {"total_umbilicity"}, 1e-4, Comparison::AtMost, {},
       "|J'' + (Ric(U,U)/n) J − f U| with f = U(τ(J)) − μ τ(J), relative"},
      always, [](Context& c, double) { return value(c.jacobi().max_ricci_form); });

  // Transformation laws.
  const Applies has_rescale = [](const Scenario& sc) -> std::optional<std::string> {
    if (sc.transformations.rescale.empty()) return "needs transformations.rescale";
    return std::nullopt;
  };
  const Applies has_conformal = [](const Scenario& sc) -> std::optional<std::string> {
    if (!sc.transformations.conformal) return "needs transformations.conformal";
    return std::nullopt;
  };
  add({"rescale_omega", Stage::Invariance, {"conformal_factor"}, 1e-5, Comparison::AtMost, {},
       "|Ω̄(p,s) − Ω(p, f(p)s)| / Ω under ξ → fξ"},
      has_rescale, [](Context& c, double) {
        Outcome o = value(c.rescale().omega);
        o.note = "matched-point distance " + std::to_string(c.rescale().position);
        return o;
      });
  add({"rescale_gram", Stage::Invariance, {"hypersurface_build"}, 1e-6, Comparison::AtMost,
       {"nullfold/rescale-leaf-metric"}, "leaf Gram matrices at matched points under ξ → fξ, relative"},
      has_rescale, [](Context& c, double) { return value(c.rescale().gram); });
  struct Law {
    const char* name;
    double tol;
    const char* summary;
    double ConformalLawReport::*field;
  };
  for (const Law& law : {
           Law{"conformal_theta_law", 1e-6, "θ*_U = θ_U − n U(u) at matched points", &ConformalLawReport::theta_stated},
           Law{"conformal_b_law", 1e-6, "B*_U = e^{2u}(B_U + U(u) ĝ) at matched points", &ConformalLawReport::B_stated},
           Law{"conformal_omega_law", 1e-5, "Ω* = Ω at matched points", &ConformalLawReport::omega_stated},
           Law{"conformal_theta_direct", 1e-6, "θ*_U = θ_U + n U(u), from θ*_U = U(ln √det ĝ*)",
               &ConformalLawReport::theta_direct},
           Law{"conformal_b_direct", 1e-6, "B*_U = e^{2u}(B_U − U(u) ĝ), from the conformal connection",
               &ConformalLawReport::B_direct},
           Law{"conformal_omega_direct", 1e-5, "Ω* = e^{2(u(q) − u(p))} Ω", &ConformalLawReport::omega_direct},
       }) {
    auto field = law.field;
    add({law.name, Stage::Invariance, {"total_umbilicity"}, law.tol, Comparison::AtMost, {}, law.summary},
        has_conformal, [field](Context& c, double) {
          Outcome o = value(c.laws().*field);
          o.note = "u = " + c.conformal_u().to_string();
          return o;
        });
  }
  return R;
}

const std::vector<CheckImpl>& registry_impl() {
  static const std::vector<CheckImpl> r = build_registry();
  return r;
}

const CheckImpl* find_impl(const std::string& name) {
  for (const auto& c : registry_impl())
    if (c.info.name == name) return &c;
  return nullptr;
}

double tolerance_for(const Scenario& sc, const CheckInfo& info) {
  auto it = sc.tolerances.find(info.name);
  return it == sc.tolerances.end() ? info.tolerance : it->second;
}

bool passes(double residual, double tol, Comparison cmp) {
  if (std::isnan(residual)) return false;
  return cmp == Comparison::AtMost ? residual <= tol : residual >= tol;
}

nlohmann::ordered_json environment_of(const Scenario& sc, const Context* ctx) {
  nlohmann::ordered_json env;
  env["integrator"] = {{"adaptive", sc.integrator.adaptive},
                       {"rtol", sc.integrator.rtol},
                       {"atol", sc.integrator.atol},
                       {"rk4_steps_per_sample", sc.integrator.rk4_steps_per_sample}};
  nlohmann::ordered_json grid;
  grid["counts"] = sc.grid.counts;
  grid["t_min"] = sc.grid.t_min;
  grid["t_max"] = sc.grid.t_max;
  grid["t_steps"] = sc.grid.t_steps;
  if (sc.grid.t_map) grid["t_map"] = *sc.grid.t_map;
  if (ctx) {
    grid["nodes"] = ctx->grid().size();
    grid["t_samples"] = ctx->t().size();
  }
  if (sc.window) grid["window"] = {{"lo", sc.window->lo}, {"hi", sc.window->hi}};
  env["grid"] = grid;
  const FanControls fc;
  env["fan"] = {{"satellite_step", fc.satellite_step}, {"caustic_ratio", fc.caustic_ratio}};
  env["seed"] = sc.seed;
  return env;
}

}  // namespace

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::Frames: return "frames";
    case Stage::Forms: return "forms";
    case Stage::Shear: return "shear";
    case Stage::Hypersurface: return "hypersurface";
    case Stage::Omega: return "omega";
    case Stage::Volumes: return "volumes";
    case Stage::Jacobi: return "jacobi";
    case Stage::Invariance: return "invariance";
  }
  return "?";
}

const char* status_name(Status s) {
  switch (s) {
    case Status::Pass: return "pass";
    case Status::Fail: return "fail";
    case Status::Skipped: return "skipped";
  }
  return "?";
}

const std::vector<CheckInfo>& check_registry() {
  static const std::vector<CheckInfo> infos = [] {
    std::vector<CheckInfo> v;
    for (const auto& c : registry_impl()) v.push_back(c.info);
    return v;
  }();
  return infos;
}

const CheckInfo* find_check(const std::string& name) {
  for (const auto& c : check_registry())
    if (c.name == name) return &c;
  return nullptr;
}

bool CheckReport::all_pass() const {
  for (const auto& e : entries)
    if (e.status == Status::Fail) return false;
  return !numerical_failure;
}

const CheckEntry* CheckReport::find(const std::string& check) const {
  for (const auto& e : entries)
    if (e.check == check) return &e;
  return nullptr;
}

std::vector<std::string> applicable_checks(const Scenario& sc, const std::vector<Stage>& stages) {
  std::vector<std::string> out;
  for (const auto& c : registry_impl()) {
    if (std::find(stages.begin(), stages.end(), c.info.stage) == stages.end()) continue;
    if (!c.applies(sc)) out.push_back(c.info.name);
  }
  return out;
}

CheckReport run_property_suite(const Scenario& sc, const std::vector<std::string>& selected) {
  std::set<std::string> wanted;
  for (const auto& name : selected) {
    const CheckImpl* c = find_impl(name);
    if (!c) throw Error(ErrorKind::Configuration, sc.source + ": unknown check '" + name + "'");
    if (auto why = c->applies(sc))
      throw Error(ErrorKind::Configuration, sc.source + ": check '" + name + "' does not apply: " + *why);
    wanted.insert(name);
  }

  CheckReport report;
  report.scenario = sc.id;
  if (wanted.empty()) {
    report.environment = environment_of(sc, nullptr);
    return report;
  }
  Context ctx(sc);
  report.environment = environment_of(sc, &ctx);

  std::map<std::string, CheckEntry> done;
  std::function<const CheckEntry&(const CheckImpl&)> evaluate = [&](const CheckImpl& c) -> const CheckEntry& {
    if (auto it = done.find(c.info.name); it != done.end()) return it->second;
    CheckEntry e;
    e.check = c.info.name;
    e.fixture = sc.id;
    e.stage = c.info.stage;
    e.tolerance = tolerance_for(sc, c.info);
    e.comparison = c.info.comparison;
    for (const auto& req : c.info.prerequisites) {
      const CheckImpl* r = find_impl(req);
      if (!r || r->applies(sc)) continue;
      const CheckEntry& re = evaluate(*r);
      if (re.status != Status::Pass) {
        e.status = Status::Skipped;
        e.residual = kNaN;
        e.note = "prerequisite " + req + " did not pass";
        return done[c.info.name] = e;
      }
    }
    try {
      const Outcome o = c.eval(ctx, e.tolerance);
      e.residual = o.residual;
      e.note = o.note;
      e.series = o.series;
      e.status = o.skipped ? Status::Skipped
                           : (passes(o.residual, e.tolerance, e.comparison) ? Status::Pass : Status::Fail);
    } catch (const Error& err) {
      if (err.is_configuration()) throw;
      e.residual = kNaN;
      e.status = Status::Fail;
      e.note = std::string(error_kind_name(err.kind())) + ": " + err.what();
      report.numerical_failure = true;
    }
    if (c.info.name == "hypersurface_build" && e.residual > 0) report.numerical_failure = true;
    return done[c.info.name] = e;
  };

  for (const auto& c : registry_impl())
    if (wanted.count(c.info.name)) report.entries.push_back(evaluate(c));
  report.series = ctx.take_series();
  return report;
}

CheckReport run_property_suite(const Scenario& sc) {
  if (sc.checks) return run_property_suite(sc, *sc.checks);
  return run_property_suite(sc, applicable_checks(sc, {Stage::Frames, Stage::Forms, Stage::Shear, Stage::Hypersurface,
                                                       Stage::Omega, Stage::Volumes, Stage::Jacobi,
                                                       Stage::Invariance}));
}

}  // namespace nullfold
