#include "nullfold/catalog.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "nullfold/error.hpp"

namespace nullfold {

namespace {

Error config(const std::string& msg) { return Error(ErrorKind::Configuration, msg); }

std::map<std::string, Expression> parse_constants(const SpacetimeSpec& spec) {
  std::map<std::string, Expression> out;
  // Constants may refer to earlier constants in name order only through substitution below.
  for (const auto& [name, text] : spec.constants) out.emplace(name, Expression::parse(text));
  for (auto& [name, e] : out) e = e.substitute(out);
  return out;
}

Expression field(const SpacetimeSpec& spec, const std::string& key,
                 const std::map<std::string, Expression>& constants,
                 std::optional<std::string> fallback = std::nullopt) {
  auto it = spec.fields.find(key);
  if (it == spec.fields.end()) {
    if (fallback) return Expression::parse(*fallback);
    throw config("spacetime kind '" + spec.kind + "' requires field '" + key + "'");
  }
  return Expression::parse(it->second).substitute(constants);
}

void check_fields(const SpacetimeSpec& spec, std::initializer_list<const char*> allowed) {
  for (const auto& [k, v] : spec.fields) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw config("unknown field '" + k + "' for spacetime kind '" + spec.kind + "'");
  }
}

}  // namespace

std::vector<Point> probe_points(const MetricField& metric, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Point> pts;
  const auto& dom = metric.domain();
  for (int k = 0; k < count; ++k) {
    Point p;
    for (const auto& iv : dom) {
      // Stay strictly inside open intervals.
      const double u = 0.02 + 0.96 * unit(rng);
      p.coords.push_back(iv.lo + u * (iv.hi - iv.lo));
    }
    pts.push_back(std::move(p));
  }
  return pts;
}

SignatureCount signature_at(const MetricField& metric, const Point& p) {
  const Eigen::MatrixXd g = metric.matrix(p);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (g + g.transpose()));
  const Eigen::VectorXd ev = es.eigenvalues();
  const double scale = std::max(1e-300, ev.cwiseAbs().maxCoeff());
  SignatureCount c;
  for (int i = 0; i < ev.size(); ++i) {
    if (!std::isfinite(ev[i]) || std::abs(ev[i]) <= 1e-12 * scale)
      ++c.zero;
    else if (ev[i] < 0)
      ++c.negative;
    else
      ++c.positive;
  }
  return c;
}

Spacetime instantiate_spacetime(const SpacetimeSpec& spec) {
  Spacetime out;
  const auto constants = parse_constants(spec);
  std::shared_ptr<MetricField> metric;
  if (spec.kind == "minkowski") {
    check_fields(spec, {});
    if (spec.dim < 3 || spec.dim > kMaxDim)
      throw config("minkowski dimension must lie in [3, " + std::to_string(kMaxDim) + "]");
    metric = std::make_shared<MinkowskiMetric>(spec.dim);
  } else if (spec.kind == "grw_twisted") {
    check_fields(spec, {"f", "delta"});
    if (spec.dim != 4) throw config("grw_twisted is defined on the 4-dimensional chart (t, s, x, y)");
    if (!(spec.t0 > 0.0)) throw config("grw_twisted requires t0 > 0");
    auto m = std::make_shared<GrwTwistedMetric>(field(spec, "f", constants),
                                                field(spec, "delta", constants));
    m->set_domain({{spec.t0 / std::numbers::e, spec.t0 * std::numbers::e},
                   {-1.0, 1.0},
                   {-2.0, 2.0},
                   {-2.0, 2.0}});
    metric = m;
  } else if (spec.kind == "pp_wave") {
    check_fields(spec, {"H"});
    if (spec.dim != 4) throw config("pp_wave is defined on the 4-dimensional chart (u, v, x, y)");
    metric = std::make_shared<PpWaveMetric>(field(spec, "H", constants, std::string("0")));
  } else if (spec.kind == "conformal") {
    check_fields(spec, {"u"});
    if (!spec.base) throw config("conformal spacetime requires a base spacetime");
    Spacetime base = instantiate_spacetime(*spec.base);
    out.warnings = base.warnings;
    metric = std::make_shared<ConformalMetric>(base.metric, field(spec, "u", constants));
  } else if (spec.kind == "explicit") {
    check_fields(spec, {});
    const int d = static_cast<int>(spec.coordinates.size());
    if (d < 3 || d > kMaxDim) throw config("explicit metric needs 3 to 6 coordinates");
    if (static_cast<int>(spec.components.size()) != d)
      throw config("explicit metric component matrix must be " + std::to_string(d) + "x" + std::to_string(d));
    std::vector<std::vector<Expression>> rows;
    for (const auto& r : spec.components) {
      if (static_cast<int>(r.size()) != d) throw config("explicit metric row has the wrong length");
      std::vector<Expression> row;
      for (const auto& c : r) row.push_back(Expression::parse(c).substitute(constants));
      rows.push_back(std::move(row));
    }
    metric = std::make_shared<ExplicitMetric>(spec.coordinates, rows);
  } else {
    throw config("unknown spacetime kind '" + spec.kind + "'");
  }

  if (spec.domain) {
    if (static_cast<int>(spec.domain->size()) != metric->dim())
      throw config("spacetime domain must list one interval per coordinate");
    for (const auto& iv : *spec.domain)
      if (!(iv.hi > iv.lo)) throw config("spacetime domain interval is empty");
    metric->set_domain(*spec.domain);
  }
  if (spec.constant_curvature) metric->set_constant_curvature(spec.constant_curvature);
  else if (spec.kind != "minkowski") metric->set_constant_curvature(std::nullopt);

  const auto probes = probe_points(*metric, kProbeCount, kProbeSeed);
  if (auto* grw = dynamic_cast<GrwTwistedMetric*>(metric.get())) {
    for (const auto& p : probes) {
      const double f = grw->warp()({p[0]});
      const double dl = grw->twist()({p[1], p[2], p[3]});
      if (!(f > 0.0) || !(dl > 0.0))
        throw Error(ErrorKind::InvalidWarp, "warp f or twist delta is not positive at a probed point (t=" +
                                                std::to_string(p[0]) + ", s=" + std::to_string(p[1]) + ")");
    }
  }
  if (auto* ex = dynamic_cast<ExplicitMetric*>(metric.get())) {
    double asym = 0.0;
    for (const auto& p : probes) asym = std::max(asym, ex->asymmetry(p.coords.data()));
    if (asym > 1e-12)
      out.warnings.push_back("explicit metric matrix is not symmetric (max |g_ij - g_ji| = " +
                             std::to_string(asym) + "); entries were averaged");
  }
  for (const auto& p : probes) {
    const SignatureCount c = signature_at(*metric, p);
    if (c.negative != 1 || c.zero != 0)
      throw Error(ErrorKind::Signature, "metric signature probe found " + std::to_string(c.negative) +
                                            " negative and " + std::to_string(c.zero) +
                                            " vanishing eigenvalues (expected exactly one negative)");
  }
  out.metric = metric;
  return out;
}

}  // namespace nullfold
