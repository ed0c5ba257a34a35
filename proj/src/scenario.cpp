#include "nullfold/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "nullfold/error.hpp"
#include "nullfold/verification.hpp"

namespace nullfold {

namespace {

using json = nlohmann::json;

// Reads one JSON object; every key must be consumed before finish().
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path, const std::string& source)
      : j_(j), path_(std::move(path)), source_(source) {
    if (!j.is_object()) fail("expected an object");
  }

  [[noreturn]] void fail(const std::string& msg, const std::string& key = "") const {
    std::string where = path_;
    if (!key.empty()) where += where.empty() ? key : "." + key;
    throw Error(ErrorKind::Configuration, source_ + ": " + (where.empty() ? "" : where + ": ") + msg);
  }

  std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* get(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }
  const json& require(const std::string& key) {
    const json* v = get(key);
    if (!v) fail("missing required key", key);
    return *v;
  }

  double number(const json& v, const std::string& key) const {
    if (!v.is_number()) fail("expected a number", key);
    return v.get<double>();
  }
  std::optional<double> number(const std::string& key) {
    const json* v = get(key);
    if (!v) return std::nullopt;
    return number(*v, key);
  }
  std::optional<long long> integer(const std::string& key) {
    const json* v = get(key);
    if (!v) return std::nullopt;
    if (!v->is_number_integer()) fail("expected an integer", key);
    return v->get<long long>();
  }
  std::optional<std::string> string(const std::string& key) {
    const json* v = get(key);
    if (!v) return std::nullopt;
    if (!v->is_string()) fail("expected a string", key);
    return v->get<std::string>();
  }
  std::optional<bool> boolean(const std::string& key) {
    const json* v = get(key);
    if (!v) return std::nullopt;
    if (!v->is_boolean()) fail("expected true or false", key);
    return v->get<bool>();
  }
  std::optional<std::vector<double>> numbers(const std::string& key) {
    const json* v = get(key);
    if (!v) return std::nullopt;
    if (!v->is_array()) fail("expected an array of numbers", key);
    std::vector<double> out;
    for (const auto& x : *v) out.push_back(number(x, key));
    return out;
  }
  // A number, or a constant expression such as "2*pi".
  double scalar(const json& v, const std::string& key) const {
    if (v.is_number()) return v.get<double>();
    if (!v.is_string()) fail("expected a number or a constant expression", key);
    try {
      const Expression e = Expression::parse(v.get<std::string>());
      if (!e.variables().empty()) fail("expression must be constant", key);
      return evaluate(e, {}, {});
    } catch (const ExpressionError& err) {
      fail(err.what(), key);
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) fail("unknown key '" + it.key() + "'");
  }

  const std::string& source() const { return source_; }

 private:
  const json& j_;
  std::string path_;
  const std::string& source_;
  std::set<std::string> seen_;
};

void check_expression(ObjectReader& r, const std::string& text, const std::string& key) {
  try {
    Expression::parse(text);
  } catch (const ExpressionError& e) {
    r.fail(std::string(e.what()) + " (offset " + std::to_string(e.offset()) + ")", key);
  }
}

std::map<std::string, std::string> string_map(ObjectReader& r, const std::string& key) {
  std::map<std::string, std::string> out;
  const json* v = r.get(key);
  if (!v) return out;
  if (!v->is_object()) r.fail("expected an object of strings", key);
  for (auto it = v->begin(); it != v->end(); ++it) {
    if (!it->is_string()) r.fail("expected a string", key + "." + it.key());
    out[it.key()] = it->get<std::string>();
    check_expression(r, out[it.key()], key + "." + it.key());
  }
  return out;
}

SpacetimeSpec read_spacetime(const json& j, const std::string& path, const std::string& source) {
  ObjectReader r(j, path, source);
  SpacetimeSpec s;
  s.kind = r.string("kind").value_or("minkowski");
  if (auto d = r.integer("dim")) s.dim = static_cast<int>(*d);
  s.fields = string_map(r, "fields");
  s.constants = string_map(r, "constants");
  if (auto t0 = r.number("t0")) s.t0 = *t0;
  if (const json* c = r.get("coordinates")) {
    if (!c->is_array()) r.fail("expected an array of names", "coordinates");
    for (const auto& x : *c) {
      if (!x.is_string()) r.fail("expected a name", "coordinates");
      s.coordinates.push_back(x.get<std::string>());
    }
  }
  if (const json* c = r.get("components")) {
    if (!c->is_array()) r.fail("expected a matrix of expressions", "components");
    for (const auto& row : *c) {
      if (!row.is_array()) r.fail("expected a matrix of expressions", "components");
      std::vector<std::string> out;
      for (const auto& x : row) {
        if (!x.is_string()) r.fail("expected an expression string", "components");
        out.push_back(x.get<std::string>());
        check_expression(r, out.back(), "components");
      }
      s.components.push_back(std::move(out));
    }
  }
  if (const json* b = r.get("base")) s.base = std::make_shared<SpacetimeSpec>(read_spacetime(*b, r.child("base"), source));
  if (const json* d = r.get("domain")) {
    if (!d->is_array()) r.fail("expected an array of [lo, hi] pairs", "domain");
    std::vector<Interval> dom;
    for (const auto& iv : *d) {
      if (!iv.is_array() || iv.size() != 2) r.fail("expected an array of [lo, hi] pairs", "domain");
      dom.push_back({r.scalar(iv[0], "domain"), r.scalar(iv[1], "domain")});
    }
    s.domain = dom;
  }
  s.constant_curvature = r.number("constant_curvature");
  r.finish();
  return s;
}

void read_submanifold(const json& j, const std::string& source, Scenario& sc) {
  ObjectReader r(j, "submanifold", source);
  const json& chart = r.require("chart");
  if (!chart.is_array() || chart.empty()) r.fail("expected a non-empty array of parameters", "chart");
  for (std::size_t k = 0; k < chart.size(); ++k) {
    ObjectReader p(chart[k], "submanifold.chart[" + std::to_string(k) + "]", source);
    ChartParameter c;
    const auto name = p.string("name");
    if (!name || name->empty()) p.fail("missing parameter name", "name");
    c.name = *name;
    c.min = p.scalar(p.require("min"), "min");
    c.max = p.scalar(p.require("max"), "max");
    c.periodic = p.boolean("periodic").value_or(false);
    c.pole = p.boolean("pole").value_or(false);
    p.finish();
    if (!(c.max > c.min)) p.fail("parameter range is empty");
    if (c.periodic && c.pole) p.fail("a parameter cannot be both periodic and a pole axis");
    sc.chart.push_back(c);
  }
  const json& map = r.require("map");
  if (!map.is_array() || map.empty()) r.fail("expected an array of expressions", "map");
  for (const auto& x : map) {
    if (!x.is_string()) r.fail("expected an expression string", "map");
    sc.map.push_back(x.get<std::string>());
    check_expression(r, sc.map.back(), "map");
  }
  if (auto b = r.string("branch")) {
    if (*b == "outgoing") sc.frame.branch = Branch::Outgoing;
    else if (*b == "ingoing") sc.frame.branch = Branch::Ingoing;
    else r.fail("branch must be \"outgoing\" or \"ingoing\"", "branch");
  }
  sc.frame.branch_vector = r.numbers("branch_vector");
  sc.frame.gauge_z = r.numbers("gauge_z");
  r.finish();
}

void read_grid(const json& j, const std::string& source, Scenario& sc) {
  ObjectReader r(j, "grid", source);
  const json& counts = r.require("counts");
  if (!counts.is_array()) r.fail("expected an array of node counts", "counts");
  for (const auto& c : counts) {
    if (!c.is_number_integer() || c.get<long long>() < 1) r.fail("node counts must be positive integers", "counts");
    sc.grid.counts.push_back(static_cast<int>(c.get<long long>()));
  }
  if (const json* v = r.get("t_min")) sc.grid.t_min = r.scalar(*v, "t_min");
  if (const json* v = r.get("t_max")) sc.grid.t_max = r.scalar(*v, "t_max");
  if (auto v = r.integer("t_steps")) {
    if (*v < 1) r.fail("must be at least 1", "t_steps");
    sc.grid.t_steps = static_cast<int>(*v);
  }
  sc.grid.t_map = r.string("t_map");
  if (sc.grid.t_map) check_expression(r, *sc.grid.t_map, "t_map");
  r.finish();
  if (!(sc.grid.t_max > sc.grid.t_min)) r.fail("t range is empty");
}

void read_oracles(const json& j, const std::string& source, Scenario& sc) {
  ObjectReader r(j, "oracles", source);
  auto& o = sc.oracles;
  for (auto [key, slot] : {std::pair{"theta", &o.theta}, std::pair{"mu", &o.mu}, std::pair{"omega", &o.omega},
                           std::pair{"volume", &o.volume}}) {
    *slot = r.string(key);
    if (*slot) check_expression(r, **slot, key);
  }
  o.chi = r.number("chi");
  o.theta_xi = r.number("theta_xi");
  o.gHH = r.number("gHH");
  if (const json* a = r.get("A_xi")) {
    if (!a->is_array()) r.fail("expected a square matrix", "A_xi");
    std::vector<std::vector<double>> m;
    for (const auto& row : *a) {
      if (!row.is_array() || row.size() != a->size()) r.fail("expected a square matrix", "A_xi");
      std::vector<double> out;
      for (const auto& x : row) out.push_back(r.number(x, "A_xi"));
      m.push_back(std::move(out));
    }
    o.A_xi = m;
  }
  if (auto f = r.number("relative_floor")) {
    if (!(*f > 0)) r.fail("must be positive", "relative_floor");
    o.relative_floor = *f;
  }
  o.totally_geodesic = r.boolean("totally_geodesic").value_or(false);
  o.not_totally_geodesic = r.boolean("not_totally_geodesic").value_or(false);
  r.finish();
}

void read_integrator(const json& j, const std::string& source, Scenario& sc) {
  ObjectReader r(j, "integrator", source);
  auto& c = sc.integrator;
  if (auto v = r.number("rtol")) c.rtol = *v;
  if (auto v = r.number("atol")) c.atol = *v;
  if (auto v = r.boolean("adaptive")) c.adaptive = *v;
  if (auto v = r.integer("rk4_steps_per_sample")) {
    if (*v < 1) r.fail("must be at least 1", "rk4_steps_per_sample");
    c.rk4_steps_per_sample = static_cast<int>(*v);
  }
  r.finish();
  if (!(c.rtol > 0) || !(c.atol > 0)) r.fail("integrator tolerances must be positive");
}

}  // namespace

Scenario parse_scenario(const std::string& text, const std::string& source) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Configuration, source + ": invalid JSON: " + e.what());
  }
  ObjectReader r(j, "", source);
  const json& version = r.require("version");
  if (!version.is_number_integer() || version.get<long long>() != kScenarioVersion)
    r.fail("unsupported scenario version (expected " + std::to_string(kScenarioVersion) + ")", "version");
  Scenario sc;
  sc.source = source;
  sc.id = r.string("id").value_or("");
  if (sc.id.empty()) r.fail("missing scenario id", "id");
  sc.description = r.string("description").value_or("");
  if (const json* s = r.get("spacetime")) sc.spacetime = read_spacetime(*s, "spacetime", source);
  read_submanifold(r.require("submanifold"), source, sc);
  read_grid(r.require("grid"), source, sc);
  if (sc.grid.counts.size() != sc.chart.size())
    r.fail("grid.counts must list one count per chart parameter", "grid.counts");
  if (const json* w = r.get("window")) {
    ObjectReader wr(*w, "window", source);
    Window win;
    win.lo = wr.numbers("lo").value_or(std::vector<double>{});
    win.hi = wr.numbers("hi").value_or(std::vector<double>{});
    wr.finish();
    if (win.lo.size() != sc.chart.size() || win.hi.size() != sc.chart.size())
      wr.fail("lo and hi must list one value per chart parameter");
    for (std::size_t k = 0; k < win.lo.size(); ++k)
      if (!(win.hi[k] > win.lo[k])) wr.fail("window range is empty");
    sc.window = win;
  }
  if (const json* t = r.get("tolerances")) {
    if (!t->is_object()) r.fail("expected an object of check tolerances", "tolerances");
    for (auto it = t->begin(); it != t->end(); ++it) {
      if (!find_check(it.key())) r.fail("unknown check '" + it.key() + "'", "tolerances");
      if (!it->is_number() || !(it->get<double>() >= 0))
        r.fail("tolerance must be a non-negative number", "tolerances." + it.key());
      sc.tolerances[it.key()] = it->get<double>();
    }
  }
  if (const json* c = r.get("checks")) {
    if (!c->is_array()) r.fail("expected an array of check names", "checks");
    std::vector<std::string> names;
    for (const auto& x : *c) {
      if (!x.is_string()) r.fail("expected a check name", "checks");
      if (!find_check(x.get<std::string>())) r.fail("unknown check '" + x.get<std::string>() + "'", "checks");
      if (std::find(names.begin(), names.end(), x.get<std::string>()) != names.end())
        r.fail("check '" + x.get<std::string>() + "' listed twice", "checks");
      names.push_back(x.get<std::string>());
    }
    sc.checks = names;
  }
  if (const json* t = r.get("transformations")) {
    ObjectReader tr(*t, "transformations", source);
    if (const json* f = tr.get("rescale")) {
      if (!f->is_array()) tr.fail("expected an array of expressions", "rescale");
      for (const auto& x : *f) {
        if (!x.is_string()) tr.fail("expected an expression string", "rescale");
        sc.transformations.rescale.push_back(x.get<std::string>());
        check_expression(tr, x.get<std::string>(), "rescale");
      }
    }
    sc.transformations.conformal = tr.string("conformal");
    if (sc.transformations.conformal) check_expression(tr, *sc.transformations.conformal, "conformal");
    tr.finish();
  }
  if (const json* o = r.get("oracles")) read_oracles(*o, source, sc);
  if (const json* i = r.get("integrator")) read_integrator(*i, source, sc);
  if (auto s = r.integer("seed")) {
    if (*s < 0) r.fail("seed must be non-negative", "seed");
    sc.seed = static_cast<std::uint64_t>(*s);
  }
  r.finish();
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Configuration, path + ": cannot open scenario file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), path);
}

std::vector<double> scenario_t_grid(const Scenario& sc) {
  const auto& g = sc.grid;
  if (!g.t_map) return make_t_grid(g.t_min, g.t_max, g.t_steps);
  const auto bound = Expression::parse(*g.t_map).bind({"q"});
  std::vector<double> t;
  for (int k = 0; k <= g.t_steps; ++k) {
    const double q = g.t_min + (g.t_max - g.t_min) * k / g.t_steps;
    const double v = bound({q});
    if (!std::isfinite(v)) throw Error(ErrorKind::Configuration, sc.source + ": grid.t_map: not finite at q = " + std::to_string(q));
    t.push_back(v);
  }
  t.push_back(0.0);
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  return t;
}

namespace {

[[noreturn]] void rethrow_at(const Error& e, const std::string& where) {
  throw Error(e.kind(), where + ": " + e.what());
}

}  // namespace

ResolvedScenario resolve_scenario(const Scenario& sc) {
  ResolvedScenario out;
  try {
    out.spacetime = instantiate_spacetime(sc.spacetime);
  } catch (const Error& e) {
    rethrow_at(e, sc.source + ": spacetime");
  }
  const auto& m = *out.spacetime.metric;
  if (static_cast<int>(sc.map.size()) != m.dim())
    throw Error(ErrorKind::Configuration, sc.source + ": submanifold.map: expected " + std::to_string(m.dim()) +
                                              " component expressions, got " + std::to_string(sc.map.size()));
  if (static_cast<int>(sc.chart.size()) + 2 != m.dim())
    throw Error(ErrorKind::Configuration, sc.source + ": submanifold.chart: codimension must be two");
  for (const auto* v : {&sc.frame.branch_vector, &sc.frame.gauge_z})
    if (*v && static_cast<int>((*v)->size()) != m.dim())
      throw Error(ErrorKind::Configuration,
                  sc.source + ": submanifold: branch_vector and gauge_z need one component per coordinate");
  try {
    std::vector<Expression> map;
    for (const auto& s : sc.map) map.push_back(Expression::parse(s));
    out.embedding = Embedding(sc.chart, map);
  } catch (const Error& e) {
    rethrow_at(e, sc.source + ": submanifold.map");
  }
  try {
    out.grid = make_chart_grid(sc.chart, sc.grid.counts, sc.window);
  } catch (const Error& e) {
    rethrow_at(e, sc.source + ": grid");
  }
  try {
    out.t = scenario_t_grid(sc);
  } catch (const Error& e) {
    rethrow_at(e, sc.source + ": grid");
  }
  // Frames at every node: a timelike or degenerate embedding fails here.
  for (std::size_t k = 0; k < out.grid.size(); ++k) {
    try {
      embed_and_frame(out.embedding, out.grid.nodes[k], m, sc.frame);
    } catch (const Error& e) {
      rethrow_at(e, sc.source + ": submanifold (node " + std::to_string(k) + ")");
    }
  }
  return out;
}

}  // namespace nullfold
