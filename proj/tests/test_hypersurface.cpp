#include <cmath>
#include <numbers>

#include "doctest.h"
#include "nullfold/error.hpp"
#include "nullfold/hypersurface.hpp"
#include "support.hpp"
#include "surfaces.hpp"

using namespace nullfold;
using testsupport::Gen;

namespace {

ErrorKind error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Io;
}

ChartGrid sphere_grid(int nt = 6, int np = 12) {
  return make_chart_grid({testsupport::latitude(), testsupport::longitude()}, {nt, np});
}

ChartGrid unit_window(const Embedding& emb, int k, double lo, double hi) {
  return make_chart_grid(emb.chart(), {k, k}, Window{{lo, lo}, {hi, hi}});
}

FrameOptions plane_options() {
  FrameOptions o;
  o.branch_vector = std::vector<double>{0, 0, 0, 1};
  return o;
}

// Along the cone generator through x̂, γ(t) = (1+t)(1, x̂).
void check_cone_sample(const LeafSample& s, const LeafSample& s0, int n) {
  const double r = 1.0 + s.t;
  CHECK(std::abs(s.theta - 2.0 / r) < 1e-8);
  CHECK(std::abs(s.theta_dot + 2.0 / (r * r)) < 1e-8);
  CHECK(std::abs(s.mu + 1.0 / r) < 1e-8);
  CHECK(std::abs(s.omega() - r * r) < 1e-8 * r * r);
  for (std::size_t k = 0; k < s.J.size(); ++k) CHECK(std::abs(s.J[k] - r * s0.J[k]) < 1e-8);
  for (std::size_t k = 0; k < s.x.size(); ++k) CHECK(std::abs(s.x[k] - r * s0.x[k]) < 1e-8);
  for (int a = 0; a < n; ++a) CHECK(std::abs(s.tau[a]) < 1e-8);
}

// Conformally flat ambient e^{2w} η with a small random w.
MetricPtr random_conformally_flat(Gen& gen) {
  const std::string w = "0.05*(" + std::to_string(gen.uniform(-1, 1)) + "*t + " + std::to_string(gen.uniform(-1, 1)) +
                        "*x*y + " + std::to_string(gen.uniform(-1, 1)) + "*sin(z + " +
                        std::to_string(gen.uniform(0, 3)) + "))";
  return conformal_rescale(testsupport::minkowski(), Expression::parse(w));
}

}  // namespace

TEST_CASE("t grids contain zero and the endpoints") {
  const auto t = make_t_grid(-0.5, 2.0, 20);
  CHECK(t.front() == -0.5);
  CHECK(t.back() == 2.0);
  CHECK(std::count(t.begin(), t.end(), 0.0) == 1);
  CHECK(std::is_sorted(t.begin(), t.end()));
  CHECK(make_t_grid(0.0, 1.0, 4).size() == 5);
  CHECK(error_of([] { make_t_grid(0.5, 1.0, 4); }) == ErrorKind::Configuration);
}

TEST_CASE("light cone of a round sphere") {
  const auto m = testsupport::minkowski();
  const auto emb = testsupport::sphere_in_cone();
  const auto grid = sphere_grid();
  const auto t = make_t_grid(-0.5, 2.0, 100);
  const auto fan = build_hypersurface(emb, *m, grid, t);
  CHECK_FALSE(fan.any_failure);
  for (const auto& g : fan.generators)
    for (const auto& s : g.samples) {
      REQUIRE(s.valid);
      CHECK_FALSE(s.caustic);
      check_cone_sample(s, g.samples[fan.t0], 2);
    }

  const auto um = total_umbilicity_check(fan);
  CHECK(um.passes(1e-8));
  CHECK(um.max_lie < 1e-6);
  CHECK(um.max_asymmetry < 1e-10);
  CHECK(um.max_radical < 1e-10);
  CHECK(um.max_containment < 1e-10);
  CHECK(um.max_null_norm < 1e-9);
  CHECK(um.max_leaf_umbilicity < 1e-8);

  const auto cf = conformal_factor_check(fan, 1e-8);
  CHECK(cf.max_residual < 1e-8);
  CHECK_FALSE(cf.constant_omega);
  CHECK(std::abs(cf.min_omega - 0.25) < 1e-8);

  const auto vol = volume_series(fan);
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double ref = 4 * std::numbers::pi * (1 + t[k]) * (1 + t[k]);
    CHECK(testsupport::rel_err(vol.vol[k], ref) < 1e-6);
    CHECK(testsupport::rel_err(vol.Theta[k], 2.0 / (1 + t[k])) < 1e-8);
  }
  CHECK(vol.max_pairwise_relative() < 1e-6);

  const auto jr = jacobi_verify(fan);
  CHECK(jr.samples > 0);
  CHECK(jr.max_raw_fd < 1e-6);
  CHECK(jr.max_raw_transport < 1e-8);
  CHECK(jr.max_ricci_form < 1e-6);

  const auto rr = restriction_check(fan);
  CHECK(rr.theta < 1e-10);
  CHECK(rr.shear < 1e-10);
  CHECK(isometric_leaf_pairs(fan, 1e-8).empty());
}

TEST_CASE("backward cone generators reach the vertex") {
  const auto m = testsupport::minkowski();
  const auto emb = testsupport::sphere_in_cone();
  // The vertex itself is not reachable: ∫θ diverges there.
  const std::vector<double> t{-1.0, -0.999, -0.5, 0.0};
  const auto fan = build_hypersurface(emb, *m, sphere_grid(), t);
  for (const auto& g : fan.generators) {
    CHECK((!g.samples[0].valid || g.samples[0].caustic));
    CHECK(g.samples[1].valid);
    CHECK(g.samples[1].caustic);
    CHECK_FALSE(g.samples[2].caustic);
  }
  const auto vol = volume_series(fan);
  CHECK(std::isnan(vol.vol[0]));
  CHECK(std::isnan(vol.vol[1]));
  CHECK(testsupport::rel_err(vol.vol[2], std::numbers::pi) < 1e-6);
}

TEST_CASE("past-directed generators contract the cone") {
  const auto m = testsupport::minkowski();
  const auto emb = testsupport::sphere_in_cone();
  FrameOptions o;
  o.branch = Branch::Ingoing;
  const auto t = make_t_grid(0.0, 0.5, 5);
  const auto fan = build_hypersurface(emb, *m, sphere_grid(), t, o);
  const auto vol = volume_series(fan);
  for (std::size_t k = 0; k < t.size(); ++k) {
    const double r = 1.0 - t[k];
    CHECK(testsupport::rel_err(vol.vol[k], 4 * std::numbers::pi * r * r) < 1e-6);
  }

  FanControls reversed;
  reversed.rescale = Expression::parse("-1");
  const auto back = build_hypersurface(emb, *m, sphere_grid(), t, {}, reversed);
  const auto vb = volume_series(back);
  for (std::size_t k = 1; k < t.size(); ++k) {
    CHECK(vb.vol[k] < vb.vol[k - 1]);
    const double r = 1.0 - t[k];
    CHECK(testsupport::rel_err(vb.vol[k], 4 * std::numbers::pi * r * r) < 1e-6);
    CHECK(vb.Theta[k] < 0.0);
  }
}

TEST_CASE("flat null hyperplane through a plane leaf") {
  const auto m = testsupport::minkowski();
  const auto emb = testsupport::plane_leaf();
  const auto grid = unit_window(emb, 5, 0.0, 1.0);
  const auto t = make_t_grid(-1.0, 1.0, 8);
  const auto fan = build_hypersurface(emb, *m, grid, t, plane_options());
  const auto um = total_umbilicity_check(fan);
  CHECK(um.max_B < 1e-12);
  CHECK(um.max_theta < 1e-12);
  const auto cf = conformal_factor_check(fan, 1e-10);
  CHECK(cf.constant_omega);
  CHECK(cf.isometric_leaves);
  CHECK(isometric_leaf_pairs(fan, 1e-10).size() == t.size() * (t.size() - 1) / 2);
  const auto vol = volume_series(fan);
  CHECK(vol.windowed);
  for (double v : vol.vol) CHECK(std::abs(v - 1.0) < 1e-12);

  const auto open = make_chart_grid(emb.chart(), {5, 5});
  const auto fan2 = build_hypersurface(emb, *m, open, t, plane_options());
  CHECK(error_of([&] { volume_series(fan2); }) == ErrorKind::NonCompactDomain);
}

TEST_CASE("twisted product: expansion profile of the planar front") {
  const auto m = testsupport::grw_linear();
  const auto emb = testsupport::grw_surface();
  const auto grid = unit_window(emb, 3, -0.25, 0.25);
  // Nodes uniform in the time coordinate over e^{-1}+0.05 < t < e−0.05, which
  // crowds them towards the λ = −1/2 end of the affine parametrization. The
  // twist δ = 1 − s vanishes just past the upper end.
  std::vector<double> lam;
  const double t_lo = 1 / std::numbers::e + 0.05, t_hi = std::numbers::e - 0.05;
  for (int k = 0; k <= 200; ++k) {
    const double tt = t_lo + (t_hi - t_lo) * k / 200.0;
    lam.push_back((tt * tt - 1) / 2);
  }
  lam.push_back(0.0);
  std::sort(lam.begin(), lam.end());
  lam.erase(std::unique(lam.begin(), lam.end()), lam.end());
  const auto fan = build_hypersurface(emb, *m, grid, lam, testsupport::grw_options());
  CHECK_FALSE(fan.any_failure);
  for (const auto& g : fan.generators)
    for (const auto& s : g.samples) {
      REQUIRE(s.valid);
      // Affine parameter along the generator: t = √(1+2λ), s = ln t.
      const double tt = std::sqrt(1 + 2 * s.t), ss = std::log(tt);
      CHECK(std::abs(s.x[0] - tt) < 1e-8);
      CHECK(std::abs(s.x[1] - ss) < 1e-8);
      const double ref = 2.0 / (tt * tt) * (-ss / (1 - ss));
      CHECK(std::abs(s.theta - ref) < 1e-7 * std::max(std::abs(ref), 1.0));
    }
  const auto um = total_umbilicity_check(fan);
  CHECK(um.passes(1e-4));
  // Differentiated along t from samples; limited by the grid near s = 1.
  CHECK(um.max_lie < 1e-4);
  const auto jr = jacobi_verify(fan);
  CHECK(jr.max_raw_fd < 1e-5);
  CHECK(jr.max_raw_transport < 1e-8);
  CHECK(jr.max_ricci_form < 1e-5);
  const auto rr = restriction_check(fan);
  CHECK(rr.theta < 1e-10);
  const auto vol = volume_series(fan);
  CHECK(vol.max_pairwise_relative() < 1e-4);
}

TEST_CASE("generator rescaling leaves the leaves unchanged") {
  const auto m = testsupport::minkowski();
  const auto emb = testsupport::sphere_in_cone();
  const auto grid = sphere_grid(4, 8);
  const auto s = make_t_grid(-0.3, 0.8, 11);
  for (const char* f : {"2", "1 + 0.3*sin(ph)", "0.7 + 0.2*cos(th)*sin(ph)"}) {
    CAPTURE(f);
    const auto r = rescale_invariance(emb, *m, grid, s, {}, Expression::parse(f));
    CHECK(r.omega < 1e-8);
    CHECK(r.gram < 1e-8);
    CHECK(r.position < 1e-8);
  }
  FanControls bad;
  bad.rescale = Expression::parse("th - th");
  CHECK(error_of([&] { build_hypersurface(emb, *m, grid, s, {}, bad); }) == ErrorKind::InvalidRescale);
}

TEST_CASE("conformal change of the cone ambient") {
  const auto m = testsupport::minkowski();
  const auto emb = testsupport::sphere_in_cone();
  const auto grid = sphere_grid(4, 8);
  const auto t = make_t_grid(-0.3, 1.0, 13);
  const auto r = conformal_change_laws(emb, m, grid, t, {}, Expression::parse("0.1*t"));
  CHECK(r.position < 1e-8);
  // θ*_U = 2/(1+t) + 0.2 and B*_U = e^{2u}(B − 0.1 ĝ) on this fan.
  CHECK(r.theta_direct < 1e-7);
  CHECK(r.B_direct < 1e-7);
  CHECK(r.omega_direct < 1e-7);
  CHECK(r.theta_stated > 0.05);
  CHECK(r.B_stated > 0.01);
  CHECK(r.omega_stated > 0.01);
}

TEST_CASE("transport cross-check trips on a tight tolerance") {
  const auto m = testsupport::grw_linear();
  const auto emb = testsupport::grw_surface();
  FanControls c;
  c.cross_check_tol = 1e-16;
  CHECK(error_of([&] {
          build_hypersurface(emb, *m, unit_window(emb, 2, -0.25, 0.25), {0.0, 0.5}, testsupport::grw_options(), c);
        }) == ErrorKind::TransportInconsistency);
  CHECK(error_of([&] { build_hypersurface(emb, *m, unit_window(emb, 2, -0.25, 0.25), {0.5, 1.0}); }) ==
        ErrorKind::Configuration);
}

TEST_CASE("sample order does not change a generator") {
  const auto m = testsupport::grw_linear();
  const auto emb = testsupport::grw_surface();
  const auto seed = seed_generator(emb, {0.1, -0.2}, *m, testsupport::grw_options(), {});
  const std::vector<double> sorted{-0.3, 0.0, 0.4, 1.2}, shuffled{0.4, -0.3, 1.2, 0.0};
  const auto a = integrate_generator(seed, *m, sorted, {});
  const auto b = integrate_generator(seed, *m, shuffled, {});
  const std::vector<int> map{2, 0, 3, 1};
  for (int i = 0; i < 4; ++i) {
    CHECK(b.samples[i].t == sorted[map[i]]);
    CHECK(b.samples[i].theta == doctest::Approx(a.samples[map[i]].theta).epsilon(1e-12));
    CHECK(b.samples[i].x == a.samples[map[i]].x);
  }
}

TEST_CASE("property: sphere fans stay umbilical under conformal changes of flat space") {
  Gen gen(0x5eed01);
  const auto emb = testsupport::sphere_in_cone();
  const auto grid = sphere_grid(4, 8);
  const auto t = make_t_grid(-0.3, 0.6, 36);
  for (int trial = 0; trial < 4; ++trial) {
    const auto m = random_conformally_flat(gen);
    const auto fan = build_hypersurface(emb, *m, grid, t);
    const auto um = total_umbilicity_check(fan);
    CHECK(um.passes(1e-6));
    CHECK(um.max_null_norm < 1e-8);
    CHECK(um.max_radical < 1e-8);
    CHECK(um.max_lie < 1e-5);
    CHECK(conformal_factor_check(fan, 1e-6).max_residual < 1e-6);
    CHECK(volume_series(fan).max_pairwise_relative() < 1e-6);
    const auto jr = jacobi_verify(fan);
    CHECK(jr.max_raw_fd < 1e-5);
    CHECK(jr.max_raw_transport < 1e-7);
    CHECK(jr.max_ricci_form < 1e-5);
    const auto rr = restriction_check(fan);
    CHECK(rr.theta < 1e-9);
    CHECK(rr.shear < 1e-9);
  }
}

TEST_CASE("property: volume identities and Jacobi fields on sheared fans") {
  Gen gen(0x5eed02);
  const auto m = testsupport::minkowski();
  for (int trial = 0; trial < 4; ++trial) {
    // Graph over the unit square in {t = 0}: z = small random bump.
    const std::string bump = "0.2*(" + std::to_string(gen.uniform(-1, 1)) + "*a*a + " +
                             std::to_string(gen.uniform(-1, 1)) + "*a*b + " + std::to_string(gen.uniform(-1, 1)) +
                             "*b*b)";
    const Embedding emb({{"a", 0.0, 1.0}, {"b", 0.0, 1.0}},
                        testsupport::parse_all({"0", "a", "b", bump}));
    const auto grid = unit_window(emb, 4, 0.2, 0.8);
    const auto t = make_t_grid(-0.4, 0.4, 8);
    const auto fan = build_hypersurface(emb, *m, grid, t, plane_options());
    CHECK(volume_series(fan).max_pairwise_relative() < 1e-6);
    const auto um = total_umbilicity_check(fan);
    CHECK(um.max_asymmetry < 1e-9);
    CHECK(um.max_radical < 1e-9);
    CHECK(um.max_lie < 1e-5);
    const auto jr = jacobi_verify(fan);
    CHECK(jr.max_raw_fd < 1e-5);
    CHECK(jr.max_raw_transport < 1e-8);
    const auto rr = restriction_check(fan);
    CHECK(rr.theta < 1e-9);
    CHECK(rr.shear < 1e-9);
  }
}
