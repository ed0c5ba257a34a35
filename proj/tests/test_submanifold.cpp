#include <cmath>
#include <numbers>

#include "doctest.h"
#include "nullfold/curvature.hpp"
#include "nullfold/error.hpp"
#include "nullfold/submanifold.hpp"
#include "support.hpp"
#include "surfaces.hpp"

using namespace nullfold;
using testsupport::Gen;

namespace {

ExtrinsicState full_state(const Embedding& emb, const std::vector<double>& u, const MetricField& m,
                          const FrameOptions& o = {}) {
  auto s = embed_and_frame(emb, u, m, o);
  fundamental_forms(s, m);
  shear_analysis(s);
  return s;
}

ErrorKind error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Io;
}

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

// Flat-space second fundamental form from the map alone: central differences
// for the map derivatives and Euclidean linear algebra for the normal
// projection with η = diag(−1, 1, 1, 1). Returns II̊_ab as ambient vectors.
std::vector<Eigen::Vector4d> flat_traceless_oracle(const Embedding& emb, const std::vector<double>& u) {
  const double h = 1e-4;
  auto X = [&](double du, double dv) {
    const auto p = emb.point({u[0] + du, u[1] + dv});
    return Eigen::Vector4d(p[0], p[1], p[2], p[3]);
  };
  const Eigen::Matrix4d G = Eigen::Vector4d(-1, 1, 1, 1).asDiagonal();
  Eigen::Matrix<double, 4, 2> e;
  e.col(0) = (X(h, 0) - X(-h, 0)) / (2 * h);
  e.col(1) = (X(0, h) - X(0, -h)) / (2 * h);
  std::array<Eigen::Vector4d, 4> V;
  V[0] = (X(h, 0) - 2 * X(0, 0) + X(-h, 0)) / (h * h);
  V[3] = (X(0, h) - 2 * X(0, 0) + X(0, -h)) / (h * h);
  V[1] = V[2] = (X(h, h) - X(h, -h) - X(-h, h) + X(-h, -h)) / (4 * h * h);
  const Eigen::Matrix2d hh = e.transpose() * G * e, hinv = hh.inverse();
  std::array<Eigen::Vector4d, 4> N;
  for (int k = 0; k < 4; ++k) N[k] = V[k] - e * (hinv * (e.transpose() * G * V[k]));
  Eigen::Vector4d Hm = Eigen::Vector4d::Zero();
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) Hm += 0.5 * hinv(a, b) * N[a * 2 + b];
  std::vector<Eigen::Vector4d> out;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) out.push_back(N[a * 2 + b] - hh(a, b) * Hm);
  return out;
}

// Graph surfaces over the (x, y) plane separate their null normals along z.
FrameOptions graph_options() {
  FrameOptions o;
  o.branch_vector = std::vector<double>{0, 0, 0, 1};
  return o;
}

Embedding random_flat_surface(Gen& g) {
  auto c = [&] { return std::to_string(g.uniform(-0.25, 0.25)); };
  return Embedding({{"a", -0.5, 0.5}, {"b", -0.5, 0.5}},
                   testsupport::parse_all({c() + " + " + c() + "*a^2 + " + c() + "*a*b + " + c() + "*b^2",
                                           "a + " + c() + "*b^2", "b",
                                           c() + "*a^2 + " + c() + "*b^2 + " + c() + "*a*b + 0.3*sin(" + c() + "*a)"}));
}

Embedding random_grw_surface(Gen& g) {
  auto c = [&] { return std::to_string(g.uniform(-0.15, 0.15)); };
  return Embedding({{"a", -0.5, 0.5}, {"b", -0.5, 0.5}},
                   testsupport::parse_all({"1 + " + c() + "*a^2 + " + c() + "*a*b",
                                           "0.2 + " + c() + "*a + " + c() + "*b^2", "a", "b + " + c() + "*a^2"}));
}

}  // namespace

TEST_CASE("sphere in the cone: frame matches the Cartesian null normals") {
  const auto emb = testsupport::sphere_in_cone();
  const auto m = testsupport::minkowski();
  Gen g(21);
  for (int k = 0; k < 20; ++k) {
    const double th = g.uniform(0.2, 2.9), ph = g.uniform(0, 6.2);
    const auto s = embed_and_frame(emb, {th, ph}, *m);
    const Eigen::Vector3d xh(std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th));
    CHECK(std::abs(s.h(0, 0) - 1.0) < 1e-12);
    CHECK(std::abs(s.h(1, 1) - std::sin(th) * std::sin(th)) < 1e-12);
    CHECK(std::abs(s.h(0, 1)) < 1e-12);
    CHECK(std::abs(s.frame.xi[0] - 1.0) < 1e-12);
    CHECK(std::abs(s.frame.eta[0] - 0.5) < 1e-12);
    for (int i = 0; i < 3; ++i) {
      CHECK(std::abs(s.frame.xi[i + 1] - xh[i]) < 1e-12);
      CHECK(std::abs(s.frame.eta[i + 1] + 0.5 * xh[i]) < 1e-12);
    }
    CHECK(s.frame_residuals.max() < 1e-12);
  }
}

TEST_CASE("sphere in the cone: shape operators, expansions and mean curvature") {
  const auto emb = testsupport::sphere_in_cone();
  const auto m = testsupport::minkowski();
  const auto s = full_state(emb, {1.1, 0.4}, *m);
  const Eigen::Matrix2d I = Eigen::Matrix2d::Identity();
  CHECK(max_abs(s.A_xi + I) < 1e-10);
  CHECK(max_abs(s.A_eta - 0.5 * I) < 1e-10);
  CHECK(max_abs(s.W_xi + I) < 1e-10);
  CHECK(max_abs(s.W_eta - 0.5 * I) < 1e-10);
  CHECK(s.theta_xi == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(s.theta_eta == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(s.gHH == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(s.tau[0]) + std::abs(s.tau[1]) < 1e-12);
  CHECK(s.sigma2_xi < 1e-20);
  CHECK(s.sigma2_eta < 1e-20);
  CHECK(s.tau_ext == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(form_residuals(s, *m).max() < 1e-10);

  auto st = embed_and_frame(emb, {1.1, 0.4}, *m);
  fundamental_forms(st, *m);
  const auto rep = shear_analysis(st);
  CHECK(rep.finder.umbilical_point);
  CHECK(rep.isotropy_residual < 1e-12);

  const auto v = umbilicity_test(s, 1, 0, 1e-8);
  CHECK(v.is_umbilical);
  CHECK(v.rho == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(v.residual < 1e-10);
  const auto half = umbilicity_test(s, 0.5, 0, 1e-8);
  CHECK(half.is_umbilical);
  CHECK(half.rho == doctest::Approx(0.5 * v.rho).epsilon(1e-12));
}

TEST_CASE("plane leaf in a null hyperplane is totally geodesic") {
  const auto emb = testsupport::plane_leaf();
  const auto m = testsupport::minkowski();
  for (auto u : {std::vector<double>{0.3, 0.7}, std::vector<double>{0, 0}}) {
    auto s = embed_and_frame(emb, u, *m);
    CHECK(max_abs(s.h - Eigen::Matrix2d::Identity()) < 1e-14);
    CHECK(s.frame.xi == std::vector<double>{1, 0, 0, 1});
    CHECK(s.frame.eta == std::vector<double>{0.5, 0, 0, -0.5});
    fundamental_forms(s, *m);
    CHECK(max_abs(s.II_xi) + max_abs(s.II_eta) == 0.0);
    CHECK(s.theta_xi == 0.0);
    CHECK(s.theta_eta == 0.0);
    CHECK(s.H.norm() == 0.0);
    CHECK(shear_analysis(s).finder.umbilical_point);
  }
}

TEST_CASE("grw surface has vanishing outgoing expansion at s = 0") {
  const auto m = testsupport::grw_linear();
  const auto emb = testsupport::grw_surface(1.0, 0.0);
  Gen g(22);
  for (int k = 0; k < 10; ++k) {
    const auto s = full_state(emb, {g.uniform(-0.5, 0.5), g.uniform(-0.5, 0.5)}, *m, testsupport::grw_options());
    CHECK(std::abs(s.theta_xi) < 1e-12);
  }
}

TEST_CASE("grw surface expansions match the leaf-area derivative") {
  // Leaf area density t²(1−s)²; ξ = (1, 1/t, 0, 0) and η = (1/2, −1/(2t), 0, 0)
  // in the gauge g(ξ, ∂_t) = −1, so θ = ζ(log area).
  const auto m = testsupport::grw_linear();
  for (double t0 : {0.8, 1.0, 1.7})
    for (double s0 : {-0.3, 0.2, 0.5}) {
      const auto s = full_state(testsupport::grw_surface(t0, s0), {0.1, -0.2}, *m, testsupport::grw_options());
      const double dt = 2 / t0, ds = -2 / (1 - s0);
      CHECK(s.theta_xi == doctest::Approx(dt + ds / t0).epsilon(1e-10));
      CHECK(s.theta_eta == doctest::Approx(0.5 * dt - 0.5 * ds / t0).epsilon(1e-10));
      CHECK(s.sigma2_xi < 1e-20);
      CHECK(s.sigma2_eta < 1e-20);
    }
}

TEST_CASE("timelike embedding is rejected") {
  const Embedding emb({{"a", 0, 1}, {"b", 0, 1}}, testsupport::parse_all({"a", "b", "0", "0"}));
  const auto m = testsupport::minkowski();
  CHECK(error_of([&] { embed_and_frame(emb, {0.5, 0.5}, *m); }) == ErrorKind::NotSpacelike);
  const Embedding null_emb({{"a", 0, 1}, {"b", 0, 1}}, testsupport::parse_all({"a", "a", "b", "0"}));
  CHECK(error_of([&] { embed_and_frame(null_emb, {0.5, 0.5}, *m); }) == ErrorKind::NotSpacelike);
}

TEST_CASE("ill-conditioned induced metric is reported") {
  const Embedding emb({{"a", 0, 1}, {"b", 0, 1}}, testsupport::parse_all({"0", "a", "1e-6*b", "0"}));
  const auto m = testsupport::minkowski();
  auto s = embed_and_frame(emb, {0.5, 0.5}, *m);
  CHECK(error_of([&] { fundamental_forms(s, *m); }) == ErrorKind::Conditioning);
}

TEST_CASE("non-round cone section: umbilical along the generator only") {
  const auto emb = testsupport::nonround_cone();
  const auto m = testsupport::minkowski();
  Gen g(23);
  int non_umbilical = 0;
  for (int k = 0; k < 25; ++k) {
    const double th = g.uniform(0.3, 2.8), ph = g.uniform(0, 6.2);
    auto s = embed_and_frame(emb, {th, ph}, *m);
    fundamental_forms(s, *m);
    const auto rep = shear_analysis(s);
    CHECK(s.sigma2_xi < 1e-10);
    CHECK(s.sigma2_xi >= -1e-12);
    CHECK(s.sigma2_eta >= -1e-12);
    if (rep.finder.umbilical_point) continue;
    ++non_umbilical;
    CHECK(s.sigma2_eta > 1e-6);
    CHECK(rep.finder.found);
    const Eigen::Vector4d gen(1, std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th));
    const Eigen::Vector4d dir = rep.finder.direction;
    const double cosang = std::abs(dir.dot(gen.normalized()));
    CHECK(std::sqrt(std::max(0.0, 1 - cosang * cosang)) < 1e-4);
    CHECK(rep.isotropy_residual < 1e-10);
    CHECK(!umbilicity_test(s, 0, 1, 1e-6).is_umbilical);
    CHECK(umbilicity_test(s, 0, 1, 1e-6).residual > 1e-3);
    CHECK(umbilicity_test(s, 1, 0, 1e-6).is_umbilical);

    const auto oracle = flat_traceless_oracle(emb, {th, ph});
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) {
        const Eigen::VectorXd mine = s.normal(s.IIo_xi(a, b), s.IIo_eta(a, b));
        CHECK((mine - oracle[a * 2 + b]).cwiseAbs().maxCoeff() < 1e-5);
      }
  }
  CHECK(non_umbilical > 15);
}

TEST_CASE("property: frame algebra, relation, traces and shear on random surfaces") {
  Gen g(24);
  const auto flat = testsupport::minkowski();
  const auto grw = testsupport::grw_linear();
  for (int k = 0; k < 40; ++k) {
    const bool in_grw = k % 2 == 1;
    const auto emb = in_grw ? random_grw_surface(g) : random_flat_surface(g);
    const auto& m = in_grw ? *grw : *flat;
    const FrameOptions o = in_grw ? testsupport::grw_options() : graph_options();
    const std::vector<double> u{g.uniform(-0.4, 0.4), g.uniform(-0.4, 0.4)};
    auto s = embed_and_frame(emb, u, m, o);
    fundamental_forms(s, m);
    const auto rep = shear_analysis(s);
    CHECK(s.frame_residuals.max() < 1e-9);
    const auto r = form_residuals(s, m);
    CHECK(r.relation < 1e-8);
    CHECK(r.trace < 1e-9);
    CHECK(r.trace_H < 1e-9);
    CHECK(r.decomposition < 1e-9);
    CHECK(r.mean_norm < 1e-9);
    for (auto [sig, a, b] : {std::tuple{s.sigma2_xi, 1.0, 0.0}, std::tuple{s.sigma2_eta, 0.0, 1.0}}) {
      CHECK(sig >= -1e-12);
      const double tol = 1e-6;
      // σ² = Σ (eigenvalue − ρ)², so σ² < tol² matches a max-norm residual below tol up to √n.
      const auto v = umbilicity_test(s, a, b, tol);
      if (sig < 0.25 * tol * tol) CHECK(v.is_umbilical);
      if (sig > 2 * tol * tol * std::max(1.0, v.rho * v.rho)) CHECK(!v.is_umbilical);
    }
    // Traceless Gauss relation: g(II̊,II̊) = n(n−1)(g(H,H) − τ_ext), τ_ext from sectional curvatures.
    const auto in = intrinsic_curvature(emb, u, m);
    const double tau_def = tau_ext_by_definition(s, in, m);
    CHECK(std::abs(s.IIo_norm2 - 2.0 * (s.gHH - tau_def)) < 1e-6 * std::max(1.0, std::abs(s.IIo_norm2)));
    if (rep.finder.found) CHECK(std::abs(tau_def - s.gHH) < 1e-6);
    if (!in_grw) {
      const auto oracle = flat_traceless_oracle(emb, u);
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
          CHECK((s.normal(s.IIo_xi(a, b), s.IIo_eta(a, b)) - oracle[a * 2 + b]).cwiseAbs().maxCoeff() < 1e-5);
    }
  }
}

TEST_CASE("property: umbilicity verdict is unchanged by conformal rescaling") {
  Gen g(25);
  const auto flat = testsupport::minkowski();
  for (const auto& [emb_name, emb] :
       std::vector<std::pair<std::string, Embedding>>{{"sphere", testsupport::sphere_in_cone()},
                                                     {"nonround", testsupport::nonround_cone()}}) {
    for (const char* u_src : {"0.1*t", "0.05*t + 0.1*x - 0.07*y*z"}) {
      const auto conf = conformal_rescale(flat, Expression::parse(u_src));
      for (int k = 0; k < 8; ++k) {
        const std::vector<double> u{g.uniform(0.3, 2.8), g.uniform(0, 6.2)};
        const auto s0 = full_state(emb, u, *flat);
        const auto s1 = full_state(emb, u, *conf);
        CHECK(umbilicity_test(s0, 1, 0, 1e-6).is_umbilical == umbilicity_test(s1, 1, 0, 1e-6).is_umbilical);
        CHECK(umbilicity_test(s0, 0, 1, 1e-6).is_umbilical == umbilicity_test(s1, 0, 1, 1e-6).is_umbilical);
        CHECK(umbilicity_test(s1, 1, 0, 1e-6).is_umbilical);
        INFO(emb_name);
      }
    }
  }
}

TEST_CASE("shear isotropy and the umbilical direction finder agree") {
  Gen g(26);
  const auto flat = testsupport::minkowski();
  const auto cone = testsupport::nonround_cone();
  for (int k = 0; k < 10; ++k) {
    auto s = embed_and_frame(cone, {g.uniform(0.3, 1.3), g.uniform(0, 6.2)}, *flat);
    fundamental_forms(s, *flat);
    const auto rep = shear_analysis(s);
    if (rep.finder.umbilical_point) continue;
    CHECK(rep.isotropy_residual < 1e-8);
    CHECK(rep.finder.found);
  }
  for (int k = 0; k < 10; ++k) {
    const auto emb = random_flat_surface(g);
    auto s = embed_and_frame(emb, {g.uniform(-0.4, 0.4), g.uniform(-0.4, 0.4)}, *flat, graph_options());
    fundamental_forms(s, *flat);
    const auto rep = shear_analysis(s);
    if (rep.finder.umbilical_point) continue;
    CHECK((rep.isotropy_residual < 1e-8) == rep.finder.found);
  }
}

TEST_CASE("pseudo-umbilical when the umbilical direction has zero expansion") {
  const auto m = testsupport::grw_linear();
  const auto s = full_state(testsupport::grw_surface(1.0, 0.0), {0.2, 0.1}, *m, testsupport::grw_options());
  CHECK(umbilicity_test(s, 1, 0, 1e-8).is_umbilical);
  CHECK(std::abs(s.theta_xi) < 1e-10);
  CHECK(umbilicity_test(s, s.H_xi, s.H_eta, 1e-8).is_umbilical);
}

TEST_CASE("rotation form on the sphere in the cone vanishes") {
  const auto emb = testsupport::sphere_in_cone();
  const auto grid = make_chart_grid(emb.chart(), {6, 8});
  const auto rep = rotation_form_and_curvature(emb, *testsupport::minkowski(), grid);
  CHECK(rep.max_tau < 1e-12);
  CHECK(rep.max_dtau < 1e-8);
  CHECK(rep.max_identity_residual < 1e-8);
  CHECK(rep.parallel_rescalable);
  CHECK(rep.normal_curvature_vanishes);
}

TEST_CASE("rotation form on the grw surface: flat normal connection") {
  const auto m = testsupport::grw_linear();
  const auto emb = testsupport::grw_surface(1.0, 0.0);
  const auto grid = make_chart_grid(emb.chart(), {5, 5});
  const auto rep = rotation_form_and_curvature(emb, *m, grid, testsupport::grw_options());
  CHECK(rep.max_identity_residual < 1e-4);
  CHECK(rep.max_dtau < 1e-6);
  CHECK(rep.parallel_rescalable);
}

TEST_CASE("property: normal curvature identity with shape-operator commutator") {
  Gen g(27);
  const auto flat = testsupport::minkowski();
  const auto grw = testsupport::grw_linear();
  double seen_dtau = 0;
  for (int k = 0; k < 8; ++k) {
    const bool in_grw = k % 2 == 1;
    const auto emb = in_grw ? random_grw_surface(g) : random_flat_surface(g);
    const FrameOptions o = in_grw ? testsupport::grw_options() : graph_options();
    const auto grid = make_chart_grid(emb.chart(), {3, 3}, Window{{-0.3, -0.3}, {0.3, 0.3}});
    const auto rep = rotation_form_and_curvature(emb, in_grw ? *grw : *flat, grid, o);
    CHECK(rep.max_ricci_residual < 1e-6);
    seen_dtau = std::max(seen_dtau, rep.max_dtau);
  }
  CHECK(seen_dtau > 1e-3);  // the identity is exercised with a non-trivial dτ
}

TEST_CASE("dtau is conformally invariant") {
  Gen g(28);
  const auto flat = testsupport::minkowski();
  const auto conf = conformal_rescale(flat, Expression::parse("0.1*t"));
  const auto conf2 = conformal_rescale(flat, Expression::parse("0.1*t + 0.2*x*y - 0.1*z"));
  {
    const auto emb = testsupport::sphere_in_cone();
    const auto grid = make_chart_grid(emb.chart(), {4, 6});
    const auto a = rotation_form_and_curvature(emb, *flat, grid);
    const auto b = rotation_form_and_curvature(emb, *conf, grid);
    for (std::size_t k = 0; k < grid.size(); ++k)
      for (int i = 0; i < 4; ++i) CHECK(std::abs(a.nodes[k].dtau[i] - b.nodes[k].dtau[i]) < 1e-6);
  }
  for (int rep = 0; rep < 4; ++rep) {
    const auto emb = random_flat_surface(g);
    const auto grid = make_chart_grid(emb.chart(), {3, 3}, Window{{-0.3, -0.3}, {0.3, 0.3}});
    const auto a = rotation_form_and_curvature(emb, *flat, grid, graph_options());
    const auto b = rotation_form_and_curvature(emb, *conf2, grid, graph_options());
    for (std::size_t k = 0; k < grid.size(); ++k)
      for (int i = 0; i < 4; ++i) CHECK(std::abs(a.nodes[k].dtau[i] - b.nodes[k].dtau[i]) < 1e-6);
  }
}

TEST_CASE("frame continuity probe detects a branch flip") {
  const auto emb = testsupport::sphere_in_cone();
  const auto m = testsupport::minkowski();
  const auto grid = make_chart_grid(emb.chart(), {3, 4});
  std::vector<ExtrinsicState> states;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    FrameOptions o;
    if (k == 5) o.branch = Branch::Ingoing;
    states.push_back(embed_and_frame(emb, grid.nodes[k], *m, o));
  }
  CHECK(error_of([&] { frame_continuity_probe(emb, *m, {}, states, grid); }) == ErrorKind::FrameContinuity);
  states[5] = embed_and_frame(emb, grid.nodes[5], *m);
  frame_continuity_probe(emb, *m, {}, states, grid);
}

TEST_CASE("gauss-bonnet on the round and non-round sections") {
  const auto m = testsupport::minkowski();
  {
    const auto emb = testsupport::sphere_in_cone();
    const auto rep = gauss_bonnet(emb, *m, make_chart_grid(emb.chart(), {12, 24}));
    CHECK(std::abs(rep.chi - 2.0) < 0.01);
    CHECK(rep.max_pointwise_residual < 1e-5);
    for (double K : rep.K_intrinsic) CHECK(std::abs(K - 1.0) < 1e-5);
    CHECK(rep.umbilic_section_present);
    REQUIRE(rep.scal_residual.has_value());
    CHECK(*rep.scal_residual < 1e-5);
    CHECK(rep.area == doctest::Approx(4 * std::numbers::pi).epsilon(1e-8));
  }
  {
    const auto emb = testsupport::nonround_cone();
    const auto rep = gauss_bonnet(emb, *m, make_chart_grid(emb.chart(), {16, 24}));
    CHECK(std::abs(rep.chi - 2.0) < 0.02);
    CHECK(std::abs(rep.chi_intrinsic - 2.0) < 0.02);
    CHECK(rep.max_pointwise_residual < 1e-3);
    CHECK(rep.umbilic_section_present);
  }
}

TEST_CASE("gauss-bonnet rejects non-compact and mislabelled charts") {
  const auto m = testsupport::minkowski();
  const auto plane = testsupport::plane_leaf();
  CHECK(error_of([&] { gauss_bonnet(plane, *m, make_chart_grid(plane.chart(), {4, 4})); }) ==
        ErrorKind::NonCompactDomain);
  const auto sphere = testsupport::sphere_in_cone(1.0, false);
  CHECK(error_of([&] { gauss_bonnet(sphere, *m, make_chart_grid(sphere.chart(), {8, 8})); }) ==
        ErrorKind::ChartMetadata);
}

TEST_CASE("quadrature helpers") {
  std::vector<double> x, w;
  gauss_legendre(7, -1, 2, x, w);
  double s = 0;
  for (int i = 0; i < 7; ++i) s += w[i] * std::pow(x[i], 12);
  CHECK(s == doctest::Approx((std::pow(2.0, 13) + 1) / 13).epsilon(1e-13));

  const auto fw = fd_weights(0.3, {0.0, 0.2, 0.5, 0.6, 1.0}, 1);
  double d = 0;
  const std::vector<double> nodes{0.0, 0.2, 0.5, 0.6, 1.0};
  for (int i = 0; i < 5; ++i) d += fw[i] * std::pow(nodes[i], 4);
  CHECK(d == doctest::Approx(4 * std::pow(0.3, 3)).epsilon(1e-12));

  // Non-uniform grid containing 0 with different spacings on each side.
  std::vector<double> t, f;
  for (int k = -10; k <= 0; ++k) t.push_back(0.05 * k);
  for (int k = 1; k <= 20; ++k) t.push_back(0.11 * k);
  for (double v : t) f.push_back(std::cos(v));
  const auto I = cumulative_integral(t, f, 10);
  double worst = 0;
  for (std::size_t k = 0; k < t.size(); ++k) worst = std::max(worst, std::abs(I[k] - std::sin(t[k])));
  CHECK(worst < 1e-5);
  const auto D = sampled_derivative(t, f);
  for (std::size_t k = 0; k < t.size(); ++k) CHECK(std::abs(D[k] + std::sin(t[k])) < 1e-4);

  Gen g(29);
  for (int rep = 0; rep < 20; ++rep) {
    // Cubics integrate exactly.
    const double a = g.uniform(-1, 1), b = g.uniform(-1, 1), c = g.uniform(-1, 1);
    std::vector<double> fc;
    for (double v : t) fc.push_back(a * v * v * v + b * v + c);
    const auto Ic = cumulative_integral(t, fc, 10);
    for (std::size_t k = 0; k < t.size(); ++k) {
      const double v = t[k];
      CHECK(std::abs(Ic[k] - (a * v * v * v * v / 4 + b * v * v / 2 + c * v)) < 1e-12);
    }
  }
}
