#pragma once

// The lightlike hypersurface Σ swept by the null geodesics leaving S along ξ.
//
// Each S node carries one generator γ(t) with γ'(0) = ξ, the Jacobi fields
// J_a = ∂_a Φ along it (J(0) = e_a, J'(0) = ∇_{e_a} ξ) and 2n satellite
// generators at ±h in each chart parameter, all integrated as one system so
// the finite-difference frame shares the integrator's step sequence.
// Screen quantities: ĝ_ab = g(J_a,J_b), B_ab = −g(∇_{J_a}U, J_b),
// θ = −tr(ĝ⁻¹B), B = μĝ on a totally umbilical Σ, Ω = exp(−2∫μ).

#include <functional>
#include <optional>
#include <vector>

#include "nullfold/geodesic.hpp"
#include "nullfold/metric.hpp"
#include "nullfold/submanifold.hpp"

namespace nullfold {

struct FanControls {
  IntegratorControls integrator = geodesic_integrator_defaults();
  double satellite_step = 1e-4;      // chart offset of the finite-difference generators
  double caustic_ratio = 1e-10;      // det ĝ(t) < ratio · det ĝ(0) marks a caustic
  double cross_check_tol = 1e-5;     // FD vs Jacobi leaf frames, relative
  // Generator rescaling ξ → f ξ, f in the chart parameters.
  std::optional<Expression> rescale;
  // Integrates ∫ density(γ) dt alongside (used to match parameters under a
  // conformal change); density is in the ambient coordinates.
  std::optional<Expression> parameter_density;
};

struct LeafSample {
  double t = 0;
  bool valid = false;    // integrated (not past an integration failure)
  bool caustic = false;  // at or past the first caustic along this generator
  std::vector<double> x, v;                 // position and U
  std::vector<double> J, Jp, Jpp;           // d×n [μ][a]: J_a, ∇_U J_a, ∇_U∇_U J_a (transport)
  std::vector<double> J_fd, Jpp_fd;         // same from the satellites
  std::vector<double> gram, gram_fd, B;     // n×n
  std::vector<double> tau;                  // τ(J_a) = −g(∇_{J_a} U, V)
  double theta = 0, mu = 0;
  double theta_dot = 0;                     // dθ/dt from the transported J''
  double int_theta = 0, int_mu = 0;         // ∫₀ᵗ θ, ∫₀ᵗ μ
  double parameter = 0;                     // ∫₀ᵗ density
  double null_norm = 0;                     // g(U,U)
  double containment = 0;                   // max_a |g(U, J_a)|, both frames
  double frame_mismatch = 0;                // max_a |J_fd − J| / |J|
  double jacobi_raw = 0;                    // |J''_fd + R(J_fd,U)U| relative
  double jacobi_transport = 0;              // |J'' + R(J,U)U| relative
  double B_asymmetry = 0;                   // max |B_ab − B_ba|
  double B_radical = 0;                     // max |B(J_a, U)| = |g(∇_{J_a}U, U)|
  double ricci_UU = 0;                      // Ric(U,U)

  double omega() const;                     // exp(−2 ∫μ)
};

struct Generator {
  std::vector<double> u;       // chart parameters of the S node
  double weight = 0;           // quadrature weight of the node
  bool failed = false;
  double last_valid = 0;
  std::vector<LeafSample> samples;  // one per t value, in t order
};

struct HypersurfaceGrid {
  int n = 0, d = 0;
  ChartGrid grid;
  std::vector<double> t;       // ascending, contains 0
  std::size_t t0 = 0;          // index of t = 0
  std::vector<Generator> generators;
  std::vector<double> theta_xi, sigma2_xi;  // at the S nodes
  bool any_failure = false;
};

// Ascending grid with t_min ≤ 0 ≤ t_max and `steps` intervals split between
// the two sides in proportion to their lengths. Always contains 0.
std::vector<double> make_t_grid(double t_min, double t_max, int steps);

// Initial data for one generator (with satellites) from S at chart point u.
struct GeneratorSeed {
  std::vector<double> u;
  std::vector<double> x, v;                 // point and initial velocity
  std::vector<double> J, W;                 // d×n, e_a and ∂_a(velocity)
  std::vector<double> sat_x, sat_v;         // 2n×d: (+a, −a) for each a
  std::vector<double> Z;                    // gauge field for the transverse null V
  int n = 0;
};

GeneratorSeed seed_generator(const Embedding& emb, const std::vector<double>& u, const MetricField& metric,
                             const FrameOptions& options, const FanControls& controls);

// Integrates one generator at the given times (must include 0).
Generator integrate_generator(const GeneratorSeed& seed, const MetricField& metric, const std::vector<double>& times,
                              const FanControls& controls);

// Throws TransportInconsistency when FD and transported frames disagree by
// more than controls.cross_check_tol at a caustic-free node.
HypersurfaceGrid build_hypersurface(const Embedding& emb, const MetricField& metric, const ChartGrid& grid,
                                    const std::vector<double>& t, const FrameOptions& options = {},
                                    const FanControls& controls = {});

struct UmbilicityReport {
  double max_residual = 0;      // (B − μĝ)/(1 + |μ| ‖ĝ‖), max-norm
  double max_B = 0;             // max |B|
  double max_theta = 0;
  double max_asymmetry = 0;
  double max_radical = 0;
  double max_lie = 0;           // |L_U ĝ + 2B| from t-differences of the FD Gram
  double max_containment = 0;
  double max_null_norm = 0;
  double max_frame_mismatch = 0;
  double max_leaf_umbilicity = 0;  // umbilicity residual of U on each leaf
  std::size_t nodes = 0;           // caustic-free samples examined
  bool passes(double tol) const { return max_residual < tol; }
};

UmbilicityReport total_umbilicity_check(const HypersurfaceGrid& grid);

struct ConformalFactorReport {
  double max_residual = 0;      // |ĝ(t) − Ω ĝ(0)| / (Ω ‖ĝ(0)‖)
  double min_omega = 0;
  double max_omega_deviation = 0;  // max |Ω − 1|
  double max_abs_mu_integral = 0;
  bool isometric_leaves = false;   // ∫μ ≈ 0 along every generator
  bool constant_omega = false;     // Ω ≡ 1 and μ ≡ 0
};

ConformalFactorReport conformal_factor_check(const HypersurfaceGrid& grid, double tol);

// Pairs of leaves (t_i, t_j) with ∫_{t_i}^{t_j} μ ≈ 0 on every generator.
std::vector<std::pair<std::size_t, std::size_t>> isometric_leaf_pairs(const HypersurfaceGrid& grid, double tol);

// vol: Σ w √det ĝ(t). pred1: Σ w √det ĝ(0) e^{∫θ}. pred2: Vol(0) e^{∫Θ} with
// Θ the e^{∫θ}-weighted mean of θ, integrated by cubic Hermite using dΘ/dt.
struct VolumeSeries {
  std::vector<double> t, vol, pred1, pred2, Theta;
  std::vector<double> Theta_dot;
  bool windowed = false;
  double max_pairwise_relative() const;
};

// Throws NonCompactDomain when the chart is non-compact and no window was set.
VolumeSeries volume_series(const HypersurfaceGrid& grid);

struct JacobiReport {
  double max_ricci_form = 0;     // |J'' + (Ric(U,U)/n) J − f U| relative
  double max_raw_fd = 0;         // |J''_fd + R(J_fd,U)U| relative
  double max_raw_transport = 0;
  double max_f = 0;
  std::size_t samples = 0;
};

// f_a = d/dt τ(J_a) − μ τ(J_a), differentiated along t by local stencils.
// Samples within two t-steps of a caustic or a failure are excluded.
JacobiReport jacobi_verify(const HypersurfaceGrid& grid);

struct RescaleReport {
  double omega = 0;   // max |Ω̄(p,s) − Ω(p, f(p)s)| / Ω
  double gram = 0;    // max |ĝ̄ − ĝ| / ‖ĝ‖ at matched points
  double position = 0;
};

// Rebuilds the fan with ξ → f ξ and compares against the base fan sampled at t = f(p)s.
RescaleReport rescale_invariance(const Embedding& emb, const MetricField& metric, const ChartGrid& grid,
                                 const std::vector<double>& s, const FrameOptions& options, const Expression& f,
                                 const FanControls& controls = {});

struct ConformalLawReport {
  // Residuals against the stated laws θ* = θ − nU(u), B* = e^{2u}(B + U(u)ĝ), Ω* = Ω.
  double theta_stated = 0, B_stated = 0, omega_stated = 0;
  // Residuals against θ* = θ + nU(u), B* = e^{2u}(B − U(u)ĝ), Ω* = e^{2(u(q)−u(p))} Ω.
  double theta_direct = 0, B_direct = 0, omega_direct = 0;
  double position = 0;  // matched points coincide
};

// Rebuilds under e^{2u} g and compares at matched generator points.
ConformalLawReport conformal_change_laws(const Embedding& emb, MetricPtr metric, const ChartGrid& grid,
                                         const std::vector<double>& t, const FrameOptions& options,
                                         const Expression& u, const FanControls& controls = {});

// θ_U(0) − θ_ξ and the screen shear at t = 0 against σ²_ξ.
struct RestrictionReport {
  double theta = 0, shear = 0;
};
RestrictionReport restriction_check(const HypersurfaceGrid& grid);

}  // namespace nullfold
