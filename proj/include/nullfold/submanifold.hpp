#pragma once

// Extrinsic geometry of a codimension-two spacelike embedding x: S → M.
//
// Normal frame conventions: ξ and η are future null normals with
// g(ξ,η) = −1 and g(ξ,Z) = −1 for the gauge field Z. A normal vector is held
// as coefficients (a, b) of aξ + bη, so g(aξ+bη, a'ξ+b'η) = −(ab' + a'b).
// Shape operators satisfy g(A_ζ X, Y) = g(II(X,Y), ζ) and the rotation form
// is τ(X) = −g(∇_X ξ, η).

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "nullfold/expression.hpp"
#include "nullfold/metric.hpp"
#include "nullfold/quadrature.hpp"

namespace nullfold {

class Embedding {
 public:
  Embedding() = default;
  // One expression per ambient coordinate, in the chart parameter names.
  Embedding(std::vector<ChartParameter> chart, const std::vector<Expression>& map);

  int dim() const { return static_cast<int>(chart_.size()); }
  int ambient_dim() const { return static_cast<int>(map_.size()); }
  const std::vector<ChartParameter>& chart() const { return chart_; }
  const std::vector<Expression>& map_expressions() const { return source_; }

  template <class S>
  void evaluate(const S* u, S* x) const {
    for (std::size_t i = 0; i < map_.size(); ++i) x[i] = map_[i].eval(u);
  }
  Point point(const std::vector<double>& u) const;

 private:
  std::vector<ChartParameter> chart_;
  std::vector<Expression> source_;
  std::vector<BoundExpression> map_;
};

enum class Branch { Outgoing, Ingoing };

struct FrameOptions {
  Branch branch = Branch::Outgoing;
  // The normal direction N (spacelike, orthogonal to Z) that separates the two
  // null branches: ξ ∝ Ẑ + N̂ on the outgoing branch. When empty, the radial
  // vector (0, x¹, …) is used if it has a normal part, otherwise the last
  // coordinate axis with a normal part.
  std::optional<std::vector<double>> branch_vector;
  // Future timelike gauge field; defaults to ∂ of the first coordinate.
  std::optional<std::vector<double>> gauge_z;
  // Reject chart points outside the parameter ranges.
  bool check_range = true;
};

struct NormalFrame {
  std::vector<double> xi, eta, Z;
};

struct FrameResiduals {
  double null_xi = 0, null_eta = 0, cross = 0, tangency = 0;
  double max() const;
};

struct ExtrinsicState {
  std::vector<double> at;   // chart parameters
  Point x;
  int n = 0, d = 0;
  Eigen::MatrixXd e;        // d×n tangent frame, columns e_a
  std::vector<double> ddx;  // [μ][a][b] = ∂_a∂_b x^μ
  Eigen::MatrixXd h;        // induced metric
  Eigen::MatrixXd h_inv;
  std::vector<double> dh;   // [c][a][b] = ∂_c h_ab
  NormalFrame frame;
  Eigen::MatrixXd dxi, deta;  // d×n, ∂_a ξ and ∂_a η in coordinates
  FrameResiduals frame_residuals;
  double h_condition = 1.0;

  // Filled by fundamental_forms.
  bool has_forms = false;
  Eigen::MatrixXd II_xi, II_eta;  // II = II_xi ξ + II_eta η
  Eigen::MatrixXd A_xi, A_eta;    // from g(A_ζ X,Y) = g(II(X,Y),ζ)
  Eigen::MatrixXd W_xi, W_eta;    // from the Weingarten formula, −(∇ζ)^T
  double H_xi = 0, H_eta = 0;     // H = H_xi ξ + H_eta η
  Eigen::VectorXd H;              // ambient components
  Eigen::VectorXd H_direct;       // normal projection of (1/n) h^{ab}(∂²x + Γ)
  double theta_xi = 0, theta_eta = 0;
  double gHH = 0;
  std::vector<double> tau;        // τ_a

  // Filled by shear_analysis.
  bool has_shear = false;
  Eigen::MatrixXd IIo_xi, IIo_eta;
  Eigen::MatrixXd Ao_xi, Ao_eta;
  double sigma2_xi = 0, sigma2_eta = 0;
  double IIo_norm2 = 0;           // g(II̊, II̊)
  double tau_ext = 0;             // g(H,H) − g(II̊,II̊)/(n(n−1))

  // Normal vector aξ + bη in coordinates.
  Eigen::VectorXd normal(double a, double b) const;
  // Shape operator of aξ + bη (linear in the coefficients).
  Eigen::MatrixXd shape(double a, double b) const { return a * A_xi + b * A_eta; }
};

ExtrinsicState embed_and_frame(const Embedding& emb, const std::vector<double>& u, const MetricField& metric,
                               const FrameOptions& options = {});

struct FormResiduals {
  double relation = 0;       // |g(A_ζ e_a,e_b) − g(II_ab,ζ)| with A from the Weingarten side, both ζ
  double trace = 0;          // |θ_ζ + tr A_ζ|, Weingarten A
  double trace_H = 0;        // |θ_ζ + n g(ζ,H)|
  double decomposition = 0;  // |H − (−g(η,H)ξ − g(ξ,H)η)| against the direct projection
  double mean_norm = 0;      // |g(H,H) + 2 g(ξ,H) g(η,H)| with g(H,H) from ambient components
  double max() const;
};

void fundamental_forms(ExtrinsicState& state, const MetricField& metric);
FormResiduals form_residuals(const ExtrinsicState& state, const MetricField& metric);

struct UmbilicDirection {
  bool umbilical_point = false;  // II̊ vanishes at this node
  bool found = false;            // a null direction ζ̃ with Å_ζ̃ = 0 was verified
  double a = 0, b = 0;           // ζ̃ = aξ + bη, Euclidean-normalized coefficients
  Eigen::VectorXd direction;     // ambient components, unit Euclidean length
  double null_residual = 0;      // |g(ζ̃,ζ̃)| / (a² + b²)
  double shape_residual = 0;     // max |Å_ζ̃| in an orthonormal frame, relative to ‖II̊‖
};

struct ShearReport {
  double isotropy_residual = 0;  // max |g(II̊(E_a,E_b), II̊(E_c,E_d))|, orthonormal E
  UmbilicDirection finder;
};

ShearReport shear_analysis(ExtrinsicState& state);

struct UmbilicityVerdict {
  bool is_umbilical = false;
  double rho = 0;
  double residual = 0;
};

// ζ = aξ + bη. Residual is measured in an orthonormal frame of h.
UmbilicityVerdict umbilicity_test(const ExtrinsicState& state, double a, double b, double tol);
// Same test for an h-self-adjoint operator A.
UmbilicityVerdict umbilicity_of(const Eigen::MatrixXd& h, const Eigen::MatrixXd& A, double tol);

struct IntrinsicCurvature {
  std::vector<double> riemann;  // [a][b][c][e] of h
  double scalar = 0;
  double gauss = 0;             // sectional curvature for n = 2
};

// From h and exact ∂h, with ∂Γ_h by central differences in the chart.
IntrinsicCurvature intrinsic_curvature(const Embedding& emb, const std::vector<double>& u,
                                       const MetricField& metric);

// Induced metric and ∂_c h_ab ([c][a][b]) without frame construction.
void induced_metric(const Embedding& emb, const std::vector<double>& u, const MetricField& metric,
                    Eigen::MatrixXd& h, std::vector<double>& dh);

// τ_a = −g(∇_{e_a} ξ, η).
std::vector<double> rotation_form(const ExtrinsicState& state, const MetricField& metric);

// Ambient sectional curvature of span{X, Y}.
double ambient_sectional(const MetricField& metric, const Point& p, const Eigen::VectorXd& X,
                         const Eigen::VectorXd& Y);

// (2/(n(n−1))) Σ_{i<j} (K(E_i,E_j) − K̃(E_i,E_j)) over an orthonormal frame.
double tau_ext_by_definition(const ExtrinsicState& state, const IntrinsicCurvature& intrinsic,
                             const MetricField& metric);

struct RotationNode {
  std::vector<double> u;
  std::vector<double> tau;       // τ_a
  std::vector<double> dtau;      // [a][b]
  std::vector<double> curvature; // [a][b] g(R(e_a,e_b)ξ, η)
  double identity_residual = 0;  // max |g(Rξ,η) + dτ|
  double ricci_residual = 0;     // max |g(Rξ,η) + dτ + g(A_η e_a, A_ξ e_b) − g(A_η e_b, A_ξ e_a)|
  double normal_curvature = 0;   // max |g(R(e_a,e_b)ξ, η)|
};

struct RotationReport {
  std::vector<RotationNode> nodes;
  double max_identity_residual = 0;
  double max_ricci_residual = 0;
  double max_dtau = 0;
  double max_tau = 0;
  double max_normal_curvature = 0;
  bool parallel_rescalable = false;       // max |dτ| < tol
  bool normal_curvature_vanishes = false; // max |g(Rξ,η)| < tol
};

// dτ by central differences with step `step` in each chart parameter (the
// frame is recomputed at the displaced points). Throws FrameContinuity when
// neighbouring nodes sit on different null branches.
RotationReport rotation_form_and_curvature(const Embedding& emb, const MetricField& metric, const ChartGrid& grid,
                                           const FrameOptions& options = {}, double tol = 1e-6,
                                           double step = 1e-4);

// Throws FrameContinuity if ξ jumps to the other null branch between grid
// neighbours: along each neighbour segment, bisected as needed, ξ must stay
// closer (after Euclidean normalization) to the previous ξ than to η.
void frame_continuity_probe(const Embedding& emb, const MetricField& metric, const FrameOptions& options,
                            const std::vector<ExtrinsicState>& states, const ChartGrid& grid);

struct GaussBonnetReport {
  std::vector<double> K_intrinsic, K_extrinsic;  // per node
  double max_pointwise_residual = 0;
  double chi = 0;             // (1/2π) Σ (K̃ + g(H,H)) dμ
  double chi_intrinsic = 0;   // (1/2π) Σ K dμ
  double area = 0;
  bool umbilic_section_present = false;
  std::optional<double> scal_residual;  // when the ambient has constant curvature
};

GaussBonnetReport gauss_bonnet(const Embedding& emb, const MetricField& metric, const ChartGrid& grid,
                               const FrameOptions& options = {}, double umbilic_tol = 1e-6);

// Orthonormal frame of h (columns, coefficients in e_a) from the Cholesky factor.
Eigen::MatrixXd orthonormal_coefficients(const Eigen::MatrixXd& h);

}  // namespace nullfold
