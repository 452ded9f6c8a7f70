#pragma once

// Invariant-measure detection on a sampled shape chart: the vertical trace
// condition, the 1-form family omega = omega0 + lambda^k beta_k, closedness,
// reconstruction of the density exponent sigma, and Liouville checks.

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "nhm/almost_poisson.hpp"
#include "nhm/reduction.hpp"

namespace nhm {

class RankDegenerate : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnsupportedCorank : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor grid from sample_lo to sample_hi (inclusive) on every axis.
/// Flat index is row-major with the last axis fastest.
class Grid {
 public:
  Grid() = default;
  Grid(const Chart& chart, std::size_t per_axis);
  static Grid from_axes(std::vector<Vec> axes);

  std::size_t dim() const { return axes_.size(); }
  std::size_t size() const { return size_; }
  std::size_t count(std::size_t axis) const { return axes_[axis].size(); }
  const Vec& axis(std::size_t a) const { return axes_[a]; }
  double spacing(std::size_t a) const { return axes_[a].size() > 1 ? axes_[a][1] - axes_[a][0] : 0.0; }

  std::vector<std::size_t> multi_index(std::size_t flat) const;
  std::size_t flat_index(std::span<const std::size_t> idx) const;
  std::size_t stride(std::size_t axis) const { return strides_[axis]; }
  Vec point(std::size_t flat) const;
  /// Node nearest to x (clamped to the grid).
  std::size_t nearest(std::span<const double> x) const;

 private:
  std::vector<Vec> axes_;
  std::vector<std::size_t> strides_;
  std::size_t size_ = 0;
};

struct Thresholds {
  double accept = 1e-6;
  double reject = 1e-3;
};

enum class Verdict { measure_exists, no_measure, inconclusive };
std::string to_string(Verdict v);
Verdict verdict_from_string(const std::string& s);

struct ConditionOneResult {
  std::vector<Vec> residual;  // per node, n_vertical entries
  double max_abs = 0.0;
  std::size_t worst_node = 0;
};

/// C_ab^b + C_a alpha^alpha at every node.
ConditionOneResult condition_one(const ReducedStructure& rs, const Grid& grid);

/// The family at one point: omega(Yhat_alpha) = base_alpha, solved in minimum
/// norm as omega0; the annihilator of the anchors spans the freedom.
struct OmegaPoint {
  Vec base;          // n_horizontal
  Matd anchors;      // shape_dim x n_horizontal
  Vec omega0;        // shape_dim coordinate components
  Matd annihilator;  // shape_dim x k, orthonormal columns
  std::size_t corank() const { return annihilator.cols(); }
};

OmegaPoint omega_at(const ReducedStructure& rs, std::span<const double> qhat, double sv_rel = 1e-8);

struct OmegaFamily {
  const ReducedStructure* rs = nullptr;
  Grid grid;
  std::vector<OmegaPoint> nodes;
  std::size_t corank = 0;
  double sv_rel = 1e-8;
};

/// Throws RankDegenerate if the corank changes across the grid.
OmegaFamily omega_family(const ReducedStructure& rs, const Grid& grid, double sv_rel = 1e-8);

/// Coordinate components of d(omega): entry (i, j) = d_i omega_j - d_j omega_i.
using TwoForm = Matd;

struct ClosednessResult {
  double residual = 0.0;
  std::size_t worst_node = 0;
  std::string method;      // "direct", "pointwise-elimination" or "least-squares"
  Vec lambda;              // per node (corank 1)
  std::vector<Vec> lambda_gradient;
  std::vector<Vec> beta;   // annihilator per node, sign-consistent along the grid
  double least_squares_residual = -1.0;  // diagnostic, corank 1 only
};

/// Corank 0: max |d omega| over the nodes. Corank 1: lambda eliminated
/// pointwise from d omega ^ beta = 0 when d beta ^ beta does not vanish on the
/// grid, else a least-squares solve for lambda on the grid. Corank > 1 throws.
ClosednessResult closedness_residual(const OmegaFamily& fam);

/// d(omega0) at a point (corank 0: the unique member).
TwoForm exterior_derivative_at(const ReducedStructure& rs, std::span<const double> qhat);

/// Corank 1 only: lambda and the 2-form d(omega0 + lambda beta) at a point,
/// lambda from the pointwise elimination.
struct EliminatedPoint {
  double lambda = 0.0;
  Vec lambda_gradient;
  Vec beta;
  TwoForm residual;
};
EliminatedPoint corank1_elimination(const ReducedStructure& rs, std::span<const double> qhat);

/// Closed-form-free obstruction at a point: d(omega) for corank 0, the
/// eliminated residual for corank 1.
TwoForm obstruction_at(const ReducedStructure& rs, std::span<const double> qhat);

struct SigmaResult {
  Vec sigma;                 // per node, sigma(base node) = 0
  Vec sigma_reverse;         // reverse axis order staircase
  double path_discrepancy = 0.0;
  double loop_residual = 0.0;  // max plaquette circulation
};

/// sigma = -integral of omega from node 0 along staircases. Edge integrals use
/// 5-point Gauss-Legendre; for corank 1 lambda is Hermite-interpolated along edges.
SigmaResult integrate_sigma(const OmegaFamily& fam, const ClosednessResult& closed);

struct DetectionReport {
  Thresholds thresholds;
  std::string system;
  std::size_t grid_points = 0;
  std::vector<std::string> axis_names;
  std::vector<Vec> axes;
  std::size_t n_vertical = 0;
  std::size_t n_horizontal = 0;
  std::size_t corank = 0;
  double condition_one = 0.0;
  Vec condition_one_worst_point;
  double closedness = 0.0;
  Vec closedness_worst_point;
  std::string closedness_method;
  double least_squares_residual = -1.0;
  double loop_residual = -1.0;
  double path_discrepancy = -1.0;
  Vec sigma;
  Vec lambda;
  std::vector<Vec> lambda_gradient;
  std::vector<Vec> beta;
  Verdict verdict = Verdict::inconclusive;
  std::string reason;

  nlohmann::json to_json() const;
  static DetectionReport from_json(const nlohmann::json& j);
};

DetectionReport detect(const ReducedStructure& rs, std::size_t per_axis = 33, const Thresholds& th = {},
                       const std::string& system_name = "");

// ------------------------------------------------------------ candidates

/// Density f(qhat, p) with respect to the frame volume d qhat ^ d p.
using DensityFn = std::function<double(std::span<const double> qhat, std::span<const double> p)>;

/// Density from an expression in shape coordinates, parameters and p1..pn
/// (momentum) or v1..vn (velocity; converted by the Jacobian det G).
DensityFn expression_density(const ReducedStructure& rs, const SymmetricSystem& sys, const std::string& text,
                             const std::string& coordinates);

/// exp(sigma) reconstructed from a report: nearest node plus a straight-line
/// integral of omega to the point.
DensityFn detected_density(const ReducedStructure& rs, const DetectionReport& report);

/// f-dot + f div X_H at x, derivatives by central differences.
double liouville_residual(const ReducedStructure& rs, const KineticHamiltonian& h, const DensityFn& f,
                          const PhaseState& x);

/// Max |f-dot + f div X_H| / f over random states: qhat uniform in the chart's
/// sampling box, p uniform in [-1, 1]^n, drawn from mt19937_64(seed).
double max_relative_liouville_residual(const ReducedStructure& rs, const KineticHamiltonian& h, const DensityFn& f,
                                       std::size_t samples, std::uint64_t seed);

using VectorFieldFn = std::function<Vec(std::span<const double>)>;
using ScalarFn = std::function<double(std::span<const double>)>;

/// Same for an arbitrary ODE on R^N.
double liouville_residual(const VectorFieldFn& rhs, const ScalarFn& f, std::span<const double> x);

/// Divergence of an ODE right-hand side by central differences.
double divergence(const VectorFieldFn& rhs, std::span<const double> x);

// --------------------------------------------------------------- LL systems

/// Structure constants c(i, j, k) = [e_i, e_j]^k of a Lie algebra.
struct LieAlgebra {
  std::size_t n = 0;
  Vec c;
  double operator()(std::size_t i, std::size_t j, std::size_t k) const { return c[(i * n + j) * n + k]; }
  double& operator()(std::size_t i, std::size_t j, std::size_t k) { return c[(i * n + j) * n + k]; }
  Vec bracket(std::span<const double> x, std::span<const double> y) const;
  /// M(v) = trace ad_v
  Vec modular_character() const;

  static LieAlgebra so3();
  static LieAlgebra abelian(std::size_t n);
  /// [e1, e2] = e2
  static LieAlgebra affine_line();
};

/// For the constraint subspace spanned by the columns of e, component a is
/// sum_b <e^b, P[e_a, e_b]> with P the inertia-orthogonal projection.
Vec ll_check(const LieAlgebra& g, const Matd& inertia, const Matd& e);

struct Codim1Result {
  bool satisfied = false;
  double mu = 0.0;
  double residual = 0.0;  // norm of the part orthogonal to beta
  Vec defect;             // that orthogonal part
};

/// Constraint subspace = ker beta. Tests (1/<beta, eta>) ad*_eta beta + M = mu beta
/// with eta = inertia^-1 beta.
Codim1Result ll_codim1_check(const LieAlgebra& g, const Matd& inertia, std::span<const double> beta,
                             double tol = 1e-10);

}  // namespace nhm
