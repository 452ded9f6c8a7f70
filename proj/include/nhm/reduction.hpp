#pragma once

// Reduction of a symmetric nonholonomic system to the linear almost-Poisson
// data on the shape chart: structure functions C_IJ^K, anchors Yhat_alpha,
// and the fiber metric G^{IJ}. All reduced quantities are evaluated through a
// user-declared section s of the shape projection p.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "nhm/dense.hpp"
#include "nhm/expr.hpp"
#include "nhm/geometry.hpp"

namespace nhm {

/// C_IJ^K over the joint index (verticals first).
class StructureTable {
 public:
  StructureTable() = default;
  explicit StructureTable(std::size_t n) : n_(n), c_(n * n * n, 0.0) {}
  std::size_t size() const { return n_; }
  double& operator()(std::size_t i, std::size_t j, std::size_t k) { return c_[(i * n_ + j) * n_ + k]; }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const { return c_[(i * n_ + j) * n_ + k]; }
  /// sum_J C_IJ^J
  double trace(std::size_t i) const;
  double max_abs_difference(const StructureTable& other) const;

 private:
  std::size_t n_ = 0;
  Vec c_;
};

/// Linear almost-Poisson data on the reduced bundle. Anchors of vertical
/// indices are identically zero and are not stored.
class ReducedStructure {
 public:
  virtual ~ReducedStructure() = default;
  virtual const Chart& shape_chart() const = 0;
  virtual std::size_t n_vertical() const = 0;
  virtual std::size_t n_horizontal() const = 0;
  std::size_t rank() const { return n_vertical() + n_horizontal(); }
  std::size_t shape_dim() const { return shape_chart().dim(); }

  virtual StructureTable structure_functions_at(std::span<const double> qhat) const = 0;
  /// shape_dim x n_horizontal, column alpha = Yhat_alpha.
  virtual Matd anchors_at(std::span<const double> qhat) const = 0;
  /// d Yhat_alpha^i / d qhat^i for each alpha.
  virtual Vec anchor_divergence(std::span<const double> qhat) const = 0;
  /// G^{IJ}
  virtual Matd fiber_metric_at(std::span<const double> qhat) const = 0;
  /// d G^{IJ} / d qhat^i, one matrix per shape coordinate.
  virtual std::vector<Matd> fiber_metric_gradient(std::span<const double> qhat) const = 0;
};

/// Inputs of the algorithm: chart on Q, metric, adapted frame, projection
/// p: Q -> shape chart, section s, and extra sections on the same fibers.
struct SymmetricSystem {
  std::string name;
  std::vector<std::string> param_names;
  Vec params;
  Chart q_chart;
  Chart shape_chart;
  std::shared_ptr<const MetricField> metric;
  FrameSplit frame;
  std::vector<Expression> projection;                    // shape_dim expressions of q
  std::vector<Expression> section;                       // dim Q expressions of qhat
  std::vector<std::vector<Expression>> fiber_samples;    // alternative sections

  Vec section_point(std::span<const double> qhat) const;
  Vec project(std::span<const double> q) const;
};

struct SystemCheck {
  double section_defect = 0.0;        // |p(s(qhat)) - qhat|
  double vertical_defect = 0.0;       // |Tp . Z_a| at s(qhat)
  double orthogonality_defect = 0.0;  // relative G(Z_a, Y_alpha)
  double fiber_sample_defect = 0.0;   // |p(s_k(qhat)) - qhat|
  bool gram_spd = true;
  bool ok(double tol_section = 1e-12, double tol_vertical = 1e-10, double tol_orth = 1e-10) const {
    return gram_spd && section_defect <= tol_section && vertical_defect <= tol_vertical &&
           orthogonality_defect <= tol_orth && fiber_sample_defect <= tol_section;
  }
};

struct InvarianceReport {
  double structure_discrepancy = 0.0;
  double anchor_discrepancy = 0.0;
  double metric_discrepancy = 0.0;
  double max_discrepancy() const {
    return std::max({structure_discrepancy, anchor_discrepancy, metric_discrepancy});
  }
  bool passed = true;
};

/// ReducedStructure backed by a SymmetricSystem.
class SystemReduction final : public ReducedStructure {
 public:
  explicit SystemReduction(std::shared_ptr<const SymmetricSystem> system);

  const SymmetricSystem& system() const { return *sys_; }
  std::shared_ptr<const SymmetricSystem> system_ptr() const { return sys_; }

  const Chart& shape_chart() const override { return sys_->shape_chart; }
  std::size_t n_vertical() const override { return sys_->frame.n_vertical(); }
  std::size_t n_horizontal() const override { return sys_->frame.n_horizontal(); }

  StructureTable structure_functions_at(std::span<const double> qhat) const override;
  Matd anchors_at(std::span<const double> qhat) const override;
  Vec anchor_divergence(std::span<const double> qhat) const override;
  Matd fiber_metric_at(std::span<const double> qhat) const override;
  std::vector<Matd> fiber_metric_gradient(std::span<const double> qhat) const override;

  /// Same quantities at an arbitrary configuration q (used by the invariance check).
  StructureTable structure_functions_at_config(std::span<const double> q) const;
  Matd anchors_at_config(std::span<const double> q) const;
  Matd gram_at_config(std::span<const double> q) const;
  Matd gram_at(std::span<const double> qhat) const;

  InvarianceReport check_invariance(std::span<const double> qhat, double tol) const;
  SystemCheck check_system(std::span<const double> qhat) const;

 private:
  std::shared_ptr<const SymmetricSystem> sys_;
  std::vector<VectorField> joint_;

  template <class S>
  std::vector<S> section_at(std::span<const S> qhat) const;
  template <class S>
  Mat<S> anchors_generic(std::span<const S> q) const;
  template <class S>
  Mat<S> gram_generic(std::span<const S> q) const;
};

/// ReducedStructure from plain callables; derivatives default to central
/// differences. Used for synthetic structures and Lie-algebra data.
class FunctionalStructure final : public ReducedStructure {
 public:
  struct Spec {
    Chart chart;
    std::size_t n_vertical = 0;
    std::size_t n_horizontal = 0;
    std::function<StructureTable(std::span<const double>)> structure;
    std::function<Matd(std::span<const double>)> anchors;
    std::function<Matd(std::span<const double>)> fiber_metric;
  };
  explicit FunctionalStructure(Spec spec) : spec_(std::move(spec)) {}

  const Chart& shape_chart() const override { return spec_.chart; }
  std::size_t n_vertical() const override { return spec_.n_vertical; }
  std::size_t n_horizontal() const override { return spec_.n_horizontal; }
  StructureTable structure_functions_at(std::span<const double> qhat) const override;
  Matd anchors_at(std::span<const double> qhat) const override;
  Vec anchor_divergence(std::span<const double> qhat) const override;
  Matd fiber_metric_at(std::span<const double> qhat) const override;
  std::vector<Matd> fiber_metric_gradient(std::span<const double> qhat) const override;

 private:
  Spec spec_;
};

/// Central-difference step used throughout: h = 1e-5 * max(1, |x|).
inline double fd_step(double x) { return 1e-5 * std::max(1.0, std::abs(x)); }

}  // namespace nhm
