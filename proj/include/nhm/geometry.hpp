#pragma once

// Charts, vector fields and metrics in a single coordinate chart, plus the
// commutator and the metric-orthogonal projection onto a frame.

#include <algorithm>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "nhm/dense.hpp"
#include "nhm/dual.hpp"
#include "nhm/expr.hpp"

namespace nhm {

/// Coordinates on an open box. Sampling stays `margin` away from each face.
struct Chart {
  std::vector<std::string> names;
  std::vector<double> lo;
  std::vector<double> hi;
  std::vector<double> margin;

  std::size_t dim() const { return names.size(); }
  double sample_lo(std::size_t i) const { return lo[i] + margin[i]; }
  double sample_hi(std::size_t i) const { return hi[i] - margin[i]; }
  bool inside_margin(std::span<const double> q) const;
  Vec random_point(std::mt19937_64& rng) const;
  void validate() const;
};

/// Thrown when a Gram matrix fails its Cholesky factorization.
class DegenerateFrame : public std::runtime_error {
 public:
  DegenerateFrame(const std::string& what, Vec point);
  const Vec& point() const { return point_; }

 private:
  Vec point_;
};

class MetricField;

/// Vector field in the coordinate frame. Either explicit component
/// expressions, or X - sum_ab G(X,Z_a) (G_ZZ^-1)^ab Z_b evaluated on demand.
class VectorField {
 public:
  VectorField() = default;
  explicit VectorField(std::vector<Expression> components);
  static VectorField parse(std::span<const std::string> components, std::span<const std::string> vars,
                           std::span<const std::string> params = {});
  static VectorField orthogonalized(VectorField candidate, std::vector<VectorField> verticals,
                                    std::shared_ptr<const MetricField> metric);

  std::size_t dim() const;
  bool is_orthogonalized() const { return ortho_ != nullptr; }
  const std::vector<Expression>& components() const { return components_; }

  template <class S>
  std::vector<S> eval(std::span<const S> q, std::span<const double> params) const;
  Vec operator()(std::span<const double> q, std::span<const double> params) const {
    return eval<double>(q, params);
  }

 private:
  struct Ortho {
    std::shared_ptr<const VectorField> candidate;
    std::vector<VectorField> verticals;
    std::shared_ptr<const MetricField> metric;
  };
  std::vector<Expression> components_;
  std::shared_ptr<const Ortho> ortho_;
};

/// Symmetric (0,2) tensor in the coordinate frame. Either upper-triangle
/// component expressions, or a kinetic form L^T M L where L maps coordinate
/// velocities to k body velocities and M is a k x k symmetric mass matrix.
class MetricField {
 public:
  MetricField() = default;
  static MetricField from_components(std::size_t dim, std::vector<Expression> upper);
  static MetricField from_kinetic(std::vector<std::vector<Expression>> velocity_map,
                                  std::vector<Expression> mass_upper);

  std::size_t dim() const { return dim_; }
  bool is_kinetic() const { return !velocity_map_.empty(); }
  const std::vector<Expression>& upper() const { return upper_; }
  const std::vector<std::vector<Expression>>& velocity_map() const { return velocity_map_; }
  const std::vector<Expression>& mass_upper() const { return mass_upper_; }

  /// Repeated calls at the same point on the same thread reuse the last result.
  template <class S>
  Mat<S> eval(std::span<const S> q, std::span<const double> params) const;
  Matd operator()(std::span<const double> q, std::span<const double> params) const {
    return eval<double>(q, params);
  }

 private:
  template <class S>
  Mat<S> compute(std::span<const S> q, std::span<const double> params) const;

  std::size_t id_ = 0;
  std::size_t dim_ = 0;
  std::vector<Expression> upper_;
  std::vector<std::vector<Expression>> velocity_map_;
  std::vector<Expression> mass_upper_;
  // structurally nonzero entries of the velocity map (per row) and mass matrix (i <= j)
  std::vector<std::vector<std::size_t>> map_support_;
  std::vector<std::pair<std::size_t, std::size_t>> mass_support_;
};

/// Constraint frame adapted to D = (D cap Vp) + H: verticals first.
struct FrameSplit {
  std::vector<VectorField> verticals;    // Z_a
  std::vector<VectorField> horizontals;  // Y_alpha

  std::size_t n_vertical() const { return verticals.size(); }
  std::size_t n_horizontal() const { return horizontals.size(); }
  std::size_t size() const { return verticals.size() + horizontals.size(); }
  std::vector<VectorField> joint() const;
};

inline std::size_t upper_index(std::size_t n, std::size_t i, std::size_t j) {
  if (i > j) std::swap(i, j);
  return i * n - i * (i + 1) / 2 + j;
}

template <class S>
S metric_pair(const Mat<S>& g, std::span<const S> u, std::span<const S> v) {
  S s(0.0);
  for (std::size_t i = 0; i < g.rows(); ++i) {
    S gi(0.0);
    for (std::size_t j = 0; j < g.cols(); ++j) gi += g(i, j) * v[j];
    s += u[i] * gi;
  }
  return s;
}

// ---------------------------------------------------------------- templates

template <class S>
bool same_scalar(const S& a, const S& b) {
  if constexpr (std::is_same_v<S, double>)
    return a == b;
  else
    return same_scalar(a.v, b.v) && same_scalar(a.d, b.d);
}

template <class S>
Mat<S> MetricField::eval(std::span<const S> q, std::span<const double> params) const {
  struct Last {
    std::size_t id = 0;
    std::vector<S> q;
    Vec params;
    Mat<S> g;
  };
  thread_local Last last;
  if (last.id == id_ && id_ != 0 && last.q.size() == q.size() && last.params.size() == params.size() &&
      std::equal(q.begin(), q.end(), last.q.begin(), same_scalar<S>) &&
      std::equal(params.begin(), params.end(), last.params.begin()))
    return last.g;
  Mat<S> g = compute<S>(q, params);
  last.id = id_;
  last.q.assign(q.begin(), q.end());
  last.params.assign(params.begin(), params.end());
  last.g = g;
  return g;
}

template <class S>
Mat<S> MetricField::compute(std::span<const S> q, std::span<const double> params) const {
  Mat<S> g(dim_, dim_);
  if (!is_kinetic()) {
    for (std::size_t i = 0; i < dim_; ++i)
      for (std::size_t j = i; j < dim_; ++j) {
        S v = upper_[upper_index(dim_, i, j)].eval<S>(q, params);
        g(i, j) = v;
        g(j, i) = v;
      }
    return g;
  }
  const std::size_t k = velocity_map_.size();
  Mat<S> l(k, dim_);
  for (std::size_t r = 0; r < k; ++r)
    for (std::size_t c : map_support_[r]) l(r, c) = velocity_map_[r][c].eval<S>(q, params);
  Mat<S> mass(k, k);
  for (auto [i, j] : mass_support_) {
    S v = mass_upper_[upper_index(k, i, j)].template eval<S>(q, params);
    mass(i, j) = v;
    mass(j, i) = v;
  }
  Mat<S> ml(k, dim_);
  for (auto [i, j] : mass_support_) {
    for (std::size_t c : map_support_[j]) ml(i, c) += mass(i, j) * l(j, c);
    if (i != j)
      for (std::size_t c : map_support_[i]) ml(j, c) += mass(j, i) * l(i, c);
  }
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t a : map_support_[i])
      for (std::size_t b = 0; b < dim_; ++b) g(a, b) += l(i, a) * ml(i, b);
  for (std::size_t a = 0; a < dim_; ++a)
    for (std::size_t b = a + 1; b < dim_; ++b) g(b, a) = g(a, b);
  return g;
}

template <class S>
std::vector<S> VectorField::eval(std::span<const S> q, std::span<const double> params) const {
  if (!ortho_) {
    std::vector<S> out;
    out.reserve(components_.size());
    for (const auto& c : components_) out.push_back(c.eval<S>(q, params));
    return out;
  }
  std::vector<S> x = ortho_->candidate->eval<S>(q, params);
  const auto& zs = ortho_->verticals;
  if (zs.empty()) return x;
  Mat<S> g = ortho_->metric->eval<S>(q, params);
  std::vector<std::vector<S>> z;
  z.reserve(zs.size());
  for (const auto& f : zs) z.push_back(f.eval<S>(q, params));
  const std::size_t na = z.size();
  Mat<S> gzz(na, na);
  std::vector<S> b(na);
  for (std::size_t a = 0; a < na; ++a) {
    b[a] = metric_pair<S>(g, x, z[a]);
    for (std::size_t c = a; c < na; ++c) {
      S v = metric_pair<S>(g, z[a], z[c]);
      gzz(a, c) = v;
      gzz(c, a) = v;
    }
  }
  auto l = cholesky(gzz);
  if (!l) {
    Vec at(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) at[i] = value_of(q[i]);
    throw DegenerateFrame("degenerate vertical Gram block while orthogonalizing", at);
  }
  auto coef = cholesky_solve<S>(*l, b);
  for (std::size_t a = 0; a < na; ++a)
    for (std::size_t i = 0; i < x.size(); ++i) x[i] -= coef[a] * z[a][i];
  return x;
}

/// [X,Y]^i = X^j d_j Y^i - Y^j d_j X^i; inner derivatives are directional
/// dual passes, so the result is exact up to rounding.
template <class S>
std::vector<S> lie_bracket(const VectorField& x, const VectorField& y, std::span<const S> q,
                           std::span<const double> params) {
  using D = Dual<S>;
  const std::size_t m = q.size();
  std::vector<S> xq = x.eval<S>(q, params);
  std::vector<S> yq = y.eval<S>(q, params);
  std::vector<D> along(m);
  for (std::size_t i = 0; i < m; ++i) along[i] = D(q[i], xq[i]);
  std::vector<D> y_along_x = y.eval<D>(along, params);
  for (std::size_t i = 0; i < m; ++i) along[i] = D(q[i], yq[i]);
  std::vector<D> x_along_y = x.eval<D>(along, params);
  std::vector<S> out(m);
  for (std::size_t i = 0; i < m; ++i) out[i] = y_along_x[i].d - x_along_y[i].d;
  return out;
}

inline Vec lie_bracket(const VectorField& x, const VectorField& y, std::span<const double> q,
                       std::span<const double> params = {}) {
  return lie_bracket<double>(x, y, q, params);
}

/// G(q)(v_i, v_j) for already-evaluated vectors.
template <class S>
Mat<S> gram_of(const Mat<S>& g, const std::vector<std::vector<S>>& vs) {
  const std::size_t n = vs.size();
  Mat<S> t(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      S v = metric_pair<S>(g, vs[i], vs[j]);
      t(i, j) = v;
      t(j, i) = v;
    }
  return t;
}

template <class S>
Mat<S> gram_matrix(const MetricField& metric, std::span<const VectorField> fields, std::span<const S> q,
                   std::span<const double> params) {
  Mat<S> g = metric.eval<S>(q, params);
  std::vector<std::vector<S>> vs;
  vs.reserve(fields.size());
  for (const auto& f : fields) vs.push_back(f.eval<S>(q, params));
  return gram_of(g, vs);
}

inline Matd gram_matrix(const MetricField& metric, std::span<const VectorField> fields, std::span<const double> q,
                        std::span<const double> params = {}) {
  return gram_matrix<double>(metric, fields, q, params);
}

/// A frame evaluated at one point with its factored Gram matrix, reused for
/// several projections.
struct FrameAt {
  Matd metric;
  std::vector<Vec> vectors;
  Matd gram;
  Matd chol;

  static FrameAt evaluate(const MetricField& metric, std::span<const VectorField> frame, std::span<const double> q,
                          std::span<const double> params);
  /// Coefficients y with T y = b, b_i = G(frame_i, v).
  Vec project(std::span<const double> v) const;
  /// sum_i y_i frame_i
  Vec expand(std::span<const double> coefficients) const;
};

inline Vec project_onto_frame(const MetricField& metric, std::span<const VectorField> frame,
                              std::span<const double> q, std::span<const double> v,
                              std::span<const double> params = {}) {
  return FrameAt::evaluate(metric, frame, q, params).project(v);
}

/// Y_alpha = X_alpha - sum_ab G(X_alpha,Z_a)(G_ZZ^-1)^ab Z_b.
FrameSplit orthogonalize_split(std::shared_ptr<const MetricField> metric, std::vector<VectorField> verticals,
                               std::vector<VectorField> candidates);

/// Largest |G(Z_a, Y_alpha)| relative to sqrt(G(Z,Z) G(Y,Y)) at q.
double split_orthogonality_defect(const MetricField& metric, const FrameSplit& split, std::span<const double> q,
                                  std::span<const double> params);

}  // namespace nhm
