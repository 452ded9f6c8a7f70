#include "nhm/reduction.hpp"

#include <cmath>
#include <stdexcept>

namespace nhm {

double StructureTable::trace(std::size_t i) const {
  double s = 0.0;
  for (std::size_t j = 0; j < n_; ++j) s += (*this)(i, j, j);
  return s;
}

double StructureTable::max_abs_difference(const StructureTable& other) const {
  double worst = 0.0;
  for (std::size_t i = 0; i < c_.size(); ++i) worst = std::max(worst, std::abs(c_[i] - other.c_[i]));
  return worst;
}

Vec SymmetricSystem::section_point(std::span<const double> qhat) const {
  Vec q(section.size());
  for (std::size_t i = 0; i < section.size(); ++i) q[i] = section[i].eval(qhat, params);
  return q;
}

Vec SymmetricSystem::project(std::span<const double> q) const {
  Vec out(projection.size());
  for (std::size_t i = 0; i < projection.size(); ++i) out[i] = projection[i].eval(q, params);
  return out;
}

SystemReduction::SystemReduction(std::shared_ptr<const SymmetricSystem> system) : sys_(std::move(system)) {
  const auto& s = *sys_;
  if (!s.metric) throw std::invalid_argument("system has no metric");
  if (s.metric->dim() != s.q_chart.dim()) throw std::invalid_argument("metric dimension does not match the Q chart");
  if (s.projection.size() != s.shape_chart.dim())
    throw std::invalid_argument("projection must have one expression per shape coordinate");
  if (s.section.size() != s.q_chart.dim())
    throw std::invalid_argument("section must have one expression per Q coordinate");
  for (const auto& f : s.fiber_samples)
    if (f.size() != s.q_chart.dim()) throw std::invalid_argument("fiber sample must have one expression per Q coordinate");
  joint_ = s.frame.joint();
  for (const auto& f : joint_)
    if (f.dim() != s.q_chart.dim()) throw std::invalid_argument("frame field dimension does not match the Q chart");
  if (joint_.empty()) throw std::invalid_argument("empty constraint frame");
}

template <class S>
std::vector<S> SystemReduction::section_at(std::span<const S> qhat) const {
  std::vector<S> q;
  q.reserve(sys_->section.size());
  for (const auto& e : sys_->section) q.push_back(e.eval<S>(qhat, sys_->params));
  return q;
}

template <class S>
Mat<S> SystemReduction::anchors_generic(std::span<const S> q) const {
  using D = Dual<S>;
  const auto& hs = sys_->frame.horizontals;
  const std::size_t mhat = sys_->projection.size();
  Mat<S> a(mhat, hs.size());
  std::vector<D> along(q.size());
  for (std::size_t alpha = 0; alpha < hs.size(); ++alpha) {
    std::vector<S> y = hs[alpha].eval<S>(q, sys_->params);
    for (std::size_t i = 0; i < q.size(); ++i) along[i] = D(q[i], y[i]);
    for (std::size_t r = 0; r < mhat; ++r)
      a(r, alpha) = sys_->projection[r].eval<D>(std::span<const D>(along), sys_->params).d;
  }
  return a;
}

template <class S>
Mat<S> SystemReduction::gram_generic(std::span<const S> q) const {
  return gram_matrix<S>(*sys_->metric, joint_, q, sys_->params);
}

StructureTable SystemReduction::structure_functions_at_config(std::span<const double> q) const {
  const std::size_t n = joint_.size();
  FrameAt frame = FrameAt::evaluate(*sys_->metric, joint_, q, sys_->params);
  StructureTable c(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      Vec br = lie_bracket<double>(joint_[i], joint_[j], q, sys_->params);
      Vec y = frame.project(br);
      for (std::size_t k = 0; k < n; ++k) {
        c(i, j, k) = y[k];
        c(j, i, k) = -y[k];
      }
    }
  return c;
}

StructureTable SystemReduction::structure_functions_at(std::span<const double> qhat) const {
  Vec q = section_at<double>(qhat);
  return structure_functions_at_config(q);
}

Matd SystemReduction::anchors_at_config(std::span<const double> q) const { return anchors_generic<double>(q); }

Matd SystemReduction::anchors_at(std::span<const double> qhat) const {
  Vec q = section_at<double>(qhat);
  return anchors_generic<double>(q);
}

Vec SystemReduction::anchor_divergence(std::span<const double> qhat) const {
  const std::size_t mhat = qhat.size();
  Vec div(n_horizontal(), 0.0);
  std::vector<Dual1> seed(mhat);
  for (std::size_t i = 0; i < mhat; ++i) {
    for (std::size_t k = 0; k < mhat; ++k) seed[k] = Dual1(qhat[k], k == i ? 1.0 : 0.0);
    std::vector<Dual1> q = section_at<Dual1>(seed);
    Mat<Dual1> a = anchors_generic<Dual1>(q);
    for (std::size_t alpha = 0; alpha < div.size(); ++alpha) div[alpha] += a(i, alpha).d;
  }
  return div;
}

Matd SystemReduction::gram_at_config(std::span<const double> q) const { return gram_generic<double>(q); }

Matd SystemReduction::gram_at(std::span<const double> qhat) const {
  Vec q = section_at<double>(qhat);
  return gram_generic<double>(q);
}

Matd SystemReduction::fiber_metric_at(std::span<const double> qhat) const {
  Vec q = section_at<double>(qhat);
  Matd t = gram_generic<double>(q);
  auto l = cholesky(t);
  if (!l) throw DegenerateFrame("singular frame Gram matrix", q);
  return cholesky_inverse(*l);
}

std::vector<Matd> SystemReduction::fiber_metric_gradient(std::span<const double> qhat) const {
  const std::size_t mhat = qhat.size();
  const std::size_t n = rank();
  Matd inv = fiber_metric_at(qhat);
  std::vector<Matd> out;
  out.reserve(mhat);
  std::vector<Dual1> seed(mhat);
  for (std::size_t i = 0; i < mhat; ++i) {
    for (std::size_t k = 0; k < mhat; ++k) seed[k] = Dual1(qhat[k], k == i ? 1.0 : 0.0);
    std::vector<Dual1> q = section_at<Dual1>(seed);
    Mat<Dual1> t = gram_generic<Dual1>(q);
    // d(T^-1) = -T^-1 dT T^-1
    Matd dt(n, n);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c) dt(r, c) = t(r, c).d;
    Matd tmp(n, n), d(n, n);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c) {
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k) s += dt(r, k) * inv(k, c);
        tmp(r, c) = s;
      }
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < n; ++c) {
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k) s += inv(r, k) * tmp(k, c);
        d(r, c) = -s;
      }
    out.push_back(std::move(d));
  }
  return out;
}

InvarianceReport SystemReduction::check_invariance(std::span<const double> qhat, double tol) const {
  InvarianceReport rep;
  if (sys_->fiber_samples.empty()) return rep;
  Vec q0 = section_at<double>(qhat);
  StructureTable c0 = structure_functions_at_config(q0);
  Matd a0 = anchors_at_config(q0);
  Matd t0 = gram_at_config(q0);
  for (const auto& sample : sys_->fiber_samples) {
    Vec q(sample.size());
    for (std::size_t i = 0; i < sample.size(); ++i) q[i] = sample[i].eval(qhat, sys_->params);
    rep.structure_discrepancy = std::max(rep.structure_discrepancy, structure_functions_at_config(q).max_abs_difference(c0));
    Matd a = anchors_at_config(q);
    for (std::size_t r = 0; r < a.rows(); ++r)
      for (std::size_t c = 0; c < a.cols(); ++c)
        rep.anchor_discrepancy = std::max(rep.anchor_discrepancy, std::abs(a(r, c) - a0(r, c)));
    Matd t = gram_at_config(q);
    for (std::size_t r = 0; r < t.rows(); ++r)
      for (std::size_t c = 0; c < t.cols(); ++c)
        rep.metric_discrepancy = std::max(rep.metric_discrepancy, std::abs(t(r, c) - t0(r, c)));
  }
  rep.passed = rep.max_discrepancy() <= tol;
  return rep;
}

SystemCheck SystemReduction::check_system(std::span<const double> qhat) const {
  SystemCheck chk;
  Vec q = section_at<double>(qhat);
  Vec back = sys_->project(q);
  for (std::size_t i = 0; i < back.size(); ++i) chk.section_defect = std::max(chk.section_defect, std::abs(back[i] - qhat[i]));
  for (const auto& sample : sys_->fiber_samples) {
    Vec qs(sample.size());
    for (std::size_t i = 0; i < sample.size(); ++i) qs[i] = sample[i].eval(qhat, sys_->params);
    Vec b = sys_->project(qs);
    for (std::size_t i = 0; i < b.size(); ++i) chk.fiber_sample_defect = std::max(chk.fiber_sample_defect, std::abs(b[i] - qhat[i]));
  }
  std::vector<Dual1> along(q.size());
  for (const auto& z : sys_->frame.verticals) {
    Vec zv = z.eval<double>(q, sys_->params);
    for (std::size_t i = 0; i < q.size(); ++i) along[i] = Dual1(q[i], zv[i]);
    for (const auto& p : sys_->projection)
      chk.vertical_defect = std::max(chk.vertical_defect, std::abs(p.eval<Dual1>(std::span<const Dual1>(along), sys_->params).d));
  }
  chk.orthogonality_defect = split_orthogonality_defect(*sys_->metric, sys_->frame, q, sys_->params);
  chk.gram_spd = cholesky(gram_generic<double>(q)).has_value();
  return chk;
}

// ------------------------------------------------------------- functional

StructureTable FunctionalStructure::structure_functions_at(std::span<const double> qhat) const {
  if (spec_.structure) return spec_.structure(qhat);
  return StructureTable(rank());
}

Matd FunctionalStructure::anchors_at(std::span<const double> qhat) const {
  if (spec_.anchors) return spec_.anchors(qhat);
  return Matd(shape_dim(), n_horizontal());
}

Vec FunctionalStructure::anchor_divergence(std::span<const double> qhat) const {
  Vec div(n_horizontal(), 0.0);
  if (!spec_.anchors) return div;
  Vec x(qhat.begin(), qhat.end());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double h = fd_step(x[i]);
    double keep = x[i];
    x[i] = keep + h;
    Matd ap = spec_.anchors(x);
    x[i] = keep - h;
    Matd am = spec_.anchors(x);
    x[i] = keep;
    for (std::size_t a = 0; a < div.size(); ++a) div[a] += (ap(i, a) - am(i, a)) / (2.0 * h);
  }
  return div;
}

Matd FunctionalStructure::fiber_metric_at(std::span<const double> qhat) const {
  if (spec_.fiber_metric) return spec_.fiber_metric(qhat);
  return Matd::identity(rank());
}

std::vector<Matd> FunctionalStructure::fiber_metric_gradient(std::span<const double> qhat) const {
  std::vector<Matd> out;
  Vec x(qhat.begin(), qhat.end());
  for (std::size_t i = 0; i < x.size(); ++i) {
    Matd d(rank(), rank());
    if (spec_.fiber_metric) {
      double h = fd_step(x[i]);
      double keep = x[i];
      x[i] = keep + h;
      Matd gp = spec_.fiber_metric(x);
      x[i] = keep - h;
      Matd gm = spec_.fiber_metric(x);
      x[i] = keep;
      for (std::size_t r = 0; r < rank(); ++r)
        for (std::size_t c = 0; c < rank(); ++c) d(r, c) = (gp(r, c) - gm(r, c)) / (2.0 * h);
    }
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace nhm
