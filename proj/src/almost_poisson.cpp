#include "nhm/almost_poisson.hpp"

#include <stdexcept>

namespace nhm {

Vec PhaseState::pack() const {
  Vec x = qhat;
  x.insert(x.end(), p.begin(), p.end());
  return x;
}

PhaseState PhaseState::unpack(std::span<const double> x, std::size_t shape_dim) {
  if (x.size() < shape_dim) throw std::invalid_argument("phase vector shorter than the shape dimension");
  PhaseState s;
  s.qhat.assign(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(shape_dim));
  s.p.assign(x.begin() + static_cast<std::ptrdiff_t>(shape_dim), x.end());
  return s;
}

double KineticHamiltonian::operator()(const PhaseState& x) const {
  Vec gp = dp(x);
  return 0.5 * dot<double>(gp, x.p);
}

Vec KineticHamiltonian::dp(const PhaseState& x) const {
  Matd g = rs_->fiber_metric_at(x.qhat);
  return mat_vec<double>(g, x.p);
}

Vec KineticHamiltonian::dq(const PhaseState& x) const {
  std::vector<Matd> dg = rs_->fiber_metric_gradient(x.qhat);
  Vec out(dg.size());
  for (std::size_t i = 0; i < dg.size(); ++i) out[i] = 0.5 * dot<double>(x.p, mat_vec<double>(dg[i], x.p));
  return out;
}

double energy(const KineticHamiltonian& h, const PhaseState& x) { return h(x); }

Vec hamilton_rhs(const ReducedStructure& rs, const KineticHamiltonian& h, const PhaseState& x) {
  const std::size_t mhat = rs.shape_dim();
  const std::size_t na = rs.n_vertical();
  const std::size_t n = rs.rank();
  if (x.qhat.size() != mhat || x.p.size() != n)
    throw std::invalid_argument("phase state has dimension " + std::to_string(x.size()) + ", expected " +
                                std::to_string(mhat + n));
  StructureTable c = rs.structure_functions_at(x.qhat);
  Matd a = rs.anchors_at(x.qhat);
  Vec hp = h.dp(x);
  Vec hq = h.dq(x);

  Vec out(mhat + n, 0.0);
  for (std::size_t i = 0; i < mhat; ++i)
    for (std::size_t al = 0; al < rs.n_horizontal(); ++al) out[i] += a(i, al) * hp[na + al];
  // C_IJ^K p_K, reused for every I
  Matd cp(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += c(i, j, k) * x.p[k];
      cp(i, j) = s;
    }
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += cp(i, j) * hp[j];
    if (i >= na)
      for (std::size_t r = 0; r < mhat; ++r) s += a(r, i - na) * hq[r];
    out[mhat + i] = -s;
  }
  return out;
}

Vec hamilton_rhs(const ReducedStructure& rs, const KineticHamiltonian& h, std::span<const double> x) {
  return hamilton_rhs(rs, h, PhaseState::unpack(x, rs.shape_dim()));
}

Vec modular_components(const ReducedStructure& rs, std::span<const double> qhat) {
  const std::size_t na = rs.n_vertical();
  StructureTable c = rs.structure_functions_at(qhat);
  Vec div = rs.anchor_divergence(qhat);
  Vec out(rs.rank());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c.trace(i) + (i >= na ? div[i - na] : 0.0);
  return out;
}

double bracket(const ReducedStructure& rs, std::span<const double> qhat, std::span<const double> p,
               const PhaseGradient& df, const PhaseGradient& dg) {
  const std::size_t na = rs.n_vertical();
  const std::size_t n = rs.rank();
  StructureTable c = rs.structure_functions_at(qhat);
  Matd a = rs.anchors_at(qhat);
  double s = 0.0;
  for (std::size_t al = 0; al < rs.n_horizontal(); ++al)
    for (std::size_t i = 0; i < rs.shape_dim(); ++i)
      s += a(i, al) * (df.dq[i] * dg.dp[na + al] - df.dp[na + al] * dg.dq[i]);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double ck = 0.0;
      for (std::size_t k = 0; k < n; ++k) ck += c(i, j, k) * p[k];
      s -= ck * df.dp[i] * dg.dp[j];
    }
  return s;
}

double QuadraticFunction::operator()(std::span<const double> x) const {
  double s = c;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!a.empty()) s += a[i] * x[i];
    if (q.rows() > 0)
      for (std::size_t j = 0; j < x.size(); ++j) s += 0.5 * x[i] * q(i, j) * x[j];
  }
  return s;
}

PhaseGradient QuadraticFunction::gradient(const PhaseState& x) const {
  Vec v = x.pack();
  Vec g(v.size(), 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!a.empty()) g[i] = a[i];
    if (q.rows() > 0)
      for (std::size_t j = 0; j < v.size(); ++j) g[i] += 0.5 * (q(i, j) + q(j, i)) * v[j];
  }
  PhaseGradient out;
  out.dq.assign(g.begin(), g.begin() + static_cast<std::ptrdiff_t>(x.qhat.size()));
  out.dp.assign(g.begin() + static_cast<std::ptrdiff_t>(x.qhat.size()), g.end());
  return out;
}

double bracket_skewness_check(const ReducedStructure& rs, const QuadraticFunction& f, const QuadraticFunction& g,
                              const PhaseState& x) {
  PhaseGradient df = f.gradient(x);
  PhaseGradient dg = g.gradient(x);
  return std::abs(bracket(rs, x.qhat, x.p, df, dg) + bracket(rs, x.qhat, x.p, dg, df));
}

}  // namespace nhm
