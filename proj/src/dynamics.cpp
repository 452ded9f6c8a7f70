#include "nhm/dynamics.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <ostream>

#include "nhm/expr.hpp"
#include "nhm/parallel.hpp"

namespace nhm {

BlowUp::BlowUp(const std::string& what, double time, Vec last_good)
    : std::runtime_error(what + " at t = " + format_number(time)), time_(time), last_(std::move(last_good)) {}

void Trajectory::write_csv(std::ostream& out) const {
  out << "t";
  for (const auto& n : state_names) out << "," << n;
  for (const auto& n : diagnostic_names) out << "," << n;
  out << "\n";
  for (std::size_t k = 0; k < times.size(); ++k) {
    out << format_number(times[k]);
    for (double v : states[k]) out << "," << format_number(v);
    if (k < diagnostics.size())
      for (double v : diagnostics[k]) out << "," << format_number(v);
    out << "\n";
  }
}

Vec rk4_step(const OdeRhs& rhs, std::span<const double> x, double h) {
  const std::size_t n = x.size();
  Vec tmp(n);
  Vec k1 = rhs(x);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
  Vec k2 = rhs(tmp);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
  Vec k3 = rhs(tmp);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + h * k3[i];
  Vec k4 = rhs(tmp);
  Vec out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return out;
}

namespace {

bool finite(std::span<const double> x) {
  for (double v : x)
    if (!std::isfinite(v)) return false;
  return true;
}

Vec advance(const OdeRhs& rhs, const Vec& x, double t, double h, const IntegrateOptions& opt, int level) {
  Vec y;
  try {
    y = rk4_step(rhs, x, h);
  } catch (const std::exception& e) {
    throw BlowUp(std::string("right-hand side failed: ") + e.what(), t, x);
  }
  if (!finite(y)) throw BlowUp("non-finite state", t + h, x);
  if (!opt.inside || opt.inside(y)) return y;
  if (level >= opt.max_halvings) throw BlowUp("state left the chart after " + std::to_string(level) + " step halvings", t, x);
  Vec mid = advance(rhs, x, t, 0.5 * h, opt, level + 1);
  return advance(rhs, mid, t + 0.5 * h, 0.5 * h, opt, level + 1);
}

template <class Visit>
void integrate(const OdeRhs& rhs, Vec x, double h, double T, const IntegrateOptions& opt, Visit&& visit) {
  if (!(h > 0.0) || !(T > 0.0)) throw std::invalid_argument("step h and horizon T must be positive");
  if (!finite(x)) throw BlowUp("non-finite initial state", 0.0, x);
  auto steps = static_cast<std::size_t>(std::ceil(T / h - 1e-9));
  visit(std::size_t{0}, 0.0, x);
  double t = 0.0;
  for (std::size_t k = 1; k <= steps; ++k) {
    double step = k == steps ? T - t : h;
    x = advance(rhs, x, t, step, opt, 0);
    t = k == steps ? T : t + h;
    visit(k, t, x);
  }
}

}  // namespace

Trajectory rk4_integrate(const OdeRhs& rhs, Vec x0, double h, double T, const IntegrateOptions& opt) {
  Trajectory tr;
  tr.h = h;
  tr.state_names = opt.state_names;
  tr.diagnostic_names = opt.diagnostic_names;
  if (tr.state_names.empty())
    for (std::size_t i = 0; i < x0.size(); ++i) tr.state_names.push_back("x" + std::to_string(i + 1));
  auto steps = static_cast<std::size_t>(std::ceil(T / h - 1e-9));
  const std::size_t every = std::max<std::size_t>(1, opt.sample_every);
  integrate(rhs, std::move(x0), h, T, opt, [&](std::size_t k, double t, const Vec& x) {
    if (k % every != 0 && k != steps) return;
    tr.times.push_back(t);
    tr.states.push_back(x);
    if (opt.diagnostics) tr.diagnostics.push_back(opt.diagnostics(x));
  });
  return tr;
}

Vec rk4_flow(const OdeRhs& rhs, Vec x0, double h, double T, const IntegrateOptions& opt) {
  Vec last;
  integrate(rhs, std::move(x0), h, T, opt, [&](std::size_t, double, const Vec& x) { last = x; });
  return last;
}

DriftStats ensemble_volume_drift(const OdeRhs& rhs, const StateFn& density, const std::vector<Vec>& cloud, double h,
                                 double T, double rel_edge, const IntegrateOptions& opt) {
  DriftStats st;
  st.members = cloud.size();
  if (cloud.empty()) return st;
  Vec mismatch(cloud.size(), 0.0);
  parallel_for(cloud.size(), [&](std::size_t m) {
    const Vec& x0 = cloud[m];
    const std::size_t d = x0.size();
    double scale = 1.0;
    for (double v : x0) scale = std::max(scale, std::abs(v));
    const double eps = rel_edge * scale;
    Vec f0v(1, density(x0));
    if (!(f0v[0] > 0.0)) throw std::domain_error("density is not positive on the cloud");
    Vec xt = rk4_flow(rhs, x0, h, T, opt);
    Eigen::MatrixXd j(d, d);
    for (std::size_t i = 0; i < d; ++i) {
      Vec v = x0;
      v[i] = x0[i] + eps;
      Vec fwd = rk4_flow(rhs, v, h, T, opt);
      v[i] = x0[i] - eps;
      Vec back = rk4_flow(rhs, v, h, T, opt);
      for (std::size_t r = 0; r < d; ++r)
        j(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) = (fwd[r] - back[r]) / (2.0 * eps);
    }
    double growth = std::abs(j.determinant());
    if (!(growth > 0.0)) throw std::domain_error("transported simplex is degenerate");
    mismatch[m] = std::abs(growth * density(xt) / f0v[0] - 1.0);
  });
  for (double v : mismatch) {
    st.max_mismatch = std::max(st.max_mismatch, v);
    st.mean_mismatch += v / static_cast<double>(mismatch.size());
  }
  return st;
}

}  // namespace nhm
