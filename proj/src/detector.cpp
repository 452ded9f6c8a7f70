#include "nhm/detector.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <map>

#include "nhm/parallel.hpp"

namespace nhm {

namespace {

// Step of the nested central differences in the corank-1 elimination.
constexpr double kElimStep = 5e-4;

struct GaussRule {
  Vec t, w;  // on [0, 1]
};

const GaussRule& gauss5() {
  static const GaussRule rule = [] {
    using Q = boost::math::quadrature::gauss<double, 5>;
    GaussRule g;
    const auto& a = Q::abscissa();
    const auto& w = Q::weights();
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i] == 0.0) {
        g.t.push_back(0.5);
        g.w.push_back(0.5 * w[i]);
      } else {
        g.t.push_back(0.5 - 0.5 * a[i]);
        g.w.push_back(0.5 * w[i]);
        g.t.push_back(0.5 + 0.5 * a[i]);
        g.w.push_back(0.5 * w[i]);
      }
    }
    return g;
  }();
  return rule;
}

double max_abs_upper(const TwoForm& f, std::size_t* where_i = nullptr, std::size_t* where_j = nullptr) {
  double worst = 0.0;
  for (std::size_t i = 0; i < f.rows(); ++i)
    for (std::size_t j = i + 1; j < f.cols(); ++j)
      if (std::abs(f(i, j)) > worst) {
        worst = std::abs(f(i, j));
        if (where_i) *where_i = i;
        if (where_j) *where_j = j;
      }
  return worst;
}

Vec column(const Matd& m, std::size_t c) {
  Vec v(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) v[r] = m(r, c);
  return v;
}

void align(Vec& beta, std::span<const double> ref) {
  if (dot<double>(beta, ref) < 0.0)
    for (double& b : beta) b = -b;
}

// (a ^ b)_{ijk} for a 2-form a and 1-form b, over i < j < k.
Vec wedge21(const TwoForm& a, std::span<const double> b) {
  const std::size_t m = b.size();
  Vec out;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j)
      for (std::size_t k = j + 1; k < m; ++k) out.push_back(a(i, j) * b[k] - a(i, k) * b[j] + a(j, k) * b[i]);
  return out;
}

double hermite(double y0, double d0, double y1, double d1, double len, double t) {
  double t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * len * d0 + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * len * d1;
}

std::string point_text(const Chart& chart, std::span<const double> x) {
  std::string s = "(";
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (i) s += ", ";
    s += chart.names[i] + "=" + format_number(x[i]);
  }
  return s + ")";
}

// omega0 and beta at integer offsets q + h*o around a point, memoized.
class Stencil {
 public:
  Stencil(const ReducedStructure& rs, std::span<const double> q, Vec beta_ref, double sv_rel)
      : rs_(rs), q_(q.begin(), q.end()), ref_(std::move(beta_ref)), sv_rel_(sv_rel) {
    h_.resize(q_.size());
    for (std::size_t i = 0; i < q_.size(); ++i) h_[i] = kElimStep * std::max(1.0, std::abs(q_[i]));
  }

  struct Entry {
    Vec omega0, beta;
  };

  const Entry& at(const std::vector<int>& o) {
    auto it = cache_.find(o);
    if (it != cache_.end()) return it->second;
    Vec x = q_;
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += o[i] * h_[i];
    OmegaPoint op = omega_at(rs_, x, sv_rel_);
    if (op.corank() != 1) throw RankDegenerate("corank changes near " + point_text(rs_.shape_chart(), x));
    Entry e{op.omega0, column(op.annihilator, 0)};
    if (!ref_.empty()) align(e.beta, ref_);
    return cache_.emplace(o, std::move(e)).first->second;
  }

  struct Local {
    double lambda = 0.0;
    double pairing = 0.0;  // |d beta ^ beta|^2
    TwoForm domega, dbeta;
    Vec beta;
  };

  // lambda from (d omega0 + lambda d beta) ^ beta = 0 at offset o
  Local local(const std::vector<int>& o) {
    const std::size_t m = q_.size();
    Local out;
    out.beta = at(o).beta;
    Matd dw(m, m), db(m, m);  // dw(i, j) = d_i omega0_j
    for (std::size_t i = 0; i < m; ++i) {
      auto op = o, om = o;
      ++op[i];
      --om[i];
      const Entry& ep = at(op);
      const Entry& em = at(om);
      for (std::size_t j = 0; j < m; ++j) {
        dw(i, j) = (ep.omega0[j] - em.omega0[j]) / (2.0 * h_[i]);
        db(i, j) = (ep.beta[j] - em.beta[j]) / (2.0 * h_[i]);
      }
    }
    out.domega = TwoForm(m, m);
    out.dbeta = TwoForm(m, m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        out.domega(i, j) = dw(i, j) - dw(j, i);
        out.dbeta(i, j) = db(i, j) - db(j, i);
      }
    Vec wb = wedge21(out.domega, out.beta);
    Vec bb = wedge21(out.dbeta, out.beta);
    double num = 0.0;
    for (std::size_t t = 0; t < bb.size(); ++t) {
      num += wb[t] * bb[t];
      out.pairing += bb[t] * bb[t];
    }
    out.lambda = out.pairing > 0.0 ? -num / out.pairing : 0.0;
    return out;
  }

  double h(std::size_t i) const { return h_[i]; }

 private:
  const ReducedStructure& rs_;
  Vec q_;
  Vec ref_;
  double sv_rel_;
  Vec h_;
  std::map<std::vector<int>, Entry> cache_;
};

EliminatedPoint eliminate(const ReducedStructure& rs, std::span<const double> q, const Vec& beta_ref, double sv_rel,
                          double* pairing = nullptr) {
  const std::size_t m = q.size();
  Stencil st(rs, q, beta_ref, sv_rel);
  std::vector<int> zero(m, 0);
  Stencil::Local c = st.local(zero);
  EliminatedPoint out;
  out.lambda = c.lambda;
  out.beta = c.beta;
  out.lambda_gradient.assign(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    auto op = zero, om = zero;
    op[i] = 1;
    om[i] = -1;
    out.lambda_gradient[i] = (st.local(op).lambda - st.local(om).lambda) / (2.0 * st.h(i));
  }
  out.residual = TwoForm(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      out.residual(i, j) = c.domega(i, j) + out.lambda_gradient[i] * c.beta[j] -
                           out.lambda_gradient[j] * c.beta[i] + c.lambda * c.dbeta(i, j);
  if (pairing) *pairing = c.pairing;
  return out;
}

// Grid central differences, one-sided at the ends.
struct GridDiff {
  std::size_t lo, hi;
  double scale;
};

GridDiff grid_diff(const Grid& g, std::size_t node, std::size_t axis) {
  auto idx = g.multi_index(node);
  std::size_t s = g.stride(axis);
  std::size_t n = g.count(axis);
  double h = g.spacing(axis);
  if (idx[axis] == 0) return {node, node + s, 1.0 / h};
  if (idx[axis] == n - 1) return {node - s, node, 1.0 / h};
  return {node - s, node + s, 0.5 / h};
}

ClosednessResult least_squares_lambda(const OmegaFamily& fam, const std::vector<Vec>& beta) {
  const Grid& g = fam.grid;
  const std::size_t m = g.dim(), n = g.size();
  ClosednessResult out;
  out.method = "least-squares";
  out.beta = beta;
  std::vector<Eigen::Triplet<double>> trip;
  std::vector<double> rhs;
  std::vector<std::size_t> row_node;
  for (std::size_t node = 0; node < n; ++node)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i + 1; j < m; ++j) {
        GridDiff di = grid_diff(g, node, i), dj = grid_diff(g, node, j);
        std::size_t row = rhs.size();
        // D_i(omega0_j + lambda beta_j) - D_j(omega0_i + lambda beta_i) = 0
        double b = di.scale * (fam.nodes[di.hi].omega0[j] - fam.nodes[di.lo].omega0[j]) -
                   dj.scale * (fam.nodes[dj.hi].omega0[i] - fam.nodes[dj.lo].omega0[i]);
        trip.emplace_back(row, di.hi, di.scale * beta[di.hi][j]);
        trip.emplace_back(row, di.lo, -di.scale * beta[di.lo][j]);
        trip.emplace_back(row, dj.hi, -dj.scale * beta[dj.hi][i]);
        trip.emplace_back(row, dj.lo, dj.scale * beta[dj.lo][i]);
        rhs.push_back(-b);
        row_node.push_back(node);
      }
  out.lambda.assign(n, 0.0);
  out.lambda_gradient.assign(n, Vec(m, 0.0));
  if (rhs.empty()) return out;
  Eigen::SparseMatrix<double> a(static_cast<Eigen::Index>(rhs.size()), static_cast<Eigen::Index>(n));
  a.setFromTriplets(trip.begin(), trip.end());
  Eigen::VectorXd b = Eigen::Map<Eigen::VectorXd>(rhs.data(), static_cast<Eigen::Index>(rhs.size()));
  Eigen::SparseMatrix<double> normal = a.transpose() * a;
  // the homogeneous equation d(lambda beta) = 0 may have solutions; regularize
  for (Eigen::Index k = 0; k < normal.rows(); ++k) normal.coeffRef(k, k) += 1e-12;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(normal);
  if (solver.info() != Eigen::Success) throw RankDegenerate("least-squares system for lambda failed to factor");
  Eigen::VectorXd lam = solver.solve(a.transpose() * b);
  Eigen::VectorXd r = a * lam - b;
  for (Eigen::Index k = 0; k < r.size(); ++k)
    if (std::abs(r(k)) > out.residual) {
      out.residual = std::abs(r(k));
      out.worst_node = row_node[static_cast<std::size_t>(k)];
    }
  for (std::size_t node = 0; node < n; ++node) {
    out.lambda[node] = lam(static_cast<Eigen::Index>(node));
  }
  for (std::size_t node = 0; node < n; ++node)
    for (std::size_t i = 0; i < m; ++i) {
      GridDiff d = grid_diff(g, node, i);
      out.lambda_gradient[node][i] = d.scale * (out.lambda[d.hi] - out.lambda[d.lo]);
    }
  out.least_squares_residual = out.residual;
  return out;
}

}  // namespace

// ------------------------------------------------------------------- Grid

Grid::Grid(const Chart& chart, std::size_t per_axis) {
  if (per_axis < 2) throw std::invalid_argument("grid needs at least 2 points per axis");
  std::vector<Vec> axes(chart.dim());
  for (std::size_t a = 0; a < chart.dim(); ++a) {
    double lo = chart.sample_lo(a), hi = chart.sample_hi(a);
    axes[a].resize(per_axis);
    for (std::size_t k = 0; k < per_axis; ++k)
      axes[a][k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(per_axis - 1);
  }
  *this = from_axes(std::move(axes));
}

Grid Grid::from_axes(std::vector<Vec> axes) {
  Grid g;
  g.axes_ = std::move(axes);
  g.strides_.assign(g.axes_.size(), 1);
  g.size_ = 1;
  for (std::size_t a = g.axes_.size(); a-- > 0;) {
    g.strides_[a] = g.size_;
    g.size_ *= g.axes_[a].size();
  }
  return g;
}

std::vector<std::size_t> Grid::multi_index(std::size_t flat) const {
  std::vector<std::size_t> idx(dim());
  for (std::size_t a = 0; a < dim(); ++a) {
    idx[a] = flat / strides_[a];
    flat %= strides_[a];
  }
  return idx;
}

std::size_t Grid::flat_index(std::span<const std::size_t> idx) const {
  std::size_t f = 0;
  for (std::size_t a = 0; a < dim(); ++a) f += idx[a] * strides_[a];
  return f;
}

Vec Grid::point(std::size_t flat) const {
  auto idx = multi_index(flat);
  Vec x(dim());
  for (std::size_t a = 0; a < dim(); ++a) x[a] = axes_[a][idx[a]];
  return x;
}

std::size_t Grid::nearest(std::span<const double> x) const {
  std::vector<std::size_t> idx(dim());
  for (std::size_t a = 0; a < dim(); ++a) {
    const Vec& ax = axes_[a];
    if (ax.size() == 1) continue;
    double t = (x[a] - ax.front()) / (ax[1] - ax[0]);
    long k = std::lround(t);
    idx[a] = static_cast<std::size_t>(std::clamp<long>(k, 0, static_cast<long>(ax.size()) - 1));
  }
  return flat_index(idx);
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::measure_exists:
      return "measure-exists";
    case Verdict::no_measure:
      return "no-measure";
    case Verdict::inconclusive:
      break;
  }
  return "inconclusive";
}

Verdict verdict_from_string(const std::string& s) {
  if (s == "measure-exists") return Verdict::measure_exists;
  if (s == "no-measure") return Verdict::no_measure;
  if (s == "inconclusive") return Verdict::inconclusive;
  throw std::invalid_argument("unknown verdict '" + s + "'");
}

// --------------------------------------------------------------- stages

ConditionOneResult condition_one(const ReducedStructure& rs, const Grid& grid) {
  ConditionOneResult out;
  out.residual.assign(grid.size(), Vec(rs.n_vertical(), 0.0));
  if (rs.n_vertical() == 0) return out;
  parallel_for(grid.size(), [&](std::size_t node) {
    Vec x = grid.point(node);
    StructureTable c = rs.structure_functions_at(x);
    for (std::size_t a = 0; a < rs.n_vertical(); ++a) out.residual[node][a] = c.trace(a);
  });
  for (std::size_t node = 0; node < grid.size(); ++node)
    for (double r : out.residual[node])
      if (std::abs(r) > out.max_abs) {
        out.max_abs = std::abs(r);
        out.worst_node = node;
      }
  return out;
}

OmegaPoint omega_at(const ReducedStructure& rs, std::span<const double> qhat, double sv_rel) {
  const std::size_t na = rs.n_vertical(), nh = rs.n_horizontal(), m = rs.shape_dim();
  OmegaPoint out;
  Vec mc = modular_components(rs, qhat);
  out.base.assign(mc.begin() + static_cast<std::ptrdiff_t>(na), mc.end());
  out.anchors = rs.anchors_at(qhat);
  out.omega0.assign(m, 0.0);
  if (nh == 0 || m == 0) {
    out.annihilator = Matd::identity(m);
    return out;
  }
  Eigen::MatrixXd at(nh, m);
  for (std::size_t al = 0; al < nh; ++al)
    for (std::size_t i = 0; i < m; ++i) at(al, i) = out.anchors(i, al);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(at, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  double smax = sv.size() > 0 ? sv(0) : 0.0;
  std::size_t rank = 0;
  for (Eigen::Index k = 0; k < sv.size(); ++k)
    if (sv(k) > sv_rel * smax) ++rank;
  if (rank < nh)
    throw RankDegenerate("anchors are linearly dependent at " + point_text(rs.shape_chart(), qhat));
  Eigen::VectorXd b(nh);
  for (std::size_t al = 0; al < nh; ++al) b(al) = out.base[al];
  Eigen::VectorXd y = svd.matrixU().transpose() * b;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(m);
  for (std::size_t k = 0; k < rank; ++k) w += svd.matrixV().col(k) * (y(k) / sv(k));
  for (std::size_t i = 0; i < m; ++i) out.omega0[i] = w(i);
  out.annihilator = Matd(m, m - rank);
  for (std::size_t c = 0; c < m - rank; ++c) {
    Eigen::VectorXd v = svd.matrixV().col(rank + c);
    Eigen::Index big = 0;
    v.cwiseAbs().maxCoeff(&big);
    if (v(big) < 0) v = -v;
    for (std::size_t i = 0; i < m; ++i) out.annihilator(i, c) = v(i);
  }
  return out;
}

OmegaFamily omega_family(const ReducedStructure& rs, const Grid& grid, double sv_rel) {
  OmegaFamily fam;
  fam.rs = &rs;
  fam.grid = grid;
  fam.sv_rel = sv_rel;
  fam.nodes.resize(grid.size());
  parallel_for(grid.size(), [&](std::size_t node) { fam.nodes[node] = omega_at(rs, grid.point(node), sv_rel); });
  fam.corank = fam.nodes.empty() ? 0 : fam.nodes[0].corank();
  for (std::size_t node = 0; node < grid.size(); ++node)
    if (fam.nodes[node].corank() != fam.corank)
      throw RankDegenerate("corank jumps from " + std::to_string(fam.corank) + " to " +
                           std::to_string(fam.nodes[node].corank()) + " at " +
                           point_text(rs.shape_chart(), grid.point(node)));
  return fam;
}

TwoForm exterior_derivative_at(const ReducedStructure& rs, std::span<const double> qhat) {
  const std::size_t m = qhat.size();
  Matd d(m, m);
  Vec x(qhat.begin(), qhat.end());
  for (std::size_t i = 0; i < m; ++i) {
    double h = fd_step(x[i]);
    double keep = x[i];
    x[i] = keep + h;
    Vec wp = omega_at(rs, x).omega0;
    x[i] = keep - h;
    Vec wm = omega_at(rs, x).omega0;
    x[i] = keep;
    for (std::size_t j = 0; j < m; ++j) d(i, j) = (wp[j] - wm[j]) / (2.0 * h);
  }
  TwoForm f(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) f(i, j) = d(i, j) - d(j, i);
  return f;
}

EliminatedPoint corank1_elimination(const ReducedStructure& rs, std::span<const double> qhat) {
  OmegaPoint op = omega_at(rs, qhat);
  if (op.corank() != 1)
    throw UnsupportedCorank("pointwise elimination needs corank 1, found " + std::to_string(op.corank()));
  if (qhat.size() < 3) throw RankDegenerate("pointwise elimination needs at least 3 shape coordinates");
  return eliminate(rs, qhat, column(op.annihilator, 0), 1e-8);
}

TwoForm obstruction_at(const ReducedStructure& rs, std::span<const double> qhat) {
  OmegaPoint op = omega_at(rs, qhat);
  if (op.corank() == 0) return exterior_derivative_at(rs, qhat);
  return corank1_elimination(rs, qhat).residual;
}

ClosednessResult closedness_residual(const OmegaFamily& fam) {
  const ReducedStructure& rs = *fam.rs;
  const Grid& g = fam.grid;
  const std::size_t n = g.size();
  if (fam.corank > 1)
    throw UnsupportedCorank("corank " + std::to_string(fam.corank) + " > 1 is not supported");
  ClosednessResult out;
  if (fam.corank == 0) {
    out.method = "direct";
    Vec worst(n, 0.0);
    parallel_for(n, [&](std::size_t node) { worst[node] = max_abs_upper(exterior_derivative_at(rs, g.point(node))); });
    for (std::size_t node = 0; node < n; ++node)
      if (worst[node] > out.residual) {
        out.residual = worst[node];
        out.worst_node = node;
      }
    return out;
  }

  // sign-consistent beta: each node agrees with an already aligned neighbor
  std::vector<Vec> beta(n);
  for (std::size_t node = 0; node < n; ++node) {
    beta[node] = column(fam.nodes[node].annihilator, 0);
    auto idx = g.multi_index(node);
    for (std::size_t a = g.dim(); a-- > 0;)
      if (idx[a] > 0) {
        align(beta[node], beta[node - g.stride(a)]);
        break;
      }
  }
  if (g.dim() >= 3) {
    std::vector<EliminatedPoint> pts(n);
    Vec pairing(n, 0.0);
    parallel_for(n, [&](std::size_t node) {
      pts[node] = eliminate(rs, g.point(node), beta[node], fam.sv_rel, &pairing[node]);
    });
    double pmax = *std::max_element(pairing.begin(), pairing.end());
    double pmin = *std::min_element(pairing.begin(), pairing.end());
    if (pmax > 0.0 && pmin > 1e-8 * pmax) {
      out.method = "pointwise-elimination";
      out.lambda.resize(n);
      out.lambda_gradient.resize(n);
      out.beta.resize(n);
      for (std::size_t node = 0; node < n; ++node) {
        out.lambda[node] = pts[node].lambda;
        out.lambda_gradient[node] = pts[node].lambda_gradient;
        out.beta[node] = pts[node].beta;
        double r = max_abs_upper(pts[node].residual);
        if (r > out.residual) {
          out.residual = r;
          out.worst_node = node;
        }
      }
      return out;
    }
  }
  return least_squares_lambda(fam, beta);
}

SigmaResult integrate_sigma(const OmegaFamily& fam, const ClosednessResult& closed) {
  const ReducedStructure& rs = *fam.rs;
  const Grid& g = fam.grid;
  const std::size_t m = g.dim(), n = g.size();
  const GaussRule& rule = gauss5();
  const bool with_lambda = fam.corank == 1;

  // edge[a][node] = integral of omega from node to node + e_a
  std::vector<Vec> edge(m, Vec(n, 0.0));
  std::vector<std::pair<std::size_t, std::size_t>> jobs;
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t node = 0; node < n; ++node)
      if (g.multi_index(node)[a] + 1 < g.count(a)) jobs.emplace_back(a, node);
  parallel_for(jobs.size(), [&](std::size_t k) {
    auto [a, node] = jobs[k];
    Vec x0 = g.point(node);
    double len = g.spacing(a);
    std::size_t next = node + g.stride(a);
    double s = 0.0;
    for (std::size_t q = 0; q < rule.t.size(); ++q) {
      Vec x = x0;
      x[a] += rule.t[q] * len;
      OmegaPoint op = omega_at(rs, x, fam.sv_rel);
      double v = op.omega0[a];
      if (with_lambda) {
        Vec b = column(op.annihilator, 0);
        align(b, closed.beta[node]);
        double lam = hermite(closed.lambda[node], closed.lambda_gradient[node][a], closed.lambda[next],
                             closed.lambda_gradient[next][a], len, rule.t[q]);
        v += lam * b[a];
      }
      s += rule.w[q] * v;
    }
    edge[a][node] = s * len;
  });

  SigmaResult out;
  out.sigma.assign(n, 0.0);
  out.sigma_reverse.assign(n, 0.0);
  for (std::size_t node = 1; node < n; ++node) {
    auto idx = g.multi_index(node);
    for (std::size_t a = m; a-- > 0;)
      if (idx[a] > 0) {
        std::size_t prev = node - g.stride(a);
        out.sigma[node] = out.sigma[prev] - edge[a][prev];
        break;
      }
    for (std::size_t a = 0; a < m; ++a)
      if (idx[a] > 0) {
        std::size_t prev = node - g.stride(a);
        out.sigma_reverse[node] = out.sigma_reverse[prev] - edge[a][prev];
        break;
      }
    out.path_discrepancy = std::max(out.path_discrepancy, std::abs(out.sigma[node] - out.sigma_reverse[node]));
  }
  for (std::size_t node = 0; node < n; ++node) {
    auto idx = g.multi_index(node);
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = a + 1; b < m; ++b) {
        if (idx[a] + 1 >= g.count(a) || idx[b] + 1 >= g.count(b)) continue;
        double c = edge[a][node] + edge[b][node + g.stride(a)] - edge[a][node + g.stride(b)] - edge[b][node];
        out.loop_residual = std::max(out.loop_residual, std::abs(c));
      }
  }
  return out;
}

// ---------------------------------------------------------------- detect

DetectionReport detect(const ReducedStructure& rs, std::size_t per_axis, const Thresholds& th,
                       const std::string& system_name) {
  DetectionReport rep;
  rep.thresholds = th;
  rep.system = system_name;
  rep.grid_points = per_axis;
  rep.axis_names = rs.shape_chart().names;
  rep.n_vertical = rs.n_vertical();
  rep.n_horizontal = rs.n_horizontal();
  Grid grid(rs.shape_chart(), per_axis);
  for (std::size_t a = 0; a < grid.dim(); ++a) rep.axes.push_back(grid.axis(a));

  ConditionOneResult c1 = condition_one(rs, grid);
  rep.condition_one = c1.max_abs;
  rep.condition_one_worst_point = grid.point(c1.worst_node);

  OmegaFamily fam;
  try {
    fam = omega_family(rs, grid);
  } catch (const RankDegenerate& e) {
    rep.verdict = c1.max_abs >= th.reject ? Verdict::no_measure : Verdict::inconclusive;
    rep.reason = std::string("1-form family: ") + e.what();
    return rep;
  }
  rep.corank = fam.corank;
  if (fam.corank > 1) {
    rep.verdict = c1.max_abs >= th.reject ? Verdict::no_measure : Verdict::inconclusive;
    rep.reason = "corank " + std::to_string(fam.corank) + " > 1: no elimination procedure";
    return rep;
  }
  ClosednessResult closed;
  try {
    closed = closedness_residual(fam);
  } catch (const RankDegenerate& e) {
    rep.verdict = c1.max_abs >= th.reject ? Verdict::no_measure : Verdict::inconclusive;
    rep.reason = std::string("closedness: ") + e.what();
    return rep;
  }
  rep.closedness = closed.residual;
  rep.closedness_worst_point = grid.point(closed.worst_node);
  rep.closedness_method = closed.method;
  rep.least_squares_residual = closed.least_squares_residual;
  if (fam.corank == 1) {
    rep.lambda = closed.lambda;
    rep.lambda_gradient = closed.lambda_gradient;
    rep.beta = closed.beta;
  }

  if (c1.max_abs >= th.reject || closed.residual >= th.reject) {
    rep.verdict = Verdict::no_measure;
    rep.reason = c1.max_abs >= th.reject ? "vertical trace condition fails at " +
                                               point_text(rs.shape_chart(), rep.condition_one_worst_point)
                                         : "no closed member of the 1-form family; d omega fails at " +
                                               point_text(rs.shape_chart(), rep.closedness_worst_point);
    return rep;
  }
  SigmaResult sig = integrate_sigma(fam, closed);
  rep.sigma = sig.sigma;
  rep.loop_residual = sig.loop_residual;
  rep.path_discrepancy = sig.path_discrepancy;
  if (c1.max_abs <= th.accept && closed.residual <= th.accept && sig.loop_residual <= th.accept) {
    rep.verdict = Verdict::measure_exists;
    rep.reason = "vertical traces vanish and omega = -d sigma on the sampled chart";
  } else {
    rep.verdict = Verdict::inconclusive;
    rep.reason = "a residual lies between the thresholds (condition one " + format_number(c1.max_abs) +
                 ", closedness " + format_number(closed.residual) + ", loop " + format_number(sig.loop_residual) +
                 ")";
  }
  return rep;
}

namespace {

nlohmann::json optional_number(double v) { return v < 0.0 ? nlohmann::json(nullptr) : nlohmann::json(v); }

double number_or(const nlohmann::json& j, double fallback) { return j.is_number() ? j.get<double>() : fallback; }

}  // namespace

nlohmann::json DetectionReport::to_json() const {
  using nlohmann::json;
  json axes_j = json::array();
  for (std::size_t a = 0; a < axes.size(); ++a) axes_j.push_back({{"name", axis_names[a]}, {"values", axes[a]}});
  json j = {
      {"system", system},
      {"thresholds", {{"accept", thresholds.accept}, {"reject", thresholds.reject}}},
      {"grid", {{"points_per_axis", grid_points}, {"axes", axes_j}}},
      {"structure", {{"n_vertical", n_vertical}, {"n_horizontal", n_horizontal}, {"corank", corank}}},
      {"stages",
       {{"condition_one", {{"max_residual", condition_one}, {"worst_point", condition_one_worst_point}}},
        {"closedness",
         {{"residual", closedness},
          {"worst_point", closedness_worst_point},
          {"method", closedness_method},
          {"least_squares_residual", optional_number(least_squares_residual)}}},
        {"sigma", {{"loop_residual", optional_number(loop_residual)},
                   {"path_discrepancy", optional_number(path_discrepancy)}}}}},
      {"sigma", {{"layout", "row-major, last axis fastest"}, {"values", sigma}}},
      {"verdict", to_string(verdict)},
      {"reason", reason},
  };
  if (corank == 1 && !lambda.empty())
    j["lambda"] = {{"values", lambda}, {"gradient", lambda_gradient}, {"beta", beta}};
  return j;
}

DetectionReport DetectionReport::from_json(const nlohmann::json& j) {
  DetectionReport r;
  r.system = j.value("system", "");
  r.thresholds.accept = j.at("thresholds").at("accept").get<double>();
  r.thresholds.reject = j.at("thresholds").at("reject").get<double>();
  r.grid_points = j.at("grid").at("points_per_axis").get<std::size_t>();
  for (const auto& ax : j.at("grid").at("axes")) {
    r.axis_names.push_back(ax.at("name").get<std::string>());
    r.axes.push_back(ax.at("values").get<Vec>());
  }
  const auto& st = j.at("structure");
  r.n_vertical = st.at("n_vertical").get<std::size_t>();
  r.n_horizontal = st.at("n_horizontal").get<std::size_t>();
  r.corank = st.at("corank").get<std::size_t>();
  const auto& stages = j.at("stages");
  r.condition_one = stages.at("condition_one").at("max_residual").get<double>();
  r.condition_one_worst_point = stages.at("condition_one").at("worst_point").get<Vec>();
  r.closedness = stages.at("closedness").at("residual").get<double>();
  r.closedness_worst_point = stages.at("closedness").at("worst_point").get<Vec>();
  r.closedness_method = stages.at("closedness").at("method").get<std::string>();
  r.least_squares_residual = number_or(stages.at("closedness").at("least_squares_residual"), -1.0);
  r.loop_residual = number_or(stages.at("sigma").at("loop_residual"), -1.0);
  r.path_discrepancy = number_or(stages.at("sigma").at("path_discrepancy"), -1.0);
  r.sigma = j.at("sigma").at("values").get<Vec>();
  if (j.contains("lambda")) {
    r.lambda = j["lambda"].at("values").get<Vec>();
    r.lambda_gradient = j["lambda"].at("gradient").get<std::vector<Vec>>();
    r.beta = j["lambda"].at("beta").get<std::vector<Vec>>();
  }
  r.verdict = verdict_from_string(j.at("verdict").get<std::string>());
  r.reason = j.value("reason", "");
  return r;
}

// ------------------------------------------------------------ candidates

DensityFn expression_density(const ReducedStructure& rs, const SymmetricSystem& sys, const std::string& text,
                             const std::string& coordinates) {
  if (coordinates != "momentum" && coordinates != "velocity")
    throw std::invalid_argument("density coordinates must be 'momentum' or 'velocity', got '" + coordinates + "'");
  const bool velocity = coordinates == "velocity";
  std::vector<std::string> vars = rs.shape_chart().names;
  for (std::size_t i = 0; i < rs.rank(); ++i) vars.push_back((velocity ? "v" : "p") + std::to_string(i + 1));
  Expression e = Expression::parse(text, vars, sys.param_names);
  Vec params = sys.params;
  const ReducedStructure* r = &rs;
  return [e, params, velocity, r](std::span<const double> qhat, std::span<const double> p) {
    Vec x(qhat.begin(), qhat.end());
    if (!velocity) {
      x.insert(x.end(), p.begin(), p.end());
      return e.eval(x, params);
    }
    Matd g = r->fiber_metric_at(qhat);
    Vec v = mat_vec<double>(g, p);
    x.insert(x.end(), v.begin(), v.end());
    return e.eval(x, params) * determinant(g);
  };
}

DensityFn detected_density(const ReducedStructure& rs, const DetectionReport& report) {
  if (report.sigma.empty()) throw std::invalid_argument("report carries no sigma grid (verdict " +
                                                        to_string(report.verdict) + ")");
  if (report.axes.size() != rs.shape_dim())
    throw std::invalid_argument("report has " + std::to_string(report.axes.size()) + " axes, system has " +
                                std::to_string(rs.shape_dim()));
  Grid grid = Grid::from_axes(report.axes);
  if (grid.size() != report.sigma.size()) throw std::invalid_argument("report sigma size does not match its axes");
  const ReducedStructure* r = &rs;
  return [r, grid, report](std::span<const double> qhat, std::span<const double>) {
    const GaussRule& rule = gauss5();
    std::size_t node = grid.nearest(qhat);
    Vec x0 = grid.point(node);
    const std::size_t m = x0.size();
    double integral = 0.0;
    for (std::size_t q = 0; q < rule.t.size(); ++q) {
      Vec x(m);
      for (std::size_t i = 0; i < m; ++i) x[i] = x0[i] + rule.t[q] * (qhat[i] - x0[i]);
      OmegaPoint op = omega_at(*r, x);
      Vec w = op.omega0;
      if (report.corank == 1 && !report.lambda.empty()) {
        Vec b = column(op.annihilator, 0);
        align(b, report.beta[node]);
        double lam = report.lambda[node];
        for (std::size_t i = 0; i < m; ++i) lam += report.lambda_gradient[node][i] * (x[i] - x0[i]);
        for (std::size_t i = 0; i < m; ++i) w[i] += lam * b[i];
      }
      for (std::size_t i = 0; i < m; ++i) integral += rule.w[q] * w[i] * (qhat[i] - x0[i]);
    }
    return std::exp(report.sigma[node] - integral);
  };
}

double divergence(const VectorFieldFn& rhs, std::span<const double> x) {
  Vec z(x.begin(), x.end());
  double div = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    double h = fd_step(z[i]);
    double keep = z[i];
    z[i] = keep + h;
    double fp = rhs(z)[i];
    z[i] = keep - h;
    double fm = rhs(z)[i];
    z[i] = keep;
    div += (fp - fm) / (2.0 * h);
  }
  return div;
}

double liouville_residual(const VectorFieldFn& rhs, const ScalarFn& f, std::span<const double> x) {
  Vec z(x.begin(), x.end());
  Vec v = rhs(z);
  double fdot = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    double h = fd_step(z[i]);
    double keep = z[i];
    z[i] = keep + h;
    double fp = f(z);
    z[i] = keep - h;
    double fm = f(z);
    z[i] = keep;
    fdot += (fp - fm) / (2.0 * h) * v[i];
  }
  return fdot + f(z) * divergence(rhs, z);
}

double liouville_residual(const ReducedStructure& rs, const KineticHamiltonian& h, const DensityFn& f,
                          const PhaseState& x) {
  const std::size_t m = rs.shape_dim();
  const ReducedStructure* r = &rs;
  VectorFieldFn rhs = [r, &h](std::span<const double> z) { return hamilton_rhs(*r, h, z); };
  ScalarFn g = [&f, m](std::span<const double> z) { return f(z.subspan(0, m), z.subspan(m)); };
  return liouville_residual(rhs, g, x.pack());
}

double max_relative_liouville_residual(const ReducedStructure& rs, const KineticHamiltonian& h, const DensityFn& f,
                                       std::size_t samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<PhaseState> states(samples);
  for (auto& s : states) {
    s.qhat = rs.shape_chart().random_point(rng);
    s.p.resize(rs.rank());
    for (double& v : s.p) v = unit(rng);
  }
  Vec rel(samples, 0.0);
  parallel_for(samples, [&](std::size_t i) {
    double fv = f(states[i].qhat, states[i].p);
    if (!(fv > 0.0) || !std::isfinite(fv))
      throw std::domain_error("density is not positive at sample " + std::to_string(i));
    rel[i] = std::abs(liouville_residual(rs, h, f, states[i])) / fv;
  });
  double worst = 0.0;
  for (double v : rel) worst = std::max(worst, v);
  return worst;
}

// --------------------------------------------------------------- LL systems

Vec LieAlgebra::bracket(std::span<const double> x, std::span<const double> y) const {
  Vec out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = x[i] * y[j];
      if (s == 0.0) continue;
      for (std::size_t k = 0; k < n; ++k) out[k] += s * (*this)(i, j, k);
    }
  return out;
}

Vec LieAlgebra::modular_character() const {
  Vec m(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m[i] += (*this)(i, j, j);
  return m;
}

LieAlgebra LieAlgebra::so3() {
  LieAlgebra g = abelian(3);
  for (std::size_t i = 0; i < 3; ++i) {
    std::size_t j = (i + 1) % 3, k = (i + 2) % 3;
    g(i, j, k) = 1.0;
    g(j, i, k) = -1.0;
  }
  return g;
}

LieAlgebra LieAlgebra::abelian(std::size_t n) {
  LieAlgebra g;
  g.n = n;
  g.c.assign(n * n * n, 0.0);
  return g;
}

LieAlgebra LieAlgebra::affine_line() {
  LieAlgebra g = abelian(2);
  g(0, 1, 1) = 1.0;
  g(1, 0, 1) = -1.0;
  return g;
}

Vec ll_check(const LieAlgebra& g, const Matd& inertia, const Matd& e) {
  const std::size_t n = g.n, r = e.cols();
  if (e.rows() != n || inertia.rows() != n || inertia.cols() != n)
    throw std::invalid_argument("ll_check: dimension mismatch");
  // T = E^T I E
  Matd ie(n, r);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < r; ++a)
      for (std::size_t k = 0; k < n; ++k) ie(i, a) += inertia(i, k) * e(k, a);
  Matd t(r, r);
  for (std::size_t a = 0; a < r; ++a)
    for (std::size_t b = 0; b < r; ++b)
      for (std::size_t i = 0; i < n; ++i) t(a, b) += e(i, a) * ie(i, b);
  auto chol = cholesky(t);
  if (!chol) throw RankDegenerate("constraint subspace is degenerate for the inertia");
  Vec out(r, 0.0);
  for (std::size_t a = 0; a < r; ++a)
    for (std::size_t b = 0; b < r; ++b) {
      Vec ea = column(e, a), eb = column(e, b);
      Vec br = g.bracket(ea, eb);
      Vec rhs(r, 0.0);
      for (std::size_t c = 0; c < r; ++c)
        for (std::size_t i = 0; i < n; ++i) rhs[c] += ie(i, c) * br[i];
      Vec y = cholesky_solve<double>(*chol, rhs);
      out[a] += y[b];
    }
  return out;
}

Codim1Result ll_codim1_check(const LieAlgebra& g, const Matd& inertia, std::span<const double> beta, double tol) {
  const std::size_t n = g.n;
  Matd in = inertia;
  auto eta = lu_solve<double>(in, Vec(beta.begin(), beta.end()));
  if (!eta) throw RankDegenerate("inertia is singular");
  double pairing = dot<double>(beta, *eta);
  double bb = dot<double>(beta, beta);
  if (!(std::abs(pairing) > 1e-14 * bb)) throw RankDegenerate("<beta, inertia^-1 beta> vanishes");
  Vec v = g.modular_character();
  for (std::size_t i = 0; i < n; ++i) {
    Vec ei(n, 0.0);
    ei[i] = 1.0;
    Vec br = g.bracket(*eta, ei);
    v[i] += dot<double>(beta, br) / pairing;
  }
  Codim1Result out;
  out.mu = dot<double>(v, beta) / bb;
  out.defect = v;
  for (std::size_t i = 0; i < n; ++i) out.defect[i] -= out.mu * beta[i];
  out.residual = std::sqrt(dot<double>(out.defect, out.defect));
  double scale = std::max(1.0, std::sqrt(dot<double>(v, v)));
  out.satisfied = out.residual <= tol * scale;
  return out;
}

}  // namespace nhm
