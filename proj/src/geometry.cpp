#include "nhm/geometry.hpp"

#include <atomic>
#include <cmath>
#include <sstream>

namespace nhm {

namespace {
std::size_t next_metric_id() {
  static std::atomic<std::size_t> counter{0};
  return ++counter;
}

bool is_literal_zero(const Expression& e) {
  const ExprNode& n = e.node(e.root());
  return n.kind == NodeKind::Number && n.number == 0.0;
}

std::string point_text(const Vec& q) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < q.size(); ++i) os << (i ? ", " : "") << q[i];
  os << ")";
  return os.str();
}
}  // namespace

DegenerateFrame::DegenerateFrame(const std::string& what, Vec point)
    : std::runtime_error(what + " at q = " + point_text(point)), point_(std::move(point)) {}

bool Chart::inside_margin(std::span<const double> q) const {
  for (std::size_t i = 0; i < dim(); ++i)
    if (!(q[i] >= sample_lo(i) && q[i] <= sample_hi(i))) return false;
  return true;
}

Vec Chart::random_point(std::mt19937_64& rng) const {
  Vec q(dim());
  for (std::size_t i = 0; i < dim(); ++i) {
    std::uniform_real_distribution<double> u(sample_lo(i), sample_hi(i));
    q[i] = u(rng);
  }
  return q;
}

void Chart::validate() const {
  if (names.empty()) throw std::invalid_argument("chart must have at least one coordinate");
  if (lo.size() != dim() || hi.size() != dim() || margin.size() != dim())
    throw std::invalid_argument("chart bounds do not match the coordinate count");
  for (std::size_t i = 0; i < dim(); ++i) {
    if (!(margin[i] >= 0.0)) throw std::invalid_argument("negative margin for coordinate " + names[i]);
    if (!(sample_lo(i) < sample_hi(i)))
      throw std::invalid_argument("empty sampling interval for coordinate " + names[i]);
  }
}

VectorField::VectorField(std::vector<Expression> components) : components_(std::move(components)) {}

VectorField VectorField::parse(std::span<const std::string> components, std::span<const std::string> vars,
                               std::span<const std::string> params) {
  if (components.size() != vars.size())
    throw std::invalid_argument("vector field has " + std::to_string(components.size()) +
                                " components for a chart of dimension " + std::to_string(vars.size()));
  std::vector<Expression> out;
  out.reserve(components.size());
  for (const auto& c : components) out.push_back(Expression::parse(c, vars, params));
  return VectorField(std::move(out));
}

VectorField VectorField::orthogonalized(VectorField candidate, std::vector<VectorField> verticals,
                                        std::shared_ptr<const MetricField> metric) {
  VectorField f;
  auto o = std::make_shared<Ortho>();
  o->candidate = std::make_shared<const VectorField>(std::move(candidate));
  o->verticals = std::move(verticals);
  o->metric = std::move(metric);
  f.ortho_ = std::move(o);
  return f;
}

std::size_t VectorField::dim() const { return ortho_ ? ortho_->candidate->dim() : components_.size(); }

MetricField MetricField::from_components(std::size_t dim, std::vector<Expression> upper) {
  if (upper.size() != dim * (dim + 1) / 2)
    throw std::invalid_argument("metric needs " + std::to_string(dim * (dim + 1) / 2) + " upper-triangle entries");
  MetricField m;
  m.id_ = next_metric_id();
  m.dim_ = dim;
  m.upper_ = std::move(upper);
  return m;
}

MetricField MetricField::from_kinetic(std::vector<std::vector<Expression>> velocity_map,
                                      std::vector<Expression> mass_upper) {
  if (velocity_map.empty()) throw std::invalid_argument("kinetic metric needs at least one velocity row");
  const std::size_t k = velocity_map.size();
  const std::size_t dim = velocity_map.front().size();
  for (const auto& row : velocity_map)
    if (row.size() != dim) throw std::invalid_argument("velocity map rows have different lengths");
  if (mass_upper.size() != k * (k + 1) / 2)
    throw std::invalid_argument("mass matrix needs " + std::to_string(k * (k + 1) / 2) + " upper-triangle entries");
  MetricField m;
  m.id_ = next_metric_id();
  m.dim_ = dim;
  m.velocity_map_ = std::move(velocity_map);
  m.mass_upper_ = std::move(mass_upper);
  m.map_support_.resize(k);
  for (std::size_t r = 0; r < k; ++r)
    for (std::size_t c = 0; c < dim; ++c)
      if (!is_literal_zero(m.velocity_map_[r][c])) m.map_support_[r].push_back(c);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i; j < k; ++j)
      if (!is_literal_zero(m.mass_upper_[upper_index(k, i, j)])) m.mass_support_.emplace_back(i, j);
  return m;
}

std::vector<VectorField> FrameSplit::joint() const {
  std::vector<VectorField> all = verticals;
  all.insert(all.end(), horizontals.begin(), horizontals.end());
  return all;
}

FrameAt FrameAt::evaluate(const MetricField& metric, std::span<const VectorField> frame, std::span<const double> q,
                          std::span<const double> params) {
  FrameAt f;
  f.metric = metric.eval<double>(q, params);
  f.vectors.reserve(frame.size());
  for (const auto& v : frame) f.vectors.push_back(v.eval<double>(q, params));
  f.gram = gram_of(f.metric, f.vectors);
  auto l = cholesky(f.gram);
  if (!l) throw DegenerateFrame("singular frame Gram matrix", Vec(q.begin(), q.end()));
  f.chol = std::move(*l);
  return f;
}

Vec FrameAt::project(std::span<const double> v) const {
  Vec b(vectors.size());
  for (std::size_t i = 0; i < vectors.size(); ++i) b[i] = metric_pair<double>(metric, vectors[i], v);
  return cholesky_solve<double>(chol, b);
}

Vec FrameAt::expand(std::span<const double> coefficients) const {
  Vec out(metric.rows(), 0.0);
  for (std::size_t i = 0; i < vectors.size(); ++i)
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += coefficients[i] * vectors[i][k];
  return out;
}

FrameSplit orthogonalize_split(std::shared_ptr<const MetricField> metric, std::vector<VectorField> verticals,
                               std::vector<VectorField> candidates) {
  FrameSplit split;
  split.verticals = verticals;
  for (auto& c : candidates) split.horizontals.push_back(VectorField::orthogonalized(std::move(c), verticals, metric));
  return split;
}

double split_orthogonality_defect(const MetricField& metric, const FrameSplit& split, std::span<const double> q,
                                  std::span<const double> params) {
  Matd g = metric.eval<double>(q, params);
  double worst = 0.0;
  for (const auto& z : split.verticals) {
    Vec zv = z.eval<double>(q, params);
    double zz = metric_pair<double>(g, zv, zv);
    for (const auto& y : split.horizontals) {
      Vec yv = y.eval<double>(q, params);
      double yy = metric_pair<double>(g, yv, yv);
      double zy = metric_pair<double>(g, zv, yv);
      worst = std::max(worst, std::abs(zy) / std::sqrt(zz * yy));
    }
  }
  return worst;
}

}  // namespace nhm
