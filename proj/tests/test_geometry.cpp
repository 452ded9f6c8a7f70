#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "nhm/examples.hpp"
#include "nhm/geometry.hpp"
#include "nhm/reduction.hpp"

using namespace nhm;

namespace {

const std::vector<std::string> kXY = {"x", "y"};
const std::vector<std::string> kXYZ = {"x", "y", "z"};
const std::vector<std::string> kEuler = {"phi", "theta", "psi"};

VectorField field(std::vector<std::string> comps, const std::vector<std::string>& vars) {
  return VectorField::parse(comps, vars);
}

std::shared_ptr<const MetricField> metric(std::size_t n, std::vector<std::string> upper,
                                          const std::vector<std::string>& vars) {
  std::vector<Expression> e;
  for (const auto& s : upper) e.push_back(Expression::parse(s, vars));
  return std::make_shared<const MetricField>(MetricField::from_components(n, std::move(e)));
}

std::string random_quadratic(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> c(-1.0, 1.0);
  std::string s = format_number(c(rng));
  for (const char* v : {"x", "y", "z"}) s += " + " + format_number(c(rng)) + "*" + v;
  const char* pairs[] = {"x*x", "x*y", "x*z", "y*y", "y*z", "z*z"};
  for (const char* p : pairs) s += " + " + format_number(c(rng)) + "*" + p;
  return s;
}

}  // namespace

TEST_CASE("coordinate brackets") {
  auto dx = field({"1", "0"}, kXY);
  auto xdy = field({"0", "x"}, kXY);
  double q[] = {0.3, -2.0};
  auto b = lie_bracket(dx, xdy, q);
  CHECK(b[0] == 0.0);
  CHECK(b[1] == 1.0);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 20; ++i) {
    auto x = field({random_quadratic(rng), random_quadratic(rng), random_quadratic(rng)}, kXYZ);
    auto y = field({random_quadratic(rng), random_quadratic(rng), random_quadratic(rng)}, kXYZ);
    double p[] = {u(rng), u(rng), u(rng)};
    auto xx = lie_bracket(x, x, p);
    auto xy = lie_bracket(x, y, p);
    auto yx = lie_bracket(y, x, p);
    for (int k = 0; k < 3; ++k) {
      CHECK(xx[k] == 0.0);
      CHECK(xy[k] == -yx[k]);
    }
  }
}

TEST_CASE("left-invariant frame of SO(3) in Euler angles") {
  auto e1 = field({"sin(psi)/sin(theta)", "cos(psi)", "-cos(theta)*sin(psi)/sin(theta)"}, kEuler);
  auto e2 = field({"cos(psi)/sin(theta)", "-sin(psi)", "-cos(theta)*cos(psi)/sin(theta)"}, kEuler);
  auto e3 = field({"0", "0", "1"}, kEuler);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ang(0.2, 2.9);
  for (int i = 0; i < 25; ++i) {
    double q[] = {ang(rng), ang(rng), ang(rng)};
    auto b12 = lie_bracket(e1, e2, q);
    auto b23 = lie_bracket(e2, e3, q);
    auto b31 = lie_bracket(e3, e1, q);
    auto f1 = e1(q, {}), f2 = e2(q, {}), f3 = e3(q, {});
    for (int k = 0; k < 3; ++k) {
      CHECK(b12[k] == doctest::Approx(f3[k]).epsilon(1e-12));
      CHECK(b23[k] == doctest::Approx(f1[k]).epsilon(1e-12));
      CHECK(b31[k] == doctest::Approx(f2[k]).epsilon(1e-12));
    }
  }
}

TEST_CASE("Jacobi identity for polynomial fields with differenced outer brackets") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto nested = [](const VectorField& a, const VectorField& b, const VectorField& c, std::span<const double> q) {
    // [a, [b, c]] with the outer derivative of [b, c] by central differences
    auto bc = lie_bracket(b, c, q);
    auto av = a(q, {});
    Vec out(3, 0.0);
    for (std::size_t j = 0; j < 3; ++j) {
      double h = fd_step(q[j]);
      Vec up(q.begin(), q.end()), dn(q.begin(), q.end());
      up[j] += h;
      dn[j] -= h;
      auto bu = lie_bracket(b, c, up), bd = lie_bracket(b, c, dn);
      for (std::size_t i = 0; i < 3; ++i) out[i] += av[j] * (bu[i] - bd[i]) / (2 * h);
    }
    // minus [b, c]^j d_j a^i with exact duals
    std::vector<Dual1> qd(q.begin(), q.end());
    for (std::size_t j = 0; j < 3; ++j) {
      qd[j].d = 1.0;
      auto da = a.eval<Dual1>(qd, {});
      for (std::size_t i = 0; i < 3; ++i) out[i] -= bc[j] * da[i].d;
      qd[j].d = 0.0;
    }
    return out;
  };
  for (int i = 0; i < 20; ++i) {
    auto x = field({random_quadratic(rng), random_quadratic(rng), random_quadratic(rng)}, kXYZ);
    auto y = field({random_quadratic(rng), random_quadratic(rng), random_quadratic(rng)}, kXYZ);
    auto z = field({random_quadratic(rng), random_quadratic(rng), random_quadratic(rng)}, kXYZ);
    double q[] = {u(rng), u(rng), u(rng)};
    auto a = nested(x, y, z, q), b = nested(y, z, x, q), c = nested(z, x, y, q);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(a[k] + b[k] + c[k]) <= 1e-7);
  }
}

TEST_CASE("gram matrix and projection") {
  auto id = metric(3, {"1", "0", "0", "1", "0", "1"}, kXYZ);
  std::vector<VectorField> ortho = {field({"cos(z)", "sin(z)", "0"}, kXYZ), field({"-sin(z)", "cos(z)", "0"}, kXYZ)};
  double q[] = {0.1, 0.2, 0.7};
  Matd t = gram_matrix(*id, ortho, q);
  CHECK(t(0, 0) == doctest::Approx(1.0));
  CHECK(t(1, 1) == doctest::Approx(1.0));
  CHECK(std::abs(t(0, 1)) < 1e-15);

  auto g = metric(3, {"2 + x^2", "0.3*y", "0.1", "1 + z^2", "0.2*x", "3"}, kXYZ);
  std::vector<VectorField> frame = {field({"1", "x", "0"}, kXYZ), field({"y", "0", "1"}, kXYZ)};
  FrameAt at = FrameAt::evaluate(*g, frame, q, {});
  CHECK(at.gram(0, 1) == doctest::Approx(at.gram(1, 0)).epsilon(1e-12));

  // a vector in the span is fixed
  Vec v = at.expand(Vec{0.7, -1.3});
  Vec y = at.project(v);
  CHECK(y[0] == doctest::Approx(0.7).epsilon(1e-10));
  CHECK(y[1] == doctest::Approx(-1.3).epsilon(1e-10));

  // a G-orthogonal vector projects to zero: solve G w = n with n normal to both frame vectors
  Matd gm = at.metric;
  auto f0 = at.vectors[0], f1 = at.vectors[1];
  Vec gf0(3, 0.0), gf1(3, 0.0);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      gf0[i] += gm(i, j) * f0[j];
      gf1[i] += gm(i, j) * f1[j];
    }
  Vec w = {gf0[1] * gf1[2] - gf0[2] * gf1[1], gf0[2] * gf1[0] - gf0[0] * gf1[2], gf0[0] * gf1[1] - gf0[1] * gf1[0]};
  Vec yw = at.project(w);
  CHECK(std::abs(yw[0]) < 1e-10);
  CHECK(std::abs(yw[1]) < 1e-10);

  // idempotence and G-symmetry
  Vec u1 = {0.4, -2.0, 1.1}, u2 = {-0.6, 0.5, 2.2};
  Vec p1 = at.expand(at.project(u1)), p2 = at.expand(at.project(u2));
  Vec pp = at.project(p1), pc = at.project(u1);
  CHECK(pp[0] == doctest::Approx(pc[0]).epsilon(1e-10));
  CHECK(pp[1] == doctest::Approx(pc[1]).epsilon(1e-10));
  auto gdot = [&](const Vec& a, const Vec& b) {
    double s = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) s += a[i] * gm(i, j) * b[j];
    return s;
  };
  CHECK(gdot(p1, u2) == doctest::Approx(gdot(u1, p2)).epsilon(1e-9));

  std::vector<VectorField> singular = {field({"1", "0", "0"}, kXYZ), field({"2", "0", "0"}, kXYZ)};
  CHECK_THROWS_AS(FrameAt::evaluate(*g, singular, q, {}), DegenerateFrame);
}

TEST_CASE("orthogonalized split") {
  auto g = metric(3, {"2", "0.5", "0", "1 + x^2", "0", "1"}, kXYZ);
  std::vector<VectorField> z = {field({"1", "0", "0"}, kXYZ)};
  double q[] = {0.3, 0.1, -0.4};

  // already orthogonal candidate is unchanged
  FrameSplit same = orthogonalize_split(g, z, {field({"0", "0", "1"}, kXYZ)});
  auto y = same.horizontals[0](q, {});
  CHECK(y[0] == doctest::Approx(0.0));
  CHECK(y[2] == doctest::Approx(1.0));

  // 1x1 Gram block: Y = X - G(Z,X)/G(Z,Z) Z
  FrameSplit split = orthogonalize_split(g, z, {field({"x", "1", "0"}, kXYZ)});
  auto y1 = split.horizontals[0](q, {});
  CHECK(y1[0] == doctest::Approx(0.3 - (2 * 0.3 + 0.5) / 2).epsilon(1e-14));
  CHECK(split_orthogonality_defect(*g, split, q, {}) < 1e-12);

  std::vector<VectorField> dependent = {field({"1", "0", "0"}, kXYZ), field({"3", "0", "0"}, kXYZ)};
  auto split2 = orthogonalize_split(g, dependent, {field({"0", "1", "0"}, kXYZ)});
  CHECK_THROWS_AS(split2.horizontals[0](q, {}), DegenerateFrame);
}

TEST_CASE("ball on wire: corrected first horizontal field") {
  ExampleParams p;
  p.I11 = p.I22 = 1.3;
  p.I33 = 0.7;
  p.m = 1.1;
  p.R = 0.9;
  p.r = 0.0;
  auto sys = build_ball_on_wire(p);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 20; ++i) {
    Vec q = sys->q_chart.random_point(rng);
    Vec y1 = sys->frame.horizontals[0](q, sys->params);
    double th = q[1], d = q[0] - q[4], mr2 = p.m * p.R * p.R;
    double expect = -(p.I33 + mr2) * std::cos(th) * std::sin(d) /
                    (std::sin(th) * (p.I11 * std::sin(th) * std::sin(th) + p.I33 * std::cos(th) * std::cos(th) + mr2));
    CHECK(y1[0] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("shipped examples: Gram matrices are positive definite and splits orthogonal") {
  std::mt19937_64 rng(99);
  for (const auto& ex : shipped_examples()) {
    auto sys = compile_system(ex.config);
    SystemReduction red(sys);
    auto joint = sys->frame.joint();
    for (int i = 0; i < 100; ++i) {
      Vec q = sys->q_chart.random_point(rng);
      Matd t = gram_matrix(*sys->metric, joint, q, sys->params);
      CHECK_MESSAGE(cholesky(t).has_value(), ex.file);
      CHECK_MESSAGE(split_orthogonality_defect(*sys->metric, sys->frame, q, sys->params) <= 1e-10, ex.file);
    }
  }
}

TEST_CASE("planar body at the origin: block structure") {
  ExampleParams p;
  p.I11 = 1;
  p.I22 = 2;
  p.I33 = 3;
  auto sys = build_planar_body_on_sphere(p);
  SystemReduction red(sys);
  double origin[] = {0.0, 0.0};
  Matd t = red.gram_at(origin);
  CHECK(std::abs(t(0, 1)) < 1e-12);
  CHECK(std::abs(t(0, 2)) < 1e-12);
  CHECK(t(0, 0) == doctest::Approx(p.I33));
}
