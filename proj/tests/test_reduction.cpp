#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "nhm/config.hpp"
#include "nhm/dense.hpp"
#include "nhm/examples.hpp"
#include "nhm/reduction.hpp"

using namespace nhm;
using std::numbers::pi;

namespace {

std::shared_ptr<SystemReduction> reduce(const SystemConfig& cfg) {
  return std::make_shared<SystemReduction>(compile_system(cfg));
}

ExampleParams diag(double i1, double i2, double i3) {
  ExampleParams p;
  p.I11 = i1;
  p.I22 = i2;
  p.I33 = i3;
  return p;
}

// C_{1,2}^2 + C_{1,3}^3 of the top as printed, with det T supplied numerically
double top_trace_closed_form(const ExampleParams& p, double th, double ps, double det_t) {
  double mlr = p.m * p.l * p.R, s = std::sin(th), c = std::cos(th);
  double a1 = -p.I13 * (1.5 * mlr + (p.I22 + p.m * (p.R * p.R + p.l * p.l)) * c + 0.5 * mlr * std::cos(2 * th));
  double a2 = p.I13 * p.I23 * s;
  double b1 = p.I23 * (1.5 * mlr + (p.I11 + p.m * (p.R * p.R + p.l * p.l)) * c + 0.5 * mlr * std::cos(2 * th));
  double b2 = 0.5 * s * ((p.I22 - p.I11) * (p.I33 + p.m * p.R * p.R + mlr * c) - p.I23 * p.I23 + p.I13 * p.I13);
  return mlr * s * s * s / det_t * (a1 * std::cos(ps) + a2 * std::cos(2 * ps) + b1 * std::sin(ps) + b2 * std::sin(2 * ps));
}

}  // namespace

TEST_CASE("structure tables are exactly antisymmetric on every shipped example") {
  std::mt19937_64 rng(4);
  for (const auto& ex : shipped_examples()) {
    auto red = reduce(ex.config);
    for (int s = 0; s < 5; ++s) {
      Vec q = red->shape_chart().random_point(rng);
      StructureTable c = red->structure_functions_at(q);
      const std::size_t n = c.size();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          for (std::size_t k = 0; k < n; ++k) CHECK(c(i, j, k) == -c(j, i, k));
    }
  }
}

TEST_CASE("shipped examples are G-invariant and consistent") {
  std::mt19937_64 rng(8);
  for (const auto& ex : shipped_examples()) {
    auto red = reduce(ex.config);
    for (int s = 0; s < 3; ++s) {
      Vec q = red->shape_chart().random_point(rng);
      InvarianceReport inv = red->check_invariance(q, 1e-8);
      CHECK_MESSAGE(inv.passed, ex.file << " discrepancy " << inv.max_discrepancy());
      CHECK_MESSAGE(red->check_system(q).ok(), ex.file);
    }
  }
}

TEST_CASE("fiber metric inverts the frame Gram matrix") {
  std::mt19937_64 rng(12);
  for (const auto& ex : shipped_examples()) {
    auto red = reduce(ex.config);
    for (int s = 0; s < 20; ++s) {
      Vec q = red->shape_chart().random_point(rng);
      Matd g = red->fiber_metric_at(q), t = red->gram_at(q);
      const std::size_t n = g.rows();
      double worst = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          double v = 0.0;
          for (std::size_t k = 0; k < n; ++k) v += g(i, k) * t(k, j);
          worst = std::max(worst, std::abs(v - (i == j ? 1.0 : 0.0)));
        }
      CHECK_MESSAGE(worst <= 1e-9, ex.file);
    }
  }
}

TEST_CASE("small hand-made systems") {
  SystemConfig cfg = load_config(NHM_TEST_DATA "/free_particle.cfg");
  auto red = reduce(cfg);
  double q[] = {3.0, -1.0};
  Matd g = red->fiber_metric_at(q);
  CHECK(g(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(g(1, 1) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(g(0, 1) == 0.0);
  Matd y = red->anchors_at(q);
  CHECK(y(0, 0) == 1.0);
  CHECK(y(1, 1) == 1.0);
  // no fiber samples: the invariance check passes trivially
  InvarianceReport inv = red->check_invariance(q, 0.0);
  CHECK(inv.passed);
  CHECK(inv.max_discrepancy() == 0.0);

  // 1-D fiber with G(Z, Z) = c
  SystemConfig fib = cfg;
  fib.metric = {{"x,x", "mass"}, {"y,y", "1"}};
  fib.vertical = {{"Z1", {"1", "0"}}};
  fib.horizontal = {{"Y1", {"0", "1"}}};
  fib.shape_chart = {{"y", "-100", "100", "0"}};
  fib.projection = {{"y", "y"}};
  fib.section = {{"x", "0"}, {"y", "y"}};
  fib.fibers = {{{"x", "1.5"}, {"y", "y"}}};
  auto r1 = reduce(fib);
  double y0[] = {0.4};
  CHECK(r1->fiber_metric_at(y0)(0, 0) == doctest::Approx(0.5));
  CHECK(r1->check_invariance(y0, 1e-12).passed);

  // a metric that depends on the fiber coordinate breaks invariance
  fib.metric = {{"x,x", "mass + sin(x)"}, {"y,y", "1"}};
  CHECK_FALSE(reduce(fib)->check_invariance(y0, 1e-8).passed);
}

TEST_CASE("a fiber-dependent kinetic metric fails the invariance check") {
  ExampleParams p = diag(1, 1.5, 2);
  p.l = 0.3;
  SystemConfig cfg = chaplygin_top_config(p);
  for (auto& f : cfg.kinetic)
    if (f.name == "w1") f.components[0] = "(1 + 0.3*sin(phi))*sin(psi)*sin(theta)";
  double q[] = {1.1, 2.0};
  CHECK_FALSE(reduce(cfg)->check_invariance(q, 1e-8).passed);
}

TEST_CASE("ball on wire: the vertical direction commutes with the frame") {
  ExampleParams p = diag(1, 1, 2);
  p.r = 0.0;
  auto red = reduce(ball_on_wire_config(p));
  std::mt19937_64 rng(2);
  for (int s = 0; s < 10; ++s) {
    Vec q = red->shape_chart().random_point(rng);
    StructureTable c = red->structure_functions_at(q);
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(c(0, j, k)) < 1e-12);
  }
  double at[] = {0.0, pi / 2, 1.3};
  Matd y = red->anchors_at(at);
  CHECK(std::abs(y(0, 0)) < 1e-14);
  CHECK(y(1, 0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(y(2, 0)) < 1e-14);
}

TEST_CASE("planar body: vertical trace") {
  std::mt19937_64 rng(6);
  auto flat = reduce(planar_body_on_sphere_config(diag(1, 2, 3)));
  for (int s = 0; s < 10; ++s) {
    Vec q = flat->shape_chart().random_point(rng);
    CHECK(std::abs(flat->structure_functions_at(q).trace(0)) < 1e-12);
  }
  // I23 = 1 with l = 0: -I23 (I11 + m l^2) m / (R^3 det T) at (1, 0)
  ExampleParams p = diag(2, 3, 4);
  p.I23 = 1.0;
  auto red = reduce(planar_body_on_sphere_config(p));
  double q[] = {1.0, 0.0};
  double det_t = determinant(red->gram_at(q));
  double expect = -p.I23 * (p.I11 + p.m * p.l * p.l) * p.m / (std::pow(p.R, 3) * det_t);
  double got = red->structure_functions_at(q).trace(0);
  CHECK(expect != 0.0);
  CHECK(got == doctest::Approx(expect).epsilon(1e-6));
}

TEST_CASE("Chaplygin top: vertical trace against the printed closed form") {
  ExampleParams p = diag(1, 2, 3);
  p.l = 0.1;
  auto red = reduce(chaplygin_top_config(p));
  double q[] = {pi / 2, pi / 3};
  double det_t = determinant(red->gram_at(q));
  CHECK(red->structure_functions_at(q).trace(0) ==
        doctest::Approx(top_trace_closed_form(p, q[0], q[1], det_t)).epsilon(1e-5));

  ExampleParams skew = diag(1.2, 1.7, 2.5);
  skew.I13 = 0.2;
  skew.I23 = -0.15;
  skew.l = 0.4;
  skew.m = 1.3;
  skew.R = 0.8;
  auto red2 = reduce(chaplygin_top_config(skew));
  std::mt19937_64 rng(10);
  for (int s = 0; s < 10; ++s) {
    Vec x = red2->shape_chart().random_point(rng);
    double dt = determinant(red2->gram_at(x));
    CHECK(red2->structure_functions_at(x).trace(0) ==
          doctest::Approx(top_trace_closed_form(skew, x[0], x[1], dt)).epsilon(1e-5));
  }

  ExampleParams centered = skew;
  centered.l = 0.0;
  auto red3 = reduce(chaplygin_top_config(centered));
  for (int s = 0; s < 10; ++s) {
    Vec x = red3->shape_chart().random_point(rng);
    CHECK(std::abs(red3->structure_functions_at(x).trace(0)) < 1e-12);
  }
}

TEST_CASE("anchors") {
  ExampleParams p = diag(1, 2, 1.5);
  p.r = 2.0;
  p.R = 0.5;
  auto cyl = reduce(ball_on_cylinder_config(p));
  double q[] = {0.7, 1.1, 2.0};
  Matd y = cyl->anchors_at(q);
  CHECK(y(0, 2) == doctest::Approx(p.r / (p.R + p.r)).epsilon(1e-14));
  CHECK(std::abs(y(1, 2)) < 1e-14);
  CHECK(std::abs(y(2, 2)) < 1e-14);
  CHECK(y(0, 0) == doctest::Approx(-std::cos(1.1) * std::sin(0.7) / std::sin(1.1)).epsilon(1e-13));

  ExampleParams t = diag(1, 1.5, 2);
  t.l = 0.3;
  auto top = reduce(chaplygin_top_config(t));
  double x[] = {0.9, 2.2};
  Matd a = top->anchors_at(x);
  CHECK(a(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(a(1, 0)) < 1e-14);
  CHECK(std::abs(a(0, 1)) < 1e-14);
  CHECK(a(1, 1) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("structure functions vary continuously") {
  ExampleParams p = diag(1, 2, 1.5);
  auto red = reduce(ball_on_cylinder_config(p));
  Vec q = {1.0, 1.2, 2.0};
  StructureTable c0 = red->structure_functions_at(q);
  double prev = 0.0;
  for (double h : {1e-2, 5e-3, 2.5e-3}) {
    Vec qh = {q[0] + h, q[1] - h, q[2] + h};
    double d = red->structure_functions_at(qh).max_abs_difference(c0);
    CHECK(d > 0.0);
    if (prev > 0.0) CHECK(prev / d == doctest::Approx(2.0).epsilon(0.05));
    prev = d;
  }
}

TEST_CASE("builders validate their parameters") {
  ExampleParams p = diag(1, 2, 1.5);
  p.r = 0.0;
  CHECK_THROWS_AS(ball_on_cylinder_config(p), InvalidParams);
  p.r = -0.5;
  CHECK_THROWS_AS(ball_on_cylinder_config(p), InvalidParams);
  p.r = -1.5;
  CHECK_NOTHROW(ball_on_cylinder_config(p));
  CHECK_THROWS_AS(ball_on_wire_config(p), InvalidParams);
  ExampleParams t = diag(1, 1, 2);
  t.l = 2.0;
  CHECK_THROWS_AS(chaplygin_top_config(t), InvalidParams);
  ExampleParams bad = diag(1, 1, -1);
  CHECK_THROWS_AS(planar_body_on_sphere_config(bad), InvalidParams);
  ExampleParams off = diag(1, 1, 2);
  off.I12 = 0.1;
  CHECK_THROWS_AS(chaplygin_top_config(off), InvalidParams);
}
