#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "nhm/almost_poisson.hpp"
#include "nhm/config.hpp"
#include "nhm/dynamics.hpp"
#include "nhm/examples.hpp"

using namespace nhm;

namespace {

Vec oscillator(std::span<const double> x) { return {x[1], -x[0]}; }

Vec top_state(const ExampleParams& p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double a = 3.0 * u(rng), b = std::acos(u(rng));
  Vec3 g{std::sin(b) * std::cos(a), std::sin(b) * std::sin(a), std::cos(b)};
  Vec3 k = chaplygin_top_momentum(p, g, {u(rng), u(rng), u(rng)});
  return {k[0], k[1], k[2], g[0], g[1], g[2]};
}

Vec wire_state(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vec x(12);
  for (std::size_t i = 0; i < 3; ++i) x[i] = u(rng);
  Mat3 g = euler_matrix(3.0 * u(rng), 1.5 + u(rng), 3.0 * u(rng));
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 3; ++c) x[3 + 3 * r + c] = g[r][c];
  return x;
}

}  // namespace

TEST_CASE("a vanishing field keeps the state") {
  OdeRhs zero = [](std::span<const double> x) { return Vec(x.size(), 0.0); };
  Trajectory tr = rk4_integrate(zero, {1.0, -2.0}, 0.1, 1.0);
  CHECK(tr.times.size() == 11);
  CHECK(tr.times.back() == 1.0);
  for (const Vec& s : tr.states) CHECK(s == Vec{1.0, -2.0});
}

TEST_CASE("RK4 is fourth order") {
  auto err = [](double h) {
    Vec x = rk4_flow(oscillator, {1.0, 0.0}, h, 1.0);
    return std::hypot(x[0] - std::cos(1.0), x[1] + std::sin(1.0));
  };
  double ratio = err(0.1) / err(0.05);
  CHECK(ratio >= 12.0);
  CHECK(ratio <= 20.0);
  // the last step is shortened to land on T
  Trajectory tr = rk4_integrate(oscillator, {1.0, 0.0}, 0.3, 1.0);
  CHECK(tr.times.back() == 1.0);
  CHECK(tr.states.back()[0] == doctest::Approx(std::cos(1.0)).epsilon(1e-3));
}

TEST_CASE("integration runs backwards by flipping the field") {
  OdeRhs back = [](std::span<const double> x) {
    Vec v = oscillator(x);
    for (double& c : v) c = -c;
    return v;
  };
  Vec x0 = {0.3, -0.8};
  Vec x1 = rk4_flow(oscillator, x0, 1e-3, 5.0);
  Vec x2 = rk4_flow(back, x1, 1e-3, 5.0);
  CHECK(std::abs(x2[0] - x0[0]) < 1e-12);
  CHECK(std::abs(x2[1] - x0[1]) < 1e-12);
}

TEST_CASE("blow-up is reported with its time") {
  // x' = x^2 from x(0) = 1 leaves every bound at t = 1
  OdeRhs riccati = [](std::span<const double> x) { return Vec{x[0] * x[0]}; };
  try {
    rk4_flow(riccati, {1.0}, 1e-2, 2.0);
    FAIL("expected BlowUp");
  } catch (const BlowUp& e) {
    CHECK(e.time() > 0.9);
    CHECK(e.time() < 1.05);
    REQUIRE(e.last_good().size() == 1);
    CHECK(std::isfinite(e.last_good()[0]));
  }
  CHECK_THROWS_AS(rk4_flow(riccati, {std::nan("")}, 1e-2, 1.0), BlowUp);
  CHECK_THROWS_AS(rk4_flow(riccati, {1.0}, 0.0, 1.0), std::invalid_argument);
}

TEST_CASE("steps are halved to stay inside the chart") {
  IntegrateOptions opt;
  int rejected = 0;
  opt.inside = [&](std::span<const double> x) {
    bool ok = x[0] > 0.0 && x[0] < 1.0;
    rejected += ok ? 0 : 1;
    return ok;
  };
  // x' = 10 (1 - x) stays in [0, 1), but a step of 0.5 leaves it
  OdeRhs approach = [](std::span<const double> x) { return Vec{10.0 * (1.0 - x[0])}; };
  Vec x = rk4_flow(approach, {0.0}, 0.5, 2.0, opt);
  CHECK(rejected > 0);
  CHECK(x[0] < 1.0);
  CHECK(x[0] > 0.9);
  // a drift straight through the boundary cannot be rescued
  OdeRhs through = [](std::span<const double>) { return Vec{1.0}; };
  opt.max_halvings = 5;
  try {
    rk4_flow(through, {0.0}, 0.1, 2.0, opt);
    FAIL("expected BlowUp");
  } catch (const BlowUp& e) {
    CHECK(e.time() == doctest::Approx(1.0).epsilon(0.15));
    CHECK(e.last_good()[0] < 1.0);
  }
}

TEST_CASE("CSV output") {
  IntegrateOptions opt;
  opt.state_names = {"q", "p"};
  opt.diagnostic_names = {"H"};
  opt.diagnostics = [](std::span<const double> x) { return Vec{0.5 * (x[0] * x[0] + x[1] * x[1])}; };
  opt.sample_every = 4;
  Trajectory tr = rk4_integrate(oscillator, {1.0, 0.0}, 0.1, 1.0, opt);
  CHECK(tr.times.size() == 4);  // 0, 0.4, 0.8 and the final time
  std::ostringstream os;
  tr.write_csv(os);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "t,q,p,H");
  std::getline(in, line);
  CHECK(line == "0,1,0,0.5");
  int rows = 1;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 4);
  Trajectory bare = rk4_integrate(oscillator, {1.0, 0.0}, 0.5, 1.0);
  CHECK(bare.state_names == std::vector<std::string>{"x1", "x2"});
}

TEST_CASE("oracle invariants stay on their manifolds") {
  std::mt19937_64 rng(21);
  ExampleParams t;
  t.I11 = 1;
  t.I22 = 1.5;
  t.I33 = 2;
  t.l = 0.3;
  Vec x0 = top_state(t, rng);
  OdeRhs top = [&](std::span<const double> x) { return chaplygin_top_rhs_momentum(t, x); };
  auto h_of = [&](const Vec& x) {
    Vec3 g{x[3], x[4], x[5]};
    return chaplygin_top_energy(t, g, chaplygin_top_velocity(t, g, {x[0], x[1], x[2]}));
  };
  Vec x1 = rk4_flow(top, x0, 1e-3, 10.0);
  CHECK(std::abs(std::hypot(x1[3], x1[4], x1[5]) - 1.0) < 1e-8);
  CHECK(std::abs(h_of(x1) - h_of(x0)) < 1e-8);

  ExampleParams w;
  w.I11 = w.I22 = 1.0;
  w.I33 = 2.0;
  w.r = 0.0;
  Vec y0 = wire_state(rng);
  OdeRhs wire = [&](std::span<const double> x) { return ball_on_wire_rhs(w, x); };
  Vec y1 = rk4_flow(wire, y0, 1e-3, 10.0);
  CHECK(orthonormality_defect(y1) < 1e-8);
  CHECK(std::abs(ball_on_wire_energy(w, y1) - ball_on_wire_energy(w, y0)) < 1e-8);
}

TEST_CASE("ensemble volume drift") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto one = [](std::span<const double>) { return 1.0; };

  std::vector<Vec> plane;
  for (int k = 0; k < 20; ++k) plane.push_back({u(rng), u(rng)});
  CHECK(ensemble_volume_drift(oscillator, one, plane, 1e-2, 10.0).max_mismatch < 1e-9);
  // x' = x doubles volumes per ln 2
  OdeRhs grow = [](std::span<const double> x) { return Vec(x.begin(), x.end()); };
  DriftStats g = ensemble_volume_drift(grow, one, plane, 1e-3, 1.0);
  CHECK(g.members == 20);
  CHECK(g.max_mismatch == doctest::Approx(std::exp(2.0) - 1.0).epsilon(1e-8));
  // a translation preserves volume but not the density exp(-x1)
  OdeRhs shear = [](std::span<const double>) { return Vec{1.0, 0.0}; };
  auto decay = [](std::span<const double> x) { return std::exp(-x[0]); };
  CHECK(ensemble_volume_drift(shear, decay, plane, 1e-2, 1.0).max_mismatch ==
        doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-8));

  ExampleParams ta;
  ta.I11 = ta.I22 = 1;
  ta.I33 = 2;
  ta.l = 0.3;
  ExampleParams tg = ta;
  tg.I22 = 1.5;
  std::vector<Vec> cloud;
  for (int k = 0; k < 10; ++k) cloud.push_back(top_state(ta, rng));
  auto rhs = [](const ExampleParams& p) {
    return OdeRhs([p](std::span<const double> x) { return chaplygin_top_rhs_momentum(p, x); });
  };
  auto dens = [](const ExampleParams& p) {
    return StateFn([p](std::span<const double> x) { return chaplygin_top_density_momentum(p, {x[3], x[4], x[5]}); });
  };
  CHECK(ensemble_volume_drift(rhs(ta), dens(ta), cloud, 1e-3, 2.0).max_mismatch < 1e-5);
  CHECK(ensemble_volume_drift(rhs(tg), one, cloud, 1e-3, 2.0).max_mismatch > 1e-2);
}
