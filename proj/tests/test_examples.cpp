#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "nhm/config.hpp"
#include "nhm/detector.hpp"
#include "nhm/dynamics.hpp"
#include "nhm/examples.hpp"

using namespace nhm;
using std::numbers::pi;

namespace {

Mat3 mat_mul_t(const Mat3& a, const Mat3& b) {  // a^T b
  Mat3 c{};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t k = 0; k < 3; ++k) c[i][j] += a[k][i] * b[k][j];
  return c;
}

Vec3 random_unit(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double a = pi * u(rng), b = std::acos(u(rng));
  return {std::sin(b) * std::cos(a), std::sin(b) * std::sin(a), std::cos(b)};
}

ExampleParams top_params(double i1, double i2, double i3, double i13, double l) {
  ExampleParams p;
  p.I11 = i1;
  p.I22 = i2;
  p.I33 = i3;
  p.I13 = i13;
  p.l = l;
  return p;
}

}  // namespace

TEST_CASE("Euler angles") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst_w = 0.0, worst_inv = 0.0, worst_frame = 0.0;
  for (int k = 0; k < 100; ++k) {
    double ph = pi * u(rng), th = 1.5 + 1.3 * u(rng), ps = pi * u(rng);
    double dph = u(rng), dth = u(rng), dps = u(rng);
    // skew(Omega) = g^T dg/dt by central differences
    const double h = 1e-6;
    Mat3 gp = euler_matrix(ph + h * dph, th + h * dth, ps + h * dps);
    Mat3 gm = euler_matrix(ph - h * dph, th - h * dth, ps - h * dps);
    Mat3 dg{};
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) dg[i][j] = (gp[i][j] - gm[i][j]) / (2 * h);
    Mat3 w = mat_mul_t(euler_matrix(ph, th, ps), dg);
    Vec3 om = body_angular_velocity(ph, th, ps, dph, dth, dps);
    worst_w = std::max({worst_w, std::abs(w[2][1] - om[0]), std::abs(w[0][2] - om[1]), std::abs(w[1][0] - om[2])});
    Vec3 back = euler_angles(euler_matrix(ph, th, ps));
    worst_inv = std::max({worst_inv, std::abs(back[0] - ph), std::abs(back[1] - th), std::abs(back[2] - ps)});
    Mat3 f = left_invariant_frame(th, ps);
    for (std::size_t i = 0; i < 3; ++i) {
      Vec3 e = body_angular_velocity(ph, th, ps, f[i][0], f[i][1], f[i][2]);
      for (std::size_t j = 0; j < 3; ++j) worst_frame = std::max(worst_frame, std::abs(e[j] - (i == j ? 1.0 : 0.0)));
    }
  }
  CHECK(worst_w < 1e-8);
  CHECK(worst_inv < 1e-12);
  CHECK(worst_frame < 1e-12);
}

TEST_CASE("reduced Chaplygin top follows the Euler-Poisson oracle") {
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (ExampleParams p : {top_params(1, 1.5, 2, 0, 0.3), top_params(1.2, 1.7, 2.5, 0.2, 0.4)}) {
    auto sys = build_chaplygin_top(p);
    SystemReduction red(sys);
    KineticHamiltonian h(red);
    Vec x0 = {1.0 + 0.3 * u(rng), pi + u(rng), u(rng), u(rng), u(rng)};
    auto o0 = chaplygin_top_oracle_state(red, {x0.data(), 2}, {x0.data() + 2, 3});
    OdeRhs reduced = [&](std::span<const double> x) { return hamilton_rhs(red, h, x); };
    OdeRhs oracle = [&](std::span<const double> x) { return chaplygin_top_rhs_velocity(p, x); };
    Vec xr = rk4_flow(reduced, x0, 1e-3, 1.0);
    Vec xo = rk4_flow(oracle, Vec(o0.begin(), o0.end()), 1e-3, 1.0);
    auto o1 = chaplygin_top_oracle_state(red, {xr.data(), 2}, {xr.data() + 2, 3});
    for (std::size_t i = 0; i < 6; ++i) CHECK(o1[i] == doctest::Approx(xo[i]).epsilon(1e-6).scale(1.0));
    double h0 = chaplygin_top_energy(p, {o0[0], o0[1], o0[2]}, {o0[3], o0[4], o0[5]});
    CHECK(h(PhaseState::unpack(x0, 2)) == doctest::Approx(h0).epsilon(1e-10));
    CHECK(std::abs(std::hypot(xo[0], xo[1], xo[2]) - 1.0) < 1e-6);
  }
}

TEST_CASE("published top density satisfies Liouville on the oracle") {
  std::mt19937_64 rng(35);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto worst = [&](const ExampleParams& p) {
    VectorFieldFn rhs = [&](std::span<const double> x) { return chaplygin_top_rhs_momentum(p, x); };
    ScalarFn f = [&](std::span<const double> x) { return chaplygin_top_density_momentum(p, {x[3], x[4], x[5]}); };
    double w = 0.0;
    for (int k = 0; k < 100; ++k) {
      Vec3 g = random_unit(rng);
      Vec3 kk = chaplygin_top_momentum(p, g, {u(rng), u(rng), u(rng)});
      Vec x = {kk[0], kk[1], kk[2], g[0], g[1], g[2]};
      w = std::max(w, std::abs(liouville_residual(rhs, f, x)) / f(x));
    }
    return w;
  };
  CHECK(worst(top_params(1, 1, 2, 0, 0.3)) < 1e-6);
  CHECK(worst(top_params(1, 1.5, 2, 0.15, 0)) < 1e-6);
  CHECK(worst(top_params(1, 1.5, 2, 0, 0.3)) > 1e-3);

  // w.r.t. (gamma, Omega) the density picks up det of the momentum map
  ExampleParams p = top_params(1, 1, 2, 0, 0.3);
  VectorFieldFn rhs = [&](std::span<const double> x) { return chaplygin_top_rhs_velocity(p, x); };
  ScalarFn f = [&](std::span<const double> x) { return chaplygin_top_density_velocity(p, {x[0], x[1], x[2]}); };
  for (int k = 0; k < 20; ++k) {
    Vec3 g = random_unit(rng);
    Vec x = {g[0], g[1], g[2], u(rng), u(rng), u(rng)};
    CHECK(std::abs(liouville_residual(rhs, f, x)) / f(x) < 1e-6);
  }
}

TEST_CASE("ball on wire oracle preserves the homogeneous volume") {
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ExampleParams p;
  p.I11 = p.I22 = p.I33 = 0.4;
  p.r = 0.0;
  VectorFieldFn hom = [&](std::span<const double> x) { return ball_on_wire_rhs_homogeneous(p, x); };
  VectorFieldFn gen = [&](std::span<const double> x) { return ball_on_wire_rhs(p, x); };
  for (int k = 0; k < 20; ++k) {
    Vec x(12);
    for (std::size_t i = 0; i < 3; ++i) x[i] = u(rng);
    Mat3 g = euler_matrix(pi * u(rng), 1.5 + u(rng), pi * u(rng));
    for (std::size_t r = 0; r < 3; ++r)
      for (std::size_t c = 0; c < 3; ++c) x[3 + 3 * r + c] = g[r][c];
    CHECK(std::abs(divergence(hom, x)) < 1e-8);
    Vec a = hom(x), b = gen(x);
    for (std::size_t i = 0; i < 12; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12).scale(1.0));
  }
}

TEST_CASE("config densities satisfy Liouville on the reduced flow") {
  std::mt19937_64 rng(39);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int with_density = 0;
  for (const auto& ex : shipped_examples()) {
    if (!ex.config.density) continue;
    ++with_density;
    CHECK(ex.measure_expected);
    SystemReduction red(compile_system(ex.config));
    KineticHamiltonian h(red);
    DensityFn f = expression_density(red, red.system(), ex.config.density->expr, ex.config.density->coordinates);
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
      PhaseState x{red.shape_chart().random_point(rng), {}};
      for (std::size_t i = 0; i < red.rank(); ++i) x.p.push_back(u(rng));
      worst = std::max(worst, std::abs(liouville_residual(red, h, f, x)) / f(x.qhat, x.p));
    }
    CHECK_MESSAGE(worst < 1e-6, ex.file << " worst " << worst);
  }
  CHECK(with_density == 4);

  // the flat-body density fails once the body is tilted
  ExampleParams g = top_params(1, 2, 3, 0.2, 0.3);
  SystemReduction red(build_planar_body_on_sphere(g));
  KineticHamiltonian h(red);
  SystemConfig flat = planar_body_on_sphere_config(top_params(1, 2, 3, 0, 0));
  DensityFn f = expression_density(red, red.system(), flat.density->expr, "velocity");
  PhaseState x{{0.3, -0.4}, {0.5, -0.2, 0.7}};
  CHECK(std::abs(liouville_residual(red, h, f, x)) / f(x.qhat, x.p) > 1e-3);
}

TEST_CASE("planar densities in code agree with the config text") {
  for (ExampleParams p : {top_params(1, 2, 3, 0, 0), top_params(1, 1, 1.5, 0, 0.3)}) {
    SystemConfig cfg = planar_body_on_sphere_config(p);
    REQUIRE(cfg.density);
    bool axisym = p.l != 0.0;
    auto sys = compile_system(cfg);
    SystemReduction red(sys);
    DensityFn f = expression_density(red, *sys, cfg.density->expr, "velocity");
    Vec p0 = {0.1, 0.2, 0.3};
    // expression_density converts velocity densities by det G^{IJ}
    auto code = [&](double a, double b) {
      double q[] = {a, b};
      double raw = axisym ? planar_body_density_axisymmetric(p, a, b) : planar_body_density_flat(p, a, b);
      return raw * determinant(red.fiber_metric_at(q));
    };
    double q0[] = {0.1, 0.2};
    double ratio = f(q0, p0) / code(0.1, 0.2);
    for (double a : {-1.5, 0.0, 0.7})
      for (double b : {-0.3, 1.1}) {
        double q[] = {a, b};
        CHECK(f(q, p0) / code(a, b) == doctest::Approx(ratio).epsilon(1e-10));
      }
  }
}

TEST_CASE("builders and configs describe the same systems") {
  std::mt19937_64 rng(41);
  for (const auto& ex : shipped_examples()) {
    ExampleParams p = example_params_from(ex.config);
    std::shared_ptr<const SymmetricSystem> built;
    if (ex.config.name == "planar_body_on_sphere") built = build_planar_body_on_sphere(p);
    else if (ex.config.name == "chaplygin_top") built = build_chaplygin_top(p);
    else if (ex.config.name == "ball_on_cylinder") built = build_ball_on_cylinder(p);
    else built = build_ball_on_wire(p);
    SystemReduction a(built), b(compile_system(ex.config));
    Vec q = a.shape_chart().random_point(rng);
    CHECK_MESSAGE(a.structure_functions_at(q).max_abs_difference(b.structure_functions_at(q)) < 1e-12, ex.file);
  }
}

TEST_CASE("shipped expectations") {
  int yes = 0, no = 0;
  for (const auto& ex : shipped_examples()) (ex.measure_expected ? yes : no) += 1;
  CHECK(yes == 6);
  CHECK(no == 5);
}
