#include "nhm/examples.hpp"

#include <cmath>
#include <numbers>

namespace nhm {

namespace {

// Component rows are kept as strings; "0" entries are dropped when combined.
using Row = std::vector<std::string>;

std::string num(double x) { return format_number(x); }

bool is_zero(const std::string& s) { return s == "0"; }

std::string times(const std::string& a, const std::string& b) {
  if (is_zero(a) || is_zero(b)) return "0";
  if (a == "1") return b;
  if (b == "1") return a;
  return "(" + a + ")*(" + b + ")";
}

std::string plus(const std::string& a, const std::string& b) {
  if (is_zero(a)) return b;
  if (is_zero(b)) return a;
  return a + " + " + b;
}

Row scaled(const std::string& s, const Row& r) {
  Row out(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) out[i] = times(s, r[i]);
  return out;
}

Row added(const Row& a, const Row& b) {
  Row out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = plus(a[i], b[i]);
  return out;
}

Row unit(std::size_t n, std::size_t i) {
  Row r(n, "0");
  r[i] = "1";
  return r;
}

/// Body angular velocity rows for Euler coordinates in slots 0..2 of an n-chart.
std::array<Row, 3> omega_rows(std::size_t n) {
  std::array<Row, 3> w{Row(n, "0"), Row(n, "0"), Row(n, "0")};
  w[0][0] = "sin(psi)*sin(theta)";
  w[0][1] = "cos(psi)";
  w[1][0] = "cos(psi)*sin(theta)";
  w[1][1] = "-sin(psi)";
  w[2][0] = "cos(theta)";
  w[2][2] = "1";
  return w;
}

/// e_1, e_2, e_3 in slots 0..2.
std::array<Row, 3> frame_rows(std::size_t n) {
  std::array<Row, 3> e{Row(n, "0"), Row(n, "0"), Row(n, "0")};
  e[0][0] = "sin(psi)/sin(theta)";
  e[0][1] = "cos(psi)";
  e[0][2] = "-cos(theta)*sin(psi)/sin(theta)";
  e[1][0] = "cos(psi)/sin(theta)";
  e[1][1] = "-sin(psi)";
  e[1][2] = "-cos(theta)*cos(psi)/sin(theta)";
  e[2][2] = "1";
  return e;
}

ConfigChartEntry chart(const std::string& name, const std::string& lo, const std::string& hi,
                       const std::string& margin) {
  return ConfigChartEntry{name, lo, hi, margin};
}

void check_common(const ExampleParams& p) {
  if (!(p.m > 0.0)) throw InvalidParams("mass must be positive");
  if (!(p.R > 0.0)) throw InvalidParams("radius R must be positive");
  if (p.I12 != 0.0) throw InvalidParams("I12 must be 0 (rotate the body axes first)");
  Matd in(3, 3);
  in(0, 0) = p.I11;
  in(1, 1) = p.I22;
  in(2, 2) = p.I33;
  in(0, 2) = in(2, 0) = p.I13;
  in(1, 2) = in(2, 1) = p.I23;
  if (!cholesky(in)) throw InvalidParams("inertia tensor is not positive definite");
}

void inertia_mass(SystemConfig& cfg, const std::array<std::string, 3>& rows, bool general) {
  cfg.kinetic_mass.emplace_back(rows[0] + "," + rows[0], general ? "I11" : "I1");
  cfg.kinetic_mass.emplace_back(rows[1] + "," + rows[1], general ? "I22" : "I2");
  cfg.kinetic_mass.emplace_back(rows[2] + "," + rows[2], general ? "I33" : "I3");
  if (general) {
    cfg.kinetic_mass.emplace_back(rows[0] + "," + rows[2], "I13");
    cfg.kinetic_mass.emplace_back(rows[1] + "," + rows[2], "I23");
  }
}

Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
double dot3(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
Vec3 axpy(double s, const Vec3& a, const Vec3& b) { return {s * a[0] + b[0], s * a[1] + b[1], s * a[2] + b[2]}; }

Mat3 matmul(const Mat3& a, const Mat3& b) {
  Mat3 c{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) c[i][j] += a[i][k] * b[k][j];
  return c;
}

Mat3 axis_rotation(const Vec3& axis, double angle) {
  double n = std::sqrt(dot3(axis, axis));
  Vec3 u{axis[0] / n, axis[1] / n, axis[2] / n};
  double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
  return {{{t * u[0] * u[0] + c, t * u[0] * u[1] - s * u[2], t * u[0] * u[2] + s * u[1]},
           {t * u[0] * u[1] + s * u[2], t * u[1] * u[1] + c, t * u[1] * u[2] - s * u[0]},
           {t * u[0] * u[2] - s * u[1], t * u[1] * u[2] + s * u[0], t * u[2] * u[2] + c}}};
}

Mat3 inertia(const ExampleParams& p) {
  return {{{p.I11, p.I12, p.I13}, {p.I12, p.I22, p.I23}, {p.I13, p.I23, p.I33}}};
}

Vec3 mat_vec3(const Mat3& a, const Vec3& x) {
  return {dot3(a[0], x), dot3(a[1], x), dot3(a[2], x)};
}

Vec3 solve3(Mat3 a, Vec3 b) {
  Matd m(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m(i, j) = a[i][j];
  auto x = lu_solve<double>(m, Vec(b.begin(), b.end()));
  if (!x) throw std::runtime_error("singular 3x3 system");
  return {(*x)[0], (*x)[1], (*x)[2]};
}

// Section attitude of the planar body; away from the theta = 0 singularity of the Euler chart.
constexpr double kPlanarPhi = 0.3, kPlanarTheta = 1.2, kPlanarPsi = 0.5;

}  // namespace

// ---------------------------------------------------------------- SO(3)

Mat3 euler_matrix(double phi, double theta, double psi) {
  double cf = std::cos(phi), sf = std::sin(phi), ct = std::cos(theta), st = std::sin(theta), cp = std::cos(psi),
         sp = std::sin(psi);
  return {{{cp * cf - ct * sf * sp, -sp * cf - ct * sf * cp, st * sf},
           {cp * sf + ct * cf * sp, -sp * sf + ct * cf * cp, -st * cf},
           {st * sp, st * cp, ct}}};
}

Vec3 euler_angles(const Mat3& g) {
  double theta = std::acos(std::clamp(g[2][2], -1.0, 1.0));
  double phi = std::atan2(g[0][2], -g[1][2]);
  double psi = std::atan2(g[2][0], g[2][1]);
  return {phi, theta, psi};
}

Vec3 body_angular_velocity(double, double theta, double psi, double dphi, double dtheta, double dpsi) {
  return {dtheta * std::cos(psi) + dphi * std::sin(psi) * std::sin(theta),
          -dtheta * std::sin(psi) + dphi * std::cos(psi) * std::sin(theta), dphi * std::cos(theta) + dpsi};
}

Mat3 left_invariant_frame(double theta, double psi) {
  double st = std::sin(theta), ct = std::cos(theta), sp = std::sin(psi), cp = std::cos(psi);
  return {{{sp / st, cp, -ct * sp / st}, {cp / st, -sp, -ct * cp / st}, {0.0, 0.0, 1.0}}};
}

// ------------------------------------------------------------- builders

SystemConfig planar_body_on_sphere_config(const ExampleParams& p) {
  check_common(p);
  if (p.l < 0.0) throw InvalidParams("offset l must be non-negative");
  SystemConfig cfg;
  cfg.name = "planar_body_on_sphere";
  cfg.parameters = {{"I11", p.I11}, {"I22", p.I22}, {"I33", p.I33}, {"I13", p.I13}, {"I23", p.I23},
                    {"m", p.m},     {"R", p.R},     {"l", p.l}};
  cfg.q_chart = {chart("phi", "-pi", "3*pi", "0"), chart("theta", "0", "pi", "0.1"),
                 chart("psi", "-pi", "3*pi", "0"), chart("X1", "-2*R", "2*R", "0"),
                 chart("X2", "-2*R", "2*R", "0")};
  cfg.shape_chart = {chart("X1", "-2*R", "2*R", "0"), chart("X2", "-2*R", "2*R", "0")};

  const std::size_t n = 5;
  auto w = omega_rows(n);
  const std::string h = "(R + l)";
  // V = dX/dt + Omega x X with X = (X1, X2, R + l)
  Row v1 = added(unit(n, 3), added(scaled(h, w[1]), scaled("-X2", w[2])));
  Row v2 = added(unit(n, 4), added(scaled("X1", w[2]), scaled("-" + h, w[0])));
  Row v3 = added(scaled("X2", w[0]), scaled("-X1", w[1]));
  cfg.kinetic = {{"w1", w[0]}, {"w2", w[1]}, {"w3", w[2]}, {"u1", v1}, {"u2", v2}, {"u3", v3}};
  inertia_mass(cfg, {"w1", "w2", "w3"}, true);
  for (const char* u : {"u1", "u2", "u3"}) cfg.kinetic_mass.emplace_back(std::string(u) + "," + u, "m");

  auto e = frame_rows(n);
  const std::string den = "(R*(I33 + m*(X1^2 + X2^2)))";
  Row y1 = added(added(scaled("-1/R", e[1]), scaled("(I23 - m*l*X2)/" + den, e[2])), unit(n, 3));
  Row y2 = added(added(scaled("1/R", e[0]), scaled("(-I13 + m*l*X1)/" + den, e[2])), unit(n, 4));
  cfg.vertical = {{"Z1", e[2]}};
  cfg.horizontal = {{"Y1", y1}, {"Y2", y2}};
  cfg.projection = {{"X1", "X1"}, {"X2", "X2"}};
  cfg.section = {{"phi", num(kPlanarPhi)}, {"theta", num(kPlanarTheta)}, {"psi", num(kPlanarPsi)},
                 {"X1", "X1"},             {"X2", "X2"}};
  const Mat3 g0 = euler_matrix(kPlanarPhi, kPlanarTheta, kPlanarPsi);
  const std::array<Mat3, 3> hs = {axis_rotation({0, 0, 1}, 0.7), axis_rotation({1, 0.5, -0.2}, 0.4),
                                  axis_rotation({-0.3, 1, 0.8}, -0.9)};
  for (const auto& hk : hs) {
    Vec3 a = euler_angles(matmul(hk, g0));
    cfg.fibers.push_back({{"phi", num(a[0])}, {"theta", num(a[1])}, {"psi", num(a[2])}, {"X1", "X1"}, {"X2", "X2"}});
  }
  if (p.diagonal() && p.l == 0.0) {
    cfg.density = DensityConfig{"(I11*I22 + m*I11*X1^2 + m*I22*X2^2)*sqrt(I33 + m*(X1^2 + X2^2))", "velocity"};
  } else if (p.axisymmetric()) {
    cfg.density = DensityConfig{
        "(I11 + m*(X1^2 + X2^2) + m*l^2)*sqrt(I11*(I33 + m*(X1^2 + X2^2)) + m*l^2*I33)", "velocity"};
  }
  return cfg;
}

SystemConfig chaplygin_top_config(const ExampleParams& p) {
  check_common(p);
  if (p.l < 0.0 || p.l > p.R) throw InvalidParams("offset l must satisfy 0 <= l <= R");
  SystemConfig cfg;
  cfg.name = "chaplygin_top";
  cfg.oracle = "chaplygin_top";
  cfg.parameters = {{"I11", p.I11}, {"I22", p.I22}, {"I33", p.I33}, {"I13", p.I13}, {"I23", p.I23},
                    {"m", p.m},     {"R", p.R},     {"l", p.l}};
  cfg.q_chart = {chart("phi", "-pi", "3*pi", "0"), chart("theta", "0", "pi", "0.1"),
                 chart("psi", "0", "2*pi", "0.05"), chart("x", "-1e6", "1e6", "0"), chart("y", "-1e6", "1e6", "0")};
  cfg.shape_chart = {chart("theta", "0", "pi", "0.1"), chart("psi", "0", "2*pi", "0.05")};

  const std::size_t n = 5;
  auto w = omega_rows(n);
  // velocity of the center of mass u = (x, y, 0) + g (0, 0, l)
  Row u1 = {"l*sin(theta)*cos(phi)", "l*cos(theta)*sin(phi)", "0", "1", "0"};
  Row u2 = {"l*sin(theta)*sin(phi)", "-l*cos(theta)*cos(phi)", "0", "0", "1"};
  Row u3 = {"0", "-l*sin(theta)", "0", "0", "0"};
  cfg.kinetic = {{"w1", w[0]}, {"w2", w[1]}, {"w3", w[2]}, {"u1", u1}, {"u2", u2}, {"u3", u3}};
  inertia_mass(cfg, {"w1", "w2", "w3"}, true);
  for (const char* u : {"u1", "u2", "u3"}) cfg.kinetic_mass.emplace_back(std::string(u) + "," + u, "m");

  cfg.vertical = {{"Z1", {"1", "0", "0", "0", "0"}}};
  cfg.horizontal = {{"X1", {"0", "1", "0", "R*sin(phi)", "-R*cos(phi)"}},
                    {"X2", {"0", "0", "1", "-R*cos(phi)*sin(theta)", "-R*sin(phi)*sin(theta)"}}};
  cfg.orthogonalize = true;
  cfg.projection = {{"theta", "theta"}, {"psi", "psi"}};
  cfg.section = {{"phi", "0"}, {"theta", "theta"}, {"psi", "psi"}, {"x", "0"}, {"y", "0"}};
  cfg.fibers = {{{"phi", "0.7"}, {"theta", "theta"}, {"psi", "psi"}, {"x", "0.3"}, {"y", "-0.2"}},
                {{"phi", "2.1"}, {"theta", "theta"}, {"psi", "psi"}, {"x", "-1.1"}, {"y", "0.5"}},
                {{"phi", "-1.3"}, {"theta", "theta"}, {"psi", "psi"}, {"x", "2"}, {"y", "1"}}};
  return cfg;
}

namespace {

void check_cylinder_inertia(const ExampleParams& p) {
  check_common(p);
  if (!p.diagonal()) throw InvalidParams("the ball's inertia must be diagonal in its body frame");
}

// Y1, Y2 of the ball on a cylinder in (phi, theta, psi, z, vartheta)
std::array<Row, 2> cylinder_rolling_fields() {
  Row y1 = {"-cos(theta)*sin(phi - vartheta)/sin(theta)", "cos(phi - vartheta)", "sin(phi - vartheta)/sin(theta)",
            "0", "0"};
  Row y2 = {"-cos(theta)*cos(phi - vartheta)/sin(theta)", "-sin(phi - vartheta)", "cos(phi - vartheta)/sin(theta)",
            "R", "0"};
  return {y1, y2};
}

void cylinder_common(SystemConfig& cfg) {
  cfg.q_chart = {chart("phi", "-pi", "5*pi", "0"), chart("theta", "0", "pi", "0.1"),
                 chart("psi", "0", "2*pi", "0.05"), chart("z", "-1e6", "1e6", "0"),
                 chart("vartheta", "-2*pi", "2*pi", "0")};
  cfg.shape_chart = {chart("xi", "0", "2*pi", "0.05"), chart("theta", "0", "pi", "0.1"),
                     chart("psi", "0", "2*pi", "0.05")};
  auto w = omega_rows(5);
  cfg.kinetic = {{"w1", w[0]}, {"w2", w[1]}, {"w3", w[2]}, {"wt", unit(5, 4)}, {"wz", unit(5, 3)}};
  cfg.projection = {{"xi", "phi - vartheta"}, {"theta", "theta"}, {"psi", "psi"}};
  cfg.section = {{"phi", "xi"}, {"theta", "theta"}, {"psi", "psi"}, {"z", "0"}, {"vartheta", "0"}};
  cfg.fibers = {{{"phi", "xi + 0.7"}, {"theta", "theta"}, {"psi", "psi"}, {"z", "0.3"}, {"vartheta", "0.7"}},
                {{"phi", "xi - 1.9"}, {"theta", "theta"}, {"psi", "psi"}, {"z", "-2"}, {"vartheta", "-1.9"}},
                {{"phi", "xi + 3"}, {"theta", "theta"}, {"psi", "psi"}, {"z", "1.5"}, {"vartheta", "3"}}};
}

}  // namespace

SystemConfig ball_on_cylinder_config(const ExampleParams& p) {
  check_cylinder_inertia(p);
  if (p.r == 0.0) throw InvalidParams("r = 0 is the ball on a wire; use the wire builder");
  if (!(p.r > 0.0 || p.r < -p.R)) throw InvalidParams("cylinder parameter must satisfy r > 0 or r < -R");
  SystemConfig cfg;
  cfg.name = "ball_on_cylinder";
  cfg.parameters = {{"I1", p.I11}, {"I2", p.I22}, {"I3", p.I33}, {"m", p.m}, {"R", p.R}, {"r", p.r}};
  cylinder_common(cfg);
  inertia_mass(cfg, {"w1", "w2", "w3"}, false);
  cfg.kinetic_mass.emplace_back("wt,wt", "m*(R + r)^2");
  cfg.kinetic_mass.emplace_back("wz,wz", "m");
  auto y = cylinder_rolling_fields();
  cfg.horizontal = {{"Y1", y[0]}, {"Y2", y[1]}, {"Y3", {"1", "0", "0", "0", "R/(R + r)"}}};
  if (p.I11 == p.I22 && p.I22 == p.I33) cfg.density = DensityConfig{"sin(theta)", "momentum"};
  return cfg;
}

SystemConfig ball_on_wire_config(const ExampleParams& p) {
  check_cylinder_inertia(p);
  if (p.I11 != p.I22) throw InvalidParams("the wire analysis needs an axisymmetric ball (I1 = I2)");
  SystemConfig cfg;
  cfg.name = "ball_on_wire";
  cfg.oracle = "ball_on_wire";
  cfg.parameters = {{"I1", p.I11}, {"I3", p.I33}, {"m", p.m}, {"R", p.R}};
  cylinder_common(cfg);
  cfg.kinetic_mass = {{"w1,w1", "I1"}, {"w2,w2", "I1"}, {"w3,w3", "I3"}, {"wt,wt", "m*R^2"}, {"wz,wz", "m"}};
  auto y = cylinder_rolling_fields();
  cfg.vertical = {{"Z1", {"1", "0", "0", "0", "1"}}};
  cfg.horizontal = {{"X1", y[0]}, {"X2", y[1]}};
  cfg.orthogonalize = true;
  if (p.I11 == p.I33) cfg.density = DensityConfig{"sin(theta)", "momentum"};
  return cfg;
}

std::shared_ptr<const SymmetricSystem> build_planar_body_on_sphere(const ExampleParams& p) {
  return compile_system(planar_body_on_sphere_config(p));
}
std::shared_ptr<const SymmetricSystem> build_chaplygin_top(const ExampleParams& p) {
  return compile_system(chaplygin_top_config(p));
}
std::shared_ptr<const SymmetricSystem> build_ball_on_cylinder(const ExampleParams& p) {
  return compile_system(ball_on_cylinder_config(p));
}
std::shared_ptr<const SymmetricSystem> build_ball_on_wire(const ExampleParams& p) {
  return compile_system(ball_on_wire_config(p));
}

ExampleParams example_params_from(const SystemConfig& cfg) {
  ExampleParams p;
  auto get = [&](const char* name, double& slot) {
    if (auto v = cfg.parameter(name)) slot = *v;
  };
  get("I11", p.I11);
  get("I22", p.I22);
  get("I33", p.I33);
  get("I13", p.I13);
  get("I23", p.I23);
  get("I1", p.I11);
  get("I2", p.I22);
  get("I3", p.I33);
  get("m", p.m);
  get("R", p.R);
  get("l", p.l);
  get("r", p.r);
  if (cfg.name == "ball_on_wire") {
    p.I22 = p.I11;
    p.r = 0.0;
  }
  return p;
}

// ---------------------------------------------------------- Chaplygin top

namespace {

Vec3 contact_arm(const ExampleParams& p, const Vec3& gamma) {
  return {p.R * gamma[0], p.R * gamma[1], p.R * gamma[2] + p.l};
}

Mat3 contact_inertia(const ExampleParams& p, const Vec3& rho) {
  Mat3 a = inertia(p);
  double rr = dot3(rho, rho);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) a[i][j] += p.m * ((i == j ? rr : 0.0) - rho[i] * rho[j]);
  return a;
}

Vec3 top_momentum_rate(const ExampleParams& p, const Vec3& k, const Vec3& gamma, const Vec3& omega) {
  Vec3 rho = contact_arm(p, gamma);
  Vec3 a = cross(k, omega);
  Vec3 b = cross(cross(gamma, omega), cross(omega, rho));
  return axpy(p.m * p.R, b, a);
}

}  // namespace

Vec3 chaplygin_top_momentum(const ExampleParams& p, const Vec3& gamma, const Vec3& omega) {
  return mat_vec3(contact_inertia(p, contact_arm(p, gamma)), omega);
}

Vec3 chaplygin_top_velocity(const ExampleParams& p, const Vec3& gamma, const Vec3& k) {
  return solve3(contact_inertia(p, contact_arm(p, gamma)), k);
}

Vec chaplygin_top_rhs_momentum(const ExampleParams& p, std::span<const double> x) {
  Vec3 k{x[0], x[1], x[2]}, gamma{x[3], x[4], x[5]};
  Vec3 omega = chaplygin_top_velocity(p, gamma, k);
  Vec3 dk = top_momentum_rate(p, k, gamma, omega);
  Vec3 dg = cross(gamma, omega);
  return {dk[0], dk[1], dk[2], dg[0], dg[1], dg[2]};
}

Vec chaplygin_top_rhs_velocity(const ExampleParams& p, std::span<const double> x) {
  Vec3 gamma{x[0], x[1], x[2]}, omega{x[3], x[4], x[5]};
  Vec3 rho = contact_arm(p, gamma);
  Mat3 a = contact_inertia(p, rho);
  Vec3 k = mat_vec3(a, omega);
  Vec3 dg = cross(gamma, omega);
  Vec3 drho{p.R * dg[0], p.R * dg[1], p.R * dg[2]};
  Vec3 dk = top_momentum_rate(p, k, gamma, omega);
  // d/dt (A Omega) = dK with dA = m(2<rho,drho> I - drho rho^T - rho drho^T)
  double rd = dot3(rho, drho);
  Vec3 da_omega{};
  for (int i = 0; i < 3; ++i) {
    double s = 2.0 * rd * omega[i];
    for (int j = 0; j < 3; ++j) s -= (drho[i] * rho[j] + rho[i] * drho[j]) * omega[j];
    da_omega[i] = p.m * s;
  }
  Vec3 domega = solve3(a, axpy(-1.0, da_omega, dk));
  return {dg[0], dg[1], dg[2], domega[0], domega[1], domega[2]};
}

double chaplygin_top_energy(const ExampleParams& p, const Vec3& gamma, const Vec3& omega) {
  return 0.5 * dot3(chaplygin_top_momentum(p, gamma, omega), omega);
}

namespace {

double det3(const Mat3& a) {
  return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
         a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
}

// l = 0 (Chaplygin ball): 1 / sqrt(det of the momentum map). Axisymmetric:
// 1 / sqrt(I11 I33 + m rho.I rho), the same up to the factor I11 + m |rho|^2.
double top_density_squared_inverse(const ExampleParams& p, const Vec3& gamma) {
  Vec3 rho = contact_arm(p, gamma);
  if (p.l == 0.0) return det3(contact_inertia(p, rho));
  return p.I11 * p.I33 + p.m * dot3(rho, mat_vec3(inertia(p), rho));
}

}  // namespace

double chaplygin_top_density_velocity(const ExampleParams& p, const Vec3& gamma) {
  return det3(contact_inertia(p, contact_arm(p, gamma))) * chaplygin_top_density_momentum(p, gamma);
}

double chaplygin_top_density_momentum(const ExampleParams& p, const Vec3& gamma) {
  return 1.0 / std::sqrt(top_density_squared_inverse(p, gamma));
}

std::array<double, 6> chaplygin_top_oracle_state(const SystemReduction& red, std::span<const double> qhat,
                                                 std::span<const double> p) {
  const auto& sys = red.system();
  Vec q = sys.section_point(qhat);
  Matd g = red.fiber_metric_at(qhat);
  Vec v = mat_vec<double>(g, p);
  std::vector<VectorField> frame = sys.frame.joint();
  Vec qdot(q.size(), 0.0);
  for (std::size_t i = 0; i < frame.size(); ++i) {
    Vec f = frame[i](q, sys.params);
    for (std::size_t k = 0; k < q.size(); ++k) qdot[k] += v[i] * f[k];
  }
  Vec3 omega = body_angular_velocity(q[0], q[1], q[2], qdot[0], qdot[1], qdot[2]);
  double th = qhat[0], ps = qhat[1];
  return {std::sin(th) * std::sin(ps), std::sin(th) * std::cos(ps), std::cos(th), omega[0], omega[1], omega[2]};
}

// ----------------------------------------------------------- ball on wire

namespace {

struct WireState {
  Vec3 omega, alpha, beta, gamma;
  explicit WireState(std::span<const double> x)
      : omega{x[0], x[1], x[2]}, alpha{x[3], x[4], x[5]}, beta{x[6], x[7], x[8]}, gamma{x[9], x[10], x[11]} {}
};

Vec pack_wire(const Vec3& dw, const Vec3& da, const Vec3& db, const Vec3& dg) {
  return {dw[0], dw[1], dw[2], da[0], da[1], da[2], db[0], db[1], db[2], dg[0], dg[1], dg[2]};
}

Vec wire_kinematics(const ExampleParams& p, const WireState& s, const Vec3& domega) {
  double c = p.R / (p.R + p.r) * dot3(s.gamma, s.omega);
  Vec3 da = axpy(c, s.beta, cross(s.alpha, s.omega));
  Vec3 db = axpy(-c, s.alpha, cross(s.beta, s.omega));
  Vec3 dg = cross(s.gamma, s.omega);
  return pack_wire(domega, da, db, dg);
}

}  // namespace

Vec ball_on_wire_rhs(const ExampleParams& p, std::span<const double> x) {
  WireState s(x);
  const Mat3 in = inertia(p);
  const double mr2 = p.m * p.R * p.R;
  const double k = p.m * p.R * p.R * p.R / (p.R + p.r);
  Vec3 f = axpy(k * dot3(s.gamma, s.omega) * dot3(s.alpha, s.omega), s.beta, cross(mat_vec3(in, s.omega), s.omega));
  Mat3 a = in;
  for (int i = 0; i < 3; ++i) a[i][i] += mr2;
  Vec3 ainv_alpha = solve3(a, s.alpha);
  double alpha_rate = dot3(f, ainv_alpha) / (1.0 - mr2 * dot3(ainv_alpha, s.alpha));
  Vec3 domega = solve3(a, axpy(mr2 * alpha_rate, s.alpha, f));
  return wire_kinematics(p, s, domega);
}

Vec ball_on_wire_rhs_homogeneous(const ExampleParams& p, std::span<const double> x) {
  WireState s(x);
  const double k = p.m * p.R * p.R * p.R / ((p.R + p.r) * (p.I11 + p.m * p.R * p.R));
  double c = k * dot3(s.gamma, s.omega) * dot3(s.alpha, s.omega);
  Vec3 domega{c * s.beta[0], c * s.beta[1], c * s.beta[2]};
  return wire_kinematics(p, s, domega);
}

double ball_on_wire_energy(const ExampleParams& p, std::span<const double> x) {
  WireState s(x);
  double rot = dot3(mat_vec3(inertia(p), s.omega), s.omega);
  double g = dot3(s.omega, s.gamma), b = dot3(s.omega, s.beta);
  return 0.5 * rot + 0.5 * p.m * p.R * p.R * (g * g + b * b);
}

double orthonormality_defect(std::span<const double> x) {
  WireState s(x);
  const std::array<const Vec3*, 3> v = {&s.alpha, &s.beta, &s.gamma};
  double worst = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j) worst = std::max(worst, std::abs(dot3(*v[i], *v[j]) - (i == j ? 1.0 : 0.0)));
  return worst;
}

// ------------------------------------------------------ published densities

double planar_body_density_flat(const ExampleParams& p, double x1, double x2) {
  double s = x1 * x1 + x2 * x2;
  return (p.I11 * p.I22 + p.m * p.I11 * x1 * x1 + p.m * p.I22 * x2 * x2) * std::sqrt(p.I33 + p.m * s);
}

double planar_body_density_axisymmetric(const ExampleParams& p, double x1, double x2) {
  double s = x1 * x1 + x2 * x2;
  double l2 = p.l * p.l;
  return (p.I11 + p.m * s + p.m * l2) * std::sqrt(p.I11 * (p.I33 + p.m * s) + p.m * l2 * p.I33);
}

// ------------------------------------------------------------ shipped set

std::vector<ShippedExample> shipped_examples() {
  auto params = [](double i1, double i2, double i3, double l) {
    ExampleParams p;
    p.I11 = i1;
    p.I22 = i2;
    p.I33 = i3;
    p.l = l;
    return p;
  };
  std::vector<ShippedExample> out;
  out.push_back({"planar_body_flat.cfg", planar_body_on_sphere_config(params(1, 2, 3, 0)), true});
  out.push_back({"planar_body_axisymmetric.cfg", planar_body_on_sphere_config(params(1, 1, 1.5, 0.3)), true});
  ExampleParams tilted = params(1, 2, 3, 0.3);
  tilted.I13 = 0.2;
  out.push_back({"planar_body_generic.cfg", planar_body_on_sphere_config(tilted), false});

  ExampleParams centered = params(1, 1.5, 2, 0);
  centered.I13 = 0.15;
  out.push_back({"chaplygin_top_centered.cfg", chaplygin_top_config(centered), true});
  out.push_back({"chaplygin_top_axisymmetric.cfg", chaplygin_top_config(params(1, 1, 2, 0.3)), true});
  out.push_back({"chaplygin_top_generic.cfg", chaplygin_top_config(params(1, 1.5, 2, 0.3)), false});

  out.push_back({"ball_on_cylinder_homogeneous.cfg", ball_on_cylinder_config(params(0.4, 0.4, 0.4, 0)), true});
  out.push_back({"ball_on_cylinder_generic.cfg", ball_on_cylinder_config(params(1, 2, 1.5, 0)), false});
  out.push_back({"ball_on_cylinder_axisymmetric.cfg", ball_on_cylinder_config(params(1, 1, 2, 0)), false});

  ExampleParams wire = params(0.4, 0.4, 0.4, 0);
  wire.r = 0.0;
  out.push_back({"ball_on_wire_homogeneous.cfg", ball_on_wire_config(wire), true});
  wire.I11 = wire.I22 = 1.0;
  wire.I33 = 2.0;
  out.push_back({"ball_on_wire_generic.cfg", ball_on_wire_config(wire), false});
  return out;
}

}  // namespace nhm
