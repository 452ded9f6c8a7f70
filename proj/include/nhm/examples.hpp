#pragma once

// The four rolling systems: builders that emit system configs, vector-form
// reference ODEs, and the published invariant densities.

#include <array>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "nhm/config.hpp"
#include "nhm/dense.hpp"
#include "nhm/reduction.hpp"

namespace nhm {

struct ExampleParams {
  double I11 = 1.0, I22 = 1.0, I33 = 1.0;
  double I12 = 0.0, I13 = 0.0, I23 = 0.0;
  double m = 1.0;
  double R = 1.0;
  double l = 0.0;  // center-of-mass offset
  double r = 1.0;  // cylinder radius parameter

  bool axisymmetric() const { return I11 == I22 && I13 == 0.0 && I23 == 0.0; }
  bool diagonal() const { return I12 == 0.0 && I13 == 0.0 && I23 == 0.0; }
};

class InvalidParams : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

SystemConfig planar_body_on_sphere_config(const ExampleParams& p);
SystemConfig chaplygin_top_config(const ExampleParams& p);
SystemConfig ball_on_cylinder_config(const ExampleParams& p);
SystemConfig ball_on_wire_config(const ExampleParams& p);

std::shared_ptr<const SymmetricSystem> build_planar_body_on_sphere(const ExampleParams& p);
std::shared_ptr<const SymmetricSystem> build_chaplygin_top(const ExampleParams& p);
std::shared_ptr<const SymmetricSystem> build_ball_on_cylinder(const ExampleParams& p);
std::shared_ptr<const SymmetricSystem> build_ball_on_wire(const ExampleParams& p);

struct ShippedExample {
  std::string file;  // e.g. "chaplygin_top_generic.cfg"
  SystemConfig config;
  bool measure_expected = false;
};

/// The configurations written by `nhm emit-examples`.
std::vector<ShippedExample> shipped_examples();

/// Rebuilds ExampleParams from a config's parameter table (missing entries keep defaults).
ExampleParams example_params_from(const SystemConfig& cfg);

// ------------------------------------------------------------------ SO(3)

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<std::array<double, 3>, 3>;

/// Attitude matrix in the x-convention.
Mat3 euler_matrix(double phi, double theta, double psi);
/// Inverse of euler_matrix for theta in (0, pi).
Vec3 euler_angles(const Mat3& g);
/// Body angular velocity from Euler angle rates.
Vec3 body_angular_velocity(double phi, double theta, double psi, double dphi, double dtheta, double dpsi);
/// Left-invariant frame e_1, e_2, e_3 in (phi, theta, psi) coordinates, one vector per row.
Mat3 left_invariant_frame(double theta, double psi);

// ---------------------------------------------------------- Chaplygin top

/// State (K, gamma) in R^6.
Vec chaplygin_top_rhs_momentum(const ExampleParams& p, std::span<const double> x);
/// State (gamma, Omega) in R^6.
Vec chaplygin_top_rhs_velocity(const ExampleParams& p, std::span<const double> x);
/// Angular momentum about the contact point, K = (I + m(|rho|^2 - rho rho^T)) Omega.
Vec3 chaplygin_top_momentum(const ExampleParams& p, const Vec3& gamma, const Vec3& omega);
Vec3 chaplygin_top_velocity(const ExampleParams& p, const Vec3& gamma, const Vec3& k);
double chaplygin_top_energy(const ExampleParams& p, const Vec3& gamma, const Vec3& omega);
/// Density of the invariant measure w.r.t. d gamma ^ d Omega (axisymmetric or l = 0).
double chaplygin_top_density_velocity(const ExampleParams& p, const Vec3& gamma);
/// Density w.r.t. d gamma ^ d K.
double chaplygin_top_density_momentum(const ExampleParams& p, const Vec3& gamma);
/// (gamma, Omega) for a reduced state of build_chaplygin_top.
std::array<double, 6> chaplygin_top_oracle_state(const SystemReduction& red, std::span<const double> qhat,
                                                 std::span<const double> p);

// -------------------------------------------------------- ball on wire

/// State (Omega, alpha, beta, gamma) in R^12, general diag(I1, I1, I3).
Vec ball_on_wire_rhs(const ExampleParams& p, std::span<const double> x);
/// Homogeneous ball, I = I11.
Vec ball_on_wire_rhs_homogeneous(const ExampleParams& p, std::span<const double> x);
double ball_on_wire_energy(const ExampleParams& p, std::span<const double> x);
/// Largest deviation of (alpha, beta, gamma) from an orthonormal triple.
double orthonormality_defect(std::span<const double> x);

// ------------------------------------------------------- published densities

/// Planar body with l = 0 and diagonal inertia, w.r.t. dX ^ dOmega.
double planar_body_density_flat(const ExampleParams& p, double x1, double x2);
/// Axisymmetric planar body, w.r.t. dX ^ dOmega.
double planar_body_density_axisymmetric(const ExampleParams& p, double x1, double x2);

}  // namespace nhm
