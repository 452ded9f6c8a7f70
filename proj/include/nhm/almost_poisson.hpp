#pragma once

// Hamiltonian vector fields of a linear almost-Poisson structure on the
// reduced bundle, with the kinetic Hamiltonian H = 1/2 G^{IJ} p_I p_J.

#include <span>
#include <vector>

#include "nhm/dense.hpp"
#include "nhm/reduction.hpp"

namespace nhm {

/// (qhat, p) with p ordered verticals first.
struct PhaseState {
  Vec qhat;
  Vec p;

  std::size_t size() const { return qhat.size() + p.size(); }
  Vec pack() const;
  static PhaseState unpack(std::span<const double> x, std::size_t shape_dim);
};

class KineticHamiltonian {
 public:
  explicit KineticHamiltonian(const ReducedStructure& rs) : rs_(&rs) {}
  const ReducedStructure& structure() const { return *rs_; }

  double operator()(const PhaseState& x) const;
  /// G^{IJ} p_J
  Vec dp(const PhaseState& x) const;
  /// 1/2 dG^{IJ}/dqhat^i p_I p_J
  Vec dq(const PhaseState& x) const;

 private:
  const ReducedStructure* rs_;
};

double energy(const KineticHamiltonian& h, const PhaseState& x);

/// (dqhat/dt, dp/dt) packed like PhaseState::pack.
Vec hamilton_rhs(const ReducedStructure& rs, const KineticHamiltonian& h, const PhaseState& x);
Vec hamilton_rhs(const ReducedStructure& rs, const KineticHamiltonian& h, std::span<const double> x);

/// Component I = d rho_I^i / d qhat^i + sum_J C_IJ^J for the frame volume.
Vec modular_components(const ReducedStructure& rs, std::span<const double> qhat);

/// Gradient of a phase-space function: (df/dqhat, df/dp).
struct PhaseGradient {
  Vec dq;
  Vec dp;
};

/// {f,g} = rho_I^i (f_i g_{p_I} - f_{p_I} g_i) - C_IJ^K p_K f_{p_I} g_{p_J}
double bracket(const ReducedStructure& rs, std::span<const double> qhat, std::span<const double> p,
               const PhaseGradient& df, const PhaseGradient& dg);

/// f(x) = c + a.x + 1/2 x^T Q x on the packed phase vector.
struct QuadraticFunction {
  double c = 0.0;
  Vec a;
  Matd q;

  double operator()(std::span<const double> x) const;
  PhaseGradient gradient(const PhaseState& x) const;
};

/// |{f,g} + {g,f}| at x.
double bracket_skewness_check(const ReducedStructure& rs, const QuadraticFunction& f, const QuadraticFunction& g,
                              const PhaseState& x);

}  // namespace nhm
