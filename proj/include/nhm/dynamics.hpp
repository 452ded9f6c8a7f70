#pragma once

// Fixed-step RK4 trajectories and ensemble checks of volume transport.

#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "nhm/dense.hpp"

namespace nhm {

using OdeRhs = std::function<Vec(std::span<const double>)>;
using StateFn = std::function<double(std::span<const double>)>;

class BlowUp : public std::runtime_error {
 public:
  BlowUp(const std::string& what, double time, Vec last_good);
  double time() const { return time_; }
  const Vec& last_good() const { return last_; }

 private:
  double time_;
  Vec last_;
};

struct Trajectory {
  double h = 0.0;
  std::vector<std::string> state_names;
  std::vector<std::string> diagnostic_names;
  std::vector<double> times;
  std::vector<Vec> states;
  std::vector<Vec> diagnostics;

  /// Header: t, state names, diagnostic names.
  void write_csv(std::ostream& out) const;
};

struct IntegrateOptions {
  /// Accepts a state; a rejected step is retried as two half steps.
  std::function<bool(std::span<const double>)> inside;
  int max_halvings = 20;
  /// Keep every n-th step (the final state is always kept).
  std::size_t sample_every = 1;
  std::vector<std::string> state_names;
  std::vector<std::string> diagnostic_names;
  std::function<Vec(std::span<const double>)> diagnostics;
};

Vec rk4_step(const OdeRhs& rhs, std::span<const double> x, double h);

/// Integrates from 0 to T with steps of h (the last one shortened to land on T).
/// Throws BlowUp on a non-finite state or when max_halvings cannot keep the state inside.
Trajectory rk4_integrate(const OdeRhs& rhs, Vec x0, double h, double T, const IntegrateOptions& opt = {});

/// Final state only.
Vec rk4_flow(const OdeRhs& rhs, Vec x0, double h, double T, const IntegrateOptions& opt = {});

struct DriftStats {
  double max_mismatch = 0.0;
  double mean_mismatch = 0.0;
  std::size_t members = 0;
};

/// For every cloud member, transports the vertices x0 +- eps e_i (eps = rel_edge * max(1, |x0|_inf)),
/// forms the linearized flow J from their differences and reports |det J * f(x_T) / f(x_0) - 1|.
DriftStats ensemble_volume_drift(const OdeRhs& rhs, const StateFn& density, const std::vector<Vec>& cloud, double h,
                                 double T, double rel_edge = 1e-4, const IntegrateOptions& opt = {});

}  // namespace nhm
