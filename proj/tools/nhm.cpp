#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "nhm/almost_poisson.hpp"
#include "nhm/config.hpp"
#include "nhm/detector.hpp"
#include "nhm/dynamics.hpp"
#include "nhm/examples.hpp"
#include "nhm/parallel.hpp"

using namespace nhm;

namespace {

constexpr int kExitError = 1;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

int exit_code(Verdict v) {
  switch (v) {
    case Verdict::measure_exists: return 0;
    case Verdict::no_measure: return 2;
    case Verdict::inconclusive: return 3;
  }
  return kExitError;
}

Vec parse_numbers(const std::string& text) {
  Vec out;
  for (const auto& piece : split_top_level(text, ',')) {
    std::string t = piece;
    t.erase(0, t.find_first_not_of(" \t"));
    t.erase(t.find_last_not_of(" \t") + 1);
    if (t.empty()) throw UsageError("empty entry in number list '" + text + "'");
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(t, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != t.size()) throw UsageError("not a number: '" + t + "'");
    out.push_back(v);
  }
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  return nlohmann::json::parse(in);
}

struct Loaded {
  SystemConfig config;
  std::shared_ptr<const SymmetricSystem> system;
};

Loaded load(const std::string& path) {
  Loaded l;
  l.config = load_config(path);
  l.system = compile_system(l.config);
  return l;
}

std::string pad(const std::string& s, std::size_t n) { return s.size() >= n ? s : s + std::string(n - s.size(), ' '); }

void print_summary(std::ostream& os, const DetectionReport& r) {
  os << pad("system", 14) << r.system << "\n";
  os << pad("structure", 14) << "n_vertical=" << r.n_vertical << " n_horizontal=" << r.n_horizontal
     << " corank=" << r.corank << "\n";
  os << pad("condition one", 14) << format_number(r.condition_one) << "\n";
  os << pad("closedness", 14) << format_number(r.closedness) << " (" << r.closedness_method << ")\n";
  if (r.loop_residual >= 0.0) os << pad("loop", 14) << format_number(r.loop_residual) << "\n";
  os << pad("verdict", 14) << to_string(r.verdict) << ": " << r.reason << "\n";
}

// ------------------------------------------------------------------ analyze

struct AnalyzeArgs {
  std::string system;
  std::size_t grid = 33;
  Thresholds th;
  std::string report;
};

int cmd_analyze(const AnalyzeArgs& a) {
  Loaded l = load(a.system);
  SystemReduction rs(l.system);
  DetectionReport r = detect(rs, a.grid, a.th, l.config.name);
  std::string json = r.to_json().dump(2) + "\n";
  if (a.report.empty()) {
    std::cout << json;
    print_summary(std::cerr, r);
  } else {
    write_text(a.report, json);
    print_summary(std::cout, r);
  }
  return exit_code(r.verdict);
}

// ----------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string system;
  std::string state;
  double h = 1e-3;
  double T = 1.0;
  std::string out;
  bool oracle = false;
  std::size_t every = 1;
};

struct OracleModel {
  OdeRhs rhs;
  std::vector<std::string> names;
  std::vector<std::string> diagnostic_names;
  std::function<Vec(std::span<const double>)> diagnostics;
};

OracleModel oracle_model(const SystemConfig& cfg) {
  ExampleParams p = example_params_from(cfg);
  OracleModel m;
  if (cfg.oracle == "chaplygin_top") {
    m.rhs = [p](std::span<const double> x) { return chaplygin_top_rhs_momentum(p, x); };
    m.names = {"K1", "K2", "K3", "gamma1", "gamma2", "gamma3"};
    m.diagnostic_names = {"H", "gamma_norm"};
    m.diagnostics = [p](std::span<const double> x) {
      Vec3 g{x[3], x[4], x[5]};
      Vec3 omega = chaplygin_top_velocity(p, g, {x[0], x[1], x[2]});
      return Vec{chaplygin_top_energy(p, g, omega), std::sqrt(g[0] * g[0] + g[1] * g[1] + g[2] * g[2])};
    };
  } else if (cfg.oracle == "ball_on_wire") {
    if (p.I11 == p.I33)
      m.rhs = [p](std::span<const double> x) { return ball_on_wire_rhs_homogeneous(p, x); };
    else
      m.rhs = [p](std::span<const double> x) { return ball_on_wire_rhs(p, x); };
    m.names = {"Omega1", "Omega2", "Omega3", "alpha1", "alpha2", "alpha3",
               "beta1",  "beta2",  "beta3",  "gamma1", "gamma2", "gamma3"};
    m.diagnostic_names = {"H", "orthonormality_defect"};
    m.diagnostics = [p](std::span<const double> x) { return Vec{ball_on_wire_energy(p, x), orthonormality_defect(x)}; };
  } else {
    throw UsageError(cfg.oracle.empty() ? "system '" + cfg.name + "' declares no oracle"
                                        : "unknown oracle '" + cfg.oracle + "'");
  }
  return m;
}

int cmd_simulate(const SimulateArgs& a) {
  Loaded l = load(a.system);
  Vec x0 = parse_numbers(a.state);
  IntegrateOptions opt;
  opt.sample_every = a.every;
  OdeRhs rhs;
  std::unique_ptr<SystemReduction> rs;
  std::unique_ptr<KineticHamiltonian> ham;
  if (a.oracle) {
    OracleModel m = oracle_model(l.config);
    if (x0.size() != m.names.size())
      throw UsageError("oracle state needs " + std::to_string(m.names.size()) + " components, got " +
                       std::to_string(x0.size()));
    rhs = m.rhs;
    opt.state_names = m.names;
    opt.diagnostic_names = m.diagnostic_names;
    opt.diagnostics = m.diagnostics;
  } else {
    rs = std::make_unique<SystemReduction>(l.system);
    ham = std::make_unique<KineticHamiltonian>(*rs);
    const std::size_t n = rs->shape_dim(), r = rs->rank();
    if (x0.size() != n + r)
      throw UsageError("state needs " + std::to_string(n) + " shape coordinates and " + std::to_string(r) +
                       " momenta, got " + std::to_string(x0.size()) + " numbers");
    const Chart& chart = rs->shape_chart();
    if (!chart.inside_margin(std::span<const double>(x0).first(n)))
      throw UsageError("initial shape point lies outside the chart margin");
    opt.state_names = chart.names;
    for (std::size_t i = 0; i < r; ++i) opt.state_names.push_back("p" + std::to_string(i + 1));
    opt.diagnostic_names = {"H"};
    opt.inside = [&chart, n](std::span<const double> x) { return chart.inside_margin(x.first(n)); };
    const ReducedStructure* rsp = rs.get();
    const KineticHamiltonian* hp = ham.get();
    rhs = [rsp, hp](std::span<const double> x) { return hamilton_rhs(*rsp, *hp, x); };
    opt.diagnostics = [hp, n](std::span<const double> x) {
      return Vec{(*hp)(PhaseState::unpack(x, n))};
    };
  }
  Trajectory tr;
  try {
    tr = rk4_integrate(rhs, x0, a.h, a.T, opt);
  } catch (const BlowUp& e) {
    std::cerr << "error: " << e.what() << " (last good time " << format_number(e.time()) << ")\n";
    return kExitError;
  }
  std::ostringstream csv;
  tr.write_csv(csv);
  if (a.out.empty())
    std::cout << csv.str();
  else
    write_text(a.out, csv.str());
  return 0;
}

// ----------------------------------------------------------- verify-measure

struct VerifyArgs {
  std::string system;
  std::string density;
  std::string coordinates = "momentum";
  std::string detected;
  std::size_t samples = 100;
  std::uint64_t seed = 42;
  double tolerance = 1e-5;
};

int cmd_verify(const VerifyArgs& a) {
  if (!a.density.empty() && !a.detected.empty()) throw UsageError("--density and --detected are exclusive");
  Loaded l = load(a.system);
  SystemReduction rs(l.system);
  KineticHamiltonian ham(rs);
  DensityFn f;
  std::string source;
  if (!a.detected.empty()) {
    DetectionReport r = DetectionReport::from_json(read_json(a.detected));
    if (r.axes.size() != rs.shape_dim()) throw UsageError("report grid does not match the system's shape chart");
    if (r.sigma.empty()) throw UsageError("report carries no density exponent (verdict " + to_string(r.verdict) + ")");
    f = detected_density(rs, r);
    source = "detected " + a.detected;
  } else if (!a.density.empty()) {
    f = expression_density(rs, *l.system, a.density, a.coordinates);
    source = a.density;
  } else if (l.config.density) {
    f = expression_density(rs, *l.system, l.config.density->expr, l.config.density->coordinates);
    source = l.config.density->expr;
  } else {
    throw UsageError("no density given and the config has no [density] block");
  }
  if (a.samples == 0) throw UsageError("--samples must be positive");

  double worst = max_relative_liouville_residual(rs, ham, f, a.samples, a.seed);
  const bool pass = worst <= a.tolerance;
  std::cout << "density        " << source << "\n"
            << "samples        " << a.samples << " (seed " << a.seed << ")\n"
            << "max |residual|/|f| " << format_number(worst) << "\n"
            << (pass ? "pass" : "fail") << " (tolerance " << format_number(a.tolerance) << ")\n";
  return pass ? 0 : 2;
}

// -------------------------------------------------------------------- sweep

struct Range {
  std::string name;
  Vec values;
};

Range parse_range(const std::string& spec) {
  auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) throw UsageError("expected param=lo:hi:steps, got '" + spec + "'");
  Range r;
  r.name = spec.substr(0, eq);
  std::string rest = spec.substr(eq + 1);
  std::vector<std::string> parts;
  std::stringstream ss(rest);
  for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
  if (parts.size() != 3) throw UsageError("expected param=lo:hi:steps, got '" + spec + "'");
  double lo = parse_numbers(parts[0]).at(0), hi = parse_numbers(parts[1]).at(0);
  double steps_d = parse_numbers(parts[2]).at(0);
  if (steps_d < 1.0 || steps_d != std::floor(steps_d)) throw UsageError("empty range in '" + spec + "'");
  if (hi < lo) throw UsageError("empty range in '" + spec + "' (hi < lo)");
  auto steps = static_cast<std::size_t>(steps_d);
  if (steps > 1 && hi == lo) throw UsageError("several steps over a zero-width range in '" + spec + "'");
  for (std::size_t k = 0; k < steps; ++k)
    r.values.push_back(steps == 1 ? lo : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(steps - 1));
  return r;
}

struct SweepArgs {
  std::string system;
  std::vector<std::string> vary;
  std::size_t grid = 33;
  Thresholds th;
  std::string report;
};

int cmd_sweep(const SweepArgs& a) {
  SystemConfig base = load_config(a.system);
  std::vector<Range> ranges;
  for (const auto& v : a.vary) {
    for (const auto& piece : split_top_level(v, ',')) {
      Range r = parse_range(piece);
      if (!base.parameter(r.name)) throw UsageError("unknown parameter '" + r.name + "' in --vary");
      ranges.push_back(std::move(r));
    }
  }
  if (ranges.empty()) throw UsageError("--vary needs at least one range");

  nlohmann::json table;
  table["system"] = base.name;
  table["grid"] = a.grid;
  table["thresholds"] = {{"accept", a.th.accept}, {"reject", a.th.reject}};
  nlohmann::json rows = nlohmann::json::array();
  std::vector<std::size_t> idx(ranges.size(), 0);
  while (true) {
    SystemConfig cfg = base;
    nlohmann::json params = nlohmann::json::object();
    for (std::size_t k = 0; k < ranges.size(); ++k) {
      cfg.set_parameter(ranges[k].name, ranges[k].values[idx[k]]);
      params[ranges[k].name] = ranges[k].values[idx[k]];
    }
    SystemReduction rs(compile_system(cfg));
    DetectionReport r = detect(rs, a.grid, a.th, cfg.name);
    nlohmann::json row;
    row["parameters"] = params;
    row["verdict"] = to_string(r.verdict);
    row["condition_one"] = r.condition_one;
    row["closedness"] = r.closedness;
    row["loop_residual"] = r.loop_residual >= 0.0 ? nlohmann::json(r.loop_residual) : nlohmann::json();
    row["reason"] = r.reason;
    rows.push_back(row);
    std::cout << pad(params.dump(), 40) << " " << to_string(r.verdict) << "\n";

    bool advanced = false;
    for (std::size_t k = ranges.size(); k-- > 0;) {
      if (++idx[k] < ranges[k].values.size()) {
        advanced = true;
        break;
      }
      idx[k] = 0;
    }
    if (!advanced) break;
  }
  table["results"] = rows;
  std::string json = table.dump(2) + "\n";
  if (a.report.empty())
    std::cout << json;
  else
    write_text(a.report, json);
  return 0;
}

// ------------------------------------------------------------ emit-examples

int cmd_emit(const std::string& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& ex : shipped_examples()) {
    auto path = std::filesystem::path(dir) / ex.file;
    save_config(ex.config, path);
    std::cout << path.string() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Invariant-measure detection for symmetric nonholonomic systems"};
  app.require_subcommand(1);
  std::size_t threads = 0;
  app.add_option("--threads", threads, "Worker threads (overrides NHM_THREADS)");

  AnalyzeArgs an;
  auto* analyze = app.add_subcommand("analyze", "Run the detector on a system config");
  analyze->add_option("--system", an.system, "System config file")->required()->check(CLI::ExistingFile);
  analyze->add_option("--grid", an.grid, "Grid points per shape axis")->check(CLI::Range(2, 4097));
  analyze->add_option("--accept", an.th.accept, "Residual accepted as zero");
  analyze->add_option("--reject", an.th.reject, "Residual accepted as an obstruction");
  analyze->add_option("--report", an.report, "Write the JSON report here (default: stdout)");

  SimulateArgs sm;
  auto* simulate = app.add_subcommand("simulate", "Integrate the reduced flow (or the oracle ODE) with RK4");
  simulate->add_option("--system", sm.system, "System config file")->required()->check(CLI::ExistingFile);
  simulate->add_option("--state", sm.state, "Initial state: shape coordinates then momenta, comma separated")
      ->required();
  simulate->set_help_flag("--help", "Print this help message and exit");
  simulate->add_option("--h", sm.h, "Step")->check(CLI::PositiveNumber);
  simulate->add_option("--T", sm.T, "Horizon")->check(CLI::PositiveNumber);
  simulate->add_option("--out", sm.out, "CSV output (default: stdout)");
  simulate->add_option("--every", sm.every, "Write every n-th step")->check(CLI::PositiveNumber);
  simulate->add_flag("--oracle", sm.oracle, "Integrate the system's vector-form oracle instead");

  VerifyArgs vf;
  auto* verify = app.add_subcommand("verify-measure", "Check a density against the Liouville equation");
  verify->add_option("--system", vf.system, "System config file")->required()->check(CLI::ExistingFile);
  verify->add_option("--density", vf.density, "Density expression (default: the config's [density] block)");
  verify->add_option("--coordinates", vf.coordinates, "momentum or velocity")
      ->check(CLI::IsMember({"momentum", "velocity"}));
  verify->add_option("--detected", vf.detected, "Use exp(sigma) from an analyze report")->check(CLI::ExistingFile);
  verify->add_option("--samples", vf.samples, "Random states");
  verify->add_option("--seed", vf.seed, "Sampling seed");
  verify->add_option("--tolerance", vf.tolerance, "Pass if max |residual|/|f| is at most this");

  SweepArgs sw;
  auto* sweep = app.add_subcommand("sweep", "Run the detector over a parameter grid");
  sweep->add_option("--system", sw.system, "System config file")->required()->check(CLI::ExistingFile);
  sweep->add_option("--vary", sw.vary, "param=lo:hi:steps (repeatable, or comma separated)")->required();
  sweep->add_option("--grid", sw.grid, "Grid points per shape axis")->check(CLI::Range(2, 4097));
  sweep->add_option("--accept", sw.th.accept, "Residual accepted as zero");
  sweep->add_option("--reject", sw.th.reject, "Residual accepted as an obstruction");
  sweep->add_option("--report", sw.report, "Write the JSON table here (default: stdout)");

  std::string emit_dir = "configs";
  auto* emit = app.add_subcommand("emit-examples", "Write the shipped example configs");
  emit->add_option("--dir", emit_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitError;
  }
  if (threads > 0) set_thread_count(threads);

  try {
    if (*analyze) return cmd_analyze(an);
    if (*simulate) return cmd_simulate(sm);
    if (*verify) return cmd_verify(vf);
    if (*sweep) return cmd_sweep(sw);
    if (*emit) return cmd_emit(emit_dir);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
  } catch (const ExprError& e) {
    std::cerr << "expression error: " << e.what() << "\n";
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
  }
  return kExitError;
}
