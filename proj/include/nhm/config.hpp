#pragma once

// Line-oriented system-definition files. Sections:
//   [system]            name = ..., oracle = ...
//   [parameters]        I11 = 2.0
//   [chart.q]           theta = lo, hi | margin
//   [chart.shape]       same layout
//   [metric]            theta,theta = expr            (upper triangle, omitted = 0)
//   [kinetic]           w1 = expr, expr, ...          (rows of the velocity map)
//   [kinetic.mass]      w1,w1 = expr
//   [frame.vertical]    Z1 = expr, expr, ...
//   [frame.horizontal]  Y1 = expr, expr, ...
//   [frame.options]     orthogonalize = true
//   [projection]        X1 = expr of Q coordinates
//   [section]           phi = expr of shape coordinates
//   [fiber.N]           same layout as [section]
//   [density]           expr = ..., coordinates = momentum | velocity
// Text is kept verbatim so emit(parse(s)) reproduces every expression.

#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nhm/reduction.hpp"

namespace nhm {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& origin, std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct ConfigChartEntry {
  std::string name;
  std::string lo;
  std::string hi;
  std::string margin = "0";
};

struct ConfigField {
  std::string name;
  std::vector<std::string> components;
};

using ConfigPairs = std::vector<std::pair<std::string, std::string>>;

struct DensityConfig {
  std::string expr;
  std::string coordinates = "momentum";  // or "velocity"
};

struct SystemConfig {
  std::string name;
  std::string oracle;
  std::vector<std::pair<std::string, double>> parameters;
  std::vector<ConfigChartEntry> q_chart;
  std::vector<ConfigChartEntry> shape_chart;
  ConfigPairs metric;        // "a,b" -> expr
  std::vector<ConfigField> kinetic;
  ConfigPairs kinetic_mass;  // "w1,w2" -> expr
  std::vector<ConfigField> vertical;
  std::vector<ConfigField> horizontal;
  bool orthogonalize = false;
  ConfigPairs projection;    // shape name -> expr(q)
  ConfigPairs section;       // q name -> expr(qhat)
  std::vector<ConfigPairs> fibers;
  std::optional<DensityConfig> density;

  std::vector<std::string> parameter_names() const;
  Vec parameter_values() const;
  /// Returns false when the name is unknown.
  bool set_parameter(const std::string& name, double value);
  std::optional<double> parameter(const std::string& name) const;
};

SystemConfig parse_config(std::string_view text, const std::string& origin = "<config>");
SystemConfig load_config(const std::filesystem::path& path);
std::string emit_config(const SystemConfig& cfg);
void save_config(const SystemConfig& cfg, const std::filesystem::path& path);

/// Validates every expression against the declared names and builds the
/// numeric system. Throws ConfigError (with the offending section) or ExprError.
std::shared_ptr<const SymmetricSystem> compile_system(const SystemConfig& cfg);

/// Splits on commas that are not inside parentheses.
std::vector<std::string> split_top_level(std::string_view s, char sep = ',');

}  // namespace nhm
