#include "nhm/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace nhm {

ConfigError::ConfigError(const std::string& origin, std::size_t line, const std::string& what)
    : std::runtime_error(line ? origin + ":" + std::to_string(line) + ": " + what : origin + ": " + what),
      line_(line) {}

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

bool parse_double(const std::string& s, double& out) {
  const char* b = s.data();
  const char* e = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && ptr == e;
}

ConfigChartEntry parse_chart_entry(const std::string& key, const std::string& value, const std::string& origin,
                                   std::size_t line) {
  ConfigChartEntry c;
  c.name = key;
  std::string range = value;
  auto bar = value.find('|');
  if (bar != std::string::npos) {
    range = value.substr(0, bar);
    c.margin = trim(value.substr(bar + 1));
  }
  auto parts = split_top_level(range);
  if (parts.size() != 2) throw ConfigError(origin, line, "chart entry needs 'lo, hi | margin', got '" + value + "'");
  c.lo = parts[0];
  c.hi = parts[1];
  return c;
}

ConfigField parse_field(const std::string& key, const std::string& value) {
  return ConfigField{key, split_top_level(value)};
}

const std::set<std::string> kSections = {"system",          "parameters",       "chart.q",    "chart.shape",
                                         "metric",          "kinetic",          "kinetic.mass", "frame.vertical",
                                         "frame.horizontal", "frame.options",   "projection", "section",
                                         "density"};

}  // namespace

std::vector<std::string> split_top_level(std::string_view s, char sep) {
  std::vector<std::string> out;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '(') ++depth;
    else if (s[i] == ')') --depth;
    else if (s[i] == sep && depth == 0) {
      out.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  out.push_back(trim(s.substr(start)));
  if (out.size() == 1 && out[0].empty()) out.clear();
  return out;
}

std::vector<std::string> SystemConfig::parameter_names() const {
  std::vector<std::string> n;
  for (const auto& [k, v] : parameters) n.push_back(k);
  return n;
}

Vec SystemConfig::parameter_values() const {
  Vec v;
  for (const auto& [k, x] : parameters) v.push_back(x);
  return v;
}

bool SystemConfig::set_parameter(const std::string& n, double value) {
  for (auto& [k, v] : parameters)
    if (k == n) {
      v = value;
      return true;
    }
  return false;
}

std::optional<double> SystemConfig::parameter(const std::string& n) const {
  for (const auto& [k, v] : parameters)
    if (k == n) return v;
  return std::nullopt;
}

SystemConfig parse_config(std::string_view text, const std::string& origin) {
  SystemConfig cfg;
  std::string section;
  std::set<std::string> seen_sections;
  std::set<std::string> seen_keys;
  std::map<std::string, std::size_t> fiber_index;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view raw = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    auto hash = raw.find('#');
    std::string line = trim(hash == std::string_view::npos ? raw : raw.substr(0, hash));
    if (line.empty()) {
      if (nl == text.size()) break;
      continue;
    }
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(origin, line_no, "unterminated section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      bool fiber = section.rfind("fiber.", 0) == 0 && section.size() > 6;
      if (!fiber && !kSections.count(section)) throw ConfigError(origin, line_no, "unknown section [" + section + "]");
      if (!seen_sections.insert(section).second)
        throw ConfigError(origin, line_no, "duplicate section [" + section + "]");
      if (fiber) {
        fiber_index[section] = cfg.fibers.size();
        cfg.fibers.emplace_back();
      }
      continue;
    }
    if (section.empty()) throw ConfigError(origin, line_no, "key/value line outside any section");
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(origin, line_no, "expected 'key = value'");
    std::string key = trim(std::string_view(line).substr(0, eq));
    std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) throw ConfigError(origin, line_no, "empty key");
    if (value.empty()) throw ConfigError(origin, line_no, "empty value for '" + key + "'");
    if (!seen_keys.insert(section + "/" + key).second)
      throw ConfigError(origin, line_no, "duplicate key '" + key + "' in [" + section + "]");

    if (section == "system") {
      if (key == "name") cfg.name = value;
      else if (key == "oracle") cfg.oracle = value;
      else throw ConfigError(origin, line_no, "unknown key '" + key + "' in [system]");
    } else if (section == "parameters") {
      double v = 0.0;
      if (!parse_double(value, v)) throw ConfigError(origin, line_no, "parameter '" + key + "' is not a number");
      cfg.parameters.emplace_back(key, v);
    } else if (section == "chart.q") {
      cfg.q_chart.push_back(parse_chart_entry(key, value, origin, line_no));
    } else if (section == "chart.shape") {
      cfg.shape_chart.push_back(parse_chart_entry(key, value, origin, line_no));
    } else if (section == "metric") {
      cfg.metric.emplace_back(key, value);
    } else if (section == "kinetic") {
      cfg.kinetic.push_back(parse_field(key, value));
    } else if (section == "kinetic.mass") {
      cfg.kinetic_mass.emplace_back(key, value);
    } else if (section == "frame.vertical") {
      cfg.vertical.push_back(parse_field(key, value));
    } else if (section == "frame.horizontal") {
      cfg.horizontal.push_back(parse_field(key, value));
    } else if (section == "frame.options") {
      if (key != "orthogonalize") throw ConfigError(origin, line_no, "unknown key '" + key + "' in [frame.options]");
      if (value == "true") cfg.orthogonalize = true;
      else if (value == "false") cfg.orthogonalize = false;
      else throw ConfigError(origin, line_no, "orthogonalize must be true or false");
    } else if (section == "projection") {
      cfg.projection.emplace_back(key, value);
    } else if (section == "section") {
      cfg.section.emplace_back(key, value);
    } else if (section == "density") {
      if (!cfg.density) cfg.density.emplace();
      if (key == "expr") cfg.density->expr = value;
      else if (key == "coordinates") {
        if (value != "momentum" && value != "velocity")
          throw ConfigError(origin, line_no, "density coordinates must be momentum or velocity");
        cfg.density->coordinates = value;
      } else throw ConfigError(origin, line_no, "unknown key '" + key + "' in [density]");
    } else {
      cfg.fibers[fiber_index.at(section)].emplace_back(key, value);
    }
    if (nl == text.size()) break;
  }
  if (cfg.density && cfg.density->expr.empty()) throw ConfigError(origin, 0, "[density] needs an expr");
  return cfg;
}

SystemConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), 0, "cannot open file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

std::string emit_config(const SystemConfig& cfg) {
  std::ostringstream os;
  auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + v[i];
    return s;
  };
  auto chart = [&](const char* name, const std::vector<ConfigChartEntry>& c) {
    os << "\n[" << name << "]\n";
    for (const auto& e : c) os << e.name << " = " << e.lo << ", " << e.hi << " | " << e.margin << "\n";
  };
  auto pairs = [&](const std::string& name, const ConfigPairs& p) {
    if (p.empty()) return;
    os << "\n[" << name << "]\n";
    for (const auto& [k, v] : p) os << k << " = " << v << "\n";
  };
  auto fields = [&](const char* name, const std::vector<ConfigField>& f) {
    if (f.empty()) return;
    os << "\n[" << name << "]\n";
    for (const auto& x : f) os << x.name << " = " << join(x.components) << "\n";
  };
  os << "[system]\nname = " << cfg.name << "\n";
  if (!cfg.oracle.empty()) os << "oracle = " << cfg.oracle << "\n";
  if (!cfg.parameters.empty()) {
    os << "\n[parameters]\n";
    for (const auto& [k, v] : cfg.parameters) os << k << " = " << format_number(v) << "\n";
  }
  chart("chart.q", cfg.q_chart);
  chart("chart.shape", cfg.shape_chart);
  pairs("metric", cfg.metric);
  fields("kinetic", cfg.kinetic);
  pairs("kinetic.mass", cfg.kinetic_mass);
  fields("frame.vertical", cfg.vertical);
  fields("frame.horizontal", cfg.horizontal);
  if (cfg.orthogonalize) os << "\n[frame.options]\northogonalize = true\n";
  pairs("projection", cfg.projection);
  pairs("section", cfg.section);
  for (std::size_t i = 0; i < cfg.fibers.size(); ++i) pairs("fiber." + std::to_string(i + 1), cfg.fibers[i]);
  if (cfg.density) {
    os << "\n[density]\nexpr = " << cfg.density->expr << "\ncoordinates = " << cfg.density->coordinates << "\n";
  }
  return os.str();
}

void save_config(const SystemConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError(path.string(), 0, "cannot write file");
  out << emit_config(cfg);
}

namespace {

std::size_t index_of(const std::vector<std::string>& names, const std::string& n, const std::string& where) {
  auto it = std::find(names.begin(), names.end(), n);
  if (it == names.end()) throw ConfigError(where, 0, "unknown name '" + n + "'");
  return static_cast<std::size_t>(it - names.begin());
}

Expression parse_in(const std::string& where, const std::string& src, std::span<const std::string> vars,
                    std::span<const std::string> params) {
  try {
    return Expression::parse(src, vars, params);
  } catch (const ExprError& e) {
    throw ConfigError(where, 0, e.what());
  }
}

Chart compile_chart(const std::vector<ConfigChartEntry>& entries, const std::string& where,
                    std::span<const std::string> pnames, std::span<const double> pvals) {
  Chart c;
  for (const auto& e : entries) {
    std::string at = where + " " + e.name;
    c.names.push_back(e.name);
    c.lo.push_back(parse_in(at, e.lo, {}, pnames).eval(std::span<const double>{}, pvals));
    c.hi.push_back(parse_in(at, e.hi, {}, pnames).eval(std::span<const double>{}, pvals));
    c.margin.push_back(parse_in(at, e.margin, {}, pnames).eval(std::span<const double>{}, pvals));
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where, 0, e.what());
  }
  return c;
}

std::vector<Expression> compile_keyed(const ConfigPairs& pairs, const std::vector<std::string>& keys,
                                      const std::string& where, std::span<const std::string> vars,
                                      std::span<const std::string> params) {
  if (pairs.size() != keys.size())
    throw ConfigError(where, 0, "expected " + std::to_string(keys.size()) + " entries, got " +
                                    std::to_string(pairs.size()));
  std::vector<Expression> out(keys.size());
  std::vector<bool> set(keys.size(), false);
  for (const auto& [k, v] : pairs) {
    std::size_t i = index_of(keys, k, where);
    if (set[i]) throw ConfigError(where, 0, "duplicate entry for '" + k + "'");
    set[i] = true;
    out[i] = parse_in(where + " " + k, v, vars, params);
  }
  return out;
}

std::vector<Expression> compile_upper(const ConfigPairs& pairs, const std::vector<std::string>& names,
                                      const std::string& where, std::span<const std::string> vars,
                                      std::span<const std::string> params) {
  const std::size_t n = names.size();
  std::vector<Expression> upper(n * (n + 1) / 2, Expression::constant(0.0));
  std::vector<bool> set(upper.size(), false);
  for (const auto& [k, v] : pairs) {
    auto parts = split_top_level(k);
    if (parts.size() != 2) throw ConfigError(where, 0, "entry key must be 'a,b', got '" + k + "'");
    std::size_t i = index_of(names, parts[0], where);
    std::size_t j = index_of(names, parts[1], where);
    std::size_t u = upper_index(n, i, j);
    if (set[u]) throw ConfigError(where, 0, "entry '" + k + "' given twice");
    set[u] = true;
    upper[u] = parse_in(where + " " + k, v, vars, params);
  }
  return upper;
}

VectorField compile_field(const ConfigField& f, const std::string& where, std::span<const std::string> vars,
                          std::span<const std::string> params) {
  if (f.components.size() != vars.size())
    throw ConfigError(where, 0, "field '" + f.name + "' has " + std::to_string(f.components.size()) +
                                    " components, chart has " + std::to_string(vars.size()));
  std::vector<Expression> comps;
  for (const auto& c : f.components) comps.push_back(parse_in(where + " " + f.name, c, vars, params));
  return VectorField(std::move(comps));
}

}  // namespace

std::shared_ptr<const SymmetricSystem> compile_system(const SystemConfig& cfg) {
  auto sys = std::make_shared<SymmetricSystem>();
  sys->name = cfg.name;
  sys->param_names = cfg.parameter_names();
  sys->params = cfg.parameter_values();
  {
    std::set<std::string> uniq(sys->param_names.begin(), sys->param_names.end());
    if (uniq.size() != sys->param_names.size()) throw ConfigError("[parameters]", 0, "duplicate parameter name");
  }
  const auto& pn = sys->param_names;
  sys->q_chart = compile_chart(cfg.q_chart, "[chart.q]", pn, sys->params);
  sys->shape_chart = compile_chart(cfg.shape_chart, "[chart.shape]", pn, sys->params);
  const auto& qn = sys->q_chart.names;
  const auto& sn = sys->shape_chart.names;
  for (const auto& n : qn)
    if (std::find(pn.begin(), pn.end(), n) != pn.end())
      throw ConfigError("[chart.q]", 0, "coordinate '" + n + "' shadows a parameter");

  if (cfg.metric.empty() == cfg.kinetic.empty())
    throw ConfigError("[metric]", 0, "give exactly one of [metric] or [kinetic]");
  if (!cfg.metric.empty()) {
    sys->metric = std::make_shared<MetricField>(
        MetricField::from_components(qn.size(), compile_upper(cfg.metric, qn, "[metric]", qn, pn)));
  } else {
    std::vector<std::string> rows;
    std::vector<std::vector<Expression>> map;
    for (const auto& f : cfg.kinetic) {
      rows.push_back(f.name);
      map.push_back(compile_field(f, "[kinetic]", qn, pn).components());
    }
    auto mass = compile_upper(cfg.kinetic_mass, rows, "[kinetic.mass]", {}, pn);
    sys->metric = std::make_shared<MetricField>(MetricField::from_kinetic(std::move(map), std::move(mass)));
  }

  if (cfg.horizontal.empty() && cfg.vertical.empty()) throw ConfigError("[frame.horizontal]", 0, "empty frame");
  for (const auto& f : cfg.vertical) sys->frame.verticals.push_back(compile_field(f, "[frame.vertical]", qn, pn));
  std::vector<VectorField> hs;
  for (const auto& f : cfg.horizontal) hs.push_back(compile_field(f, "[frame.horizontal]", qn, pn));
  if (cfg.orthogonalize) {
    sys->frame = orthogonalize_split(sys->metric, sys->frame.verticals, std::move(hs));
  } else {
    sys->frame.horizontals = std::move(hs);
  }

  sys->projection = compile_keyed(cfg.projection, sn, "[projection]", qn, pn);
  sys->section = compile_keyed(cfg.section, qn, "[section]", sn, pn);
  for (std::size_t i = 0; i < cfg.fibers.size(); ++i)
    sys->fiber_samples.push_back(
        compile_keyed(cfg.fibers[i], qn, "[fiber." + std::to_string(i + 1) + "]", sn, pn));
  if (cfg.density) {
    std::vector<std::string> vars = sn;
    const char prefix = cfg.density->coordinates == "velocity" ? 'v' : 'p';
    for (std::size_t i = 0; i < sys->frame.size(); ++i) vars.push_back(prefix + std::to_string(i + 1));
    parse_in("[density]", cfg.density->expr, vars, pn);
  }
  return sys;
}

}  // namespace nhm
