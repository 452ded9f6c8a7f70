#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "nhm/config.hpp"
#include "nhm/examples.hpp"

using namespace nhm;

namespace {

const char* kParticle = R"([system]
name = particle

[parameters]
mass = 2

[chart.q]
x = -1, 1
y = -1, 1 | 0.1

[chart.shape]
y = -1, 1 | 0.1

[metric]
x,x = mass
y,y = mass*(1 + y^2)

[frame.vertical]
Z1 = 1, 0

[frame.horizontal]
Y1 = 0, 1

[projection]
y = y

[section]
x = 0
y = y
)";

std::size_t error_line(const std::string& text) {
  try {
    parse_config(text, "t.cfg");
  } catch (const ConfigError& e) {
    return e.line();
  }
  return 9999;
}

}  // namespace

TEST_CASE("parsing a small system") {
  SystemConfig cfg = parse_config(kParticle);
  CHECK(cfg.name == "particle");
  CHECK(cfg.parameter("mass") == 2.0);
  CHECK_FALSE(cfg.parameter("nope").has_value());
  REQUIRE(cfg.q_chart.size() == 2);
  CHECK(cfg.q_chart[0].margin == "0");
  CHECK(cfg.q_chart[1].margin == "0.1");
  CHECK(cfg.metric.size() == 2);
  CHECK_FALSE(cfg.density.has_value());
  auto sys = compile_system(cfg);
  CHECK(sys->q_chart.dim() == 2);
  CHECK(sys->frame.n_vertical() == 1);
  CHECK(cfg.set_parameter("mass", 3.0));
  CHECK_FALSE(cfg.set_parameter("volume", 3.0));
}

TEST_CASE("emit and parse are inverse") {
  SystemConfig cfg = parse_config(kParticle);
  std::string text = emit_config(cfg);
  CHECK(emit_config(parse_config(text)) == text);
  for (const auto& ex : shipped_examples()) {
    std::string s = emit_config(ex.config);
    CHECK(emit_config(parse_config(s)) == s);
  }
}

TEST_CASE("errors carry line numbers") {
  std::string base = kParticle;
  CHECK(error_line("[system]\nname = a\n[bogus]\n") == 3);
  CHECK(error_line("name = a\n") == 1);
  CHECK(error_line("[system]\nname a\n") == 2);
  CHECK(error_line("[parameters]\nmass = heavy\n") == 2);
  CHECK(error_line("[parameters]\nmass = 1\nmass = 2\n") == 3);
  CHECK(error_line("[system\n") == 1);
  CHECK(error_line("[chart.q]\n\n\nx = 0 1\n") == 4);
  CHECK(error_line("[density]\nexpr = 1\ncoordinates = angles\n") == 3);
  CHECK(error_line("[system]\n[system]\n") == 2);
  try {
    parse_config("[system]\nname a\n", "t.cfg");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).rfind("t.cfg:2:", 0) == 0);
  }
}

TEST_CASE("compile errors name the section") {
  auto fails_in = [](std::string text, const std::string& where) {
    try {
      compile_system(parse_config(text));
    } catch (const std::exception& e) {
      return std::string(e.what()).find(where) != std::string::npos;
    }
    return false;
  };
  std::string base = kParticle;
  auto swap = [&](const std::string& from, const std::string& to) {
    std::string s = base;
    s.replace(s.find(from), from.size(), to);
    return s;
  };
  CHECK(fails_in(swap("y,y = mass*(1 + y^2)", "y,y = mass*(1 + w^2)"), "[metric]"));
  CHECK(fails_in(swap("Z1 = 1, 0", "Z1 = 1"), "Z1"));
  CHECK(fails_in(swap("x,x = mass", "x,z = mass"), "unknown name 'z'"));
  CHECK(fails_in(swap("x = 0\n", "x = y +\n"), "[section]"));
  CHECK_THROWS_AS(load_config("/nonexistent/file.cfg"), ConfigError);
}

TEST_CASE("split_top_level respects parentheses") {
  auto parts = split_top_level("sin(a, b), c, (d, e)");
  REQUIRE(parts.size() == 3);
  CHECK(parts[0] == "sin(a, b)");
  CHECK(parts[2] == "(d, e)");
}

TEST_CASE("shipped configs match the builders") {
  for (const auto& ex : shipped_examples()) {
    std::filesystem::path path = std::filesystem::path(NHM_CONFIG_DIR) / ex.file;
    REQUIRE_MESSAGE(std::filesystem::exists(path), path.string());
    CHECK_MESSAGE(emit_config(load_config(path)) == emit_config(ex.config), ex.file);
  }
}
