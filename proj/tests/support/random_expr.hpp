#pragma once

#include <random>
#include <string>
#include <vector>

#include "nhm/expr.hpp"

namespace nhm::testing {

inline const std::vector<std::string> kVars = {"x", "y", "z"};
inline const std::vector<std::string> kParams = {"a", "b"};

// Generator of smooth expressions whose values stay moderate on [-2, 2]^3.
inline std::string random_expr(std::mt19937_64& rng, int depth) {
  std::uniform_int_distribution<int> pick(0, depth <= 0 ? 1 : 12);
  std::uniform_real_distribution<double> num(-2.0, 2.0);
  auto sub = [&] { return random_expr(rng, depth - 1); };
  switch (pick(rng)) {
    case 0: return kVars[std::uniform_int_distribution<int>(0, 2)(rng)];
    case 1: {
      if (std::uniform_int_distribution<int>(0, 1)(rng)) return kParams[std::uniform_int_distribution<int>(0, 1)(rng)];
      return format_number(std::round(num(rng) * 100) / 100);
    }
    case 2: return "(" + sub() + " + " + sub() + ")";
    case 3: return "(" + sub() + " - " + sub() + ")";
    case 4: return "(" + sub() + ")*(" + sub() + ")";
    case 5: return "(" + sub() + ")/(2 + sin(" + sub() + "))";
    case 6: return "sin(" + sub() + ")";
    case 7: return "cos(" + sub() + ")";
    case 8: return "exp(0.3*sin(" + sub() + "))";
    case 9: return "sqrt(1 + (" + sub() + ")^2)";
    case 10: return "ln(3 + cos(" + sub() + "))";
    case 11: return "tan(0.5*sin(" + sub() + "))";
    default: {
      // powers of leaf sums only, so nested oscillation stays resolvable by differencing
      std::string base = random_expr(rng, 0) + " + " + random_expr(rng, 0);
      return "-(" + base + ")^" + std::to_string(std::uniform_int_distribution<int>(2, 3)(rng));
    }
  }
}

}  // namespace nhm::testing
