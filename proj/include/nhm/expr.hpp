#pragma once

// Scalar expression language: recursive-descent parser, printer, and an
// evaluator templated on the scalar type so the same tree runs on doubles and
// on (nested) dual numbers.

#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "nhm/dual.hpp"

namespace nhm {

/// Byte offsets [begin, end) into the parsed source.
struct SourceSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
};

class ExprError : public std::runtime_error {
 public:
  ExprError(const std::string& what, SourceSpan span, std::string source)
      : std::runtime_error(format(what, span, source)), span_(span), message_(what) {}
  SourceSpan span() const { return span_; }
  const std::string& message() const { return message_; }

 private:
  static std::string format(const std::string& what, SourceSpan span, const std::string& source);
  SourceSpan span_;
  std::string message_;
};

class ParseError : public ExprError {
 public:
  using ExprError::ExprError;
};

/// Raised at evaluation time (log of a non-positive number, division by zero, ...).
class DomainError : public ExprError {
 public:
  using ExprError::ExprError;
};

enum class NodeKind : std::uint8_t { Number, Variable, Parameter, Constant, Negate, Binary, Call };
enum class Func : std::uint8_t { Sin, Cos, Tan, Sqrt, Exp, Ln, Abs };

struct ExprNode {
  NodeKind kind = NodeKind::Number;
  char op = 0;          // '+', '-', '*', '/', '^' for Binary
  Func func = Func::Sin;
  int index = -1;       // variable / parameter slot
  int lhs = -1;         // child (Negate, Call use lhs only)
  int rhs = -1;
  int int_exponent = 0; // set when op == '^' and the exponent is an integer literal
  bool has_int_exponent = false;
  double number = 0.0;
  SourceSpan span;
};

/// Immutable parsed expression. Copies share the same tree.
class Expression {
 public:
  Expression() = default;

  static Expression parse(std::string_view source, std::span<const std::string> vars,
                          std::span<const std::string> params = {});
  /// Constant expression with no free names.
  static Expression constant(double value);

  std::string print() const;
  const std::string& source() const { return data_->source; }
  bool valid() const { return data_ != nullptr; }

  /// Structural equality of trees (spans ignored).
  bool same_tree(const Expression& other) const;

  const std::vector<std::string>& variables() const { return data_->vars; }
  const std::vector<std::string>& parameters() const { return data_->params; }
  const ExprNode& node(int i) const { return data_->nodes[static_cast<std::size_t>(i)]; }
  int root() const { return data_->root; }

  template <class S>
  S eval(std::span<const S> point, std::span<const double> params) const {
    return eval_node<S>(data_->root, point, params);
  }
  double eval(std::span<const double> point, std::span<const double> params = {}) const {
    return eval_node<double>(data_->root, point, params);
  }

  /// Exact partial derivative by one dual pass.
  double eval_partial(std::span<const double> point, std::span<const double> params,
                      std::size_t wrt) const;
  double eval_partial(std::span<const double> point, std::span<const double> params,
                      std::string_view wrt) const;

 private:
  struct Data {
    std::string source;
    std::vector<std::string> vars;
    std::vector<std::string> params;
    std::vector<ExprNode> nodes;
    int root = -1;
  };
  std::shared_ptr<const Data> data_;

  [[noreturn]] void domain_error(const std::string& what, const ExprNode& n) const {
    throw DomainError(what, n.span, data_->source);
  }

  template <class S>
  S eval_node(int i, std::span<const S> point, std::span<const double> params) const;

  friend class Parser;
};

double constant_value(std::string_view name, bool& found);

/// Shortest decimal text that parses back to the same double.
std::string format_number(double x);

template <class S>
S Expression::eval_node(int i, std::span<const S> point, std::span<const double> params) const {
  using std::cos;
  using std::exp;
  using std::log;
  using std::sin;
  using std::sqrt;
  using std::tan;
  const ExprNode& n = data_->nodes[static_cast<std::size_t>(i)];
  switch (n.kind) {
    case NodeKind::Number:
    case NodeKind::Constant:
      return S(n.number);
    case NodeKind::Variable:
      return point[static_cast<std::size_t>(n.index)];
    case NodeKind::Parameter:
      return S(params[static_cast<std::size_t>(n.index)]);
    case NodeKind::Negate:
      return -eval_node<S>(n.lhs, point, params);
    case NodeKind::Binary: {
      S a = eval_node<S>(n.lhs, point, params);
      if (n.op == '^' && n.has_int_exponent) return ipow(a, n.int_exponent);
      S b = eval_node<S>(n.rhs, point, params);
      switch (n.op) {
        case '+': return a + b;
        case '-': return a - b;
        case '*': return a * b;
        case '/':
          if (value_of(b) == 0.0) domain_error("division by zero", n);
          return a / b;
        case '^': {
          const ExprNode& e = data_->nodes[static_cast<std::size_t>(n.rhs)];
          if (value_of(a) <= 0.0) {
            if (value_of(a) == 0.0 && e.kind == NodeKind::Number && e.number > 0.0) return S(0.0);
            domain_error("non-positive base with non-integer exponent", n);
          }
          if (e.kind == NodeKind::Number) return rpow(a, e.number);
          if constexpr (std::is_same_v<S, double>) return std::pow(a, b);
          else return exp(b * log(a));
        }
        default: break;
      }
      domain_error("unknown operator", n);
    }
    case NodeKind::Call: {
      S a = eval_node<S>(n.lhs, point, params);
      switch (n.func) {
        case Func::Sin: return sin(a);
        case Func::Cos: return cos(a);
        case Func::Tan: return tan(a);
        case Func::Exp: return exp(a);
        case Func::Abs: {
          if constexpr (std::is_same_v<S, double>) return std::abs(a);
          else return abs(a);
        }
        case Func::Sqrt:
          if (value_of(a) < 0.0) domain_error("sqrt of a negative number", n);
          return sqrt(a);
        case Func::Ln:
          if (value_of(a) <= 0.0) domain_error("ln of a non-positive number", n);
          return log(a);
      }
      break;
    }
  }
  domain_error("malformed expression", n);
}

}  // namespace nhm
