#include "nhm/expr.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <numbers>
#include <utility>

namespace nhm {

std::string ExprError::format(const std::string& what, SourceSpan span, const std::string& source) {
  std::string out = what + " at [" + std::to_string(span.begin) + ", " + std::to_string(span.end) + ")";
  if (!source.empty()) {
    auto b = std::min(span.begin, source.size());
    auto e = std::clamp(span.end, b, source.size());
    out += " in '" + source + "'";
    if (e > b) out += " near '" + source.substr(b, e - b) + "'";
  }
  return out;
}

double constant_value(std::string_view name, bool& found) {
  found = true;
  if (name == "pi") return std::numbers::pi;
  found = false;
  return 0.0;
}

namespace {

struct FuncEntry {
  std::string_view name;
  Func func;
};
constexpr std::array<FuncEntry, 7> kFunctions{{{"sin", Func::Sin},
                                               {"cos", Func::Cos},
                                               {"tan", Func::Tan},
                                               {"sqrt", Func::Sqrt},
                                               {"exp", Func::Exp},
                                               {"ln", Func::Ln},
                                               {"abs", Func::Abs}}};

std::string_view func_name(Func f) {
  for (const auto& e : kFunctions)
    if (e.func == f) return e.name;
  return "?";
}

}  // namespace

// Grammar:
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?
//   primary := number | name | name '(' expr ')' | '(' expr ')'
class Parser {
 public:
  Parser(std::string_view src, std::span<const std::string> vars, std::span<const std::string> params)
      : src_(src), vars_(vars), params_(params) {}

  Expression run() {
    skip_ws();
    if (pos_ >= src_.size()) fail("empty expression", pos_, pos_);
    int root = parse_expr();
    skip_ws();
    if (pos_ < src_.size()) fail("unexpected character", pos_, pos_ + 1);
    auto data = std::make_shared<Expression::Data>();
    data->source = std::string(src_);
    data->vars.assign(vars_.begin(), vars_.end());
    data->params.assign(params_.begin(), params_.end());
    data->nodes = std::move(nodes_);
    data->root = root;
    Expression e;
    e.data_ = std::move(data);
    return e;
  }

 private:
  std::string_view src_;
  std::span<const std::string> vars_;
  std::span<const std::string> params_;
  std::vector<ExprNode> nodes_;
  std::size_t pos_ = 0;

  [[noreturn]] void fail(const std::string& what, std::size_t b, std::size_t e) const {
    throw ParseError(what, {b, e}, std::string(src_));
  }

  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }
  bool peek(char c) {
    skip_ws();
    return pos_ < src_.size() && src_[pos_] == c;
  }

  int add(ExprNode n) {
    nodes_.push_back(n);
    return static_cast<int>(nodes_.size()) - 1;
  }

  int binary(char op, int lhs, int rhs, std::size_t begin) {
    ExprNode n;
    n.kind = NodeKind::Binary;
    n.op = op;
    n.lhs = lhs;
    n.rhs = rhs;
    n.span = {begin, nodes_[static_cast<std::size_t>(rhs)].span.end};
    if (op == '^') {
      const ExprNode& e = nodes_[static_cast<std::size_t>(rhs)];
      double v = 0.0;
      bool literal = false;
      if (e.kind == NodeKind::Number) {
        v = e.number;
        literal = true;
      } else if (e.kind == NodeKind::Negate && nodes_[static_cast<std::size_t>(e.lhs)].kind == NodeKind::Number) {
        v = -nodes_[static_cast<std::size_t>(e.lhs)].number;
        literal = true;
      }
      if (literal && v == std::floor(v) && std::abs(v) <= 64.0) {
        n.has_int_exponent = true;
        n.int_exponent = static_cast<int>(v);
      }
    }
    return add(n);
  }

  int parse_expr() {
    skip_ws();
    std::size_t begin = pos_;
    int lhs = parse_term();
    while (true) {
      skip_ws();
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) {
        char op = src_[pos_++];
        int rhs = parse_term();
        lhs = binary(op, lhs, rhs, begin);
      } else {
        return lhs;
      }
    }
  }

  int parse_term() {
    skip_ws();
    std::size_t begin = pos_;
    int lhs = parse_unary();
    while (true) {
      skip_ws();
      if (pos_ < src_.size() && (src_[pos_] == '*' || src_[pos_] == '/')) {
        char op = src_[pos_++];
        int rhs = parse_unary();
        lhs = binary(op, lhs, rhs, begin);
      } else {
        return lhs;
      }
    }
  }

  int parse_unary() {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == '-') {
      std::size_t begin = pos_++;
      int child = parse_unary();
      ExprNode n;
      n.kind = NodeKind::Negate;
      n.lhs = child;
      n.span = {begin, nodes_[static_cast<std::size_t>(child)].span.end};
      return add(n);
    }
    return parse_power();
  }

  int parse_power() {
    skip_ws();
    std::size_t begin = pos_;
    int base = parse_primary();
    if (peek('^')) {
      ++pos_;
      int exponent = parse_unary();
      return binary('^', base, exponent, begin);
    }
    return base;
  }

  int parse_primary() {
    skip_ws();
    if (pos_ >= src_.size()) fail("unexpected end of expression", pos_, pos_);
    char c = src_[pos_];
    std::size_t begin = pos_;
    if (c == '(') {
      ++pos_;
      int inner = parse_expr();
      skip_ws();
      if (pos_ >= src_.size() || src_[pos_] != ')') fail("expected ')'", begin, pos_);
      ++pos_;
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_name();
    fail(std::string("unexpected character '") + c + "'", pos_, pos_ + 1);
  }

  int parse_number() {
    std::size_t begin = pos_;
    auto digits = [&] {
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    };
    digits();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      digits();
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t save = pos_++;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        digits();
      } else {
        pos_ = save;
      }
    }
    std::string text(src_.substr(begin, pos_ - begin));
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) fail("malformed number", begin, pos_);
    ExprNode n;
    n.kind = NodeKind::Number;
    n.number = value;
    n.span = {begin, pos_};
    return add(n);
  }

  int parse_name() {
    std::size_t begin = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
      ++pos_;
    std::string_view name = src_.substr(begin, pos_ - begin);
    if (peek('(')) {
      auto it = std::find_if(kFunctions.begin(), kFunctions.end(),
                             [&](const FuncEntry& e) { return e.name == name; });
      if (it == kFunctions.end()) fail("unknown function '" + std::string(name) + "'", begin, pos_);
      ++pos_;  // '('
      skip_ws();
      if (pos_ < src_.size() && src_[pos_] == ')') fail("arity mismatch: " + std::string(name) + " takes 1 argument, got 0", begin, pos_ + 1);
      int arg = parse_expr();
      skip_ws();
      if (pos_ < src_.size() && src_[pos_] == ',') {
        std::size_t comma = pos_;
        int count = 1;
        while (pos_ < src_.size() && src_[pos_] == ',') {
          ++pos_;
          parse_expr();
          ++count;
          skip_ws();
        }
        fail("arity mismatch: " + std::string(name) + " takes 1 argument, got " + std::to_string(count), begin,
             std::max(comma, pos_));
      }
      if (pos_ >= src_.size() || src_[pos_] != ')') fail("expected ')'", begin, pos_);
      ++pos_;
      ExprNode n;
      n.kind = NodeKind::Call;
      n.func = it->func;
      n.lhs = arg;
      n.span = {begin, pos_};
      return add(n);
    }
    ExprNode n;
    n.span = {begin, pos_};
    if (auto v = std::find(vars_.begin(), vars_.end(), name); v != vars_.end()) {
      n.kind = NodeKind::Variable;
      n.index = static_cast<int>(v - vars_.begin());
      return add(n);
    }
    if (auto p = std::find(params_.begin(), params_.end(), name); p != params_.end()) {
      n.kind = NodeKind::Parameter;
      n.index = static_cast<int>(p - params_.begin());
      return add(n);
    }
    bool found = false;
    double c = constant_value(name, found);
    if (found) {
      n.kind = NodeKind::Constant;
      n.number = c;
      n.index = 0;
      return add(n);
    }
    if (std::find_if(kFunctions.begin(), kFunctions.end(), [&](const FuncEntry& e) { return e.name == name; }) !=
        kFunctions.end())
      fail("arity mismatch: function '" + std::string(name) + "' used without an argument", begin, pos_);
    fail("unknown identifier '" + std::string(name) + "'", begin, pos_);
  }
};

Expression Expression::parse(std::string_view source, std::span<const std::string> vars,
                             std::span<const std::string> params) {
  return Parser(source, vars, params).run();
}

Expression Expression::constant(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", std::abs(value));
  std::string text = value < 0 ? std::string("-") + buf : std::string(buf);
  return parse(text, {}, {});
}

namespace {

// Precedence levels used by the printer.
constexpr int kAdd = 1, kMul = 2, kUnary = 3, kPow = 4, kPrimary = 5;

int precedence(const ExprNode& n) {
  switch (n.kind) {
    case NodeKind::Negate: return kUnary;
    case NodeKind::Binary:
      if (n.op == '+' || n.op == '-') return kAdd;
      if (n.op == '*' || n.op == '/') return kMul;
      return kPow;
    default: return kPrimary;
  }
}

}  // namespace

std::string format_number(double v) {
  // shortest representation that round-trips
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string Expression::print() const {
  const auto& nodes = data_->nodes;
  auto rec = [&](auto&& self, int i) -> std::string {
    const ExprNode& n = nodes[static_cast<std::size_t>(i)];
    auto wrap = [&](int child, bool need) {
      std::string s = self(self, child);
      return need ? "(" + s + ")" : s;
    };
    switch (n.kind) {
      case NodeKind::Number: return format_number(n.number);
      case NodeKind::Variable: return data_->vars[static_cast<std::size_t>(n.index)];
      case NodeKind::Parameter: return data_->params[static_cast<std::size_t>(n.index)];
      case NodeKind::Constant: return "pi";
      case NodeKind::Negate:
        return "-" + wrap(n.lhs, precedence(nodes[static_cast<std::size_t>(n.lhs)]) < kUnary);
      case NodeKind::Call:
        return std::string(func_name(n.func)) + "(" + self(self, n.lhs) + ")";
      case NodeKind::Binary: {
        int p = precedence(n);
        const ExprNode& l = nodes[static_cast<std::size_t>(n.lhs)];
        const ExprNode& r = nodes[static_cast<std::size_t>(n.rhs)];
        if (n.op == '^') {
          return wrap(n.lhs, precedence(l) < kPrimary) + "^" + wrap(n.rhs, precedence(r) < kUnary);
        }
        std::string sep = (p == kAdd) ? std::string(" ") + n.op + " " : std::string(1, n.op);
        return wrap(n.lhs, precedence(l) < p) + sep + wrap(n.rhs, precedence(r) <= p);
      }
    }
    return "?";
  };
  return rec(rec, data_->root);
}

bool Expression::same_tree(const Expression& other) const {
  auto rec = [&](auto&& self, int a, int b) -> bool {
    const ExprNode& x = data_->nodes[static_cast<std::size_t>(a)];
    const ExprNode& y = other.data_->nodes[static_cast<std::size_t>(b)];
    if (x.kind != y.kind) return false;
    switch (x.kind) {
      case NodeKind::Number:
      case NodeKind::Constant: return x.number == y.number;
      case NodeKind::Variable:
      case NodeKind::Parameter: return x.index == y.index;
      case NodeKind::Negate: return self(self, x.lhs, y.lhs);
      case NodeKind::Call: return x.func == y.func && self(self, x.lhs, y.lhs);
      case NodeKind::Binary:
        return x.op == y.op && self(self, x.lhs, y.lhs) && self(self, x.rhs, y.rhs);
    }
    return false;
  };
  return rec(rec, data_->root, other.data_->root);
}

double Expression::eval_partial(std::span<const double> point, std::span<const double> params,
                                std::size_t wrt) const {
  std::vector<Dual1> p(point.size());
  for (std::size_t i = 0; i < point.size(); ++i) p[i] = Dual1(point[i], i == wrt ? 1.0 : 0.0);
  return eval<Dual1>(std::span<const Dual1>(p), params).d;
}

double Expression::eval_partial(std::span<const double> point, std::span<const double> params,
                                std::string_view wrt) const {
  const auto& vars = data_->vars;
  auto it = std::find(vars.begin(), vars.end(), wrt);
  if (it == vars.end()) throw std::invalid_argument("unknown variable '" + std::string(wrt) + "'");
  return eval_partial(point, params, static_cast<std::size_t>(it - vars.begin()));
}

}  // namespace nhm
