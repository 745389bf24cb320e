#ifndef KWAVE_EXPR_HPP
#define KWAVE_EXPR_HPP

// Tiny arithmetic expression language for coefficients, speeds and profiles.
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?          right-associative
//   primary := number | identifier | identifier '(' expr ')' | '(' expr ')'
//
// Functions: sin cos exp sqrt abs tanh. Constant: pi.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <numbers>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kwave/error.hpp"

namespace kwave {

using Bindings = std::map<std::string, double, std::less<>>;

namespace expr_detail {

enum class Op { Number, Variable, Neg, Add, Sub, Mul, Div, Pow, Call };
enum class Fn { Sin, Cos, Exp, Sqrt, Abs, Tanh };

struct Node {
  Op op;
  double value = 0.0;
  std::string name;  // variable or function name
  Fn fn = Fn::Sin;
  std::shared_ptr<const Node> lhs;
  std::shared_ptr<const Node> rhs;
};

using NodePtr = std::shared_ptr<const Node>;

inline bool lookup_function(std::string_view name, Fn& fn) {
  static constexpr std::pair<std::string_view, Fn> table[] = {
      {"sin", Fn::Sin}, {"cos", Fn::Cos},   {"exp", Fn::Exp},
      {"sqrt", Fn::Sqrt}, {"abs", Fn::Abs}, {"tanh", Fn::Tanh}};
  for (const auto& [n, f] : table) {
    if (n == name) {
      fn = f;
      return true;
    }
  }
  return false;
}

inline const char* function_name(Fn fn) {
  switch (fn) {
    case Fn::Sin: return "sin";
    case Fn::Cos: return "cos";
    case Fn::Exp: return "exp";
    case Fn::Sqrt: return "sqrt";
    case Fn::Abs: return "abs";
    case Fn::Tanh: return "tanh";
  }
  return "?";
}

inline double apply(Fn fn, double x) {
  switch (fn) {
    case Fn::Sin: return std::sin(x);
    case Fn::Cos: return std::cos(x);
    case Fn::Exp: return std::exp(x);
    case Fn::Sqrt: return std::sqrt(x);
    case Fn::Abs: return std::abs(x);
    case Fn::Tanh: return std::tanh(x);
  }
  return std::nan("");
}

inline double divide(double a, double b) {
  if (b == 0.0) throw DomainError("division by zero");
  return a / b;
}

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  NodePtr parse() {
    skip_space();
    if (pos_ == src_.size()) throw SyntaxError("empty expression", pos_);
    NodePtr e = parse_expr();
    skip_space();
    if (pos_ != src_.size()) unexpected();
    return e;
  }

 private:
  std::string_view src_;
  std::size_t pos_ = 0;

  void skip_space() {
    while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t' ||
                                  src_[pos_] == '\n' || src_[pos_] == '\r'))
      ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  [[noreturn]] void unexpected() {
    if (pos_ >= src_.size()) throw SyntaxError("unexpected end of input", pos_);
    throw SyntaxError(std::string("unexpected '") + src_[pos_] + "'", pos_);
  }

  static NodePtr binary(Op op, NodePtr a, NodePtr b) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->lhs = std::move(a);
    n->rhs = std::move(b);
    return n;
  }

  NodePtr parse_expr() {
    NodePtr lhs = parse_term();
    for (;;) {
      if (accept('+')) {
        lhs = binary(Op::Add, lhs, parse_term());
      } else if (accept('-')) {
        lhs = binary(Op::Sub, lhs, parse_term());
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_term() {
    NodePtr lhs = parse_unary();
    for (;;) {
      if (accept('*')) {
        lhs = binary(Op::Mul, lhs, parse_unary());
      } else if (accept('/')) {
        lhs = binary(Op::Div, lhs, parse_unary());
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_unary() {
    if (accept('-')) {
      auto n = std::make_shared<Node>();
      n->op = Op::Neg;
      n->lhs = parse_unary();
      return n;
    }
    return parse_power();
  }

  NodePtr parse_power() {
    NodePtr base = parse_primary();
    if (accept('^')) return binary(Op::Pow, base, parse_unary());
    return base;
  }

  NodePtr parse_primary() {
    skip_space();
    if (pos_ >= src_.size()) unexpected();
    const char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr e = parse_expr();
      if (!accept(')')) unexpected();
      return e;
    }
    if ((c >= '0' && c <= '9') || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
    unexpected();
  }

  NodePtr parse_number() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.'))
      ++pos_;
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t p = pos_ + 1;
      if (p < src_.size() && (src_[p] == '+' || src_[p] == '-')) ++p;
      if (p < src_.size() && std::isdigit(static_cast<unsigned char>(src_[p]))) {
        pos_ = p;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_])))
          ++pos_;
      }
    }
    double v = 0.0;
    const char* first = src_.data() + start;
    const char* last = src_.data() + pos_;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) throw SyntaxError("malformed number", start);
    auto n = std::make_shared<Node>();
    n->op = Op::Number;
    n->value = v;
    return n;
  }

  NodePtr parse_identifier() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
      ++pos_;
    std::string name(src_.substr(start, pos_ - start));
    skip_space();
    if (pos_ < src_.size() && src_[pos_] == '(') {
      Fn fn;
      if (!lookup_function(name, fn)) throw UnknownFunctionError(name, start);
      ++pos_;
      auto n = std::make_shared<Node>();
      n->op = Op::Call;
      n->fn = fn;
      n->name = name;
      n->lhs = parse_expr();
      if (!accept(')')) unexpected();
      return n;
    }
    auto n = std::make_shared<Node>();
    if (name == "pi") {
      n->op = Op::Number;
      n->value = std::numbers::pi;
      n->name = "pi";
    } else {
      n->op = Op::Variable;
      n->name = std::move(name);
    }
    return n;
  }
};

template <class Lookup>
double evaluate(const Node& n, const Lookup& lookup) {
  switch (n.op) {
    case Op::Number: return n.value;
    case Op::Variable: return lookup(n.name);
    case Op::Neg: return -evaluate(*n.lhs, lookup);
    case Op::Add: return evaluate(*n.lhs, lookup) + evaluate(*n.rhs, lookup);
    case Op::Sub: return evaluate(*n.lhs, lookup) - evaluate(*n.rhs, lookup);
    case Op::Mul: return evaluate(*n.lhs, lookup) * evaluate(*n.rhs, lookup);
    case Op::Div: {
      const double a = evaluate(*n.lhs, lookup);
      return divide(a, evaluate(*n.rhs, lookup));
    }
    case Op::Pow: {
      const double a = evaluate(*n.lhs, lookup);
      return std::pow(a, evaluate(*n.rhs, lookup));
    }
    case Op::Call: return apply(n.fn, evaluate(*n.lhs, lookup));
  }
  return std::nan("");
}

inline void collect_variables(const Node& n, std::set<std::string>& out) {
  if (n.op == Op::Variable) out.insert(n.name);
  if (n.lhs) collect_variables(*n.lhs, out);
  if (n.rhs) collect_variables(*n.rhs, out);
}

inline std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline void print(const Node& n, std::string& out) {
  switch (n.op) {
    case Op::Number:
      out += n.name == "pi" ? std::string("pi") : format_number(n.value);
      return;
    case Op::Variable: out += n.name; return;
    case Op::Neg:
      out += "(-";
      print(*n.lhs, out);
      out += ')';
      return;
    case Op::Call:
      out += function_name(n.fn);
      out += '(';
      print(*n.lhs, out);
      out += ')';
      return;
    default: break;
  }
  const char* sym = n.op == Op::Add ? " + " : n.op == Op::Sub ? " - "
                  : n.op == Op::Mul ? " * " : n.op == Op::Div ? " / " : " ^ ";
  out += '(';
  print(*n.lhs, out);
  out += sym;
  print(*n.rhs, out);
  out += ')';
}

// Postfix program over numbered slots.
struct Instr {
  Op op;
  double value = 0.0;
  std::size_t slot = 0;
  Fn fn = Fn::Sin;
};

inline void emit(const Node& n, const std::vector<std::string>& slots,
                 std::vector<Instr>& prog) {
  switch (n.op) {
    case Op::Number: prog.push_back({Op::Number, n.value, 0, Fn::Sin}); return;
    case Op::Variable: {
      auto it = std::find(slots.begin(), slots.end(), n.name);
      if (it == slots.end()) throw UnboundVariableError(n.name);
      prog.push_back({Op::Variable, 0.0, static_cast<std::size_t>(it - slots.begin()), Fn::Sin});
      return;
    }
    case Op::Neg:
    case Op::Call:
      emit(*n.lhs, slots, prog);
      prog.push_back({n.op, 0.0, 0, n.fn});
      return;
    default:
      emit(*n.lhs, slots, prog);
      emit(*n.rhs, slots, prog);
      prog.push_back({n.op, 0.0, 0, Fn::Sin});
  }
}

}  // namespace expr_detail

/// Expression compiled against a fixed variable ordering; evaluation takes a span
/// of values in that order.
class CompiledExpr {
 public:
  CompiledExpr() = default;

  double operator()(std::span<const double> values) const {
    double stack[64];
    stack[0] = 0.0;  // empty program
    double* big = nullptr;
    std::vector<double> heap;
    if (depth_ > 64) {
      heap.resize(depth_);
      big = heap.data();
    }
    double* s = big ? big : stack;
    std::size_t top = 0;
    using expr_detail::Op;
    for (const auto& in : prog_) {
      switch (in.op) {
        case Op::Number: s[top++] = in.value; break;
        case Op::Variable: s[top++] = values[in.slot]; break;
        case Op::Neg: s[top - 1] = -s[top - 1]; break;
        case Op::Call: s[top - 1] = expr_detail::apply(in.fn, s[top - 1]); break;
        case Op::Add: --top; s[top - 1] += s[top]; break;
        case Op::Sub: --top; s[top - 1] -= s[top]; break;
        case Op::Mul: --top; s[top - 1] *= s[top]; break;
        case Op::Div: --top; s[top - 1] = expr_detail::divide(s[top - 1], s[top]); break;
        case Op::Pow: --top; s[top - 1] = std::pow(s[top - 1], s[top]); break;
      }
    }
    return s[0];
  }

 private:
  friend class Expr;
  std::vector<expr_detail::Instr> prog_;
  std::size_t depth_ = 0;
};

/// Parsed, immutable arithmetic expression.
class Expr {
 public:
  Expr() = default;

  static Expr parse(std::string_view source) {
    Expr e;
    e.root_ = expr_detail::Parser(source).parse();
    e.source_ = std::string(source);
    return e;
  }

  static Expr constant(double v) { return parse(expr_detail::format_number(v)); }

  bool empty() const noexcept { return root_ == nullptr; }
  const std::string& source() const noexcept { return source_; }

  std::set<std::string> free_variables() const {
    std::set<std::string> out;
    if (root_) expr_detail::collect_variables(*root_, out);
    return out;
  }

  /// NaN and Inf propagate; division by zero throws DomainError.
  double eval(const Bindings& bindings) const {
    require();
    return expr_detail::evaluate(*root_, [&](const std::string& name) {
      auto it = bindings.find(name);
      if (it == bindings.end()) throw UnboundVariableError(name);
      return it->second;
    });
  }

  /// As eval, but a non-finite result is a DomainError.
  double eval_checked(const Bindings& bindings) const {
    const double v = eval(bindings);
    if (!std::isfinite(v)) throw DomainError("non-finite value of '" + source_ + "'");
    return v;
  }

  CompiledExpr compile(const std::vector<std::string>& slots) const {
    require();
    CompiledExpr c;
    expr_detail::emit(*root_, slots, c.prog_);
    std::size_t depth = 0;
    for (const auto& in : c.prog_) {
      using expr_detail::Op;
      if (in.op == Op::Number || in.op == Op::Variable) {
        ++depth;
        c.depth_ = std::max(c.depth_, depth);
      } else if (in.op != Op::Neg && in.op != Op::Call) {
        --depth;
      }
    }
    return c;
  }

  /// Fully parenthesized text that reparses to an identically evaluating Expr.
  std::string to_string() const {
    std::string out;
    if (root_) expr_detail::print(*root_, out);
    return out;
  }

 private:
  void require() const {
    if (!root_) throw PreconditionError("evaluating an empty expression");
  }

  expr_detail::NodePtr root_;
  std::string source_;
};

/// Variable names v1..vn, e.g. numbered_names("u", 3) = {u1, u2, u3}.
inline std::vector<std::string> numbered_names(const std::string& prefix, std::size_t n) {
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t i = 1; i <= n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

}  // namespace kwave

#endif  // KWAVE_EXPR_HPP
