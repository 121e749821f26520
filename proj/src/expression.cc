#include "asclf/expression.h"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>

namespace asclf {

struct Expression::Node {
  Op op = Op::kConst;
  double value = 0.0;
  int slot = -1;
  std::string name;
  std::shared_ptr<const Node> a;
  std::shared_ptr<const Node> b;
};

ParseError::ParseError(std::size_t position, const std::string& message)
    : std::runtime_error("parse error at position " + std::to_string(position) + ": " +
                         message),
      position_(position),
      detail_(message) {}

namespace {

bool IsUnary(Op op) {
  switch (op) {
    case Op::kNeg:
    case Op::kSin:
    case Op::kCos:
    case Op::kExp:
    case Op::kLog:
    case Op::kSqrt:
    case Op::kAbs:
    case Op::kSign:
    case Op::kStep:
      return true;
    default:
      return false;
  }
}

double ApplyUnary(Op op, double x) {
  switch (op) {
    case Op::kNeg: return -x;
    case Op::kSin: return std::sin(x);
    case Op::kCos: return std::cos(x);
    case Op::kExp: return std::exp(x);
    case Op::kLog: return std::log(x);
    case Op::kSqrt: return std::sqrt(x);
    case Op::kAbs: return std::abs(x);
    case Op::kSign: return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
    case Op::kStep: return x > 0.0 ? 1.0 : 0.0;
    default: return std::numeric_limits<double>::quiet_NaN();
  }
}

double ApplyBinary(Op op, double x, double y) {
  switch (op) {
    case Op::kAdd: return x + y;
    case Op::kSub: return x - y;
    case Op::kMul: return x * y;
    case Op::kDiv: return x / y;
    case Op::kPow: return y == 2.0 ? x * x : std::pow(x, y);
    case Op::kMin: return std::min(x, y);
    case Op::kMax: return std::max(x, y);
    default: return std::numeric_limits<double>::quiet_NaN();
  }
}

const char* FunctionName(Op op) {
  switch (op) {
    case Op::kSin: return "sin";
    case Op::kCos: return "cos";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kSqrt: return "sqrt";
    case Op::kAbs: return "abs";
    case Op::kSign: return "sign";
    case Op::kStep: return "step";
    case Op::kMin: return "min";
    case Op::kMax: return "max";
    default: return "";
  }
}

std::string FormatNumber(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  // Shortest representation that still round-trips.
  for (int precision = 1; precision < 17; ++precision) {
    char shorter[40];
    std::snprintf(shorter, sizeof(shorter), "%.*g", precision, v);
    if (std::strtod(shorter, nullptr) == v) return shorter;
  }
  return buf;
}

}  // namespace

Expression::Expression() : Expression(Constant(0.0)) {}

Expression Expression::Constant(double value) {
  auto n = std::make_shared<Node>();
  n->op = Op::kConst;
  n->value = value;
  return Expression(std::move(n));
}

Expression Expression::Variable(int slot, std::string name) {
  auto n = std::make_shared<Node>();
  n->op = Op::kVar;
  n->slot = slot;
  n->name = std::move(name);
  return Expression(std::move(n));
}

Expression Expression::Unary(Op op, const Expression& a) {
  if (a.is_constant()) return Constant(ApplyUnary(op, a.constant_value()));
  if (op == Op::kNeg && a.op() == Op::kNeg) return Expression(a.node_->a);
  auto n = std::make_shared<Node>();
  n->op = op;
  n->a = a.node_;
  return Expression(std::move(n));
}

Expression Expression::Binary(Op op, const Expression& a, const Expression& b) {
  if (a.is_constant() && b.is_constant()) {
    return Constant(ApplyBinary(op, a.constant_value(), b.constant_value()));
  }
  switch (op) {
    case Op::kAdd:
      if (a.IsConstant(0.0)) return b;
      if (b.IsConstant(0.0)) return a;
      break;
    case Op::kSub:
      if (b.IsConstant(0.0)) return a;
      if (a.IsConstant(0.0)) return Unary(Op::kNeg, b);
      break;
    case Op::kMul:
      if (a.IsConstant(0.0) || b.IsConstant(0.0)) return Constant(0.0);
      if (a.IsConstant(1.0)) return b;
      if (b.IsConstant(1.0)) return a;
      if (a.IsConstant(-1.0)) return Unary(Op::kNeg, b);
      if (b.IsConstant(-1.0)) return Unary(Op::kNeg, a);
      break;
    case Op::kDiv:
      if (a.IsConstant(0.0)) return Constant(0.0);
      if (b.IsConstant(1.0)) return a;
      break;
    case Op::kPow:
      if (b.IsConstant(1.0)) return a;
      if (b.IsConstant(0.0)) return Constant(1.0);
      break;
    default:
      break;
  }
  auto n = std::make_shared<Node>();
  n->op = op;
  n->a = a.node_;
  n->b = b.node_;
  return Expression(std::move(n));
}

Op Expression::op() const { return node_->op; }
double Expression::constant_value() const { return node_->value; }
int Expression::slot() const { return node_->slot; }
const std::string& Expression::name() const { return node_->name; }

Expression operator+(const Expression& a, const Expression& b) {
  return Expression::Binary(Op::kAdd, a, b);
}
Expression operator-(const Expression& a, const Expression& b) {
  return Expression::Binary(Op::kSub, a, b);
}
Expression operator*(const Expression& a, const Expression& b) {
  return Expression::Binary(Op::kMul, a, b);
}
Expression operator/(const Expression& a, const Expression& b) {
  return Expression::Binary(Op::kDiv, a, b);
}
Expression operator-(const Expression& a) { return Expression::Unary(Op::kNeg, a); }
Expression pow(const Expression& a, const Expression& b) {
  return Expression::Binary(Op::kPow, a, b);
}
Expression sqrt(const Expression& a) { return Expression::Unary(Op::kSqrt, a); }
Expression abs(const Expression& a) { return Expression::Unary(Op::kAbs, a); }
Expression exp(const Expression& a) { return Expression::Unary(Op::kExp, a); }
Expression log(const Expression& a) { return Expression::Unary(Op::kLog, a); }
Expression min(const Expression& a, const Expression& b) {
  return Expression::Binary(Op::kMin, a, b);
}
Expression max(const Expression& a, const Expression& b) {
  return Expression::Binary(Op::kMax, a, b);
}

double Expression::Evaluate(std::span<const double> vars) const {
  const Node& n = *node_;
  switch (n.op) {
    case Op::kConst:
      return n.value;
    case Op::kVar:
      return vars[static_cast<std::size_t>(n.slot)];
    default:
      break;
  }
  const double x = Expression(n.a).Evaluate(vars);
  if (IsUnary(n.op)) return ApplyUnary(n.op, x);
  return ApplyBinary(n.op, x, Expression(n.b).Evaluate(vars));
}

Expression Expression::Differentiate(int slot) const {
  const Node& n = *node_;
  if (n.op == Op::kConst) return Constant(0.0);
  if (n.op == Op::kVar) return Constant(n.slot == slot ? 1.0 : 0.0);

  const Expression a(n.a);
  const Expression da = a.Differentiate(slot);
  if (IsUnary(n.op)) {
    switch (n.op) {
      case Op::kNeg: return -da;
      case Op::kSin: return Unary(Op::kCos, a) * da;
      case Op::kCos: return -(Unary(Op::kSin, a) * da);
      case Op::kExp: return *this * da;
      case Op::kLog: return da / a;
      case Op::kSqrt: return da / (Constant(2.0) * *this);
      case Op::kAbs: return Unary(Op::kSign, a) * da;
      default: return Constant(0.0);  // sign, step: piecewise constant
    }
  }

  const Expression b(n.b);
  const Expression db = b.Differentiate(slot);
  switch (n.op) {
    case Op::kAdd: return da + db;
    case Op::kSub: return da - db;
    case Op::kMul: return da * b + a * db;
    case Op::kDiv: return (da * b - a * db) / (b * b);
    case Op::kPow:
      if (b.is_constant()) {
        const double c = b.constant_value();
        return Constant(c) * pow(a, Constant(c - 1.0)) * da;
      }
      return *this * (db * log(a) + b * da / a);
    case Op::kMin: {
      const Expression pick_a = Unary(Op::kStep, b - a);
      return pick_a * da + (Constant(1.0) - pick_a) * db;
    }
    case Op::kMax: {
      const Expression pick_a = Unary(Op::kStep, a - b);
      return pick_a * da + (Constant(1.0) - pick_a) * db;
    }
    default:
      return Constant(std::numeric_limits<double>::quiet_NaN());
  }
}

std::string Expression::ToString() const {
  const Node& n = *node_;
  switch (n.op) {
    case Op::kConst: {
      const std::string s = FormatNumber(n.value);
      return n.value < 0.0 ? "(" + s + ")" : s;
    }
    case Op::kVar:
      return n.name;
    case Op::kNeg:
      return "(-" + Expression(n.a).ToString() + ")";
    default:
      break;
  }
  if (IsUnary(n.op)) {
    return std::string(FunctionName(n.op)) + "(" + Expression(n.a).ToString() + ")";
  }
  const std::string lhs = Expression(n.a).ToString();
  const std::string rhs = Expression(n.b).ToString();
  switch (n.op) {
    case Op::kAdd: return "(" + lhs + " + " + rhs + ")";
    case Op::kSub: return "(" + lhs + " - " + rhs + ")";
    case Op::kMul: return "(" + lhs + " * " + rhs + ")";
    case Op::kDiv: return "(" + lhs + " / " + rhs + ")";
    case Op::kPow: return "(" + lhs + " ^ " + rhs + ")";
    default:
      return std::string(FunctionName(n.op)) + "(" + lhs + ", " + rhs + ")";
  }
}

int Expression::MaxSlot() const {
  const Node& n = *node_;
  if (n.op == Op::kConst) return -1;
  if (n.op == Op::kVar) return n.slot;
  int m = Expression(n.a).MaxSlot();
  if (n.b) m = std::max(m, Expression(n.b).MaxSlot());
  return m;
}

Expression Expression::Substitute(
    const std::function<Expression(int, const std::string&)>& map) const {
  const Node& n = *node_;
  if (n.op == Op::kConst) return *this;
  if (n.op == Op::kVar) return map(n.slot, n.name);
  const Expression a = Expression(n.a).Substitute(map);
  if (IsUnary(n.op)) return Unary(n.op, a);
  return Binary(n.op, a, Expression(n.b).Substitute(map));
}

bool Expression::StructurallyEquals(const Expression& other) const {
  const Node& x = *node_;
  const Node& y = *other.node_;
  if (x.op != y.op) return false;
  if (x.op == Op::kConst) {
    return x.value == y.value || (std::isnan(x.value) && std::isnan(y.value));
  }
  if (x.op == Op::kVar) return x.slot == y.slot && x.name == y.name;
  if (!Expression(x.a).StructurallyEquals(Expression(y.a))) return false;
  if (x.b) return Expression(x.b).StructurallyEquals(Expression(y.b));
  return true;
}

// ---------------------------------------------------------------------------
// Parser

namespace {

class Parser {
 public:
  Parser(std::string_view text, const SymbolTable& symbols) : text_(text), symbols_(symbols) {}

  Expression Parse() {
    SkipSpace();
    if (pos_ >= text_.size()) throw ParseError(pos_, "empty expression");
    Expression e = ParseSum();
    SkipSpace();
    if (pos_ < text_.size()) {
      throw ParseError(pos_, std::string("unexpected '") + text_[pos_] + "'");
    }
    return e;
  }

 private:
  void SkipSpace() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool Accept(char c) {
    SkipSpace();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void Expect(char c) {
    if (!Accept(c)) {
      if (pos_ >= text_.size()) {
        throw ParseError(pos_, std::string("expected '") + c + "' before end of input");
      }
      throw ParseError(pos_, std::string("expected '") + c + "'");
    }
  }

  Expression ParseSum() {
    Expression lhs = ParseProduct();
    for (;;) {
      if (Accept('+')) {
        lhs = lhs + ParseProduct();
      } else if (Accept('-')) {
        lhs = lhs - ParseProduct();
      } else {
        return lhs;
      }
    }
  }

  Expression ParseProduct() {
    Expression lhs = ParseUnary();
    for (;;) {
      if (Accept('*')) {
        lhs = lhs * ParseUnary();
      } else if (Accept('/')) {
        lhs = lhs / ParseUnary();
      } else {
        return lhs;
      }
    }
  }

  Expression ParseUnary() {
    if (Accept('-')) return -ParseUnary();
    if (Accept('+')) return ParseUnary();
    return ParsePower();
  }

  Expression ParsePower() {
    Expression base = ParsePrimary();
    if (Accept('^')) return pow(base, ParseUnary());
    return base;
  }

  Expression ParsePrimary() {
    SkipSpace();
    if (pos_ >= text_.size()) throw ParseError(pos_, "unexpected end of input");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Expression e = ParseSum();
      Expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return ParseNumber();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return ParseName();
    throw ParseError(pos_, std::string("unexpected '") + c + "'");
  }

  Expression ParseNumber() {
    const std::size_t start = pos_;
    auto digits = [&] {
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    };
    digits();
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      digits();
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t save = pos_++;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
      const std::size_t exp_start = pos_;
      digits();
      if (pos_ == exp_start) pos_ = save;
    }
    const std::string literal(text_.substr(start, pos_ - start));
    char* end = nullptr;
    const double v = std::strtod(literal.c_str(), &end);
    if (literal == "." || end != literal.c_str() + literal.size()) {
      throw ParseError(start, "malformed number '" + literal + "'");
    }
    return Expression::Constant(v);
  }

  Expression ParseName() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
      ++pos_;
    }
    const std::string_view name = text_.substr(start, pos_ - start);

    static const std::map<std::string_view, Op> kUnary = {
        {"sin", Op::kSin},   {"cos", Op::kCos}, {"exp", Op::kExp},   {"log", Op::kLog},
        {"sqrt", Op::kSqrt}, {"abs", Op::kAbs}, {"sign", Op::kSign}, {"step", Op::kStep}};
    static const std::map<std::string_view, Op> kBinary = {{"min", Op::kMin}, {"max", Op::kMax}};

    if (auto it = kUnary.find(name); it != kUnary.end()) {
      Expect('(');
      Expression arg = ParseSum();
      Expect(')');
      return Expression::Unary(it->second, arg);
    }
    if (auto it = kBinary.find(name); it != kBinary.end()) {
      Expect('(');
      Expression a = ParseSum();
      Expect(',');
      Expression b = ParseSum();
      Expect(')');
      return Expression::Binary(it->second, a, b);
    }
    if (auto it = symbols_.variables.find(name); it != symbols_.variables.end()) {
      return Expression::Variable(it->second, std::string(name));
    }
    if (auto it = symbols_.constants.find(name); it != symbols_.constants.end()) {
      return Expression::Constant(it->second);
    }
    if (name == "pi") return Expression::Constant(3.14159265358979323846);
    throw ParseError(start, "unknown identifier '" + std::string(name) + "'");
  }

  std::string_view text_;
  const SymbolTable& symbols_;
  std::size_t pos_ = 0;
};

}  // namespace

Expression ParseExpression(std::string_view text, const SymbolTable& symbols) {
  return Parser(text, symbols).Parse();
}

// ---------------------------------------------------------------------------
// Bytecode

CompiledExpression::CompiledExpression(const Expression& expression) {
  int depth = 0;
  // Direct postorder over the node graph.
  std::function<void(const Expression::Node&)> walk = [&](const Expression::Node& n) {
    if (n.op == Op::kConst) {
      code_.push_back({Op::kConst, -1, n.value});
      max_depth_ = std::max(max_depth_, ++depth);
      return;
    }
    if (n.op == Op::kVar) {
      code_.push_back({Op::kVar, n.slot, 0.0});
      max_depth_ = std::max(max_depth_, ++depth);
      return;
    }
    walk(*n.a);
    if (n.b) {
      walk(*n.b);
      --depth;
    }
    code_.push_back({n.op, -1, 0.0});
  };
  walk(*expression.node_);
}

double CompiledExpression::operator()(std::span<const double> vars) const {
  if (code_.empty()) return 0.0;
  std::array<double, 64> fixed;
  std::vector<double> heap;
  double* stack = fixed.data();
  if (max_depth_ > static_cast<int>(fixed.size())) {
    heap.resize(static_cast<std::size_t>(max_depth_));
    stack = heap.data();
  }
  int top = -1;
  for (const Instr& in : code_) {
    switch (in.op) {
      case Op::kConst:
        stack[++top] = in.value;
        break;
      case Op::kVar:
        stack[++top] = vars[static_cast<std::size_t>(in.slot)];
        break;
      case Op::kAdd:
        stack[top - 1] += stack[top];
        --top;
        break;
      case Op::kSub:
        stack[top - 1] -= stack[top];
        --top;
        break;
      case Op::kMul:
        stack[top - 1] *= stack[top];
        --top;
        break;
      case Op::kDiv:
        stack[top - 1] /= stack[top];
        --top;
        break;
      case Op::kPow: {
        stack[top - 1] = ApplyBinary(Op::kPow, stack[top - 1], stack[top]);
        --top;
        break;
      }
      case Op::kMin:
      case Op::kMax:
        stack[top - 1] = ApplyBinary(in.op, stack[top - 1], stack[top]);
        --top;
        break;
      default:
        stack[top] = ApplyUnary(in.op, stack[top]);
        break;
    }
  }
  return stack[0];
}

}  // namespace asclf
