#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace asclf {

/// Raised for malformed expression text. `position()` is a 0-based byte
/// offset into the parsed string.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t position, const std::string& message);
  std::size_t position() const { return position_; }
  const std::string& detail() const { return detail_; }

 private:
  std::size_t position_;
  std::string detail_;
};

enum class Op : std::uint8_t {
  kConst,
  kVar,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kPow,
  kNeg,
  kSin,
  kCos,
  kExp,
  kLog,
  kSqrt,
  kAbs,
  kSign,  // -1, 0, +1
  kStep,  // 1 if argument > 0, else 0
  kMin,
  kMax,
};

/// Immutable scalar expression tree over numbered variable slots.
///
/// Slots are resolved at parse time; the caller decides what a slot means
/// (state coordinate, control parameter, radius, ...). Trees are shared, so
/// copies are cheap and safe to use from several threads.
class Expression {
 public:
  struct Node;

  Expression();  // the constant 0
  static Expression Constant(double value);
  static Expression Variable(int slot, std::string name);
  static Expression Unary(Op op, const Expression& a);
  static Expression Binary(Op op, const Expression& a, const Expression& b);

  Op op() const;
  double constant_value() const;  // kConst only
  int slot() const;               // kVar only
  const std::string& name() const;
  bool is_constant() const { return op() == Op::kConst; }
  bool IsConstant(double v) const { return is_constant() && constant_value() == v; }

  /// Tree-walking evaluation; slow path, used for one-off evaluations.
  double Evaluate(std::span<const double> vars) const;

  /// Symbolic partial derivative with respect to `slot`.
  Expression Differentiate(int slot) const;

  /// Re-parseable text; numbers printed with round-trip precision.
  std::string ToString() const;

  /// Largest variable slot referenced, or -1.
  int MaxSlot() const;

  /// Replaces every variable slot s by `map(s)` (returning an expression).
  Expression Substitute(const std::function<Expression(int slot, const std::string& name)>& map) const;

  /// Structural equality (constants compared bitwise by value).
  bool StructurallyEquals(const Expression& other) const;

  friend Expression operator+(const Expression& a, const Expression& b);
  friend Expression operator-(const Expression& a, const Expression& b);
  friend Expression operator*(const Expression& a, const Expression& b);
  friend Expression operator/(const Expression& a, const Expression& b);
  friend Expression operator-(const Expression& a);

 private:
  friend class CompiledExpression;
  explicit Expression(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

Expression pow(const Expression& a, const Expression& b);
Expression sqrt(const Expression& a);
Expression abs(const Expression& a);
Expression exp(const Expression& a);
Expression log(const Expression& a);
Expression min(const Expression& a, const Expression& b);
Expression max(const Expression& a, const Expression& b);

/// Name resolution for the parser: variables map to slots, named constants
/// are folded into literals.
struct SymbolTable {
  std::map<std::string, int, std::less<>> variables;
  std::map<std::string, double, std::less<>> constants;
};

/// Grammar (lowest to highest precedence):
///   expr    := term (('+' | '-') term)*
///   term    := unary (('*' | '/') unary)*
///   unary   := '-' unary | '+' unary | power
///   power   := primary ('^' unary)?          right associative
///   primary := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'
/// Functions: sin cos exp log sqrt abs sign step (one argument), min max (two).
Expression ParseExpression(std::string_view text, const SymbolTable& symbols);

/// Postfix bytecode for hot loops. Evaluation is allocation free for stack
/// depths up to 64.
class CompiledExpression {
 public:
  CompiledExpression() = default;
  explicit CompiledExpression(const Expression& expression);

  double operator()(std::span<const double> vars) const;
  bool empty() const { return code_.empty(); }

 private:
  struct Instr {
    Op op;
    int slot;
    double value;
  };
  std::vector<Instr> code_;
  int max_depth_ = 0;
};

}  // namespace asclf
