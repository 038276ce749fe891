#pragma once

// Reverse-mode differentiation over a recorded graph whose node values are
// Taylor triples.
//
// Every node holds its Taylor2 value (value, d/dt, d2/dt2) and, for each
// operand, the Taylor expansion of the local partial derivative. For
// y = f(x) with partial D(t) = df/dx along the trajectory, the cotangent
// (y0, y1, y2) of the three output components pulls back as
//
//   x0 += y0*D.val + y1*D.d1 + y2*D.d2
//   x1 += y1*D.val + 2*y2*D.d1
//   x2 += y2*D.val
//
// which is the exact Jacobian of the second-order Taylor map. Extraction
// nodes (value_of / d1_of / d2_of) freeze one component into a plain scalar so
// expressions such as an ODE residual can consume r, r', r'' directly.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "stiffgate/taylor.hpp"

namespace stiffgate::ad {

enum class OpKind : std::uint8_t {
  Leaf,
  Constant,
  Add,
  Sub,
  Mul,
  Div,
  Neg,
  Exp,
  Log,
  Sin,
  Cos,
  Tanh,
  Softplus,
  Sigmoid,
  Atan2,
  Pow,
  ValueOf,
  D1Of,
  D2Of,
};

const char* op_name(OpKind op);

/// Thrown when a recorded value is NaN or infinite.
class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(OpKind op, std::size_t node)
      : std::runtime_error(std::string("non-finite value produced by '") + op_name(op) +
                           "' at node " + std::to_string(node)),
        op_(op),
        node_(node) {}
  OpKind op() const { return op_; }
  std::size_t node() const { return node_; }

 private:
  OpKind op_;
  std::size_t node_;
};

/// Cotangent of a Taylor2-valued node: sensitivity to each of its components.
struct Cotangent {
  double val = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

class Tape;

class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::int32_t index) : tape_(tape), index_(index) {}

  const Taylor& value() const;
  Tape* tape() const { return tape_; }
  std::int32_t index() const { return index_; }

 private:
  Tape* tape_ = nullptr;
  std::int32_t index_ = -1;
};

class Tape {
 public:
  struct Node {
    Taylor value;
    Taylor partial[2];
    std::int32_t arg[2] = {-1, -1};
    OpKind op = OpKind::Constant;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Trainable scalar; its gradient is reported by gradient().
  Var leaf(double value);
  std::vector<Var> leaves(std::span<const double> values);
  Var constant(const Taylor& value);
  /// Time seed (t, 1, 0).
  Var time(double t) { return constant(Taylor::variable(t)); }

  Var unary(OpKind op, const Var& x, const Taylor& value, const Taylor& partial);
  Var binary(OpKind op, const Var& a, const Var& b, const Taylor& value, const Taylor& pa,
             const Taylor& pb);
  Var extract(OpKind op, const Var& x);

  const Node& node(std::int32_t i) const { return nodes_[static_cast<std::size_t>(i)]; }
  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }
  void reserve(std::size_t n) { nodes_.reserve(n); }

  /// Full reverse sweep seeded with `seed` on `output`. Returns the cotangent
  /// of every node. Throws NonFiniteError naming the first non-finite node.
  std::vector<Cotangent> reverse(const Var& output, Cotangent seed) const;

  /// d output.val / d leaf for each of `wrt`.
  std::vector<double> gradient(const Var& output, std::span<const Var> wrt) const;

  /// First non-finite node (index), or -1.
  std::int64_t first_non_finite() const;

 private:
  std::vector<Node> nodes_;
};

inline const Taylor& Var::value() const { return tape_->node(index_).value; }

// Arithmetic. Doubles mix freely with Vars and are treated as constants.
Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);
Var operator+(const Var& a, double c);
Var operator+(double c, const Var& a);
Var operator-(const Var& a, double c);
Var operator-(double c, const Var& a);
Var operator*(const Var& a, double c);
Var operator*(double c, const Var& a);
Var operator/(const Var& a, double c);
Var operator/(double c, const Var& a);

Var exp(const Var& x);
Var log(const Var& x);
Var sin(const Var& x);
Var cos(const Var& x);
Var tanh(const Var& x);
Var softplus(const Var& x);
Var sigmoid(const Var& x);
Var atan2(const Var& y, const Var& x);
Var pow(const Var& x, double p);
Var pow(const Var& x, const Var& y);

/// Time-frozen components: scalars with zero time derivatives.
Var value_of(const Var& x);
Var d1_of(const Var& x);
Var d2_of(const Var& x);

}  // namespace stiffgate::ad

namespace stiffgate {

// Component access that works for both scalar carriers used by the models.
inline Taylor value_of(const Taylor& x) { return Taylor::constant(x.val); }
inline Taylor d1_of(const Taylor& x) { return Taylor::constant(x.d1); }
inline Taylor d2_of(const Taylor& x) { return Taylor::constant(x.d2); }

}  // namespace stiffgate
