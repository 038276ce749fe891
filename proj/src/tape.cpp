#include "stiffgate/tape.hpp"

#include <cmath>

namespace stiffgate::ad {

const char* op_name(OpKind op) {
  switch (op) {
    case OpKind::Leaf: return "leaf";
    case OpKind::Constant: return "constant";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "mul";
    case OpKind::Div: return "div";
    case OpKind::Neg: return "neg";
    case OpKind::Exp: return "exp";
    case OpKind::Log: return "log";
    case OpKind::Sin: return "sin";
    case OpKind::Cos: return "cos";
    case OpKind::Tanh: return "tanh";
    case OpKind::Softplus: return "softplus";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::Atan2: return "atan2";
    case OpKind::Pow: return "pow";
    case OpKind::ValueOf: return "value_of";
    case OpKind::D1Of: return "d1_of";
    case OpKind::D2Of: return "d2_of";
  }
  return "unknown";
}

namespace {

const Taylor kOne = Taylor::constant(1.0);
const Taylor kMinusOne = Taylor::constant(-1.0);

bool finite(const Taylor& x) {
  return std::isfinite(x.val) && std::isfinite(x.d1) && std::isfinite(x.d2);
}

void pull_back(Cotangent& x, const Cotangent& y, const Taylor& d) {
  x.val += y.val * d.val + y.d1 * d.d1 + y.d2 * d.d2;
  x.d1 += y.d1 * d.val + 2.0 * y.d2 * d.d1;
  x.d2 += y.d2 * d.val;
}

Tape& tape_of(const Var& a) {
  if (a.tape() == nullptr) throw std::logic_error("Var is not attached to a tape");
  return *a.tape();
}

Tape& tape_of(const Var& a, const Var& b) {
  if (a.tape() != b.tape() || a.tape() == nullptr)
    throw std::logic_error("Var operands belong to different tapes");
  return *a.tape();
}

}  // namespace

Var Tape::leaf(double value) {
  Node n;
  n.value = Taylor::constant(value);
  n.op = OpKind::Leaf;
  nodes_.push_back(n);
  return {this, static_cast<std::int32_t>(nodes_.size() - 1)};
}

std::vector<Var> Tape::leaves(std::span<const double> values) {
  std::vector<Var> out;
  out.reserve(values.size());
  for (double v : values) out.push_back(leaf(v));
  return out;
}

Var Tape::constant(const Taylor& value) {
  Node n;
  n.value = value;
  n.op = OpKind::Constant;
  nodes_.push_back(n);
  return {this, static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Tape::unary(OpKind op, const Var& x, const Taylor& value, const Taylor& partial) {
  Node n;
  n.value = value;
  n.op = op;
  n.arg[0] = x.index();
  n.partial[0] = partial;
  nodes_.push_back(n);
  return {this, static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Tape::binary(OpKind op, const Var& a, const Var& b, const Taylor& value, const Taylor& pa,
                 const Taylor& pb) {
  Node n;
  n.value = value;
  n.op = op;
  n.arg[0] = a.index();
  n.arg[1] = b.index();
  n.partial[0] = pa;
  n.partial[1] = pb;
  nodes_.push_back(n);
  return {this, static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Tape::extract(OpKind op, const Var& x) {
  const Taylor& v = x.value();
  double c = v.val;
  if (op == OpKind::D1Of) c = v.d1;
  if (op == OpKind::D2Of) c = v.d2;
  Node n;
  n.value = Taylor::constant(c);
  n.op = op;
  n.arg[0] = x.index();
  nodes_.push_back(n);
  return {this, static_cast<std::int32_t>(nodes_.size() - 1)};
}

std::int64_t Tape::first_non_finite() const {
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (!finite(nodes_[i].value)) return static_cast<std::int64_t>(i);
  return -1;
}

std::vector<Cotangent> Tape::reverse(const Var& output, Cotangent seed) const {
  if (output.tape() != this) throw std::logic_error("output Var is not on this tape");
  const auto end = static_cast<std::size_t>(output.index()) + 1;
  for (std::size_t i = 0; i < end; ++i)
    if (!finite(nodes_[i].value)) throw NonFiniteError(nodes_[i].op, i);

  std::vector<Cotangent> adj(nodes_.size());
  adj[static_cast<std::size_t>(output.index())] = seed;
  for (std::size_t i = end; i-- > 0;) {
    const Node& n = nodes_[i];
    const Cotangent y = adj[i];
    if (y.val == 0.0 && y.d1 == 0.0 && y.d2 == 0.0) continue;
    switch (n.op) {
      case OpKind::Leaf:
      case OpKind::Constant:
        break;
      case OpKind::ValueOf:
        adj[static_cast<std::size_t>(n.arg[0])].val += y.val;
        break;
      case OpKind::D1Of:
        adj[static_cast<std::size_t>(n.arg[0])].d1 += y.val;
        break;
      case OpKind::D2Of:
        adj[static_cast<std::size_t>(n.arg[0])].d2 += y.val;
        break;
      default:
        for (int k = 0; k < 2; ++k)
          if (n.arg[k] >= 0) pull_back(adj[static_cast<std::size_t>(n.arg[k])], y, n.partial[k]);
        break;
    }
  }
  return adj;
}

std::vector<double> Tape::gradient(const Var& output, std::span<const Var> wrt) const {
  const auto adj = reverse(output, Cotangent{1.0, 0.0, 0.0});
  std::vector<double> g;
  g.reserve(wrt.size());
  for (const Var& v : wrt) g.push_back(adj[static_cast<std::size_t>(v.index())].val);
  return g;
}

Var operator+(const Var& a, const Var& b) {
  return tape_of(a, b).binary(OpKind::Add, a, b, a.value() + b.value(), kOne, kOne);
}

Var operator-(const Var& a, const Var& b) {
  return tape_of(a, b).binary(OpKind::Sub, a, b, a.value() - b.value(), kOne, kMinusOne);
}

Var operator*(const Var& a, const Var& b) {
  return tape_of(a, b).binary(OpKind::Mul, a, b, a.value() * b.value(), b.value(), a.value());
}

Var operator/(const Var& a, const Var& b) {
  const Taylor inv = 1.0 / b.value();
  const Taylor y = a.value() * inv;
  return tape_of(a, b).binary(OpKind::Div, a, b, y, inv, -(y * inv));
}

Var operator-(const Var& a) { return tape_of(a).unary(OpKind::Neg, a, -a.value(), kMinusOne); }

Var operator+(const Var& a, double c) {
  return tape_of(a).unary(OpKind::Add, a, a.value() + c, kOne);
}
Var operator+(double c, const Var& a) { return a + c; }
Var operator-(const Var& a, double c) {
  return tape_of(a).unary(OpKind::Sub, a, a.value() - c, kOne);
}
Var operator-(double c, const Var& a) {
  return tape_of(a).unary(OpKind::Sub, a, c - a.value(), kMinusOne);
}
Var operator*(const Var& a, double c) {
  return tape_of(a).unary(OpKind::Mul, a, a.value() * c, Taylor::constant(c));
}
Var operator*(double c, const Var& a) { return a * c; }
Var operator/(const Var& a, double c) {
  if (c == 0.0) throw std::domain_error("division by zero");
  return tape_of(a).unary(OpKind::Div, a, a.value() / c, Taylor::constant(1.0 / c));
}
Var operator/(double c, const Var& a) {
  const Taylor inv = 1.0 / a.value();
  const Taylor y = c * inv;
  return tape_of(a).unary(OpKind::Div, a, y, -(y * inv));
}

Var exp(const Var& x) {
  const Taylor y = stiffgate::exp(x.value());
  return tape_of(x).unary(OpKind::Exp, x, y, y);
}

Var log(const Var& x) {
  const Taylor y = stiffgate::log(x.value());
  return tape_of(x).unary(OpKind::Log, x, y, 1.0 / x.value());
}

Var sin(const Var& x) {
  return tape_of(x).unary(OpKind::Sin, x, stiffgate::sin(x.value()), stiffgate::cos(x.value()));
}

Var cos(const Var& x) {
  return tape_of(x).unary(OpKind::Cos, x, stiffgate::cos(x.value()), -stiffgate::sin(x.value()));
}

Var tanh(const Var& x) {
  const Taylor h = stiffgate::tanh(x.value());
  return tape_of(x).unary(OpKind::Tanh, x, h, 1.0 - h * h);
}

Var softplus(const Var& x) {
  return tape_of(x).unary(OpKind::Softplus, x, stiffgate::softplus(x.value()),
                          stiffgate::sigmoid(x.value()));
}

Var sigmoid(const Var& x) {
  const Taylor s = stiffgate::sigmoid(x.value());
  return tape_of(x).unary(OpKind::Sigmoid, x, s, s * (1.0 - s));
}

Var atan2(const Var& y, const Var& x) {
  const Taylor& yv = y.value();
  const Taylor& xv = x.value();
  const Taylor q = xv * xv + yv * yv;
  return tape_of(y, x).binary(OpKind::Atan2, y, x, stiffgate::atan2(yv, xv), xv / q, -(yv / q));
}

Var pow(const Var& x, double p) {
  const Taylor y = stiffgate::pow(x.value(), p);
  const Taylor dy = p * stiffgate::pow(x.value(), p - 1.0);
  return tape_of(x).unary(OpKind::Pow, x, y, dy);
}

Var pow(const Var& x, const Var& e) {
  const Taylor y = stiffgate::pow(x.value(), e.value());
  return tape_of(x, e).binary(OpKind::Pow, x, e, y, e.value() * y / x.value(),
                              y * stiffgate::log(x.value()));
}

Var value_of(const Var& x) { return tape_of(x).extract(OpKind::ValueOf, x); }
Var d1_of(const Var& x) { return tape_of(x).extract(OpKind::D1Of, x); }
Var d2_of(const Var& x) { return tape_of(x).extract(OpKind::D2Of, x); }

}  // namespace stiffgate::ad
