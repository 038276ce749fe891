#pragma once

// Entry points of the differentiation engine: time derivatives via Taylor
// propagation, parameter gradients and Jacobians via the tape.

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "stiffgate/tape.hpp"
#include "stiffgate/taylor.hpp"

namespace stiffgate::ad {

/// Evaluates f(params, t) with t seeded as (t, 1, 0) and params as constants.
/// f: (std::span<const Taylor>, Taylor) -> container of Taylor.
template <typename F>
auto eval_with_time_derivs(F&& f, double t, std::span<const double> params) {
  std::vector<Taylor> p;
  p.reserve(params.size());
  for (double v : params) p.push_back(Taylor::constant(v));
  return f(std::span<const Taylor>(p), Taylor::variable(t));
}

/// d output.val / d wrt (gradient of a scalar recorded on `tape`).
inline std::vector<double> grad(const Tape& tape, const Var& output, std::span<const Var> wrt) {
  return tape.gradient(output, wrt);
}

/// Row i is the gradient of outputs[i].val with respect to `wrt`.
Eigen::MatrixXd jacobian_rows(const Tape& tape, std::span<const Var> outputs,
                              std::span<const Var> wrt);

}  // namespace stiffgate::ad
