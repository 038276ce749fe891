#include "stiffgate/autodiff.hpp"

namespace stiffgate::ad {

Eigen::MatrixXd jacobian_rows(const Tape& tape, std::span<const Var> outputs,
                              std::span<const Var> wrt) {
  Eigen::MatrixXd jac(static_cast<Eigen::Index>(outputs.size()),
                      static_cast<Eigen::Index>(wrt.size()));
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    const auto adj = tape.reverse(outputs[i], Cotangent{1.0, 0.0, 0.0});
    for (std::size_t j = 0; j < wrt.size(); ++j)
      jac(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          adj[static_cast<std::size_t>(wrt[j].index())].val;
  }
  return jac;
}

}  // namespace stiffgate::ad
