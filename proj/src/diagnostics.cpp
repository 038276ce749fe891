#include "stiffgate/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "stiffgate/autodiff.hpp"
#include "stiffgate/tape.hpp"

namespace stiffgate::diagnostics {

namespace {

void check_points(std::span<const double> t_points, double T) {
  if (t_points.empty()) throw std::invalid_argument("diagnostics: no time points");
  for (double t : t_points)
    if (t < 0.0 || t > T) throw std::invalid_argument("diagnostics: time point outside [0, T]");
}

// Records the two rows for one time point and returns them as tape Vars.
std::array<ad::Var, 2> record_rows(ad::Tape& tape, const models::PinnModel& model,
                                   std::span<const ad::Var> leaves, double t,
                                   const dynamics::PhysicsParams& physics, KernelMode mode) {
  const auto e = model.forward<ad::Var>(leaves, tape.time(t));
  if (mode == KernelMode::Output) return {ad::value_of(e.rho_hat), ad::value_of(e.theta_hat)};
  return dynamics::residual<ad::Var>(ad::value_of(e.r), ad::d1_of(e.r), ad::d2_of(e.r),
                                     ad::value_of(e.theta), ad::d1_of(e.theta),
                                     ad::d2_of(e.theta), physics);
}

}  // namespace

Eigen::MatrixXd stacked_jacobian(const models::PinnModel& model, const models::ParamVector& params,
                                 std::span<const double> t_points,
                                 const dynamics::PhysicsParams& physics, KernelMode mode) {
  check_points(t_points, physics.T);
  const auto p = static_cast<Eigen::Index>(params.size());
  Eigen::MatrixXd jac(static_cast<Eigen::Index>(2 * t_points.size()), p);
  ad::Tape tape;
  for (std::size_t i = 0; i < t_points.size(); ++i) {
    tape.clear();
    const auto leaves = tape.leaves(params.values());
    const auto rows = record_rows(tape, model, leaves, t_points[i], physics, mode);
    jac.middleRows(static_cast<Eigen::Index>(2 * i), 2) = ad::jacobian_rows(tape, rows, leaves);
  }
  return jac;
}

Eigen::VectorXd residual_vector(const models::PinnModel& model, const models::ParamVector& params,
                                std::span<const double> t_points,
                                const dynamics::PhysicsParams& physics) {
  check_points(t_points, physics.T);
  Eigen::VectorXd e(static_cast<Eigen::Index>(2 * t_points.size()));
  for (std::size_t i = 0; i < t_points.size(); ++i) {
    const auto out = model.evaluate(params, t_points[i]);
    const auto res = dynamics::residual<double>(out.r.val, out.r.d1, out.r.d2, out.theta.val,
                                                out.theta.d1, out.theta.d2, physics);
    e[static_cast<Eigen::Index>(2 * i)] = res[0];
    e[static_cast<Eigen::Index>(2 * i + 1)] = res[1];
  }
  return e;
}

SymmetricEigen jacobi_eigen(const Eigen::MatrixXd& input, double tol, int max_sweeps) {
  if (input.rows() != input.cols()) throw std::invalid_argument("jacobi_eigen: matrix not square");
  const Eigen::Index n = input.rows();
  if ((input - input.transpose()).cwiseAbs().maxCoeff() >
      1e-10 * std::max(1.0, input.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("jacobi_eigen: matrix not symmetric");

  Eigen::MatrixXd a = 0.5 * (input + input.transpose());
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  const double scale = a.norm();
  auto off_norm = [&] {
    double s = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < n; ++i)
        if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
  };

  SymmetricEigen out;
  double off = off_norm();
  while (off > tol * scale && out.sweeps < max_sweeps) {
    ++out.sweeps;
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (tau >= 0 ? 1.0 : -1.0) / (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        // A <- J^T A J with J the (p, q) rotation.
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
    off = off_norm();
  }
  out.off_norm = off;

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index i, Eigen::Index j) { return a(i, i) > a(j, j); });
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values[i] = a(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(i)]);
    out.vectors.col(i) = v.col(order[static_cast<std::size_t>(i)]);
  }
  return out;
}

double effective_rank(const Eigen::VectorXd& eigenvalues) {
  double total = 0.0;
  for (double l : eigenvalues) total += std::max(l, 0.0);
  if (!(total > 0)) return 0.0;
  double entropy = 0.0;
  for (double l : eigenvalues) {
    const double p = std::max(l, 0.0) / total;
    if (p > 0) entropy -= p * std::log(p);
  }
  return std::exp(entropy);
}

double condition_number(const Eigen::VectorXd& eigenvalues) {
  if (eigenvalues.size() == 0) return 0.0;
  const double lmax = eigenvalues.maxCoeff();
  if (!(lmax > 0)) return std::numeric_limits<double>::infinity();
  const double floor = static_cast<double>(eigenvalues.size()) *
                       std::numeric_limits<double>::epsilon() * lmax;
  double lmin = lmax;
  for (double l : eigenvalues)
    if (l > floor) lmin = std::min(lmin, l);
  return lmax / lmin;
}

KernelReport ntk_matrix(const models::PinnModel& model, const models::ParamVector& params,
                        std::span<const double> t_points, const dynamics::PhysicsParams& physics,
                        KernelMode mode) {
  KernelReport rep;
  rep.times.assign(t_points.begin(), t_points.end());
  rep.jacobian = stacked_jacobian(model, params, t_points, physics, mode);
  rep.K = rep.jacobian * rep.jacobian.transpose();
  rep.K = 0.5 * (rep.K + rep.K.transpose());
  rep.eigen = jacobi_eigen(rep.K);
  rep.condition_number = condition_number(rep.eigen.values);
  rep.effective_rank = effective_rank(rep.eigen.values);
  return rep;
}

double gate_scaling_check(const models::PinnModel& model, const models::ParamVector& params,
                          std::span<const double> t_points) {
  double worst = 0.0;
  ad::Tape tape;
  for (double t : t_points) {
    tape.clear();
    const auto leaves = tape.leaves(params.values());
    const auto e = model.forward<ad::Var>(leaves, tape.time(t));
    const double g = e.gate.value().val;
    const std::array<ad::Var, 4> outs{ad::value_of(e.rho_hat), ad::value_of(e.theta_hat),
                                      ad::value_of(e.latent[0]), ad::value_of(e.latent[1])};
    const Eigen::MatrixXd jac = ad::jacobian_rows(tape, outs, leaves);
    for (Eigen::Index c = 0; c < 2; ++c)
      for (Eigen::Index j = 0; j < jac.cols(); ++j) {
        const double lhs = jac(c, j);
        const double rhs = jac(c + 2, j);
        worst = std::max(worst, std::fabs(lhs - g * rhs) / (std::fabs(lhs) + 1e-15));
      }
  }
  return worst;
}

namespace {

double jacobian_norm(const models::PinnModel& model, const models::ParamVector& params, double t,
                     bool gated) {
  ad::Tape tape;
  const auto leaves = tape.leaves(params.values());
  const auto e = model.forward<ad::Var>(leaves, tape.time(t));
  const std::array<ad::Var, 2> outs =
      gated ? std::array<ad::Var, 2>{ad::value_of(e.rho_hat), ad::value_of(e.theta_hat)}
            : std::array<ad::Var, 2>{ad::value_of(e.latent[0]), ad::value_of(e.latent[1])};
  return ad::jacobian_rows(tape, outs, leaves).norm();
}

}  // namespace

double gated_output_jacobian_norm(const models::PinnModel& model,
                                  const models::ParamVector& params, double t) {
  return jacobian_norm(model, params, t, true);
}

double latent_jacobian_norm(const models::PinnModel& model, const models::ParamVector& params,
                            double t) {
  return jacobian_norm(model, params, t, false);
}

FlowTrace linearized_flow(const Eigen::MatrixXd& K, const Eigen::VectorXd& e0, double dtau,
                          std::size_t n_steps) {
  if (K.rows() != K.cols() || K.rows() != e0.size())
    throw std::invalid_argument("linearized_flow: shape mismatch");
  FlowTrace trace;
  // Power iteration for the stability bound.
  Eigen::VectorXd x = Eigen::VectorXd::Ones(K.rows());
  for (int it = 0; it < 200 && x.norm() > 0; ++it) {
    x.normalize();
    const Eigen::VectorXd y = K * x;
    trace.lambda_max = x.dot(y);
    x = y;
  }
  trace.stable = dtau * trace.lambda_max < 2.0;

  Eigen::VectorXd e = e0;
  trace.norms.reserve(n_steps + 1);
  trace.norms.push_back(e.norm());
  for (std::size_t s = 0; s < n_steps; ++s) {
    e -= dtau * (K * e);
    trace.norms.push_back(e.norm());
  }
  trace.final_residual = e;
  return trace;
}

}  // namespace stiffgate::diagnostics
