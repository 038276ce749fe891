#pragma once

// Residual Jacobians, the residual neural tangent kernel K = J J^T and its
// spectrum, the gate-scaling identity check, and linearized gradient flow of
// the residual vector under de/dtau = -K e.

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "stiffgate/dynamics.hpp"
#include "stiffgate/models.hpp"

namespace stiffgate::diagnostics {

enum class KernelMode {
  Residual,  // rows are d R_c(t_i) / d params
  Output,    // rows are d (rho^, theta^)(t_i) / d params, pre-softplus gated outputs
};

/// Stacked Jacobian with row 2*i + c for time point i and channel c.
Eigen::MatrixXd stacked_jacobian(const models::PinnModel& model, const models::ParamVector& params,
                                 std::span<const double> t_points,
                                 const dynamics::PhysicsParams& physics, KernelMode mode);

/// Residual vector e with e[2*i + c] = R_c(t_i).
Eigen::VectorXd residual_vector(const models::PinnModel& model, const models::ParamVector& params,
                                std::span<const double> t_points,
                                const dynamics::PhysicsParams& physics);

struct SymmetricEigen {
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;  // column i pairs with values[i]
  int sweeps = 0;
  double off_norm = 0.0;    // final off-diagonal Frobenius norm
};

/// Cyclic Jacobi rotations until the off-diagonal Frobenius norm is at most
/// tol * |A|_F (or max_sweeps). A must be symmetric.
SymmetricEigen jacobi_eigen(const Eigen::MatrixXd& a, double tol = 1e-15, int max_sweeps = 100);

/// exp(Shannon entropy) of the normalized non-negative eigenvalues.
double effective_rank(const Eigen::VectorXd& eigenvalues);

/// lambda_max / smallest eigenvalue above the numerical-rank threshold
/// N * eps * lambda_max.
double condition_number(const Eigen::VectorXd& eigenvalues);

struct KernelReport {
  std::vector<double> times;
  Eigen::MatrixXd jacobian;
  Eigen::MatrixXd K;
  SymmetricEigen eigen;
  double condition_number = 0.0;
  double effective_rank = 0.0;
};

KernelReport ntk_matrix(const models::PinnModel& model, const models::ParamVector& params,
                        std::span<const double> t_points, const dynamics::PhysicsParams& physics,
                        KernelMode mode = KernelMode::Residual);

/// max over t, params j and both channels of |lhs - g(t) rhs| / (|lhs| + 1e-15),
/// where lhs = d(gated pre-softplus output)/d theta_j and rhs = d(trunk output)/d theta_j.
double gate_scaling_check(const models::PinnModel& model, const models::ParamVector& params,
                          std::span<const double> t_points);

/// Frobenius norm of d(rho^, theta^)(t)/d params.
double gated_output_jacobian_norm(const models::PinnModel& model,
                                  const models::ParamVector& params, double t);
/// Frobenius norm of d(rho~, theta~)(t)/d params.
double latent_jacobian_norm(const models::PinnModel& model, const models::ParamVector& params,
                            double t);

struct FlowTrace {
  std::vector<double> norms;  // |e| at steps 0..n_steps
  Eigen::VectorXd final_residual;
  double lambda_max = 0.0;
  bool stable = true;  // dtau * lambda_max < 2
};

/// Explicit Euler on de/dtau = -K e.
FlowTrace linearized_flow(const Eigen::MatrixXd& K, const Eigen::VectorXd& e0, double dtau,
                          std::size_t n_steps);

}  // namespace stiffgate::diagnostics
