#pragma once

// Planar spring-pendulum in polar coordinates (r, theta):
//
//   r''     = r theta'^2 - (k/m)(r - L0) + g cos(theta) - (c_r/m) r'
//   theta'' = -2 r' theta' / r - (g/r) sin(theta) - c_theta theta'

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace stiffgate::dynamics {

struct PhysicsParams {
  double k = 20.0;
  double m = 1.0;
  double L0 = 1.0;
  double g_grav = 9.81;
  double c_r = 0.0;
  double c_theta = 0.0;
  double r_min = 1e-4;
  double T = 10.0;

  /// Throws std::invalid_argument when an invariant is violated.
  void validate() const;
  /// Radius at which the spring balances gravity with theta = 0.
  double equilibrium_radius() const { return L0 + m * g_grav / k; }
};

struct State {
  double r = 1.0;
  double theta = 0.0;
  double r_dot = 0.0;
  double theta_dot = 0.0;
};

struct Acceleration {
  double r_ddot = 0.0;
  double theta_ddot = 0.0;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<State> states;

  std::size_t size() const { return times.size(); }
  /// Strictly increasing times of equal length to states.
  void validate() const;
};

/// Thrown by solve_reference when integration cannot proceed.
class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& what, double t) : std::runtime_error(what), time_(t) {}
  double time() const { return time_; }

 private:
  double time_;
};

Acceleration rhs(const State& s, const PhysicsParams& p);

/// ODE residual [r'' - rhs_r, theta'' - rhs_theta] for any scalar carrier
/// (double, Taylor2, tape Var).
template <typename S>
std::array<S, 2> residual(const S& r, const S& r_dot, const S& r_ddot, const S& theta,
                          const S& theta_dot, const S& theta_ddot, const PhysicsParams& p) {
  using std::cos;
  using std::sin;
  const S rhs_r = r * theta_dot * theta_dot - (p.k / p.m) * (r - p.L0) + p.g_grav * cos(theta) -
                  (p.c_r / p.m) * r_dot;
  const S rhs_theta =
      -2.0 * r_dot * theta_dot / r - p.g_grav * sin(theta) / r - p.c_theta * theta_dot;
  return {r_ddot - rhs_r, theta_ddot - rhs_theta};
}

/// Residual on plain doubles with the r > 0 precondition checked.
std::array<double, 2> residual(const State& s, const Acceleration& a, const PhysicsParams& p);

double energy(const State& s, const PhysicsParams& p);

/// Uniform grid of n points on [0, t_final], both ends included.
std::vector<double> uniform_grid(double t_final, std::size_t n);

struct SolverOptions {
  double rtol = 1e-10;
  double atol = 1e-12;
  double initial_step = 1e-4;
  double min_step = 1e-14;
  std::size_t max_steps = 50'000'000;
};

struct SolverStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
};

/// Dormand-Prince 5(4) with PI step control. Steps are clipped to land on
/// every grid time, so states are reported at full solver accuracy. Throws
/// IntegrationError on step-size underflow or when r drops to r_min.
Trajectory solve_reference(const State& s0, const PhysicsParams& p, std::span<const double> grid,
                           const SolverOptions& options = {}, SolverStats* stats = nullptr);

}  // namespace stiffgate::dynamics
