#include "stiffgate/dynamics.hpp"

#include <algorithm>
#include <cmath>

namespace stiffgate::dynamics {

void PhysicsParams::validate() const {
  if (!(k > 0)) throw std::invalid_argument("PhysicsParams: k must be positive");
  if (!(m > 0)) throw std::invalid_argument("PhysicsParams: m must be positive");
  if (!(L0 > 0)) throw std::invalid_argument("PhysicsParams: L0 must be positive");
  if (!(r_min > 0)) throw std::invalid_argument("PhysicsParams: r_min must be positive");
  if (!(T > 0)) throw std::invalid_argument("PhysicsParams: T must be positive");
  if (!(c_r >= 0)) throw std::invalid_argument("PhysicsParams: c_r must be non-negative");
  if (!(c_theta >= 0)) throw std::invalid_argument("PhysicsParams: c_theta must be non-negative");
}

void Trajectory::validate() const {
  if (times.size() != states.size())
    throw std::invalid_argument("Trajectory: times and states differ in length");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1]))
      throw std::invalid_argument("Trajectory: times must be strictly increasing");
}

Acceleration rhs(const State& s, const PhysicsParams& p) {
  if (!(s.r > 0)) throw std::domain_error("rhs: r must be strictly positive");
  const double r_ddot = s.r * s.theta_dot * s.theta_dot - (p.k / p.m) * (s.r - p.L0) +
                        p.g_grav * std::cos(s.theta) - (p.c_r / p.m) * s.r_dot;
  const double theta_ddot = -2.0 * s.r_dot * s.theta_dot / s.r -
                            (p.g_grav / s.r) * std::sin(s.theta) - p.c_theta * s.theta_dot;
  return {r_ddot, theta_ddot};
}

std::array<double, 2> residual(const State& s, const Acceleration& a, const PhysicsParams& p) {
  if (!(s.r > 0)) throw std::domain_error("residual: r must be strictly positive");
  return residual<double>(s.r, s.r_dot, a.r_ddot, s.theta, s.theta_dot, a.theta_ddot, p);
}

double energy(const State& s, const PhysicsParams& p) {
  const double kinetic = 0.5 * p.m * (s.r_dot * s.r_dot + s.r * s.r * s.theta_dot * s.theta_dot);
  const double stretch = s.r - p.L0;
  return kinetic + 0.5 * p.k * stretch * stretch - p.m * p.g_grav * s.r * std::cos(s.theta);
}

std::vector<double> uniform_grid(double t_final, std::size_t n) {
  if (n < 2) throw std::invalid_argument("uniform_grid: need at least two points");
  std::vector<double> grid(n);
  const double dt = t_final / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) grid[i] = dt * static_cast<double>(i);
  grid.back() = t_final;
  return grid;
}

namespace {

using Vec4 = std::array<double, 4>;

Vec4 flow(const Vec4& y, const PhysicsParams& p) {
  const Acceleration a = rhs(State{y[0], y[1], y[2], y[3]}, p);
  return {y[2], y[3], a.r_ddot, a.theta_ddot};
}

Vec4 axpy(const Vec4& y, double h, std::initializer_list<std::pair<double, const Vec4*>> terms) {
  Vec4 out = y;
  for (const auto& [c, k] : terms)
    for (int i = 0; i < 4; ++i) out[i] += h * c * (*k)[i];
  return out;
}

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
// Fifth-order weights minus embedded fourth-order weights.
constexpr double e1 = b1 - 5179.0 / 57600, e3 = b3 - 7571.0 / 16695, e4 = b4 - 393.0 / 640,
                 e5 = b5 + 92097.0 / 339200, e6 = b6 - 187.0 / 2100, e7 = -1.0 / 40;

}  // namespace

Trajectory solve_reference(const State& s0, const PhysicsParams& p, std::span<const double> grid,
                           const SolverOptions& options, SolverStats* stats) {
  p.validate();
  if (!(s0.r > p.r_min)) throw std::invalid_argument("solve_reference: r0 must exceed r_min");
  if (grid.empty()) throw std::invalid_argument("solve_reference: empty grid");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] < 0.0 || grid[i] > p.T)
      throw std::invalid_argument("solve_reference: grid outside [0, T]");
    if (i > 0 && !(grid[i] > grid[i - 1]))
      throw std::invalid_argument("solve_reference: grid must be strictly increasing");
  }

  Trajectory out;
  out.times.assign(grid.begin(), grid.end());
  out.states.reserve(grid.size());

  Vec4 y{s0.r, s0.theta, s0.r_dot, s0.theta_dot};
  double t = 0.0;
  double h = options.initial_step;
  double err_prev = 1e-4;
  Vec4 k1 = flow(y, p);
  SolverStats local;

  // PI controller (Hairer & Wanner II.4) for a 5th-order method.
  constexpr double alpha = 0.7 / 5.0, beta = 0.4 / 5.0, safety = 0.9;

  for (double target : grid) {
    while (t < target) {
      if (local.accepted + local.rejected > options.max_steps)
        throw IntegrationError("solve_reference: step budget exhausted", t);
      const double remaining = target - t;
      const bool clipped = h >= remaining;
      const double step = clipped ? remaining : h;

      const Vec4 k2 = flow(axpy(y, step, {{a21, &k1}}), p);
      const Vec4 k3 = flow(axpy(y, step, {{a31, &k1}, {a32, &k2}}), p);
      const Vec4 k4 = flow(axpy(y, step, {{a41, &k1}, {a42, &k2}, {a43, &k3}}), p);
      const Vec4 k5 = flow(axpy(y, step, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}), p);
      const Vec4 k6 =
          flow(axpy(y, step, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}), p);
      const Vec4 y_new =
          axpy(y, step, {{b1, &k1}, {b3, &k3}, {b4, &k4}, {b5, &k5}, {b6, &k6}});
      if (!(y_new[0] > p.r_min))
        throw IntegrationError("solve_reference: r reached r_min", t + step);
      const Vec4 k7 = flow(y_new, p);

      double err = 0.0;
      for (int i = 0; i < 4; ++i) {
        const double ei = step * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] +
                                  e6 * k6[i] + e7 * k7[i]);
        const double scale =
            options.atol + options.rtol * std::max(std::fabs(y[i]), std::fabs(y_new[i]));
        err += (ei / scale) * (ei / scale);
      }
      err = std::sqrt(err / 4.0);

      if (err <= 1.0) {
        ++local.accepted;
        t = clipped ? target : t + step;
        y = y_new;
        k1 = k7;
        const double e = std::max(err, 1e-10);
        double factor = safety * std::pow(e, -alpha) * std::pow(err_prev, beta);
        factor = std::clamp(factor, 0.2, 5.0);
        // A clipped step says nothing about the natural step length.
        if (!clipped) h = step * factor;
        else h = std::max(h, step * factor);
        err_prev = e;
      } else {
        ++local.rejected;
        h = step * std::max(0.2, safety * std::pow(err, -alpha));
      }
      if (h < options.min_step) throw IntegrationError("solve_reference: step size underflow", t);
    }
    out.states.push_back(State{y[0], y[1], y[2], y[3]});
  }
  if (stats != nullptr) *stats = local;
  return out;
}

}  // namespace stiffgate::dynamics
