#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "stiffgate/dynamics.hpp"

using namespace stiffgate::dynamics;

TEST_CASE("rhs agrees with the Cartesian force balance") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 50; ++i) {
    PhysicsParams p;
    p.k = 20 + 40 * (u(gen) + 1);
    p.c_r = 0.3 * (u(gen) + 1);
    p.c_theta = 0.2 * (u(gen) + 1);
    const State s{1.2 + 0.5 * u(gen), 3 * u(gen), 2 * u(gen), 2 * u(gen)};
    const auto a = rhs(s, p);
    const auto o = oracle::cartesian_rhs(s, p);
    CHECK(a.r_ddot == doctest::Approx(o.r_ddot).epsilon(1e-12).scale(1.0));
    CHECK(a.theta_ddot == doctest::Approx(o.theta_ddot).epsilon(1e-12).scale(1.0));
    const auto res = residual(s, o, p);
    CHECK(std::fabs(res[0]) < 1e-10);
    CHECK(std::fabs(res[1]) < 1e-10);
  }
}

TEST_CASE("residual templates agree across scalar types") {
  PhysicsParams p;
  p.c_r = 0.1;
  const auto d = residual<double>(1.3, 0.2, -0.4, 0.7, 0.5, 0.1, p);
  const auto t = residual<stiffgate::Taylor>(stiffgate::Taylor::constant(1.3),
                                             stiffgate::Taylor::constant(0.2),
                                             stiffgate::Taylor::constant(-0.4),
                                             stiffgate::Taylor::constant(0.7),
                                             stiffgate::Taylor::constant(0.5),
                                             stiffgate::Taylor::constant(0.1), p);
  CHECK(d[0] == t[0].val);
  CHECK(d[1] == t[1].val);
}

TEST_CASE("equilibrium is a fixed point") {
  PhysicsParams p;
  const State eq{p.equilibrium_radius(), 0.0, 0.0, 0.0};
  const auto a = rhs(eq, p);
  CHECK(std::fabs(a.r_ddot) < 1e-14);
  CHECK(a.theta_ddot == 0.0);
  const auto grid = uniform_grid(p.T, 200);
  const auto traj = solve_reference(eq, p, grid);
  for (const auto& s : traj.states) {
    CHECK(std::fabs(s.r - eq.r) < 1e-13);
    CHECK(s.theta == 0.0);
  }
}

TEST_CASE("uniform grid") {
  const auto g = uniform_grid(10.0, 2000);
  REQUIRE(g.size() == 2000);
  CHECK(g.front() == 0.0);
  CHECK(g.back() == 10.0);
  CHECK(g[1] == doctest::Approx(10.0 / 1999));
  CHECK_THROWS(uniform_grid(10.0, 1));
}

TEST_CASE("energy is conserved without damping") {
  for (double k : {20.0, 60.0}) {
    PhysicsParams p;
    p.k = k;
    const State s0{1.5, 1.0, 0.0, 0.0};
    const auto traj = solve_reference(s0, p, uniform_grid(p.T, 2000));
    const double e0 = energy(s0, p);
    double worst = 0.0;
    for (const auto& s : traj.states) worst = std::max(worst, std::fabs(energy(s, p) - e0));
    CHECK(worst / std::fabs(e0) < 1e-8);
  }
}

TEST_CASE("damping dissipates energy") {
  PhysicsParams p;
  p.c_r = 0.5;
  p.c_theta = 0.2;
  const auto traj = solve_reference({1.5, 1.0, 0.0, 0.0}, p, uniform_grid(p.T, 500));
  double prev = energy(traj.states.front(), p);
  for (const auto& s : traj.states) {
    const double e = energy(s, p);
    CHECK(e <= prev + 1e-10);
    prev = e;
  }
  CHECK(prev < energy(traj.states.front(), p) * 0.9);
}

TEST_CASE("one-step defect against a fine RK4 integration") {
  for (double k : {20.0, 60.0}) {
    PhysicsParams p;
    p.k = k;
    const auto grid = uniform_grid(p.T, 2000);
    const auto traj = solve_reference({1.5, 1.0, 0.0, 0.0}, p, grid);
    double worst = 0.0;
    for (std::size_t i = 0; i + 1 < grid.size(); i += 37) {
      const auto& s = traj.states[i];
      const auto y = oracle::rk4({s.r, s.theta, s.r_dot, s.theta_dot}, grid[i], grid[i + 1], 50, p);
      const auto& n = traj.states[i + 1];
      worst = std::max({worst, std::fabs(y[0] - n.r), std::fabs(y[1] - n.theta),
                        std::fabs(y[2] - n.r_dot), std::fabs(y[3] - n.theta_dot)});
    }
    CAPTURE(k);
    CHECK(worst < 1e-8);
  }
}

TEST_CASE("whole trajectory against RK4 at k=20") {
  PhysicsParams p;
  const auto grid = uniform_grid(p.T, 201);
  const auto traj = solve_reference({1.5, 1.0, 0.0, 0.0}, p, grid);
  oracle::Vec4 y{1.5, 1.0, 0.0, 0.0};
  double worst = 0.0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    y = oracle::rk4(y, grid[i - 1], grid[i], 200, p);
    worst = std::max(worst, std::fabs(y[0] - traj.states[i].r));
    worst = std::max(worst, std::fabs(y[1] - traj.states[i].theta));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("small radial oscillation matches the linearized solution") {
  PhysicsParams p;
  p.k = 60;
  const double delta = 1e-6;
  const double req = p.equilibrium_radius();
  const auto grid = uniform_grid(p.T, 400);
  const auto traj = solve_reference({req + delta, 0.0, 0.0, 0.0}, p, grid);
  const double w = std::sqrt(p.k / p.m);
  for (std::size_t i = 0; i < grid.size(); ++i)
    CHECK(std::fabs(traj.states[i].r - (req + delta * std::cos(w * grid[i]))) < 1e-12);
}

TEST_CASE("tightening the tolerance changes the solution by little") {
  PhysicsParams p;
  const auto grid = uniform_grid(p.T, 100);
  SolverOptions loose;
  loose.rtol = 1e-8;
  loose.atol = 1e-10;
  const auto a = solve_reference({1.5, 1.0, 0.0, 0.0}, p, grid, loose);
  const auto b = solve_reference({1.5, 1.0, 0.0, 0.0}, p, grid);
  double diff = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i)
    diff = std::max(diff, std::fabs(a.states[i].r - b.states[i].r));
  CHECK(diff < 1e-5);
}

TEST_CASE("collapse below r_min is an integration error") {
  PhysicsParams p;
  p.k = 1.0;
  p.r_min = 0.05;
  CHECK_THROWS_AS(solve_reference({0.2, 0.0, -10.0, 0.0}, p, uniform_grid(p.T, 50)),
                  IntegrationError);
}

TEST_CASE("parameter validation") {
  PhysicsParams p;
  p.k = -1;
  CHECK_THROWS(p.validate());
  p = {};
  p.m = 0;
  CHECK_THROWS(p.validate());
  p = {};
  CHECK_THROWS(rhs({0.0, 0.0, 0.0, 0.0}, p));
  CHECK_THROWS(solve_reference({1.5, 1.0, 0.0, 0.0}, p, std::vector<double>{0.0, 2.0, 1.0}));
}
