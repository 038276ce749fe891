#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>

#include "stiffgate/taylor.hpp"

using stiffgate::Taylor;

namespace {

// a(t) = 0.7 + 0.3 t + 0.2 t^2, b(t) = 1.1 - 0.4 t + 0.1 t^3
Taylor a_of(double t) { return {0.7 + 0.3 * t + 0.2 * t * t, 0.3 + 0.4 * t, 0.4}; }
Taylor b_of(double t) { return {1.1 - 0.4 * t + 0.1 * t * t * t, -0.4 + 0.3 * t * t, 0.6 * t}; }

void check_against_fd(const std::function<Taylor(double)>& f, double t) {
  const double h = 1e-3;
  const auto v = [&](double s) { return f(s).val; };
  const double fd1 = (v(t + h) - v(t - h)) / (2 * h);
  const double fd2 = (v(t + h) - 2 * v(t) + v(t - h)) / (h * h);
  const Taylor x = f(t);
  CHECK(x.d1 == doctest::Approx(fd1).epsilon(1e-6));
  CHECK(x.d2 == doctest::Approx(fd2).epsilon(1e-5));
}

}  // namespace

TEST_CASE("seeding") {
  const Taylor t = Taylor::variable(0.3);
  CHECK(t.val == 0.3);
  CHECK(t.d1 == 1.0);
  CHECK(t.d2 == 0.0);
  const Taylor c = Taylor::constant(2.5);
  CHECK(c.d1 == 0.0);
  CHECK(c.d2 == 0.0);
}

TEST_CASE("sin(w t) at zero") {
  const Taylor f = stiffgate::sin(2.0 * Taylor::variable(0.0));
  CHECK(f.val == 0.0);
  CHECK(f.d1 == doctest::Approx(2.0));
  CHECK(f.d2 == doctest::Approx(0.0));
}

TEST_CASE("exponential gate at zero") {
  const Taylor g = 1.0 - stiffgate::exp(-Taylor::variable(0.0));
  CHECK(g.val == 0.0);
  CHECK(g.d1 == doctest::Approx(1.0));
  CHECK(g.d2 == doctest::Approx(-1.0));
}

TEST_CASE("product rule") {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int i = 0; i < 20; ++i) {
    const Taylor a{u(gen), u(gen), u(gen)}, b{u(gen), u(gen), u(gen)}, c{u(gen), u(gen), u(gen)};
    const Taylor p = a * b;
    CHECK(p.d2 == doctest::Approx(a.d2 * b.val + 2 * a.d1 * b.d1 + a.val * b.d2));
    const Taylor l = (a * b) * c, r = a * (b * c);
    CHECK(l.val == doctest::Approx(r.val).epsilon(1e-12));
    CHECK(l.d1 == doctest::Approx(r.d1).epsilon(1e-12));
    CHECK(l.d2 == doctest::Approx(r.d2).epsilon(1e-12));
  }
}

TEST_CASE("exp(log(x)) round trip") {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(0.1, 3.0), w(-1, 1);
  for (int i = 0; i < 20; ++i) {
    const Taylor x{u(gen), w(gen), w(gen)};
    const Taylor y = stiffgate::exp(stiffgate::log(x));
    CHECK(y.val == doctest::Approx(x.val).epsilon(1e-12));
    CHECK(y.d1 == doctest::Approx(x.d1).epsilon(1e-12));
    CHECK(y.d2 == doctest::Approx(x.d2).epsilon(1e-12));
  }
}

TEST_CASE("elementary functions against finite differences") {
  using namespace stiffgate;
  for (double t : {-0.8, 0.1, 0.9}) {
    check_against_fd([](double s) { return a_of(s) + b_of(s); }, t);
    check_against_fd([](double s) { return a_of(s) - 3.0 * b_of(s); }, t);
    check_against_fd([](double s) { return a_of(s) * b_of(s); }, t);
    check_against_fd([](double s) { return a_of(s) / b_of(s); }, t);
    check_against_fd([](double s) { return 2.0 / b_of(s); }, t);
    check_against_fd([](double s) { return exp(a_of(s)); }, t);
    check_against_fd([](double s) { return log(a_of(s)); }, t);
    check_against_fd([](double s) { return sin(3.0 * a_of(s)); }, t);
    check_against_fd([](double s) { return cos(3.0 * a_of(s)); }, t);
    check_against_fd([](double s) { return tanh(2.0 * b_of(s)); }, t);
    check_against_fd([](double s) { return sigmoid(2.0 * b_of(s)); }, t);
    check_against_fd([](double s) { return softplus(4.0 * b_of(s) - 3.0); }, t);
    check_against_fd([](double s) { return pow(a_of(s), 2.5); }, t);
    check_against_fd([](double s) { return pow(a_of(s), b_of(s)); }, t);
    check_against_fd([](double s) { return atan2(b_of(s), a_of(s) - 0.9); }, t);
  }
}

TEST_CASE("softplus is stable for large arguments") {
  using stiffgate::scalar::softplus;
  CHECK(softplus(800.0) == 800.0);
  CHECK(softplus(-800.0) >= 0.0);
  CHECK(std::isfinite(softplus(-800.0)));
  CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)));
  const Taylor big = stiffgate::softplus(Taylor{700.0, 1.0, 0.0});
  CHECK(big.d1 == doctest::Approx(1.0));
  CHECK(std::isfinite(big.d2));
  CHECK(stiffgate::scalar::sigmoid(-800.0) == 0.0);
  CHECK(stiffgate::scalar::sigmoid(800.0) == 1.0);
}

TEST_CASE("softplus inverse") {
  for (double y : {1e-6, 0.3, 1.5, 40.0, 900.0})
    CHECK(stiffgate::scalar::softplus(stiffgate::scalar::softplus_inverse(y)) ==
          doctest::Approx(y).epsilon(1e-12));
  CHECK_THROWS_AS(stiffgate::scalar::softplus_inverse(0.0), std::domain_error);
}

TEST_CASE("domain errors") {
  CHECK_THROWS_AS(stiffgate::log(Taylor::constant(-1.0)), std::domain_error);
  CHECK_THROWS_AS(stiffgate::log(Taylor::constant(0.0)), std::domain_error);
  CHECK_THROWS_AS(Taylor::constant(1.0) / Taylor::constant(0.0), std::domain_error);
  CHECK_THROWS_AS(stiffgate::atan2(Taylor::constant(0.0), Taylor::constant(0.0)),
                  std::domain_error);
}
