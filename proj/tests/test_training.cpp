#include <doctest.h>

#include <cmath>

#include "stiffgate/training.hpp"

using namespace stiffgate;
using namespace stiffgate::training;

TEST_CASE("first Adam step moves by lr * g / (|g| + eps)") {
  std::vector<double> p{1.0, -2.0, 0.5, 3.0};
  const std::vector<double> g{0.3, -4.0, 0.0, 1e-9};
  OptimizerState s(p.size());
  adam_step(s, p, g, 0.01);
  CHECK(s.step == 1);
  const double eps = 1e-8;
  CHECK(p[0] == doctest::Approx(1.0 - 0.01 * 0.3 / (0.3 + eps)));
  CHECK(p[1] == doctest::Approx(-2.0 + 0.01 * 4.0 / (4.0 + eps)));
  CHECK(p[2] == 0.5);
  CHECK(p[3] == doctest::Approx(3.0 - 0.01 * 1e-9 / (1e-9 + eps)));
}

TEST_CASE("Adam moments follow the recurrences") {
  std::vector<double> p{0.0};
  OptimizerState s(1);
  const double g1 = 2.0, g2 = -1.0, lr = 0.1;
  adam_step(s, p, std::vector<double>{g1}, lr);
  adam_step(s, p, std::vector<double>{g2}, lr);
  const double m = 0.9 * 0.1 * g1 + 0.1 * g2;
  const double v = 0.999 * 0.001 * g1 * g1 + 0.001 * g2 * g2;
  CHECK(s.m[0] == doctest::Approx(m));
  CHECK(s.v[0] == doctest::Approx(v));
  const double step2 = lr * (m / (1 - 0.81)) / (std::sqrt(v / (1 - 0.999 * 0.999)) + 1e-8);
  CHECK(p[0] == doctest::Approx(-lr * g1 / (g1 + 1e-8) - step2));
}

TEST_CASE("Adam rejects bad input") {
  std::vector<double> p{0.0, 1.0};
  OptimizerState s(2);
  CHECK_THROWS_AS(adam_step(s, p, std::vector<double>{1.0, std::nan("")}, 0.1), std::runtime_error);
  CHECK(s.step == 0);
  CHECK(p[1] == 1.0);
  CHECK_THROWS_AS(adam_step(s, p, std::vector<double>{1.0}, 0.1), std::invalid_argument);
}

TEST_CASE("collocation draws are in range and reproducible") {
  const CounterStream a(3, StreamPurpose::Collocation), b(3, StreamPurpose::Collocation),
      c(4, StreamPurpose::Collocation), d(3, StreamPurpose::Init);
  const auto x = sample_collocation(a, 7, 500, 10.0);
  CHECK(x == sample_collocation(b, 7, 500, 10.0));
  CHECK(x != sample_collocation(c, 7, 500, 10.0));
  CHECK(x != sample_collocation(d, 7, 500, 10.0));
  CHECK(x != sample_collocation(a, 8, 500, 10.0));
  double mean = 0;
  for (double t : x) {
    CHECK(t >= 0.0);
    CHECK(t < 10.0);
    mean += t / x.size();
  }
  CHECK(mean == doctest::Approx(5.0).epsilon(0.1));
  // Draw j of iteration i is counter i*n + j, independent of the rest.
  CHECK(x[13] == a.uniform(7 * 500 + 13, 0.0, 10.0));
  CHECK_THROWS(sample_collocation(a, 0, 0, 10.0));
}

TEST_CASE("loss curve cadence and final entry") {
  dynamics::PhysicsParams physics;
  const models::PinnModel model(models::TrunkKind::FixedFourier, models::GateKind::Exponential, {},
                                physics.r_min);
  TrainConfig cfg;
  cfg.n_updates = 25;
  cfg.n_coll = 64;
  cfg.log_every = 10;
  const auto r = train_run(model, physics, cfg);
  REQUIRE_FALSE(r.aborted);
  REQUIRE(r.curve.size() == 4);
  CHECK(r.curve[0].iter == 0);
  CHECK(r.curve[1].iter == 10);
  CHECK(r.curve[2].iter == 20);
  CHECK(r.curve[3].iter == 25);
  CHECK(r.final_loss == r.curve.back().loss);
  for (const auto& rec : r.curve)
    CHECK(rec.loss == doctest::Approx(rec.phys + 50.0 * rec.ic).epsilon(1e-14));
}

TEST_CASE("training is deterministic and decreases the loss") {
  dynamics::PhysicsParams physics;
  TrainConfig cfg;
  cfg.n_updates = 300;
  cfg.n_coll = 128;
  cfg.log_every = 50;
  cfg.seed = 11;
  for (auto trunk : {models::TrunkKind::FixedFourier, models::TrunkKind::AdaptiveFourier}) {
    const models::PinnModel model(trunk, models::GateKind::Linear, {}, physics.r_min);
    const auto a = train_run(model, physics, cfg);
    const auto b = train_run(model, physics, cfg);
    REQUIRE_FALSE(a.aborted);
    CHECK(a.params == b.params);
    CHECK(a.final_loss == b.final_loss);
    CHECK(a.final_loss < 0.5 * a.curve.front().loss);
    // The scalar kernels give the same optimum up to roundoff drift.
    const auto c = train_run(model, physics, cfg, kernels::scalar_table());
    CHECK(c.final_loss == doctest::Approx(a.final_loss).epsilon(1e-6));
  }
}

TEST_CASE("the baseline MLP trains too") {
  dynamics::PhysicsParams physics;
  TrainConfig cfg;
  cfg.n_updates = 40;
  cfg.n_coll = 32;
  cfg.log_every = 10;
  const models::PinnModel model(models::TrunkKind::BaselineMlp, models::GateKind::Exponential, {},
                                physics.r_min);
  const auto a = train_run(model, physics, cfg);
  REQUIRE_FALSE(a.aborted);
  CHECK(a.final_loss < a.curve.front().loss);
  CHECK(a.params == train_run(model, physics, cfg).params);
}

TEST_CASE("a zero gradient leaves Adam parameters in place") {
  // Near-zero gradients are not enough: Adam normalizes by sqrt(v), so roundoff
  // at an equilibrium grows into lr-sized steps once |g| exceeds epsilon.
  std::vector<double> p{0.3, -0.7};
  OptimizerState s(2);
  for (int i = 0; i < 10; ++i) adam_step(s, p, std::vector<double>{0.0, 0.0}, 0.1);
  CHECK(p == std::vector<double>{0.3, -0.7});
}

TEST_CASE("divergence aborts with a reason") {
  dynamics::PhysicsParams physics;
  physics.k = 60;
  const models::PinnModel model(models::TrunkKind::AdaptiveFourier, models::GateKind::Linear, {},
                                physics.r_min);
  TrainConfig cfg;
  cfg.n_updates = 200;
  cfg.n_coll = 16;
  cfg.learning_rate = 1e100;
  const auto r = train_run(model, physics, cfg);
  CHECK(r.aborted);
  CHECK(r.abort_reason.find("iteration") == 0);
  CHECK(std::isnan(r.final_loss));
}

TEST_CASE("config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.n_updates = 0;
  CHECK_THROWS(c.validate());
  c = {};
  c.learning_rate = -1;
  CHECK_THROWS(c.validate());
  c = {};
  c.beta2 = 1.0;
  CHECK_THROWS(c.validate());
  c = {};
  c.lambda_ic = std::nan("");
  CHECK_THROWS(c.validate());
}
