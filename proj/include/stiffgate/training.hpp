#pragma once

// Composite PINN loss, Adam, collocation sampling and the training loop.
//
//   L = lambda_phys * mean_i |R(t_i)|^2 + lambda_ic * |v(0) - v0|^2
//
// The loss functions below are the reference route: they are generic over the
// scalar carrier, so the same code evaluates with Taylor2 (values and time
// derivatives only) or records onto an ad::Tape (parameter gradients).
// train_run uses the batched fast path in objective.hpp.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stiffgate/dynamics.hpp"
#include "stiffgate/kernels.hpp"
#include "stiffgate/models.hpp"
#include "stiffgate/objective.hpp"
#include "stiffgate/rng.hpp"
#include "stiffgate/tape.hpp"

namespace stiffgate::training {

struct TrainConfig {
  double lambda_phys = 1.0;
  double lambda_ic = 50.0;
  std::size_t n_updates = 5000;
  double learning_rate = 1e-3;
  std::size_t n_coll = 2000;
  // Recorded for fidelity; the velocity penalty lives at t = 0 and is evaluated once.
  std::size_t n_ic = 20;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t log_every = 100;

  void validate() const;
};

struct OptimizerState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;

  explicit OptimizerState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One bias-corrected Adam update in place. Throws std::runtime_error on a
/// non-finite gradient entry.
void adam_step(OptimizerState& state, std::span<double> params, std::span<const double> grad,
               double lr, const AdamHyper& hyper = {});

/// n uniform draws on [0, T) for one iteration of a collocation stream.
std::vector<double> sample_collocation(const CounterStream& stream, std::uint64_t iteration,
                                       std::size_t n, double T);

// ---- reference-route losses --------------------------------------------------

template <typename S, typename MakeTime>
S physics_loss_of(const models::PinnModel& model, std::span<const S> params,
                  std::span<const double> t_batch, const dynamics::PhysicsParams& p,
                  MakeTime make_time) {
  if (t_batch.empty()) throw std::invalid_argument("physics_loss: empty batch");
  std::optional<S> sum;
  for (double t : t_batch) {
    const auto e = model.forward<S>(params, make_time(t));
    const auto res = dynamics::residual<S>(value_of(e.r), d1_of(e.r), d2_of(e.r),
                                           value_of(e.theta), d1_of(e.theta), d2_of(e.theta), p);
    S sq = res[0] * res[0] + res[1] * res[1];
    sum = sum ? *sum + sq : sq;
  }
  return *sum / static_cast<double>(t_batch.size());
}

template <typename S, typename MakeTime>
S ic_velocity_loss_of(const models::PinnModel& model, std::span<const S> params,
                      MakeTime make_time) {
  const auto e = model.forward<S>(params, make_time(0.0));
  const S dv_r = d1_of(e.r) - model.ic().rdot0;
  const S dv_th = d1_of(e.theta) - model.ic().thetadot0;
  return dv_r * dv_r + dv_th * dv_th;
}

double physics_loss(const models::PinnModel& model, const models::ParamVector& params,
                    std::span<const double> t_batch, const dynamics::PhysicsParams& p);
double ic_velocity_loss(const models::PinnModel& model, const models::ParamVector& params);
LossTerms total_loss(const models::PinnModel& model, const models::ParamVector& params,
                     std::span<const double> t_batch, const dynamics::PhysicsParams& p,
                     LossWeights weights);

/// Records the total loss onto `tape` and returns its node.
ad::Var record_total_loss(ad::Tape& tape, const models::PinnModel& model,
                          std::span<const ad::Var> params, std::span<const double> t_batch,
                          const dynamics::PhysicsParams& p, LossWeights weights);

/// Gradient of the total loss via the tape.
std::vector<double> tape_gradient(const models::PinnModel& model,
                                  const models::ParamVector& params,
                                  std::span<const double> t_batch,
                                  const dynamics::PhysicsParams& p, LossWeights weights);

// ---- training loop -----------------------------------------------------------

struct LossRecord {
  std::size_t iter = 0;
  double loss = 0.0;
  double phys = 0.0;
  double ic = 0.0;
};

struct TrainResult {
  models::ParamVector params;
  std::vector<LossRecord> curve;
  bool aborted = false;
  std::string abort_reason;
  double final_loss = 0.0;
};

/// n_updates iterations of: resample collocation points, evaluate loss and
/// gradient, Adam step. Records the loss every log_every iterations and once
/// more after the last update. A non-finite loss or gradient aborts the run;
/// the result then carries aborted = true and the parameters at the failure.
TrainResult train_run(const models::PinnModel& model, const dynamics::PhysicsParams& physics,
                      const TrainConfig& config,
                      const kernels::KernelTable& table = kernels::active());

}  // namespace stiffgate::training
