#pragma once

// Batched training objective: physics residual loss plus the soft
// initial-velocity penalty, with the parameter gradient computed by a
// hand-derived pullback through the embedding and the residual.
//
// This is the fast path used by training. It computes the same quantities as
// recording the loss on an ad::Tape (the reference route), which the tests
// hold it to. Spectral trunks run on the runtime-selected kernel table; the
// MLP trunk runs as dense matrix products over the whole batch.

#include <array>
#include <memory>
#include <span>
#include <vector>

#include "stiffgate/dynamics.hpp"
#include "stiffgate/kernels.hpp"
#include "stiffgate/models.hpp"

namespace stiffgate::training {

struct LossTerms {
  double total = 0.0;
  double phys = 0.0;  // mean over the batch of |R(t_i)|^2
  double ic = 0.0;    // |v(0) - v0|^2
};

struct LossWeights {
  double phys = 1.0;
  double ic = 0.0;
};

/// Latent trunk output with time derivatives for one point:
/// [rho~, rho~', rho~'', theta~, theta~', theta~''].
using LatentJet = std::array<double, 6>;

class TrunkBatch;

class BatchedObjective {
 public:
  BatchedObjective(const models::PinnModel& model, const dynamics::PhysicsParams& physics,
                   LossWeights weights, const kernels::KernelTable& table = kernels::active());
  ~BatchedObjective();
  BatchedObjective(BatchedObjective&&) noexcept;
  BatchedObjective& operator=(BatchedObjective&&) noexcept;

  LossTerms loss(const models::ParamVector& params, std::span<const double> t_batch);

  /// Writes d total / d params into grad (resized). When weights.ic == 0 the
  /// initial-velocity term is neither evaluated nor differentiated.
  LossTerms loss_and_gradient(const models::ParamVector& params, std::span<const double> t_batch,
                              std::vector<double>& grad);

  /// Model states (r, theta, r', theta') at the given times.
  std::vector<dynamics::State> predict(const models::ParamVector& params,
                                       std::span<const double> times);

  /// Latent jets for a batch (exposed for equivalence tests).
  std::vector<LatentJet> latent(const models::ParamVector& params, std::span<const double> times);

  const models::PinnModel& model() const { return model_; }
  const kernels::KernelTable& table() const { return *table_; }

 private:
  LossTerms evaluate(const models::ParamVector& params, std::span<const double> t_batch,
                     std::vector<double>* grad);

  models::PinnModel model_;
  dynamics::PhysicsParams physics_;
  LossWeights weights_;
  const kernels::KernelTable* table_;
  std::unique_ptr<TrunkBatch> trunk_;
};

}  // namespace stiffgate::training
