#include "stiffgate/training.hpp"

#include <cmath>
#include <stdexcept>

namespace stiffgate::training {

void TrainConfig::validate() const {
  if (!(lambda_phys >= 0) || !(lambda_ic >= 0))
    throw std::invalid_argument("TrainConfig: loss weights must be non-negative");
  if (n_updates == 0) throw std::invalid_argument("TrainConfig: n_updates must be positive");
  if (!(learning_rate > 0)) throw std::invalid_argument("TrainConfig: learning_rate must be positive");
  if (n_coll == 0) throw std::invalid_argument("TrainConfig: n_coll must be positive");
  if (log_every == 0) throw std::invalid_argument("TrainConfig: log_every must be positive");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1) || !(epsilon > 0))
    throw std::invalid_argument("TrainConfig: invalid Adam hyperparameters");
}

void adam_step(OptimizerState& state, std::span<double> params, std::span<const double> grad,
               double lr, const AdamHyper& hyper) {
  if (params.size() != grad.size() || state.m.size() != params.size() ||
      state.v.size() != params.size())
    throw std::invalid_argument("adam_step: shape mismatch");
  for (std::size_t i = 0; i < grad.size(); ++i)
    if (!std::isfinite(grad[i]))
      throw std::runtime_error("adam_step: non-finite gradient at index " + std::to_string(i));

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(hyper.beta1, t);
  const double bc2 = 1.0 - std::pow(hyper.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * grad[i];
    state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * grad[i] * grad[i];
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + hyper.epsilon);
  }
}

std::vector<double> sample_collocation(const CounterStream& stream, std::uint64_t iteration,
                                       std::size_t n, double T) {
  if (n == 0) throw std::invalid_argument("sample_collocation: n must be positive");
  std::vector<double> t(n);
  const std::uint64_t base = iteration * static_cast<std::uint64_t>(n);
  for (std::size_t j = 0; j < n; ++j) t[j] = stream.uniform(base + j, 0.0, T);
  return t;
}

namespace {

auto taylor_time = [](double t) { return Taylor::variable(t); };

}  // namespace

double physics_loss(const models::PinnModel& model, const models::ParamVector& params,
                    std::span<const double> t_batch, const dynamics::PhysicsParams& p) {
  const auto c = models::as_constants(params.values());
  return physics_loss_of<Taylor>(model, c, t_batch, p, taylor_time).val;
}

double ic_velocity_loss(const models::PinnModel& model, const models::ParamVector& params) {
  const auto c = models::as_constants(params.values());
  return ic_velocity_loss_of<Taylor>(model, std::span<const Taylor>(c), taylor_time).val;
}

LossTerms total_loss(const models::PinnModel& model, const models::ParamVector& params,
                     std::span<const double> t_batch, const dynamics::PhysicsParams& p,
                     LossWeights weights) {
  LossTerms out;
  out.phys = physics_loss(model, params, t_batch, p);
  out.ic = weights.ic != 0.0 ? ic_velocity_loss(model, params) : 0.0;
  out.total = weights.phys * out.phys + weights.ic * out.ic;
  return out;
}

ad::Var record_total_loss(ad::Tape& tape, const models::PinnModel& model,
                          std::span<const ad::Var> params, std::span<const double> t_batch,
                          const dynamics::PhysicsParams& p, LossWeights weights) {
  auto make_time = [&tape](double t) { return tape.time(t); };
  ad::Var loss = physics_loss_of<ad::Var>(model, params, t_batch, p, make_time) * weights.phys;
  if (weights.ic != 0.0)
    loss = loss + weights.ic * ic_velocity_loss_of<ad::Var>(model, params, make_time);
  return loss;
}

std::vector<double> tape_gradient(const models::PinnModel& model,
                                  const models::ParamVector& params,
                                  std::span<const double> t_batch,
                                  const dynamics::PhysicsParams& p, LossWeights weights) {
  ad::Tape tape;
  const auto leaves = tape.leaves(params.values());
  const ad::Var loss = record_total_loss(tape, model, leaves, t_batch, p, weights);
  return tape.gradient(loss, leaves);
}

TrainResult train_run(const models::PinnModel& model, const dynamics::PhysicsParams& physics,
                      const TrainConfig& config, const kernels::KernelTable& table) {
  config.validate();
  physics.validate();
  BatchedObjective objective(model, physics, {config.lambda_phys, config.lambda_ic}, table);
  const CounterStream stream(config.seed, StreamPurpose::Collocation);
  const AdamHyper hyper{config.beta1, config.beta2, config.epsilon};

  TrainResult result;
  result.params = models::init_params(model.trunk_kind(), config.seed);
  OptimizerState opt(result.params.size());
  std::vector<double> grad;

  std::size_t iter = 0;
  try {
    for (; iter < config.n_updates; ++iter) {
      const auto batch = sample_collocation(stream, iter, config.n_coll, physics.T);
      const LossTerms l = objective.loss_and_gradient(result.params, batch, grad);
      if (iter % config.log_every == 0) result.curve.push_back({iter, l.total, l.phys, l.ic});
      adam_step(opt, result.params.values(), grad, config.learning_rate, hyper);
    }
    const auto batch = sample_collocation(stream, iter, config.n_coll, physics.T);
    const LossTerms l = objective.loss(result.params, batch);
    result.curve.push_back({iter, l.total, l.phys, l.ic});
    result.final_loss = l.total;
  } catch (const std::runtime_error& e) {
    result.aborted = true;
    result.abort_reason = "iteration " + std::to_string(iter) + ": " + e.what();
    result.final_loss = std::nan("");
  }
  return result;
}

}  // namespace stiffgate::training
