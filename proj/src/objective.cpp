#include "stiffgate/objective.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>

namespace stiffgate::training {

using models::Layout;
using models::TrunkKind;

class TrunkBatch {
 public:
  virtual ~TrunkBatch() = default;
  virtual void forward(std::span<const double> params, std::span<const double> times,
                       std::vector<LatentJet>& jets) = 0;
  /// Accumulates into grad using the cache of the last forward call.
  virtual void backward(std::span<const double> params, std::span<const double> times,
                        std::span<const LatentJet> adj, std::span<double> grad) = 0;
};

namespace {

class SpectralBatch final : public TrunkBatch {
 public:
  SpectralBatch(TrunkKind kind, const kernels::KernelTable& table)
      : kind_(kind), layout_(models::layout(kind)), table_(table) {
    const auto& f = models::default_frequencies();
    fixed_omega_.assign(f.begin(), f.end());
  }

  void forward(std::span<const double> params, std::span<const double> times,
               std::vector<LatentJet>& jets) override {
    const std::size_t n = times.size();
    constexpr std::size_t nf = models::kNumFrequencies;
    sin_.resize(n * nf);
    cos_.resize(n * nf);
    jets.resize(n);
    const double* omega = this->omega(params);
    const double* w = params.data() + layout_.head_w;
    const double b0 = params[layout_.head_b], b1 = params[layout_.head_b + 1];
    for (std::size_t i = 0; i < n; ++i) {
      double u[6];
      table_.fourier_forward(omega, w, times[i], &sin_[i * nf], &cos_[i * nf], u);
      jets[i] = {u[0] + b0, u[1], u[2], u[3] + b1, u[4], u[5]};
    }
  }

  void backward(std::span<const double> params, std::span<const double> times,
                std::span<const LatentJet> adj, std::span<double> grad) override {
    constexpr std::size_t nf = models::kNumFrequencies;
    const double* omega = this->omega(params);
    const double* w = params.data() + layout_.head_w;
    double* grad_w = grad.data() + layout_.head_w;
    double* grad_omega =
        kind_ == TrunkKind::AdaptiveFourier ? grad.data() + layout_.omega : nullptr;
    for (std::size_t i = 0; i < times.size(); ++i) {
      const LatentJet& a = adj[i];
      table_.fourier_backward(omega, w, times[i], &sin_[i * nf], &cos_[i * nf], a.data(), grad_w,
                              grad_omega);
      grad[layout_.head_b] += a[0];
      grad[layout_.head_b + 1] += a[3];
    }
  }

 private:
  const double* omega(std::span<const double> params) const {
    return kind_ == TrunkKind::AdaptiveFourier ? params.data() + layout_.omega
                                               : fixed_omega_.data();
  }

  TrunkKind kind_;
  Layout layout_;
  const kernels::KernelTable& table_;
  std::vector<double> fixed_omega_;
  std::vector<double> sin_, cos_;
};

// Three tanh layers evaluated column-per-point with Taylor triples carried as
// separate matrices (value, d/dt, d2/dt2).
class MlpBatch final : public TrunkBatch {
 public:
  using Mat = Eigen::MatrixXd;
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using ConstMap = Eigen::Map<const RowMat>;
  using Map = Eigen::Map<RowMat>;

  MlpBatch() : layout_(models::layout(TrunkKind::BaselineMlp)) {}

  void forward(std::span<const double> params, std::span<const double> times,
               std::vector<LatentJet>& jets) override {
    const auto n = static_cast<Eigen::Index>(times.size());
    constexpr auto width = static_cast<Eigen::Index>(models::kMlpHidden);
    Mat x0(1, n), x1 = Mat::Ones(1, n), x2 = Mat::Zero(1, n);
    for (Eigen::Index i = 0; i < n; ++i) x0(0, i) = times[static_cast<std::size_t>(i)];
    input_[0] = {x0, x1, x2};

    for (std::size_t l = 0; l < models::kMlpHiddenLayers; ++l) {
      const auto fan_in = l == 0 ? Eigen::Index{1} : width;
      const ConstMap w(params.data() + layout_.hidden_w[l], width, fan_in);
      const Eigen::Map<const Eigen::VectorXd> b(params.data() + layout_.hidden_b[l], width);
      const Jet& in = input_[l];
      Mat z0 = w * in.v0;
      z0.colwise() += b;
      const Mat z1 = w * in.v1;
      const Mat z2 = w * in.v2;
      Jet& h = hidden_[l];
      h.v0 = z0.array().tanh().matrix();
      deriv_[l] = (1.0 - h.v0.array().square()).matrix();
      h.v1 = (deriv_[l].array() * z1.array()).matrix();
      h.v2 = (deriv_[l].array() * z2.array() -
              2.0 * h.v0.array() * deriv_[l].array() * z1.array().square())
                 .matrix();
      if (l + 1 < models::kMlpHiddenLayers) input_[l + 1] = h;
    }

    const ConstMap wh(params.data() + layout_.head_w, 2, width);
    const Jet& top = hidden_[models::kMlpHiddenLayers - 1];
    Mat u0 = wh * top.v0;
    const Mat u1 = wh * top.v1;
    const Mat u2 = wh * top.v2;
    jets.resize(times.size());
    for (Eigen::Index i = 0; i < n; ++i) {
      jets[static_cast<std::size_t>(i)] = {u0(0, i) + params[layout_.head_b], u1(0, i), u2(0, i),
                                           u0(1, i) + params[layout_.head_b + 1], u1(1, i),
                                           u2(1, i)};
    }
  }

  void backward(std::span<const double> params, std::span<const double> times,
                std::span<const LatentJet> adj, std::span<double> grad) override {
    const auto n = static_cast<Eigen::Index>(times.size());
    constexpr auto width = static_cast<Eigen::Index>(models::kMlpHidden);
    Mat a0(2, n), a1(2, n), a2(2, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const LatentJet& a = adj[static_cast<std::size_t>(i)];
      a0(0, i) = a[0];
      a1(0, i) = a[1];
      a2(0, i) = a[2];
      a0(1, i) = a[3];
      a1(1, i) = a[4];
      a2(1, i) = a[5];
    }
    const ConstMap wh(params.data() + layout_.head_w, 2, width);
    const Jet& top = hidden_[models::kMlpHiddenLayers - 1];
    Map gwh(grad.data() + layout_.head_w, 2, width);
    gwh += a0 * top.v0.transpose() + a1 * top.v1.transpose() + a2 * top.v2.transpose();
    grad[layout_.head_b] += a0.row(0).sum();
    grad[layout_.head_b + 1] += a0.row(1).sum();

    // Cotangent of the current layer output.
    Jet bar{wh.transpose() * a0, wh.transpose() * a1, wh.transpose() * a2};
    for (std::size_t l = models::kMlpHiddenLayers; l-- > 0;) {
      const Jet& h = hidden_[l];
      // Local partial of tanh as a Taylor triple: (1 - h^2, -2 h h', -2 (h'^2 + h h'')).
      const auto d0 = deriv_[l].array();
      const Mat d1 = (-2.0 * h.v0.array() * h.v1.array()).matrix();
      const Mat d2 = (-2.0 * (h.v1.array().square() + h.v0.array() * h.v2.array())).matrix();
      const Mat z0 =
          (bar.v0.array() * d0 + bar.v1.array() * d1.array() + bar.v2.array() * d2.array()).matrix();
      const Mat z1 = (bar.v1.array() * d0 + 2.0 * bar.v2.array() * d1.array()).matrix();
      const Mat z2 = (bar.v2.array() * d0).matrix();

      const auto fan_in = l == 0 ? Eigen::Index{1} : width;
      const Jet& in = input_[l];
      Map gw(grad.data() + layout_.hidden_w[l], width, fan_in);
      gw += z0 * in.v0.transpose() + z1 * in.v1.transpose() + z2 * in.v2.transpose();
      Eigen::Map<Eigen::VectorXd> gb(grad.data() + layout_.hidden_b[l], width);
      gb += z0.rowwise().sum();
      if (l > 0) {
        const ConstMap w(params.data() + layout_.hidden_w[l], width, fan_in);
        bar = Jet{w.transpose() * z0, w.transpose() * z1, w.transpose() * z2};
      }
    }
  }

 private:
  struct Jet {
    Mat v0, v1, v2;
  };

  Layout layout_;
  std::array<Jet, models::kMlpHiddenLayers> input_;
  std::array<Jet, models::kMlpHiddenLayers> hidden_;
  std::array<Mat, models::kMlpHiddenLayers> deriv_;  // 1 - h^2
};

std::unique_ptr<TrunkBatch> make_trunk(TrunkKind kind, const kernels::KernelTable& table) {
  if (kind == TrunkKind::BaselineMlp) return std::make_unique<MlpBatch>();
  return std::make_unique<SpectralBatch>(kind, table);
}

struct PointState {
  double r, r1, r2, th, th1, th2;
  double rho1, rho2;    // rho_hat', rho_hat''
  double sig, dsig, ddsig;
};

// Embedding of one latent jet into (r, theta) with time derivatives.
PointState embed(const LatentJet& u, const Taylor& g, double rho0, double theta0, double r_min) {
  const double rho = rho0 + g.val * u[0];
  const double rho1 = g.d1 * u[0] + g.val * u[1];
  const double rho2 = g.d2 * u[0] + 2.0 * g.d1 * u[1] + g.val * u[2];
  const double sig = scalar::sigmoid(rho);
  const double dsig = sig * (1.0 - sig);
  const double ddsig = dsig * (1.0 - 2.0 * sig);
  PointState s{};
  s.r = r_min + scalar::softplus(rho);
  s.r1 = sig * rho1;
  s.r2 = dsig * rho1 * rho1 + sig * rho2;
  s.th = theta0 + g.val * u[3];
  s.th1 = g.d1 * u[3] + g.val * u[4];
  s.th2 = g.d2 * u[3] + 2.0 * g.d1 * u[4] + g.val * u[5];
  s.rho1 = rho1;
  s.rho2 = rho2;
  s.sig = sig;
  s.dsig = dsig;
  s.ddsig = ddsig;
  return s;
}

// Pullback through multiplication by the gate jet g (partial rule with D = g).
void gate_pullback(double y0, double y1, double y2, const Taylor& g, double* out) {
  out[0] = y0 * g.val + y1 * g.d1 + y2 * g.d2;
  out[1] = y1 * g.val + 2.0 * y2 * g.d1;
  out[2] = y2 * g.val;
}

}  // namespace

BatchedObjective::BatchedObjective(const models::PinnModel& model,
                                   const dynamics::PhysicsParams& physics, LossWeights weights,
                                   const kernels::KernelTable& table)
    : model_(model),
      physics_(physics),
      weights_(weights),
      table_(&table),
      trunk_(make_trunk(model.trunk_kind(), table)) {
  physics_.validate();
  if (!(weights.phys >= 0) || !(weights.ic >= 0))
    throw std::invalid_argument("BatchedObjective: loss weights must be non-negative");
}

BatchedObjective::~BatchedObjective() = default;
BatchedObjective::BatchedObjective(BatchedObjective&&) noexcept = default;
BatchedObjective& BatchedObjective::operator=(BatchedObjective&&) noexcept = default;

std::vector<LatentJet> BatchedObjective::latent(const models::ParamVector& params,
                                                std::span<const double> times) {
  if (params.kind() != model_.trunk_kind())
    throw std::invalid_argument("BatchedObjective: parameter kind mismatch");
  std::vector<LatentJet> jets;
  trunk_->forward(params.values(), times, jets);
  return jets;
}

std::vector<dynamics::State> BatchedObjective::predict(const models::ParamVector& params,
                                                       std::span<const double> times) {
  const auto jets = latent(params, times);
  std::vector<dynamics::State> out;
  out.reserve(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    const Taylor g = models::gate_taylor(model_.gate_kind(), times[i]);
    const PointState s = embed(jets[i], g, model_.rho0(), model_.ic().theta0, model_.r_min());
    out.push_back({s.r, s.th, s.r1, s.th1});
  }
  return out;
}

LossTerms BatchedObjective::loss(const models::ParamVector& params,
                                 std::span<const double> t_batch) {
  return evaluate(params, t_batch, nullptr);
}

LossTerms BatchedObjective::loss_and_gradient(const models::ParamVector& params,
                                              std::span<const double> t_batch,
                                              std::vector<double>& grad) {
  return evaluate(params, t_batch, &grad);
}

LossTerms BatchedObjective::evaluate(const models::ParamVector& params,
                                     std::span<const double> t_batch, std::vector<double>* grad) {
  if (params.kind() != model_.trunk_kind())
    throw std::invalid_argument("BatchedObjective: parameter kind mismatch");
  if (t_batch.empty()) throw std::invalid_argument("BatchedObjective: empty collocation batch");

  const std::size_t n = t_batch.size();
  const bool with_ic = weights_.ic != 0.0;
  std::vector<double> times(t_batch.begin(), t_batch.end());
  if (with_ic) times.push_back(0.0);

  std::vector<LatentJet> jets;
  trunk_->forward(params.values(), times, jets);

  const auto& p = physics_;
  const double km = p.k / p.m, crm = p.c_r / p.m;
  const double rho0 = model_.rho0(), theta0 = model_.ic().theta0, r_min = model_.r_min();
  std::vector<LatentJet> adj(grad != nullptr ? times.size() : 0);
  const double scale = 2.0 * weights_.phys / static_cast<double>(n);

  LossTerms out;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Taylor g = models::gate_taylor(model_.gate_kind(), times[i]);
    const PointState s = embed(jets[i], g, rho0, theta0, r_min);
    const double sin_th = std::sin(s.th), cos_th = std::cos(s.th);
    const double res_r = s.r2 - (s.r * s.th1 * s.th1 - km * (s.r - p.L0) +
                                 p.g_grav * cos_th - crm * s.r1);
    const double res_th = s.th2 - (-2.0 * s.r1 * s.th1 / s.r - p.g_grav * sin_th / s.r -
                                   p.c_theta * s.th1);
    sum += res_r * res_r + res_th * res_th;
    if (grad == nullptr) continue;

    const double rb1 = scale * res_r, rb2 = scale * res_th;
    const double inv_r = 1.0 / s.r;
    const double r_bar = rb1 * (km - s.th1 * s.th1) -
                         rb2 * (2.0 * s.r1 * s.th1 + p.g_grav * sin_th) * inv_r * inv_r;
    const double r1_bar = rb1 * crm + rb2 * 2.0 * s.th1 * inv_r;
    const double r2_bar = rb1;
    const double th_bar = rb1 * p.g_grav * sin_th + rb2 * p.g_grav * cos_th * inv_r;
    const double th1_bar = -rb1 * 2.0 * s.r * s.th1 + rb2 * (2.0 * s.r1 * inv_r + p.c_theta);
    const double th2_bar = rb2;

    // softplus layer: partial Taylor triple of sigmoid(rho_hat)
    const double dd0 = s.sig, dd1 = s.dsig * s.rho1,
                 dd2 = s.ddsig * s.rho1 * s.rho1 + s.dsig * s.rho2;
    const double rho_bar = r_bar * dd0 + r1_bar * dd1 + r2_bar * dd2;
    const double rho1_bar = r1_bar * dd0 + 2.0 * r2_bar * dd1;
    const double rho2_bar = r2_bar * dd0;

    LatentJet& a = adj[i];
    gate_pullback(rho_bar, rho1_bar, rho2_bar, g, &a[0]);
    gate_pullback(th_bar, th1_bar, th2_bar, g, &a[3]);
  }
  out.phys = sum / static_cast<double>(n);

  if (with_ic) {
    const LatentJet& u0 = jets[n];
    const double g1 = models::gate_taylor(model_.gate_kind(), 0.0).d1;
    const double sig0 = scalar::sigmoid(rho0);
    const double dv_r = sig0 * g1 * u0[0] - model_.ic().rdot0;
    const double dv_th = g1 * u0[3] - model_.ic().thetadot0;
    out.ic = dv_r * dv_r + dv_th * dv_th;
    if (grad != nullptr)
      adj[n] = {2.0 * weights_.ic * dv_r * sig0 * g1, 0.0, 0.0, 2.0 * weights_.ic * dv_th * g1,
                0.0, 0.0};
  }
  out.total = weights_.phys * out.phys + weights_.ic * out.ic;
  if (!std::isfinite(out.total))
    throw std::runtime_error("non-finite loss (phys=" + std::to_string(out.phys) +
                             ", ic=" + std::to_string(out.ic) + ")");

  if (grad != nullptr) {
    grad->assign(params.size(), 0.0);
    trunk_->backward(params.values(), times, adj, *grad);
  }
  return out;
}

}  // namespace stiffgate::training
