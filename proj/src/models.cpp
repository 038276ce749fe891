#include "stiffgate/models.hpp"

#include <cmath>

#include "stiffgate/rng.hpp"

namespace stiffgate::models {

std::string_view to_string(GateKind gate) {
  return gate == GateKind::Exponential ? "exp" : "linear";
}

std::string_view to_string(TrunkKind trunk) {
  switch (trunk) {
    case TrunkKind::BaselineMlp: return "baseline";
    case TrunkKind::FixedFourier: return "fixed_fourier";
    case TrunkKind::AdaptiveFourier: return "adaptive_fourier";
  }
  return "unknown";
}

GateKind parse_gate(std::string_view name) {
  if (name == "exp") return GateKind::Exponential;
  if (name == "linear") return GateKind::Linear;
  throw std::invalid_argument("unknown gate '" + std::string(name) + "' (expected exp|linear)");
}

TrunkKind parse_trunk(std::string_view name) {
  if (name == "baseline") return TrunkKind::BaselineMlp;
  if (name == "fixed_fourier") return TrunkKind::FixedFourier;
  if (name == "adaptive_fourier") return TrunkKind::AdaptiveFourier;
  throw std::invalid_argument("unknown model '" + std::string(name) +
                              "' (expected baseline|fixed_fourier|adaptive_fourier)");
}

Layout layout(TrunkKind trunk) {
  Layout lay;
  std::size_t offset = 0;
  if (trunk == TrunkKind::BaselineMlp) {
    std::size_t fan_in = 1;
    for (std::size_t layer = 0; layer < kMlpHiddenLayers; ++layer) {
      lay.hidden_w[layer] = offset;
      offset += kMlpHidden * fan_in;
      lay.hidden_b[layer] = offset;
      offset += kMlpHidden;
      fan_in = kMlpHidden;
    }
    lay.head_in = kMlpHidden;
  } else {
    lay.head_in = kFeatureDim;
  }
  lay.head_w = offset;
  offset += 2 * lay.head_in;
  lay.head_b = offset;
  offset += 2;
  if (trunk == TrunkKind::AdaptiveFourier) {
    lay.omega = offset;
    offset += kNumFrequencies;
  }
  lay.total = offset;
  return lay;
}

std::vector<double> geometric_band(double lo, double hi, std::size_t n) {
  if (!(lo > 0 && hi > lo) || n < 2)
    throw std::invalid_argument("geometric_band: need 0 < lo < hi and n >= 2");
  std::vector<double> band(n);
  for (std::size_t j = 0; j < n; ++j)
    band[j] = lo * std::pow(hi / lo, static_cast<double>(j) / static_cast<double>(n - 1));
  return band;
}

const std::array<double, kNumFrequencies>& default_frequencies() {
  static const std::array<double, kNumFrequencies> freqs = [] {
    std::array<double, kNumFrequencies> f{};
    const auto low = geometric_band(0.5, 5.0, kFrequenciesPerBand);
    const auto high = geometric_band(5.0, 15.0, kFrequenciesPerBand);
    std::copy(low.begin(), low.end(), f.begin());
    std::copy(high.begin(), high.end(), f.begin() + kFrequenciesPerBand);
    return f;
  }();
  return freqs;
}

double ICSpec::rho0(double r_min) const { return scalar::softplus_inverse(r0 - r_min); }

void ICSpec::validate(double r_min) const {
  if (!(r0 > r_min)) throw std::invalid_argument("ICSpec: r0 must exceed r_min");
  if (!std::isfinite(theta0) || !std::isfinite(rdot0) || !std::isfinite(thetadot0))
    throw std::invalid_argument("ICSpec: non-finite initial condition");
  if (!std::isfinite(rho0(r_min))) throw std::invalid_argument("ICSpec: rho0 is not finite");
}

ParamVector::ParamVector(TrunkKind kind, std::vector<double> values)
    : kind_(kind), values_(std::move(values)) {
  if (values_.size() != param_count(kind))
    throw std::invalid_argument("ParamVector: " + std::to_string(values_.size()) +
                                " values for " + std::string(to_string(kind)) + ", expected " +
                                std::to_string(param_count(kind)));
}

ParamVector init_params(TrunkKind trunk, std::uint64_t seed) {
  const Layout lay = layout(trunk);
  std::vector<double> v(lay.total, 0.0);
  const CounterStream rng(seed, StreamPurpose::Init);
  if (trunk == TrunkKind::BaselineMlp) {
    std::size_t fan_in = 1;
    for (std::size_t layer = 0; layer < kMlpHiddenLayers; ++layer) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      const std::size_t end = lay.hidden_b[layer] + kMlpHidden;
      for (std::size_t i = lay.hidden_w[layer]; i < end; ++i) v[i] = rng.uniform(i, -bound, bound);
      fan_in = kMlpHidden;
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(kMlpHidden));
    for (std::size_t i = lay.head_w; i < lay.total; ++i) v[i] = rng.uniform(i, -bound, bound);
  } else if (trunk == TrunkKind::AdaptiveFourier) {
    const auto& freqs = default_frequencies();
    std::copy(freqs.begin(), freqs.end(), v.begin() + static_cast<std::ptrdiff_t>(lay.omega));
  }
  return ParamVector(trunk, std::move(v));
}

Taylor gate_taylor(GateKind kind, double t) { return gate(kind, Taylor::variable(t)); }

PinnModel::PinnModel(TrunkKind trunk, GateKind gate, ICSpec ic, double r_min)
    : trunk_(trunk), gate_(gate), ic_(ic), r_min_(r_min) {
  if (!(r_min > 0)) throw std::invalid_argument("PinnModel: r_min must be positive");
  ic_.validate(r_min);
  rho0_ = ic_.rho0(r_min);
  const Taylor g0 = gate_taylor(gate, 0.0);
  if (g0.val != 0.0 || g0.d1 == 0.0)
    throw std::invalid_argument("PinnModel: gate must satisfy g(0) = 0 and g'(0) != 0");
}

std::vector<Taylor> as_constants(std::span<const double> values) {
  std::vector<Taylor> out;
  out.reserve(values.size());
  for (double v : values) out.push_back(Taylor::constant(v));
  return out;
}

Embedded<Taylor> PinnModel::evaluate(const ParamVector& params, double t) const {
  if (params.kind() != trunk_) throw std::invalid_argument("evaluate: parameter kind mismatch");
  const auto p = as_constants(params.values());
  return forward<Taylor>(p, Taylor::variable(t));
}

std::array<double, 2> PinnModel::induced_initial_velocity(const ParamVector& params) const {
  if (params.kind() != trunk_)
    throw std::invalid_argument("induced_initial_velocity: parameter kind mismatch");
  const auto p = as_constants(params.values());
  const auto latent = trunk<Taylor>(trunk_, p, Taylor::constant(0.0));
  const double g1 = gate_taylor(gate_, 0.0).d1;
  return {scalar::sigmoid(rho0_) * g1 * latent[0].val, g1 * latent[1].val};
}

}  // namespace stiffgate::models
