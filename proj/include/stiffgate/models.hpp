#pragma once

// PINN trunks, initial-condition gates and the exact-IC embedding.
//
// The trunk maps time to a latent pair (rho~, theta~). The embedding
//
//   rho^(t)   = rho0   + g(t) rho~(t),     r(t) = r_min + softplus(rho^(t))
//   theta^(t) = theta0 + g(t) theta~(t)
//
// pins r(0) = r0 and theta(0) = theta0 for any parameters because g(0) = 0.
//
// ParamVector layouts (flat, frozen):
//   baseline MLP:   [W1 (128x1), b1, W2 (128x128 row-major), b2, W3, b3,
//                    head W (2x128 row-major), head b (2)]           = 33,538
//   fixed Fourier:  [head W (2x64 row-major), head b (2)]            = 130
//   adaptive Fourier: fixed Fourier layout followed by omega (32)    = 162
// Fourier features are ordered sin block then cos block:
//   Phi(t) = [sin(w_1 t) .. sin(w_32 t), cos(w_1 t) .. cos(w_32 t)].

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "stiffgate/tape.hpp"
#include "stiffgate/taylor.hpp"

namespace stiffgate::models {

enum class GateKind { Exponential, Linear };
enum class TrunkKind { BaselineMlp, FixedFourier, AdaptiveFourier };

std::string_view to_string(GateKind gate);
std::string_view to_string(TrunkKind trunk);
GateKind parse_gate(std::string_view name);
TrunkKind parse_trunk(std::string_view name);

inline constexpr std::size_t kMlpHidden = 128;
inline constexpr std::size_t kMlpHiddenLayers = 3;
inline constexpr std::size_t kFrequenciesPerBand = 16;
inline constexpr std::size_t kNumFrequencies = 2 * kFrequenciesPerBand;
inline constexpr std::size_t kFeatureDim = 2 * kNumFrequencies;

/// Offsets into a ParamVector for each trunk kind.
struct Layout {
  // MLP hidden layers (unused for Fourier trunks).
  std::array<std::size_t, kMlpHiddenLayers> hidden_w{};
  std::array<std::size_t, kMlpHiddenLayers> hidden_b{};
  std::size_t head_w = 0;
  std::size_t head_b = 0;
  std::size_t head_in = 0;  // head input width
  std::size_t omega = 0;    // adaptive frequencies, AdaptiveFourier only
  std::size_t total = 0;
};

Layout layout(TrunkKind trunk);
inline std::size_t param_count(TrunkKind trunk) { return layout(trunk).total; }

/// Log-spaced frequency band: n points a * (b/a)^(j/(n-1)), endpoints included.
std::vector<double> geometric_band(double lo, double hi, std::size_t n);
/// 16 frequencies in [0.5, 5] followed by 16 in [5, 15]; 5.0 appears in both.
const std::array<double, kNumFrequencies>& default_frequencies();

struct ICSpec {
  double r0 = 1.5;
  double theta0 = 1.0;
  double rdot0 = 0.0;
  double thetadot0 = 0.0;

  /// Latent radial offset with r_min + softplus(rho0) = r0.
  double rho0(double r_min) const;
  void validate(double r_min) const;
};

class ParamVector {
 public:
  ParamVector() = default;
  ParamVector(TrunkKind kind, std::vector<double> values);

  TrunkKind kind() const { return kind_; }
  std::size_t size() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }
  bool operator==(const ParamVector&) const = default;

 private:
  TrunkKind kind_ = TrunkKind::FixedFourier;
  std::vector<double> values_;
};

/// Deterministic initialization. MLP layers use U(-1/sqrt(fan_in), 1/sqrt(fan_in))
/// for weights and biases; spectral heads start at zero; adaptive frequencies
/// start at default_frequencies().
ParamVector init_params(TrunkKind trunk, std::uint64_t seed);

template <typename S>
S gate(GateKind kind, const S& t) {
  using std::exp;
  if (kind == GateKind::Exponential) return 1.0 - exp(-t);
  return t;
}

/// g, g', g'' at t.
Taylor gate_taylor(GateKind kind, double t);

/// Latent trunk output (rho~, theta~).
template <typename S>
std::array<S, 2> trunk(TrunkKind kind, std::span<const S> params, const S& t) {
  using std::cos;
  using std::sin;
  using std::tanh;
  const Layout lay = layout(kind);
  if (params.size() != lay.total)
    throw std::invalid_argument("trunk: parameter vector has " + std::to_string(params.size()) +
                                " entries, expected " + std::to_string(lay.total));

  std::vector<S> features;
  features.reserve(lay.head_in);
  if (kind == TrunkKind::BaselineMlp) {
    std::vector<S> h{t};
    for (std::size_t layer = 0; layer < kMlpHiddenLayers; ++layer) {
      const std::size_t fan_in = h.size();
      std::vector<S> next;
      next.reserve(kMlpHidden);
      for (std::size_t j = 0; j < kMlpHidden; ++j) {
        const std::size_t row = lay.hidden_w[layer] + j * fan_in;
        S z = params[lay.hidden_b[layer] + j];
        for (std::size_t i = 0; i < fan_in; ++i) z = z + params[row + i] * h[i];
        next.push_back(tanh(z));
      }
      h = std::move(next);
    }
    features = std::move(h);
  } else {
    const auto& fixed = default_frequencies();
    std::vector<S> cosines;
    cosines.reserve(kNumFrequencies);
    for (std::size_t i = 0; i < kNumFrequencies; ++i) {
      const S arg = kind == TrunkKind::AdaptiveFourier ? params[lay.omega + i] * t : fixed[i] * t;
      features.push_back(sin(arg));
      cosines.push_back(cos(arg));
    }
    features.insert(features.end(), cosines.begin(), cosines.end());
  }

  std::array<S, 2> out;
  for (std::size_t c = 0; c < 2; ++c) {
    S acc = params[lay.head_b + c];
    const std::size_t row = lay.head_w + c * lay.head_in;
    for (std::size_t f = 0; f < lay.head_in; ++f) acc = acc + params[row + f] * features[f];
    out[c] = acc;
  }
  return out;
}

template <typename S>
struct Embedded {
  std::array<S, 2> latent;  // trunk output (rho~, theta~)
  S gate;
  S rho_hat;    // rho0 + g rho~ (pre-softplus)
  S theta_hat;  // theta0 + g theta~
  S r;          // r_min + softplus(rho_hat)
  S theta;      // theta_hat
};

/// Model = trunk + gate + IC embedding; immutable after construction.
class PinnModel {
 public:
  PinnModel(TrunkKind trunk, GateKind gate, ICSpec ic, double r_min);

  TrunkKind trunk_kind() const { return trunk_; }
  GateKind gate_kind() const { return gate_; }
  const ICSpec& ic() const { return ic_; }
  double r_min() const { return r_min_; }
  double rho0() const { return rho0_; }
  std::size_t param_count() const { return models::param_count(trunk_); }

  template <typename S>
  Embedded<S> forward(std::span<const S> params, const S& t) const {
    using stiffgate::softplus;
    using stiffgate::ad::softplus;
    Embedded<S> e{trunk(trunk_, params, t), models::gate(gate_, t), S{}, S{}, S{}, S{}};
    e.rho_hat = rho0_ + e.gate * e.latent[0];
    e.theta_hat = ic_.theta0 + e.gate * e.latent[1];
    e.r = r_min_ + softplus(e.rho_hat);
    e.theta = e.theta_hat;
    return e;
  }

  /// Forward pass with exact time derivatives (Taylor-mode) at time t.
  Embedded<Taylor> evaluate(const ParamVector& params, double t) const;

  /// Induced (r'(0), theta'(0)) from the closed form
  /// (sigmoid(rho0) g'(0) rho~(0), g'(0) theta~(0)).
  std::array<double, 2> induced_initial_velocity(const ParamVector& params) const;

 private:
  TrunkKind trunk_;
  GateKind gate_;
  ICSpec ic_;
  double r_min_;
  double rho0_;
};

std::vector<Taylor> as_constants(std::span<const double> values);

}  // namespace stiffgate::models
