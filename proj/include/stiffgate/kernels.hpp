#pragma once

// Data-parallel inner loops of the spectral trunk, with a scalar reference
// implementation and an AVX2 variant chosen at runtime.
//
// Selection: the AVX2 table is used when the CPU supports AVX2+FMA, unless
// the environment variable STIFFGATE_SIMD is set to "scalar". Every variant
// must agree with the scalar table to round-off (see test_kernels).
//
// Fourier head conventions (omega has 32 entries, head_w is 2x64 row-major):
//   P_c,i = W[c][i] sin(w_i t) + W[c][32+i] cos(w_i t)
//   Q_c,i = W[c][i] cos(w_i t) - W[c][32+i] sin(w_i t)
//   u[c][0] = sum_i P_c,i,  u[c][1] = sum_i w_i Q_c,i,  u[c][2] = -sum_i w_i^2 P_c,i
// i.e. value, first and second time derivative of W Phi(t) without the bias.

#include <cstddef>
#include <string_view>
#include <vector>

namespace stiffgate::kernels {

inline constexpr std::size_t kFrequencies = 32;
inline constexpr std::size_t kHeadWidth = 64;

struct KernelTable {
  std::string_view name;

  /// Elementwise sine and cosine of x[0..n).
  void (*sincos)(const double* x, std::size_t n, double* sin_out, double* cos_out);

  double (*dot)(const double* a, const double* b, std::size_t n);

  /// Fourier head forward at one time point. Fills sin_out/cos_out (32 each)
  /// and u[6] laid out as [c0: val, d1, d2, c1: val, d1, d2].
  void (*fourier_forward)(const double* omega, const double* head_w, double t, double* sin_out,
                          double* cos_out, double* u);

  /// Accumulates the pullback of cotangent adj[6] (same layout as u) into
  /// grad_w (2x64) and, when non-null, grad_omega (32).
  void (*fourier_backward)(const double* omega, const double* head_w, double t,
                           const double* sin_v, const double* cos_v, const double* adj,
                           double* grad_w, double* grad_omega);
};

const KernelTable& scalar_table();
/// nullptr when the build has no AVX2 variant.
const KernelTable* avx2_table();

bool cpu_supports_avx2_fma();

/// Every table usable on this machine, scalar first.
std::vector<const KernelTable*> available_tables();

/// The runtime-selected table (resolved once).
const KernelTable& active();

}  // namespace stiffgate::kernels
