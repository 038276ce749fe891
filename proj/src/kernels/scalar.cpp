#include <cmath>

#include "stiffgate/kernels.hpp"

namespace stiffgate::kernels {
namespace {

void sincos_scalar(const double* x, std::size_t n, double* s, double* c) {
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = std::sin(x[i]);
    c[i] = std::cos(x[i]);
  }
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void fourier_forward_scalar(const double* omega, const double* w, double t, double* s, double* c,
                            double* u) {
  for (std::size_t i = 0; i < kFrequencies; ++i) {
    s[i] = std::sin(omega[i] * t);
    c[i] = std::cos(omega[i] * t);
  }
  for (std::size_t ch = 0; ch < 2; ++ch) {
    const double* ws = w + ch * kHeadWidth;
    const double* wc = ws + kFrequencies;
    double v = 0.0, d1 = 0.0, d2 = 0.0;
    for (std::size_t i = 0; i < kFrequencies; ++i) {
      const double p = ws[i] * s[i] + wc[i] * c[i];
      const double q = ws[i] * c[i] - wc[i] * s[i];
      v += p;
      d1 += omega[i] * q;
      d2 += omega[i] * omega[i] * p;
    }
    u[3 * ch] = v;
    u[3 * ch + 1] = d1;
    u[3 * ch + 2] = -d2;
  }
}

void fourier_backward_scalar(const double* omega, const double* w, double t, const double* s,
                             const double* c, const double* adj, double* grad_w,
                             double* grad_omega) {
  for (std::size_t ch = 0; ch < 2; ++ch) {
    const double a0 = adj[3 * ch], a1 = adj[3 * ch + 1], a2 = adj[3 * ch + 2];
    const double* ws = w + ch * kHeadWidth;
    const double* wc = ws + kFrequencies;
    double* gs = grad_w + ch * kHeadWidth;
    double* gc = gs + kFrequencies;
    for (std::size_t i = 0; i < kFrequencies; ++i) {
      const double om = omega[i];
      const double even = a0 - a2 * om * om;
      const double odd = a1 * om;
      gs[i] += s[i] * even + c[i] * odd;
      gc[i] += c[i] * even - s[i] * odd;
      if (grad_omega != nullptr) {
        const double p = ws[i] * s[i] + wc[i] * c[i];
        const double q = ws[i] * c[i] - wc[i] * s[i];
        grad_omega[i] += q * (a0 * t + a1 - a2 * om * om * t) - p * (a1 * om * t + 2.0 * a2 * om);
      }
    }
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{"scalar", sincos_scalar, dot_scalar, fourier_forward_scalar,
                                 fourier_backward_scalar};
  return table;
}

}  // namespace stiffgate::kernels
