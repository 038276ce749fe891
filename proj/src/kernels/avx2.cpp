// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.

#include <immintrin.h>

#include <cmath>

#include "stiffgate/kernels.hpp"

namespace stiffgate::kernels {
namespace {

// Cody-Waite split of pi/4 and minimax polynomials on [-pi/4, pi/4]
// (Cephes sin.c coefficients).
constexpr double kFourOverPi = 1.27323954473516268615;
constexpr double kDP1 = 7.85398125648498535156E-1;
constexpr double kDP2 = 3.77489470793079817668E-8;
constexpr double kDP3 = 2.69515142907905952645E-15;
constexpr double kSinCoef[6] = {1.58962301576546568060E-10, -2.50507477628578072866E-8,
                                2.75573136213857245213E-6,  -1.98412698295895385996E-4,
                                8.33333333332211858878E-3,  -1.66666666666666307295E-1};
constexpr double kCosCoef[6] = {-1.13585365213876817300E-11, 2.08757008419747316778E-9,
                                -2.75573141792967388112E-7, 2.48015872888517045348E-5,
                                -1.38888888888730564116E-3, 4.16666666666665929218E-2};

inline __m256d polevl(__m256d x, const double (&coef)[6]) {
  __m256d acc = _mm256_set1_pd(coef[0]);
  for (int i = 1; i < 6; ++i) acc = _mm256_fmadd_pd(acc, x, _mm256_set1_pd(coef[i]));
  return acc;
}

// Valid for |x| < 2^30 or so; arguments here are omega * t with t in [0, T].
inline void sincos4(__m256d x, __m256d& sin_out, __m256d& cos_out) {
  const __m256d sign_bit = _mm256_set1_pd(-0.0);
  const __m256d ax = _mm256_andnot_pd(sign_bit, x);
  const __m256d x_sign = _mm256_and_pd(sign_bit, x);

  const __m256d magic = _mm256_set1_pd(0x1.0p52);
  __m256d y = _mm256_floor_pd(_mm256_mul_pd(ax, _mm256_set1_pd(kFourOverPi)));
  // Integer octant in the low mantissa bits; round odd octants up to even.
  __m256i j = _mm256_castpd_si256(_mm256_add_pd(y, magic));
  j = _mm256_add_epi64(j, _mm256_set1_epi64x(1));
  j = _mm256_and_si256(j, _mm256_set1_epi64x(~1LL));
  y = _mm256_sub_pd(_mm256_castsi256_pd(j), magic);

  __m256d z = _mm256_fnmadd_pd(y, _mm256_set1_pd(kDP1), ax);
  z = _mm256_fnmadd_pd(y, _mm256_set1_pd(kDP2), z);
  z = _mm256_fnmadd_pd(y, _mm256_set1_pd(kDP3), z);
  const __m256d zz = _mm256_mul_pd(z, z);

  const __m256d ps = _mm256_fmadd_pd(_mm256_mul_pd(z, zz), polevl(zz, kSinCoef), z);
  const __m256d pc = _mm256_fmadd_pd(_mm256_mul_pd(zz, zz), polevl(zz, kCosCoef),
                                     _mm256_fnmadd_pd(zz, _mm256_set1_pd(0.5), _mm256_set1_pd(1.0)));

  const __m256i bit2 = _mm256_and_si256(j, _mm256_set1_epi64x(2));
  const __m256i bit4 = _mm256_and_si256(j, _mm256_set1_epi64x(4));
  const __m256d swap = _mm256_castsi256_pd(_mm256_cmpeq_epi64(bit2, _mm256_set1_epi64x(2)));

  const __m256d s_base = _mm256_blendv_pd(ps, pc, swap);
  const __m256d c_base = _mm256_blendv_pd(pc, ps, swap);

  const __m256d s_flip = _mm256_castsi256_pd(_mm256_slli_epi64(bit4, 61));
  const __m256d c_flip =
      _mm256_castsi256_pd(_mm256_slli_epi64(_mm256_xor_si256(bit4, _mm256_slli_epi64(bit2, 1)), 61));

  sin_out = _mm256_xor_pd(_mm256_xor_pd(s_base, s_flip), x_sign);
  cos_out = _mm256_xor_pd(c_base, c_flip);
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

void sincos_avx2(const double* x, std::size_t n, double* s, double* c) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vs, vc;
    sincos4(_mm256_loadu_pd(x + i), vs, vc);
    _mm256_storeu_pd(s + i, vs);
    _mm256_storeu_pd(c + i, vc);
  }
  for (; i < n; ++i) {
    s[i] = std::sin(x[i]);
    c[i] = std::cos(x[i]);
  }
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void fourier_forward_avx2(const double* omega, const double* w, double t, double* s, double* c,
                          double* u) {
  const __m256d vt = _mm256_set1_pd(t);
  __m256d v0 = _mm256_setzero_pd(), d10 = _mm256_setzero_pd(), d20 = _mm256_setzero_pd();
  __m256d v1 = _mm256_setzero_pd(), d11 = _mm256_setzero_pd(), d21 = _mm256_setzero_pd();
  const double* ws0 = w;
  const double* wc0 = w + kFrequencies;
  const double* ws1 = w + kHeadWidth;
  const double* wc1 = ws1 + kFrequencies;
  for (std::size_t i = 0; i < kFrequencies; i += 4) {
    const __m256d om = _mm256_loadu_pd(omega + i);
    const __m256d om2 = _mm256_mul_pd(om, om);
    __m256d vs, vc;
    sincos4(_mm256_mul_pd(om, vt), vs, vc);
    _mm256_storeu_pd(s + i, vs);
    _mm256_storeu_pd(c + i, vc);

    const __m256d a_s = _mm256_loadu_pd(ws0 + i), a_c = _mm256_loadu_pd(wc0 + i);
    const __m256d p0 = _mm256_fmadd_pd(a_s, vs, _mm256_mul_pd(a_c, vc));
    const __m256d q0 = _mm256_fmsub_pd(a_s, vc, _mm256_mul_pd(a_c, vs));
    v0 = _mm256_add_pd(v0, p0);
    d10 = _mm256_fmadd_pd(om, q0, d10);
    d20 = _mm256_fmadd_pd(om2, p0, d20);

    const __m256d b_s = _mm256_loadu_pd(ws1 + i), b_c = _mm256_loadu_pd(wc1 + i);
    const __m256d p1 = _mm256_fmadd_pd(b_s, vs, _mm256_mul_pd(b_c, vc));
    const __m256d q1 = _mm256_fmsub_pd(b_s, vc, _mm256_mul_pd(b_c, vs));
    v1 = _mm256_add_pd(v1, p1);
    d11 = _mm256_fmadd_pd(om, q1, d11);
    d21 = _mm256_fmadd_pd(om2, p1, d21);
  }
  u[0] = hsum(v0);
  u[1] = hsum(d10);
  u[2] = -hsum(d20);
  u[3] = hsum(v1);
  u[4] = hsum(d11);
  u[5] = -hsum(d21);
}

void fourier_backward_avx2(const double* omega, const double* w, double t, const double* s,
                           const double* c, const double* adj, double* grad_w,
                           double* grad_omega) {
  const __m256d vt = _mm256_set1_pd(t);
  const __m256d two = _mm256_set1_pd(2.0);
  for (std::size_t ch = 0; ch < 2; ++ch) {
    const __m256d a0 = _mm256_set1_pd(adj[3 * ch]);
    const __m256d a1 = _mm256_set1_pd(adj[3 * ch + 1]);
    const __m256d a2 = _mm256_set1_pd(adj[3 * ch + 2]);
    const double* ws = w + ch * kHeadWidth;
    const double* wc = ws + kFrequencies;
    double* gs = grad_w + ch * kHeadWidth;
    double* gc = gs + kFrequencies;
    for (std::size_t i = 0; i < kFrequencies; i += 4) {
      const __m256d om = _mm256_loadu_pd(omega + i);
      const __m256d om2 = _mm256_mul_pd(om, om);
      const __m256d vs = _mm256_loadu_pd(s + i), vc = _mm256_loadu_pd(c + i);
      const __m256d even = _mm256_fnmadd_pd(a2, om2, a0);
      const __m256d odd = _mm256_mul_pd(a1, om);
      _mm256_storeu_pd(gs + i, _mm256_add_pd(_mm256_loadu_pd(gs + i),
                                             _mm256_fmadd_pd(vs, even, _mm256_mul_pd(vc, odd))));
      _mm256_storeu_pd(gc + i, _mm256_add_pd(_mm256_loadu_pd(gc + i),
                                             _mm256_fmsub_pd(vc, even, _mm256_mul_pd(vs, odd))));
      if (grad_omega != nullptr) {
        const __m256d w_s = _mm256_loadu_pd(ws + i), w_c = _mm256_loadu_pd(wc + i);
        const __m256d p = _mm256_fmadd_pd(w_s, vs, _mm256_mul_pd(w_c, vc));
        const __m256d q = _mm256_fmsub_pd(w_s, vc, _mm256_mul_pd(w_c, vs));
        // q (a0 t + a1 - a2 w^2 t) - p (a1 w t + 2 a2 w)
        const __m256d fq = _mm256_add_pd(_mm256_mul_pd(even, vt), a1);
        const __m256d fp = _mm256_mul_pd(om, _mm256_fmadd_pd(a1, vt, _mm256_mul_pd(two, a2)));
        const __m256d g = _mm256_fmsub_pd(q, fq, _mm256_mul_pd(p, fp));
        _mm256_storeu_pd(grad_omega + i, _mm256_add_pd(_mm256_loadu_pd(grad_omega + i), g));
      }
    }
  }
}

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable table{"avx2", sincos_avx2, dot_avx2, fourier_forward_avx2,
                                 fourier_backward_avx2};
  return &table;
}

}  // namespace stiffgate::kernels
