#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "stiffgate/kernels.hpp"
#include "stiffgate/models.hpp"

using namespace stiffgate::kernels;

namespace {

struct Head {
  std::vector<double> omega, w;
};

Head random_head(std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  Head h;
  const auto& f = stiffgate::models::default_frequencies();
  for (std::size_t i = 0; i < kFrequencies; ++i) h.omega.push_back(f[i] * (1 + 0.2 * u(gen)));
  for (std::size_t i = 0; i < 2 * kHeadWidth; ++i) h.w.push_back(u(gen));
  return h;
}

// u[c] = (val, d1, d2) of sum_i W[c][i] sin(w_i t) + W[c][32+i] cos(w_i t), from std::sin/cos.
std::array<double, 6> direct(const Head& h, double t) {
  std::array<double, 6> u{};
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < kFrequencies; ++i) {
      const double w = h.omega[i], s = std::sin(w * t), co = std::cos(w * t);
      const double a = h.w[c * kHeadWidth + i], b = h.w[c * kHeadWidth + kFrequencies + i];
      u[3 * c] += a * s + b * co;
      u[3 * c + 1] += w * (a * co - b * s);
      u[3 * c + 2] += -w * w * (a * s + b * co);
    }
  return u;
}

}  // namespace

TEST_CASE("scalar table is always available and listed first") {
  const auto tables = available_tables();
  REQUIRE(!tables.empty());
  CHECK(tables.front()->name == "scalar");
  CHECK(&active() != nullptr);
}

TEST_CASE("fourier forward matches the direct formula on every table") {
  for (const KernelTable* table : available_tables()) {
    CAPTURE(table->name);
    for (std::uint64_t s = 0; s < 5; ++s) {
      const Head h = random_head(s);
      for (double t : {0.0, 0.37, 4.2, 9.99}) {
        double sn[kFrequencies], cs[kFrequencies], u[6];
        table->fourier_forward(h.omega.data(), h.w.data(), t, sn, cs, u);
        const auto ref = direct(h, t);
        for (int k = 0; k < 6; ++k) CHECK(u[k] == doctest::Approx(ref[k]).epsilon(1e-13).scale(10.0));
        for (std::size_t i = 0; i < kFrequencies; ++i) {
          CHECK(sn[i] == doctest::Approx(std::sin(h.omega[i] * t)).epsilon(1e-15).scale(1.0));
          CHECK(cs[i] == doctest::Approx(std::cos(h.omega[i] * t)).epsilon(1e-15).scale(1.0));
        }
      }
    }
  }
}

TEST_CASE("fourier backward is the transpose of forward") {
  // <adj, d u> for a perturbation of (W, omega), by central differences.
  for (const KernelTable* table : available_tables()) {
    CAPTURE(table->name);
    const Head h = random_head(42);
    const double t = 2.3;
    const double adj[6] = {0.3, -1.1, 0.05, 0.7, 0.2, -0.02};
    double sn[kFrequencies], cs[kFrequencies], u[6];
    table->fourier_forward(h.omega.data(), h.w.data(), t, sn, cs, u);
    std::vector<double> gw(2 * kHeadWidth, 0.0), gom(kFrequencies, 0.0);
    table->fourier_backward(h.omega.data(), h.w.data(), t, sn, cs, adj, gw.data(), gom.data());
    const auto dot = [&](const Head& x) {
      const auto r = direct(x, t);
      double s = 0;
      for (int k = 0; k < 6; ++k) s += adj[k] * r[k];
      return s;
    };
    const double eps = 1e-6;
    for (std::size_t j = 0; j < 2 * kHeadWidth; j += 7) {
      Head p = h, m = h;
      p.w[j] += eps;
      m.w[j] -= eps;
      CHECK(gw[j] == doctest::Approx((dot(p) - dot(m)) / (2 * eps)).epsilon(1e-7).scale(1.0));
    }
    for (std::size_t j = 0; j < kFrequencies; ++j) {
      Head p = h, m = h;
      p.omega[j] += eps;
      m.omega[j] -= eps;
      CHECK(gom[j] == doctest::Approx((dot(p) - dot(m)) / (2 * eps)).epsilon(1e-6).scale(1.0));
    }
    // Null grad_omega is allowed (fixed frequencies).
    std::vector<double> gw2(2 * kHeadWidth, 0.0);
    table->fourier_backward(h.omega.data(), h.w.data(), t, sn, cs, adj, gw2.data(), nullptr);
    CHECK(gw2 == gw);
  }
}

TEST_CASE("SIMD variants agree with the scalar reference") {
  const KernelTable& ref = scalar_table();
  const auto tables = available_tables();
  if (tables.size() < 2) {
    MESSAGE("no SIMD variant on this machine; scalar only");
    return;
  }
  std::mt19937_64 gen(7);
  for (std::size_t k = 1; k < tables.size(); ++k) {
    const KernelTable& simd = *tables[k];
    CAPTURE(simd.name);

    // sincos over a wide argument range, including odd lengths (tails).
    for (double range : {1.0, 10.0, 200.0, 1e4}) {
      std::uniform_real_distribution<double> u(-range, range);
      for (std::size_t n : {1u, 3u, 4u, 7u, 32u, 33u}) {
        std::vector<double> x(n), s0(n), c0(n), s1(n), c1(n);
        for (auto& v : x) v = u(gen);
        ref.sincos(x.data(), n, s0.data(), c0.data());
        simd.sincos(x.data(), n, s1.data(), c1.data());
        for (std::size_t i = 0; i < n; ++i) {
          CHECK(std::fabs(s1[i] - s0[i]) <= 4e-16 * std::max(1.0, std::fabs(x[i]) * 1e-3) + 1e-16);
          CHECK(std::fabs(c1[i] - c0[i]) <= 4e-16 * std::max(1.0, std::fabs(x[i]) * 1e-3) + 1e-16);
        }
      }
    }

    std::uniform_real_distribution<double> u(-1, 1);
    for (std::size_t n : {1u, 5u, 64u, 129u}) {
      std::vector<double> a(n), b(n);
      for (std::size_t i = 0; i < n; ++i) {
        a[i] = u(gen);
        b[i] = u(gen);
      }
      CHECK(simd.dot(a.data(), b.data(), n) ==
            doctest::Approx(ref.dot(a.data(), b.data(), n)).epsilon(1e-14).scale(1.0));
    }

    for (std::uint64_t s = 0; s < 20; ++s) {
      const Head h = random_head(100 + s);
      const double t = 10.0 * (u(gen) + 1) / 2;
      double s0[kFrequencies], c0[kFrequencies], u0[6], s1[kFrequencies], c1[kFrequencies], u1[6];
      ref.fourier_forward(h.omega.data(), h.w.data(), t, s0, c0, u0);
      simd.fourier_forward(h.omega.data(), h.w.data(), t, s1, c1, u1);
      for (int j = 0; j < 6; ++j) CHECK(u1[j] == doctest::Approx(u0[j]).epsilon(1e-13).scale(10.0));
      const double adj[6] = {u(gen), u(gen), u(gen), u(gen), u(gen), u(gen)};
      std::vector<double> gw0(2 * kHeadWidth, 0.0), go0(kFrequencies, 0.0);
      std::vector<double> gw1(2 * kHeadWidth, 0.0), go1(kFrequencies, 0.0);
      ref.fourier_backward(h.omega.data(), h.w.data(), t, s0, c0, adj, gw0.data(), go0.data());
      simd.fourier_backward(h.omega.data(), h.w.data(), t, s1, c1, adj, gw1.data(), go1.data());
      for (std::size_t j = 0; j < gw0.size(); ++j)
        CHECK(gw1[j] == doctest::Approx(gw0[j]).epsilon(1e-13).scale(10.0));
      for (std::size_t j = 0; j < go0.size(); ++j)
        CHECK(go1[j] == doctest::Approx(go0[j]).epsilon(1e-13).scale(100.0));
    }
  }
}
