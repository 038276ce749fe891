#include <doctest.h>

#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "stiffgate/stats.hpp"

using namespace stiffgate::stats;

TEST_CASE("five positive differences") {
  const std::vector<double> d{1, 2, 3, 4, 5};
  const auto w = wilcoxon_signed_rank(d);
  CHECK(w.exact);
  CHECK(w.w_plus == 15.0);
  CHECK(w.w_minus == 0.0);
  CHECK(w.p_two_sided == doctest::Approx(0.0625).epsilon(1e-15));
  CHECK(w.p_greater == doctest::Approx(1.0 / 32));
  CHECK(w.p_less == 1.0);
}

TEST_CASE("twenty wins") {
  std::vector<double> a(20), b(20);
  for (int i = 0; i < 20; ++i) {
    a[i] = 0.1 + 0.01 * i;
    b[i] = a[i] + 0.001 * (i + 1);
  }
  const auto w = wilcoxon_signed_rank(a, b);
  CHECK(w.exact);
  CHECK(w.p_less == std::ldexp(1.0, -20));
  CHECK(w.p_two_sided == std::ldexp(1.0, -19));
  CHECK(w.p_two_sided < 1e-4);
}

TEST_CASE("exact null distribution against brute-force enumeration") {
  std::mt19937_64 gen(17);
  std::uniform_int_distribution<int> mag(1, 6);
  std::uniform_int_distribution<int> sign(0, 3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 5 + trial % 12;
    std::vector<double> d(n);
    // Small integer magnitudes force ties; an occasional zero is dropped.
    for (auto& x : d) {
      const int s = sign(gen);
      x = s == 0 ? 0.0 : (s == 1 ? -1.0 : 1.0) * mag(gen);
    }
    std::size_t nz = 0;
    for (double x : d) nz += x != 0.0;
    if (nz < 5) continue;
    const auto w = wilcoxon_signed_rank(d);
    const auto o = oracle::brute_wilcoxon(d);
    CAPTURE(trial);
    CHECK(w.w_plus == doctest::Approx(o.w_plus));
    CHECK(w.p_less == doctest::Approx(o.p_less).epsilon(1e-12));
    CHECK(w.p_greater == doctest::Approx(o.p_greater).epsilon(1e-12));
    CHECK(w.p_two_sided == doctest::Approx(o.p_two).epsilon(1e-12));
    CHECK(w.n_used == nz);
  }
}

TEST_CASE("normal approximation is close to the exact test for moderate n") {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> nd(0.3, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> d(25);
    for (auto& x : d) x = nd(gen);
    const auto exact = wilcoxon_signed_rank(d, 25);
    const auto approx = wilcoxon_signed_rank(d, 0);
    CHECK(exact.exact);
    CHECK_FALSE(approx.exact);
    CHECK(approx.w_plus == exact.w_plus);
    CHECK(std::fabs(approx.p_two_sided - exact.p_two_sided) < 0.01);
  }
}

TEST_CASE("Wilcoxon edge cases") {
  CHECK(wilcoxon_signed_rank(std::vector<double>{0, 0, 0, 0, 0, 0}).degenerate);
  CHECK_THROWS_AS(wilcoxon_signed_rank(std::vector<double>{1, 2, 0, -3}), std::invalid_argument);
  CHECK_THROWS_AS(wilcoxon_signed_rank(std::vector<double>{1, 2}, std::vector<double>{1}),
                  std::invalid_argument);
  CHECK_THROWS_AS(wilcoxon_signed_rank(std::vector<double>{1, 2, 3, 4, std::nan("")}),
                  std::invalid_argument);
  const auto w = wilcoxon_signed_rank(std::vector<double>{1, -1, 2, -2, 0, 3});
  CHECK(w.n_zero == 1);
  CHECK(w.has_ties);
  CHECK(w.w_plus == doctest::Approx(1.5 + 3.5 + 5));
}

TEST_CASE("Holm adjustment") {
  const auto a = holm_adjust(std::vector<double>{0.01, 0.04, 0.03});
  CHECK(a[0] == doctest::Approx(0.03).epsilon(1e-15));
  CHECK(a[1] == doctest::Approx(0.06).epsilon(1e-15));
  CHECK(a[2] == doctest::Approx(0.06).epsilon(1e-15));
  const auto b = holm_adjust(std::vector<double>{0.5, 0.9});
  CHECK(b[0] == 1.0);
  CHECK(b[1] == 1.0);
  CHECK(holm_adjust(std::vector<double>{0.2}) == std::vector<double>{0.2});
  CHECK(holm_adjust(std::vector<double>{}).empty());
  CHECK_THROWS(holm_adjust(std::vector<double>{1.2}));
  // Monotone in the sorted order and never below the raw value.
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0, 0.2);
  std::vector<double> p(9);
  for (auto& x : p) x = u(gen);
  const auto adj = holm_adjust(p);
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK(adj[i] >= p[i]);
    for (std::size_t j = 0; j < p.size(); ++j)
      if (p[i] < p[j]) CHECK(adj[i] <= adj[j]);
  }
}

TEST_CASE("Student t against Boost.Math") {
  for (int dof : {1, 2, 3, 4, 5, 9, 10, 19, 30, 75}) {
    const boost::math::students_t dist(dof);
    for (double t : {-8.0, -2.3, -0.4, 0.0, 0.7, 1.96, 2.262, 6.5}) {
      CAPTURE(dof);
      CAPTURE(t);
      CHECK(student_t_cdf(t, dof) == doctest::Approx(boost::math::cdf(dist, t)).epsilon(1e-12));
    }
    for (double p : {0.01, 0.3, 0.5, 0.9, 0.975, 0.999})
      CHECK(student_t_quantile(p, dof) ==
            doctest::Approx(boost::math::quantile(dist, p)).epsilon(1e-10).scale(1.0));
  }
  CHECK_THROWS(student_t_cdf(1.0, 0));
  CHECK_THROWS(student_t_quantile(1.0, 3));
  CHECK(normal_cdf(0.0) == 0.5);
  CHECK(normal_cdf(1.959963984540054) == doctest::Approx(0.975));
}

TEST_CASE("mean and 95% interval") {
  const auto ci = mean_ci95(std::vector<double>{1, 2, 3});
  CHECK(ci.mean == 2.0);
  const double half = 4.302652729749464 / std::sqrt(3.0);  // t_{0.975,2} * 1 / sqrt(3)
  CHECK(ci.lo == doctest::Approx(2.0 - half).epsilon(1e-12));
  CHECK(ci.hi == doctest::Approx(2.0 + half).epsilon(1e-12));
  const auto flat = mean_ci95(std::vector<double>{0.5, 0.5, 0.5, 0.5});
  CHECK(flat.lo == 0.5);
  CHECK(flat.hi == 0.5);
  CHECK_THROWS(mean_ci95(std::vector<double>{1.0}));
}

TEST_CASE("pair comparison picks the lower mean and orients the one-sided p") {
  PairedSample s;
  s.seeds = {4, 0, 3, 1, 2, 5, 6};
  s.a = {0.20, 0.10, 0.12, 0.30, 0.05, 0.11, 0.40};
  s.b = {0.25, 0.15, 0.10, 0.31, 0.09, 0.19, 0.41};
  const auto r = compare_pair(s);
  CHECK(r.winner == "A");
  CHECK(r.n == 7);
  CHECK(r.frac_win == doctest::Approx(6.0 / 7));
  CHECK(r.frac_loss == doctest::Approx(1.0 / 7));
  CHECK(r.frac_tie == doctest::Approx(0.0).scale(1.0));
  const auto w = wilcoxon_signed_rank(s.a, s.b);
  CHECK(r.p_one_sided == w.p_less);
  CHECK(r.p_raw == w.p_two_sided);
  CHECK(r.p_holm == r.p_raw);
  // Swapping the arms swaps the winner and keeps the p-values.
  PairedSample t = s;
  std::swap(t.a, t.b);
  const auto q = compare_pair(t);
  CHECK(q.winner == "B");
  CHECK(q.p_one_sided == r.p_one_sided);
  CHECK(q.frac_win == r.frac_win);
  // Input order does not matter.
  PairedSample u = s;
  std::reverse(u.seeds.begin(), u.seeds.end());
  std::reverse(u.a.begin(), u.a.end());
  std::reverse(u.b.begin(), u.b.end());
  CHECK(compare_pair(u).p_raw == r.p_raw);

  PairedSample same = s;
  same.b = same.a;
  const auto d = compare_pair(same);
  CHECK(d.degenerate);
  CHECK(d.winner.empty());
  CHECK(d.p_raw == 1.0);
  CHECK(d.frac_tie == 1.0);

  PairedSample dup = s;
  dup.seeds[1] = 4;
  CHECK_THROWS(compare_pair(dup));
}

TEST_CASE("gate comparison table") {
  std::vector<Observation> obs;
  for (long long seed = 0; seed < 10; ++seed)
    for (double k : {20.0, 60.0}) {
      const double base = 0.1 + 0.01 * seed;
      // exp better at k=20, linear better at k=60.
      obs.push_back({"adaptive_fourier", "exp", k, 50.0, seed, k == 20 ? base : base + 0.02,
                     k == 20 ? 2 * base : 2 * base + 0.03});
      obs.push_back({"adaptive_fourier", "linear", k, 50.0, seed, k == 20 ? base + 0.01 : base,
                     k == 20 ? 2 * base + 0.05 : 2 * base});
    }
  // Noise that the table must ignore.
  obs.push_back({"fixed_fourier", "exp", 20.0, 50.0, 0, 9.0, 9.0});
  obs.push_back({"adaptive_fourier", "exp", 20.0, 10.0, 0, 9.0, 9.0});
  obs.push_back({"adaptive_fourier", "exp", 20.0, 50.0, 99, 9.0, 9.0});

  ComparisonFamily fam;
  fam.setting = "lIC50";
  std::vector<std::string> warnings;
  const auto rows = gate_comparison_table(obs, fam, &warnings);
  REQUIRE(rows.size() == 4);
  CHECK(warnings.empty());
  CHECK(rows[0].k == 20.0);
  CHECK(rows[0].metric == "max_ae_u");
  CHECK(rows[1].metric == "rel_l2_u");
  CHECK(rows[2].k == 60.0);
  for (int i = 0; i < 2; ++i) CHECK(rows[i].winner == "A");
  for (int i = 2; i < 4; ++i) CHECK(rows[i].winner == "B");
  for (const auto& r : rows) {
    CHECK(r.n == 10);
    CHECK(r.frac_win == 1.0);
    CHECK(r.setting == "lIC50");
    CHECK(r.p_raw == doctest::Approx(std::ldexp(1.0, -9)));
    CHECK(r.p_one_sided == doctest::Approx(std::ldexp(1.0, -10)));
    CHECK(r.p_holm == doctest::Approx(4 * r.p_raw));
  }

  fam.k_values = {20.0, 40.0};
  const auto partial = gate_comparison_table(obs, fam, &warnings);
  CHECK(partial.size() == 2);
  CHECK(warnings.size() == 2);
  CHECK(partial[0].p_holm == doctest::Approx(2 * partial[0].p_raw));
}
