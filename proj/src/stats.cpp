#include "stiffgate/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace stiffgate::stats {

namespace {

struct Ranked {
  std::vector<double> abs_d;
  std::vector<bool> positive;
  std::vector<double> ranks;  // midranks
  std::size_t n_zero = 0;
  bool ties = false;
  double tie_term = 0.0;  // sum over tie groups of (t^3 - t)
};

Ranked rank_differences(std::span<const double> d) {
  Ranked out;
  for (double x : d) {
    if (!std::isfinite(x)) throw std::invalid_argument("wilcoxon: non-finite difference");
    if (x == 0.0) {
      ++out.n_zero;
      continue;
    }
    out.abs_d.push_back(std::fabs(x));
    out.positive.push_back(x > 0.0);
  }
  const std::size_t n = out.abs_d.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return out.abs_d[i] < out.abs_d[j]; });
  out.ranks.assign(n, 0.0);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && out.abs_d[order[j + 1]] == out.abs_d[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t q = i; q <= j; ++q) out.ranks[order[q]] = midrank;
    const double t = static_cast<double>(j - i + 1);
    if (j > i) {
      out.ties = true;
      out.tie_term += t * t * t - t;
    }
    i = j + 1;
  }
  return out;
}

}  // namespace

WilcoxonResult wilcoxon_signed_rank(std::span<const double> differences,
                                    std::size_t exact_limit) {
  const Ranked rk = rank_differences(differences);
  WilcoxonResult res;
  res.n_zero = rk.n_zero;
  res.n_used = rk.abs_d.size();
  res.has_ties = rk.ties;
  if (res.n_used == 0) {
    res.degenerate = true;
    return res;
  }
  if (res.n_used < 5)
    throw std::invalid_argument("wilcoxon: need at least 5 non-zero differences, got " +
                                std::to_string(res.n_used));

  for (std::size_t i = 0; i < res.n_used; ++i)
    (rk.positive[i] ? res.w_plus : res.w_minus) += rk.ranks[i];

  const auto n = static_cast<double>(res.n_used);
  if (res.n_used <= exact_limit) {
    // Doubled midranks are integers; count sign assignments per doubled sum.
    std::vector<long long> r2(res.n_used);
    long long total = 0;
    for (std::size_t i = 0; i < res.n_used; ++i) {
      r2[i] = std::llround(2.0 * rk.ranks[i]);
      total += r2[i];
    }
    std::vector<double> counts(static_cast<std::size_t>(total) + 1, 0.0);
    counts[0] = 1.0;
    long long reach = 0;
    for (long long r : r2) {
      for (long long s = reach; s >= 0; --s)
        counts[static_cast<std::size_t>(s + r)] += counts[static_cast<std::size_t>(s)];
      reach += r;
    }
    const long long w2 = std::llround(2.0 * res.w_plus);
    double le = 0.0, ge = 0.0;
    for (long long s = 0; s <= total; ++s) {
      if (s <= w2) le += counts[static_cast<std::size_t>(s)];
      if (s >= w2) ge += counts[static_cast<std::size_t>(s)];
    }
    const double all = std::ldexp(1.0, static_cast<int>(res.n_used));
    res.p_less = le / all;
    res.p_greater = ge / all;
    res.exact = true;
  } else {
    const double mu = n * (n + 1.0) / 4.0;
    const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - rk.tie_term / 48.0;
    const double sd = std::sqrt(var);
    res.p_greater = 1.0 - normal_cdf((res.w_plus - mu - 0.5) / sd);
    res.p_less = normal_cdf((res.w_plus - mu + 0.5) / sd);
  }
  res.p_two_sided = std::min(1.0, 2.0 * std::min(res.p_less, res.p_greater));
  return res;
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                                    std::size_t exact_limit) {
  if (a.size() != b.size()) throw std::invalid_argument("wilcoxon: samples differ in length");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return wilcoxon_signed_rank(d, exact_limit);
}

std::vector<double> holm_adjust(std::span<const double> p_values) {
  const std::size_t m = p_values.size();
  for (double p : p_values)
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("holm_adjust: p outside [0, 1]");
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return p_values[i] < p_values[j]; });
  std::vector<double> adjusted(m);
  double running = 0.0;
  for (std::size_t rank = 0; rank < m; ++rank) {
    const double scaled = std::min(1.0, static_cast<double>(m - rank) * p_values[order[rank]]);
    running = std::max(running, scaled);
    adjusted[order[rank]] = running;
  }
  return adjusted;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double student_t_cdf(double t, int dof) {
  if (dof < 1) throw std::invalid_argument("student_t_cdf: dof must be >= 1");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double nu = dof;
  const double theta = std::atan(std::fabs(t) / std::sqrt(nu));
  const double c2 = std::cos(theta) * std::cos(theta);
  double a;  // P(|T| <= |t|)
  if (dof == 1) {
    a = 2.0 * theta / std::numbers::pi;
  } else if (dof % 2 == 1) {
    double term = std::cos(theta), sum = term;
    for (int k = 3; k <= dof - 2; k += 2) {
      term *= c2 * (k - 1) / k;
      sum += term;
    }
    a = 2.0 / std::numbers::pi * (theta + std::sin(theta) * sum);
  } else {
    double term = 1.0, sum = 1.0;
    for (int k = 2; k <= dof - 2; k += 2) {
      term *= c2 * (k - 1) / k;
      sum += term;
    }
    a = std::sin(theta) * sum;
  }
  return t >= 0 ? 0.5 + 0.5 * a : 0.5 - 0.5 * a;
}

double student_t_quantile(double p, int dof) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("student_t_quantile: p outside (0, 1)");
  if (p < 0.5) return -student_t_quantile(1.0 - p, dof);
  double lo = 0.0, hi = 1.0;
  while (student_t_cdf(hi, dof) < p) {
    lo = hi;
    hi *= 2.0;
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (student_t_cdf(mid, dof) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

MeanCI mean_ci95(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 2) throw std::invalid_argument("mean_ci95: need at least two values");
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  const double half = student_t_quantile(0.975, static_cast<int>(n - 1)) * sd /
                      std::sqrt(static_cast<double>(n));
  return {mean, mean - half, mean + half};
}

StatTestResult compare_pair(const PairedSample& sample) {
  const std::size_t n = sample.a.size();
  if (sample.b.size() != n || sample.seeds.size() != n)
    throw std::invalid_argument("compare_pair: samples differ in length");
  if (n == 0) throw std::invalid_argument("compare_pair: no paired seeds");
  // Canonical order by seed so results do not depend on input order.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return sample.seeds[i] < sample.seeds[j]; });
  for (std::size_t i = 1; i < n; ++i)
    if (sample.seeds[order[i]] == sample.seeds[order[i - 1]])
      throw std::invalid_argument("compare_pair: duplicate seed " +
                                  std::to_string(sample.seeds[order[i]]));
  std::vector<double> a(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = sample.a[order[i]];
    b[i] = sample.b[order[i]];
  }

  StatTestResult out;
  out.n = n;
  for (std::size_t i = 0; i < n; ++i) {
    out.mean_a += a[i];
    out.mean_b += b[i];
  }
  out.mean_a /= static_cast<double>(n);
  out.mean_b /= static_cast<double>(n);

  const WilcoxonResult w = wilcoxon_signed_rank(a, b);
  out.n_zero = w.n_zero;
  out.p_raw = w.p_two_sided;

  std::size_t a_lower = 0, b_lower = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (a[i] < b[i]) ++a_lower;
    if (b[i] < a[i]) ++b_lower;
  }
  if (w.degenerate || out.mean_a == out.mean_b) {
    out.degenerate = true;
    out.p_raw = 1.0;
    out.p_one_sided = 1.0;
    out.frac_win = static_cast<double>(a_lower) / static_cast<double>(n);
    out.frac_loss = static_cast<double>(b_lower) / static_cast<double>(n);
  } else if (out.mean_a < out.mean_b) {
    out.winner = "A";
    out.frac_win = static_cast<double>(a_lower) / static_cast<double>(n);
    out.frac_loss = static_cast<double>(b_lower) / static_cast<double>(n);
    out.p_one_sided = w.p_less;
  } else {
    out.winner = "B";
    out.frac_win = static_cast<double>(b_lower) / static_cast<double>(n);
    out.frac_loss = static_cast<double>(a_lower) / static_cast<double>(n);
    out.p_one_sided = w.p_greater;
  }
  out.frac_tie = 1.0 - (out.frac_win + out.frac_loss);
  out.p_holm = out.p_raw;
  return out;
}

void apply_holm(std::span<StatTestResult> family) {
  std::vector<double> raw;
  raw.reserve(family.size());
  for (const auto& r : family) raw.push_back(r.p_raw);
  const auto adj = holm_adjust(raw);
  for (std::size_t i = 0; i < family.size(); ++i) family[i].p_holm = adj[i];
}

std::vector<StatTestResult> gate_comparison_table(std::span<const Observation> observations,
                                                  const ComparisonFamily& family,
                                                  std::vector<std::string>* warnings) {
  std::vector<StatTestResult> rows;
  for (double k : family.k_values) {
    std::map<long long, const Observation*> by_seed_a, by_seed_b;
    for (const auto& o : observations) {
      if (o.model != family.model || o.k != k || o.lambda_ic != family.lambda_ic) continue;
      if (o.gate == family.gate_a) by_seed_a[o.seed] = &o;
      if (o.gate == family.gate_b) by_seed_b[o.seed] = &o;
    }
    for (const auto& metric : family.metrics) {
      PairedSample sample;
      sample.label_a = family.model + "_gate-" + family.gate_a;
      sample.label_b = family.model + "_gate-" + family.gate_b;
      for (const auto& [seed, oa] : by_seed_a) {
        const auto it = by_seed_b.find(seed);
        if (it == by_seed_b.end()) continue;
        const Observation* ob = it->second;
        sample.seeds.push_back(seed);
        sample.a.push_back(metric == "rel_l2_u" ? oa->rel_l2_u : oa->max_ae_u);
        sample.b.push_back(metric == "rel_l2_u" ? ob->rel_l2_u : ob->max_ae_u);
      }
      if (metric != "rel_l2_u" && metric != "max_ae_u")
        throw std::invalid_argument("gate_comparison_table: unknown metric " + metric);
      try {
        StatTestResult row = compare_pair(sample);
        row.setting = family.setting;
        row.k = k;
        row.metric = metric;
        rows.push_back(std::move(row));
      } catch (const std::invalid_argument& e) {
        if (warnings != nullptr)
          warnings->push_back("k=" + std::to_string(k) + " " + metric + ": row omitted (" +
                              e.what() + ")");
      }
    }
  }
  apply_holm(rows);
  return rows;
}

}  // namespace stiffgate::stats
