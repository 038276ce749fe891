#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace stiffgate::stats {

struct WilcoxonResult {
  double w_plus = 0.0;
  double w_minus = 0.0;
  std::size_t n_used = 0;     // pairs after dropping zero differences
  std::size_t n_zero = 0;     // dropped zero differences
  bool has_ties = false;      // ties among |d|
  bool exact = false;         // exact (conditional) null distribution used
  bool degenerate = false;    // all differences zero
  double p_two_sided = 1.0;
  double p_less = 1.0;        // P(W+ <= observed): evidence that a < b
  double p_greater = 1.0;     // P(W+ >= observed): evidence that a > b
};

/// Paired Wilcoxon signed-rank test on d_i = a_i - b_i.
///
/// Zero differences are dropped; |d| is ranked with midranks for ties. For
/// n <= exact_limit the null distribution of W+ is enumerated exactly over
/// all 2^n sign assignments with the midranks held fixed; otherwise a
/// tie-corrected normal approximation with continuity correction is used.
/// Throws std::invalid_argument for unequal lengths or fewer than five
/// non-zero differences (an all-zero sample returns degenerate = true).
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                                    std::size_t exact_limit = 25);
WilcoxonResult wilcoxon_signed_rank(std::span<const double> differences,
                                    std::size_t exact_limit = 25);

/// Holm step-down adjustment; returned in input order.
std::vector<double> holm_adjust(std::span<const double> p_values);

struct MeanCI {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

/// Two-sided Student-t CDF for integer degrees of freedom.
double student_t_cdf(double t, int dof);
/// Quantile by bisection on student_t_cdf.
double student_t_quantile(double p, int dof);
double normal_cdf(double z);

/// mean +/- t_{0.975, n-1} s / sqrt(n); throws for n < 2.
MeanCI mean_ci95(std::span<const double> values);

struct PairedSample {
  std::string label_a;
  std::string label_b;
  std::vector<long long> seeds;
  std::vector<double> a;
  std::vector<double> b;
};

struct StatTestResult {
  std::string setting;
  double k = 0.0;
  std::string metric;
  std::string winner;  // "A", "B" or "" when degenerate
  std::size_t n = 0;
  double mean_a = 0.0;
  double mean_b = 0.0;
  double frac_win = 0.0;
  double frac_loss = 0.0;
  double frac_tie = 0.0;
  double p_raw = 1.0;
  double p_holm = 1.0;
  double p_one_sided = 1.0;
  std::size_t n_zero = 0;
  bool degenerate = false;
};

/// Compares A against B for one (k, metric) cell. Winner has the smaller
/// mean; frac_win counts seeds where the winner is strictly lower; the
/// one-sided p tests in the winner's direction. p_holm is left equal to p_raw.
StatTestResult compare_pair(const PairedSample& sample);

/// Applies Holm across rows (one family) in place.
void apply_holm(std::span<StatTestResult> family);

/// One successful run, as far as the gate comparison needs it.
struct Observation {
  std::string model;
  std::string gate;
  double k = 0.0;
  double lambda_ic = 0.0;
  long long seed = 0;
  double rel_l2_u = 0.0;
  double max_ae_u = 0.0;
};

/// One Holm family: every (k, metric) pair for a (model, lambda_ic) setting.
struct ComparisonFamily {
  std::string setting;  // label only, e.g. "lIC50"
  std::string model = "adaptive_fourier";
  double lambda_ic = 50.0;
  std::string gate_a = "exp";
  std::string gate_b = "linear";
  std::vector<double> k_values{20.0, 60.0};
  std::vector<std::string> metrics{"max_ae_u", "rel_l2_u"};
};

/// Table rows ordered by (k, metric). Seeds present for only one gate are
/// ignored; a cell that cannot be tested is omitted and a warning appended.
std::vector<StatTestResult> gate_comparison_table(std::span<const Observation> observations,
                                                  const ComparisonFamily& family,
                                                  std::vector<std::string>* warnings = nullptr);

}  // namespace stiffgate::stats
