// stiffgate command-line driver.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "stiffgate/diagnostics.hpp"
#include "stiffgate/dynamics.hpp"
#include "stiffgate/evaluation.hpp"
#include "stiffgate/harness.hpp"
#include "stiffgate/kernels.hpp"
#include "stiffgate/models.hpp"
#include "stiffgate/objective.hpp"
#include "stiffgate/rng.hpp"
#include "stiffgate/training.hpp"

namespace fs = std::filesystem;
using namespace stiffgate;
using nlohmann::json;

namespace {

json load_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return json::parse(in);
}

// ---- solve-reference ---------------------------------------------------------------

struct SolveArgs {
  dynamics::PhysicsParams physics;
  models::ICSpec ic;
  double t_final = 10.0;
  std::size_t n_eval = 2000;
  std::string out;
};

int cmd_solve_reference(const SolveArgs& a) {
  auto physics = a.physics;
  physics.T = a.t_final;
  physics.validate();
  a.ic.validate(physics.r_min);
  const auto grid = dynamics::uniform_grid(a.t_final, a.n_eval);
  dynamics::SolverStats st;
  const dynamics::State s0{a.ic.r0, a.ic.theta0, a.ic.rdot0, a.ic.thetadot0};
  const auto traj = dynamics::solve_reference(s0, physics, grid, {}, &st);
  evaluation::write_trajectory_csv(a.out, traj, &physics);
  const double e0 = dynamics::energy(traj.states.front(), physics);
  const double e1 = dynamics::energy(traj.states.back(), physics);
  std::fprintf(stderr, "%zu points -> %s (accepted %zu, rejected %zu, energy drift %.3e)\n",
               traj.size(), a.out.c_str(), st.accepted, st.rejected,
               std::fabs(e1 - e0) / std::max(std::fabs(e0), 1e-300));
  return 0;
}

// ---- gradcheck ------------------------------------------------------------------------

struct GradcheckArgs {
  std::string model = "adaptive_fourier";
  std::string gate = "exp";
  double k = 20.0;
  std::uint64_t seed = 0;
  double perturb = 0.3;
  std::size_t n_points = 32;
  std::size_t max_coords = 500;
  double h = 1e-4;
};

int cmd_gradcheck(const GradcheckArgs& a) {
  const auto trunk = models::parse_trunk(a.model);
  dynamics::PhysicsParams physics;
  physics.k = a.k;
  const models::PinnModel model(trunk, models::parse_gate(a.gate), {}, physics.r_min);

  auto params = models::init_params(trunk, a.seed);
  const CounterStream noise(a.seed ^ 0x9e3779b97f4a7c15ULL, StreamPurpose::Init);
  const auto lay = models::layout(trunk);
  for (std::size_t i = lay.head_w; i < lay.head_b + 2; ++i)
    params[i] += noise.uniform(i, -a.perturb, a.perturb);

  // d1 against differences of the value, d2 against differences of d1; errors
  // are normwise per channel over the sampled times.
  std::array<double, 2> err1{}, ref1{}, err2{}, ref2{};
  const CounterStream times(a.seed, StreamPurpose::Collocation);
  for (std::size_t i = 0; i < 10; ++i) {
    const double t = times.uniform(i, 0.5, physics.T - 0.5);
    const auto e = model.evaluate(params, t);
    const auto ep = model.evaluate(params, t + a.h);
    const auto em = model.evaluate(params, t - a.h);
    const std::array<std::array<Taylor, 3>, 2> ch{{{e.r, ep.r, em.r}, {e.theta, ep.theta, em.theta}}};
    for (std::size_t k = 0; k < 2; ++k) {
      const auto& [c, p, m] = ch[k];
      const double fd1 = (p.val - m.val) / (2 * a.h);
      const double fd2 = (p.d1 - m.d1) / (2 * a.h);
      err1[k] = std::max(err1[k], std::fabs(c.d1 - fd1));
      ref1[k] = std::max(ref1[k], std::fabs(fd1));
      err2[k] = std::max(err2[k], std::fabs(c.d2 - fd2));
      ref2[k] = std::max(ref2[k], std::fabs(fd2));
    }
  }
  double worst_d1 = 0.0, worst_d2 = 0.0;
  for (std::size_t k = 0; k < 2; ++k) {
    worst_d1 = std::max(worst_d1, err1[k] / std::max(ref1[k], 1e-300));
    worst_d2 = std::max(worst_d2, err2[k] / std::max(ref2[k], 1e-300));
  }

  // Loss gradient against central differences, fixed batch.
  const auto batch = training::sample_collocation(times, 1000, a.n_points, physics.T);
  training::BatchedObjective obj(model, physics, {1.0, 50.0});
  std::vector<double> grad;
  obj.loss_and_gradient(params, batch, grad);
  std::vector<std::size_t> coords(params.size());
  for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
  if (coords.size() > a.max_coords) {
    std::vector<std::size_t> pick;
    for (std::size_t i = 0; i < a.max_coords; ++i)
      pick.push_back(static_cast<std::size_t>(noise.bits(1'000'000 + i) % params.size()));
    std::sort(pick.begin(), pick.end());
    pick.erase(std::unique(pick.begin(), pick.end()), pick.end());
    coords = pick;
  }
  std::vector<double> fd(coords.size());
  double fd_scale = 0.0;
  for (std::size_t c = 0; c < coords.size(); ++c) {
    const std::size_t j = coords[c];
    const double h = 1e-6 * std::max(1.0, std::fabs(params[j]));
    auto p = params;
    p[j] = params[j] + h;
    const double up = obj.loss(p, batch).total;
    p[j] = params[j] - h;
    const double dn = obj.loss(p, batch).total;
    fd[c] = (up - dn) / (2 * h);
    fd_scale = std::max(fd_scale, std::fabs(fd[c]));
  }
  double worst_grad = 0.0;
  for (std::size_t c = 0; c < coords.size(); ++c) {
    const double g = grad[coords[c]];
    const double denom = std::max({std::fabs(fd[c]), std::fabs(g), 1e-6 * fd_scale});
    worst_grad = std::max(worst_grad, std::fabs(g - fd[c]) / denom);
  }

  std::printf("model=%s gate=%s seed=%llu kernel=%s\n", a.model.c_str(), a.gate.c_str(),
              static_cast<unsigned long long>(a.seed), std::string(obj.table().name).c_str());
  std::printf("d1 max rel error   %.3e\n", worst_d1);
  std::printf("d2 max rel error   %.3e\n", worst_d2);
  std::printf("grad max rel error %.3e over %zu coordinates\n", worst_grad, coords.size());
  return (worst_d1 < 1e-5 && worst_d2 < 1e-4 && worst_grad < 1e-4) ? 0 : 1;
}

// ---- train ------------------------------------------------------------------------------

int cmd_train(const std::string& config, const std::string& out_dir) {
  const auto spec = harness::run_spec_from_json(load_json(config));
  auto cache = evaluation::ReferenceCache::from_environment();
  const auto out = harness::execute_run(spec, cache, fs::path(out_dir));
  const auto& r = out.record;
  std::printf("run %s %s/%s k=%g lambda_ic=%g seed=%lld: %s", r.run_id.c_str(), r.model.c_str(),
              r.gate.c_str(), r.k, r.lambda_ic, r.seed, std::string(to_string(r.status)).c_str());
  if (r.status == harness::RunStatus::Ok)
    std::printf(" rel_l2_u=%.6g max_ae_u=%.6g final_loss=%.6g (%.1fs)\n", r.rel_l2_u, r.max_ae_u,
                r.final_loss, r.wall_time);
  else
    std::printf(" (%s)\n", out.error.c_str());
  return r.status == harness::RunStatus::Ok ? 0 : 2;
}

// ---- stats ------------------------------------------------------------------------------

int cmd_stats(const std::string& runs, const std::string& setting, const std::string& model,
              const std::string& out) {
  fs::path path(runs);
  if (fs::is_directory(path)) path /= "runs.csv";
  const auto records = harness::read_runs_csv(path);
  std::vector<std::string> warnings;
  const auto rows = harness::gate_table(records, setting, model, &warnings);
  for (const auto& w : warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  harness::write_gate_table_csv(out, rows);
  for (const auto& r : rows)
    std::printf("%s k=%-4g %-8s winner=%s n=%zu mean_a=%.4g mean_b=%.4g frac_win=%.2f "
                "p_raw=%.3g p_holm=%.3g p_1s=%.3g\n",
                r.setting.c_str(), r.k, r.metric.c_str(), r.winner.empty() ? "-" : r.winner.c_str(),
                r.n, r.mean_a, r.mean_b, r.frac_win, r.p_raw, r.p_holm, r.p_one_sided);
  return 0;
}

// ---- ntk ----------------------------------------------------------------------------------

struct NtkArgs {
  std::string model = "adaptive_fourier";
  std::string gate = "exp";
  double k = 20.0;
  std::size_t n_points = 64;
  std::uint64_t seed = 0;
  std::string params_file;
  std::string mode = "residual";
  std::string out;
};

int cmd_ntk(const NtkArgs& a) {
  const auto trunk = models::parse_trunk(a.model);
  dynamics::PhysicsParams physics;
  physics.k = a.k;
  const models::PinnModel model(trunk, models::parse_gate(a.gate), {}, physics.r_min);
  models::ParamVector params = a.params_file.empty()
                                   ? models::init_params(trunk, a.seed)
                                   : models::ParamVector(trunk, harness::read_params_bin(a.params_file));
  if (a.mode != "residual" && a.mode != "output")
    throw std::invalid_argument("--mode must be residual or output");
  const auto mode =
      a.mode == "residual" ? diagnostics::KernelMode::Residual : diagnostics::KernelMode::Output;
  const auto grid = dynamics::uniform_grid(physics.T, a.n_points);
  const auto rep = diagnostics::ntk_matrix(model, params, grid, physics, mode);

  std::ofstream out(a.out);
  if (!out) throw std::runtime_error("cannot write " + a.out);
  char line[128];
  out << "kind,i,j,value\n";
  for (std::size_t i = 0; i < rep.times.size(); ++i) {
    std::snprintf(line, sizeof line, "time,%zu,,%.17g\n", i, rep.times[i]);
    out << line;
  }
  for (Eigen::Index i = 0; i < rep.K.rows(); ++i)
    for (Eigen::Index j = 0; j < rep.K.cols(); ++j) {
      std::snprintf(line, sizeof line, "K,%ld,%ld,%.17g\n", static_cast<long>(i),
                    static_cast<long>(j), rep.K(i, j));
      out << line;
    }
  for (Eigen::Index i = 0; i < rep.eigen.values.size(); ++i) {
    std::snprintf(line, sizeof line, "eigenvalue,%ld,,%.17g\n", static_cast<long>(i),
                  rep.eigen.values[i]);
    out << line;
  }
  std::snprintf(line, sizeof line, "effective_rank,,,%.17g\ncondition_number,,,%.17g\n",
                rep.effective_rank, rep.condition_number);
  out << line;
  std::printf("K %ldx%ld  lambda_max=%.4g  effective_rank=%.3f  condition=%.3g\n",
              static_cast<long>(rep.K.rows()), static_cast<long>(rep.K.cols()),
              rep.eigen.values.size() ? rep.eigen.values[0] : 0.0, rep.effective_rank,
              rep.condition_number);
  return 0;
}

// ---- sweep / report -------------------------------------------------------------------------

int cmd_sweep(const std::string& config, const std::string& out_dir, std::size_t workers,
              std::optional<std::uint64_t> shuffle) {
  const auto runs = harness::expand_sweep(load_json(config));
  auto cache = evaluation::ReferenceCache::from_environment();
  harness::SweepOptions opt;
  opt.workers = workers;
  opt.shuffle_seed = shuffle;
  opt.on_done = [](const harness::RunRecord& r, std::size_t done, std::size_t total) {
    std::fprintf(stderr, "[%zu/%zu] %s/%s k=%g lIC=%g seed=%lld %s rel_l2_u=%.4g (%.1fs)\n", done,
                 total, r.model.c_str(), r.gate.c_str(), r.k, r.lambda_ic, r.seed,
                 std::string(to_string(r.status)).c_str(), r.rel_l2_u, r.wall_time);
  };
  const auto s = harness::run_sweep(runs, out_dir, cache, opt);
  std::printf("planned %zu, skipped %zu, ok %zu, aborted %zu\n", s.planned, s.skipped, s.ok,
              s.aborted);
  return 0;
}

int cmd_report(const std::string& results, const std::string& out_dir) {
  fs::path path(results);
  if (fs::is_directory(path)) path /= "runs.csv";
  const auto records = harness::read_runs_csv(path);
  const auto table = harness::aggregate(records);
  for (const auto& w : table.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  const auto files = harness::emit_figure_data(table, out_dir);

  std::set<double> lambdas;
  for (const auto& r : records)
    if (r.model == "adaptive_fourier") lambdas.insert(r.lambda_ic);
  std::size_t tables = 0;
  for (double lam : lambdas) {
    std::vector<std::string> warnings;
    const auto setting = harness::setting_label(lam);
    const auto rows = harness::gate_table(records, setting, "adaptive_fourier", &warnings);
    for (const auto& w : warnings) std::fprintf(stderr, "warning: %s: %s\n", setting.c_str(), w.c_str());
    if (rows.empty()) continue;
    harness::write_gate_table_csv(fs::path(out_dir) / ("table1_" + setting + ".csv"), rows);
    ++tables;
  }
  std::printf("%zu cells, %zu figure files, %zu gate tables, %zu aborted runs excluded\n",
              table.cells.size(), files.size(), tables, table.n_aborted);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stiffgate: gated PINN benchmark for the spring-pendulum"};
  app.require_subcommand(1);

  SolveArgs solve;
  auto* s = app.add_subcommand("solve-reference", "Integrate the reference trajectory");
  s->add_option("--k", solve.physics.k, "Spring stiffness")->capture_default_str();
  s->add_option("--m", solve.physics.m)->capture_default_str();
  s->add_option("--L0", solve.physics.L0)->capture_default_str();
  s->add_option("--c-r", solve.physics.c_r, "Radial damping")->capture_default_str();
  s->add_option("--c-theta", solve.physics.c_theta, "Angular damping")->capture_default_str();
  s->add_option("--r0", solve.ic.r0)->capture_default_str();
  s->add_option("--theta0", solve.ic.theta0)->capture_default_str();
  s->add_option("--rdot0", solve.ic.rdot0)->capture_default_str();
  s->add_option("--thetadot0", solve.ic.thetadot0)->capture_default_str();
  s->add_option("--t-final", solve.t_final)->capture_default_str();
  s->add_option("--n-eval", solve.n_eval)->capture_default_str();
  s->add_option("--out", solve.out, "Output CSV")->required();

  GradcheckArgs gc;
  auto* g = app.add_subcommand("gradcheck", "Compare derivatives with finite differences");
  g->add_option("--model", gc.model)->capture_default_str();
  g->add_option("--gate", gc.gate)->capture_default_str();
  g->add_option("--k", gc.k)->capture_default_str();
  g->add_option("--seed", gc.seed)->capture_default_str();
  g->add_option("--perturb", gc.perturb, "Uniform head perturbation half-width")->capture_default_str();
  g->add_option("--points", gc.n_points, "Collocation points in the loss")->capture_default_str();
  g->add_option("--max-coords", gc.max_coords)->capture_default_str();

  std::string train_config, train_out;
  auto* t = app.add_subcommand("train", "Train one run");
  t->add_option("--config", train_config, "Run config JSON")->required();
  t->add_option("--out-dir", train_out)->required();

  std::string stats_runs, stats_setting = "lIC50", stats_model = "adaptive_fourier", stats_out;
  auto* st = app.add_subcommand("stats", "Paired gate comparison table");
  st->add_option("--runs", stats_runs, "Sweep directory or runs.csv")->required();
  st->add_option("--setting", stats_setting)->capture_default_str();
  st->add_option("--model", stats_model)->capture_default_str();
  st->add_option("--out", stats_out)->required();

  NtkArgs ntk;
  auto* n = app.add_subcommand("ntk", "Residual tangent kernel and its spectrum");
  n->add_option("--model", ntk.model)->capture_default_str();
  n->add_option("--gate", ntk.gate)->capture_default_str();
  n->add_option("--k", ntk.k)->capture_default_str();
  n->add_option("--n-points", ntk.n_points)->capture_default_str();
  n->add_option("--seed", ntk.seed)->capture_default_str();
  n->add_option("--params", ntk.params_file, "params.bin to use instead of the init");
  n->add_option("--mode", ntk.mode, "residual or output")->capture_default_str();
  n->add_option("--out", ntk.out)->required();

  std::string sweep_config, sweep_out;
  std::size_t workers = 0;
  std::optional<std::uint64_t> shuffle;
  auto* sw = app.add_subcommand("sweep", "Run a sweep (resumable)");
  sw->add_option("--config", sweep_config)->required();
  sw->add_option("--out-dir", sweep_out)->required();
  sw->add_option("--workers", workers, "0 means hardware concurrency")->capture_default_str();
  sw->add_option("--shuffle-seed", shuffle, "Randomize execution order");

  std::string report_results, report_out;
  auto* rp = app.add_subcommand("report", "Aggregate runs into figure data and gate tables");
  rp->add_option("--results", report_results, "Sweep directory or runs.csv")->required();
  rp->add_option("--out-dir", report_out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*s) return cmd_solve_reference(solve);
    if (*g) return cmd_gradcheck(gc);
    if (*t) return cmd_train(train_config, train_out);
    if (*st) return cmd_stats(stats_runs, stats_setting, stats_model, stats_out);
    if (*n) return cmd_ntk(ntk);
    if (*sw) return cmd_sweep(sweep_config, sweep_out, workers, shuffle);
    if (*rp) return cmd_report(report_results, report_out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
