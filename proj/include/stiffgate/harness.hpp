#pragma once

// Experiment orchestration: run configs and their content address, sweep
// expansion, execution into per-run directories, the runs.csv index, and the
// aggregated outputs (per-cell means with CIs, figure data, gate table).

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "stiffgate/dynamics.hpp"
#include "stiffgate/evaluation.hpp"
#include "stiffgate/kernels.hpp"
#include "stiffgate/models.hpp"
#include "stiffgate/stats.hpp"
#include "stiffgate/training.hpp"

namespace stiffgate::harness {

using json = nlohmann::json;

/// Full configuration of one training run.
struct RunSpec {
  models::TrunkKind model = models::TrunkKind::AdaptiveFourier;
  models::GateKind gate = models::GateKind::Exponential;
  dynamics::PhysicsParams physics;
  models::ICSpec ic;
  training::TrainConfig train;
  std::size_t n_eval = 2000;

  void validate() const;
  /// 128-bit FNV-1a of the canonical JSON form; 32 hex characters.
  std::string run_id() const;
};

json to_json(const RunSpec& spec);
/// Missing keys keep their defaults; unknown keys are rejected.
RunSpec run_spec_from_json(const json& j);

/// Strict ordering by (model, gate, k, lambda_ic, seed, run_id).
bool run_order(const RunSpec& a, const RunSpec& b);

/// Cartesian products over models x gates x k x lambda_ic x seeds, one per
/// block, merged, sorted with run_order and deduplicated by run_id.
///
/// JSON keys (top level, or per entry of "blocks" where unset keys inherit
/// from the top level): models, gates, k_values, lambda_ic_values, seeds
/// (list, or an integer n meaning 0..n-1), seeds_by_k (object mapping k to a
/// seed list or count, overriding seeds), physics, ic, training, n_eval.
std::vector<RunSpec> expand_sweep(const json& sweep);

enum class RunStatus { Ok, Aborted };
std::string_view to_string(RunStatus status);

struct RunRecord {
  std::string run_id;
  std::string model;
  std::string gate;
  double k = 0.0;
  double lambda_ic = 0.0;
  long long seed = 0;
  double rel_l2_u = 0.0;  // NaN unless ok
  double max_ae_u = 0.0;  // NaN unless ok
  double final_loss = 0.0;
  RunStatus status = RunStatus::Ok;
  double wall_time = 0.0;  // seconds
};

struct RunOutcome {
  RunRecord record;
  training::TrainResult train;
  std::optional<evaluation::MetricResult> metrics;
  std::string error;
};

/// Trains, evaluates against the cached reference and, when run_dir is set,
/// writes manifest.json, loss_curve.csv, params.bin and (ok runs only)
/// metrics.json into it. Non-finite training or evaluation yields an aborted
/// record rather than an exception.
RunOutcome execute_run(const RunSpec& spec, evaluation::ReferenceCache& cache,
                       const std::optional<std::filesystem::path>& run_dir,
                       const kernels::KernelTable& table = kernels::active());

/// Little-endian float64 values, no header.
void write_params_bin(const std::filesystem::path& path, std::span<const double> values);
std::vector<double> read_params_bin(const std::filesystem::path& path);

// ---- runs.csv -----------------------------------------------------------------

inline constexpr const char* kRunsHeader =
    "run_id,model,gate,k,lambda_ic,seed,rel_l2_u,max_ae_u,final_loss,status,wall_time";

std::string format_record(const RunRecord& rec);
/// Rows of runs.csv; a run_id listed twice keeps its last row.
std::vector<RunRecord> read_runs_csv(const std::filesystem::path& path);

/// Appends records under an in-process mutex and an exclusive file lock.
class RunsWriter {
 public:
  explicit RunsWriter(std::filesystem::path path);
  void append(const RunRecord& rec);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::mutex mutex_;
};

struct SweepOptions {
  std::size_t workers = 0;  // 0: hardware concurrency
  /// Execution order is shuffled with this seed when set (results must not care).
  std::optional<std::uint64_t> shuffle_seed;
  std::function<void(const RunRecord&, std::size_t done, std::size_t total)> on_done;
};

struct SweepSummary {
  std::size_t planned = 0;
  std::size_t skipped = 0;  // already present in runs.csv
  std::size_t ok = 0;
  std::size_t aborted = 0;
};

/// Executes every run not yet listed in <out_dir>/runs.csv; run directories go
/// to <out_dir>/runs/<run_id>/.
SweepSummary run_sweep(const std::vector<RunSpec>& runs, const std::filesystem::path& out_dir,
                       evaluation::ReferenceCache& cache, const SweepOptions& options = {});

// ---- aggregation ----------------------------------------------------------------

struct Cell {
  std::string model;
  std::string gate;
  double k = 0.0;
  double lambda_ic = 0.0;
  std::size_t n = 0;          // ok records
  std::size_t n_aborted = 0;
  stats::MeanCI rel_l2_u;
  stats::MeanCI max_ae_u;
};

struct CellTable {
  std::vector<Cell> cells;  // sorted by (lambda_ic, model, gate, k)
  std::vector<std::string> warnings;
  std::size_t n_aborted = 0;
};

/// Groups ok records by (model, gate, k, lambda_ic). Cells with fewer than two
/// ok records are left out and reported in warnings.
CellTable aggregate(std::span<const RunRecord> records);

/// Variant names: all_models, noBaselineLinear, spectralOnly.
bool variant_keeps(std::string_view variant, const Cell& cell);
inline constexpr std::array<std::string_view, 3> kFigureVariants{"all_models", "noBaselineLinear",
                                                                 "spectralOnly"};

/// Writes <metric>__<variant>.csv for both metrics and every variant. With
/// more than one lambda_ic in the table each value gets a lamIC<v>/ subdir.
/// Returns the files written.
std::vector<std::filesystem::path> emit_figure_data(const CellTable& table,
                                                    const std::filesystem::path& out_dir);

std::string setting_label(double lambda_ic);  // "lIC50"
double parse_setting(std::string_view setting);

/// Gate comparison rows (exp = A, linear = B) for one setting, over every k
/// where the model has runs at that lambda_ic.
std::vector<stats::StatTestResult> gate_table(std::span<const RunRecord> records,
                                              std::string_view setting,
                                              std::string_view model = "adaptive_fourier",
                                              std::vector<std::string>* warnings = nullptr);

void write_gate_table_csv(const std::filesystem::path& path,
                          std::span<const stats::StatTestResult> rows);

}  // namespace stiffgate::harness
