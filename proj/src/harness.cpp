#include "stiffgate/harness.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <exception>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <fcntl.h>
#include <sys/file.h>
#include <sys/stat.h>
#include <unistd.h>

#include "stiffgate/hash.hpp"
#include "stiffgate/objective.hpp"
#include "stiffgate/rng.hpp"

namespace stiffgate::harness {

namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_short(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

void check_keys(const json& j, std::string_view where,
                std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw std::invalid_argument(std::string(where) + ": expected an object");
  for (const auto& [key, _] : j.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw std::invalid_argument(std::string(where) + ": unknown key \"" + key + "\"");
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  if constexpr (std::is_unsigned_v<T>) {
    if (!it->is_number_integer() || it->template get<long long>() < 0)
      throw std::invalid_argument(std::string(key) + ": expected a non-negative integer");
  }
  out = it->template get<T>();
}

json physics_json(const dynamics::PhysicsParams& p) {
  return {{"k", p.k},     {"m", p.m},         {"L0", p.L0},       {"g", p.g_grav},
          {"c_r", p.c_r}, {"c_theta", p.c_theta}, {"r_min", p.r_min}, {"T", p.T}};
}

json ic_json(const models::ICSpec& ic) {
  return {{"r0", ic.r0}, {"theta0", ic.theta0}, {"r_dot0", ic.rdot0}, {"theta_dot0", ic.thetadot0}};
}

json training_json(const training::TrainConfig& c) {
  return {{"lambda_phys", c.lambda_phys},
          {"lambda_ic", c.lambda_ic},
          {"n_updates", c.n_updates},
          {"learning_rate", c.learning_rate},
          {"n_coll", c.n_coll},
          {"n_ic", c.n_ic},
          {"seed", c.seed},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"epsilon", c.epsilon},
          {"log_every", c.log_every}};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace

// ---- run specs ------------------------------------------------------------------

void RunSpec::validate() const {
  physics.validate();
  ic.validate(physics.r_min);
  train.validate();
  if (n_eval < 2) throw std::invalid_argument("RunSpec: n_eval must be at least 2");
}

json to_json(const RunSpec& spec) {
  return {{"model", models::to_string(spec.model)},
          {"gate", models::to_string(spec.gate)},
          {"physics", physics_json(spec.physics)},
          {"ic", ic_json(spec.ic)},
          {"training", training_json(spec.train)},
          {"n_eval", spec.n_eval}};
}

std::string RunSpec::run_id() const {
  return fnv1a128_hex("stiffgate-run-v1|" + to_json(*this).dump());
}

RunSpec run_spec_from_json(const json& j) {
  check_keys(j, "run config", {"model", "gate", "physics", "ic", "training", "n_eval"});
  RunSpec s;
  if (j.contains("model")) s.model = models::parse_trunk(j.at("model").get<std::string>());
  if (j.contains("gate")) s.gate = models::parse_gate(j.at("gate").get<std::string>());
  if (const auto it = j.find("physics"); it != j.end()) {
    check_keys(*it, "physics", {"k", "m", "L0", "g", "c_r", "c_theta", "r_min", "T"});
    maybe(*it, "k", s.physics.k);
    maybe(*it, "m", s.physics.m);
    maybe(*it, "L0", s.physics.L0);
    maybe(*it, "g", s.physics.g_grav);
    maybe(*it, "c_r", s.physics.c_r);
    maybe(*it, "c_theta", s.physics.c_theta);
    maybe(*it, "r_min", s.physics.r_min);
    maybe(*it, "T", s.physics.T);
  }
  if (const auto it = j.find("ic"); it != j.end()) {
    check_keys(*it, "ic", {"r0", "theta0", "r_dot0", "theta_dot0"});
    maybe(*it, "r0", s.ic.r0);
    maybe(*it, "theta0", s.ic.theta0);
    maybe(*it, "r_dot0", s.ic.rdot0);
    maybe(*it, "theta_dot0", s.ic.thetadot0);
  }
  if (const auto it = j.find("training"); it != j.end()) {
    check_keys(*it, "training",
               {"lambda_phys", "lambda_ic", "n_updates", "learning_rate", "n_coll", "n_ic", "seed",
                "beta1", "beta2", "epsilon", "log_every"});
    auto& c = s.train;
    maybe(*it, "lambda_phys", c.lambda_phys);
    maybe(*it, "lambda_ic", c.lambda_ic);
    maybe(*it, "n_updates", c.n_updates);
    maybe(*it, "learning_rate", c.learning_rate);
    maybe(*it, "n_coll", c.n_coll);
    maybe(*it, "n_ic", c.n_ic);
    maybe(*it, "seed", c.seed);
    maybe(*it, "beta1", c.beta1);
    maybe(*it, "beta2", c.beta2);
    maybe(*it, "epsilon", c.epsilon);
    maybe(*it, "log_every", c.log_every);
  }
  maybe(j, "n_eval", s.n_eval);
  s.validate();
  return s;
}

bool run_order(const RunSpec& a, const RunSpec& b) {
  const auto key = [](const RunSpec& s) {
    return std::make_tuple(std::string(models::to_string(s.model)),
                           std::string(models::to_string(s.gate)), s.physics.k, s.train.lambda_ic,
                           s.train.seed);
  };
  const auto ka = key(a), kb = key(b);
  if (ka != kb) return ka < kb;
  return a.run_id() < b.run_id();
}

// ---- sweep expansion --------------------------------------------------------------

namespace {

std::vector<long long> parse_seeds(const json& j, std::string_view where) {
  std::vector<long long> seeds;
  if (j.is_number_integer()) {
    const long long n = j.get<long long>();
    if (n <= 0) throw std::invalid_argument(std::string(where) + ": seed count must be positive");
    seeds.resize(static_cast<std::size_t>(n));
    std::iota(seeds.begin(), seeds.end(), 0LL);
  } else if (j.is_array()) {
    for (const auto& v : j) {
      if (!v.is_number_integer() || v.get<long long>() < 0)
        throw std::invalid_argument(std::string(where) + ": seeds must be non-negative integers");
      seeds.push_back(v.get<long long>());
    }
  } else {
    throw std::invalid_argument(std::string(where) + ": expected a seed list or count");
  }
  return seeds;
}

template <typename T>
std::vector<T> required_list(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_array())
    throw std::invalid_argument(std::string("sweep: \"") + key + "\" must be a list");
  auto out = it->get<std::vector<T>>();
  if (out.empty()) throw std::invalid_argument(std::string("sweep: \"") + key + "\" is empty");
  return out;
}

void expand_block(const json& eff, std::vector<RunSpec>& out) {
  json base = json::object();
  for (const char* key : {"physics", "ic", "training", "n_eval"})
    if (eff.contains(key)) base[key] = eff.at(key);
  const RunSpec proto = run_spec_from_json(base);

  const auto model_names = required_list<std::string>(eff, "models");
  const auto gate_names = required_list<std::string>(eff, "gates");
  const auto ks = required_list<double>(eff, "k_values");
  const auto lambdas = required_list<double>(eff, "lambda_ic_values");

  std::optional<std::vector<long long>> seeds;
  if (eff.contains("seeds")) seeds = parse_seeds(eff.at("seeds"), "seeds");
  std::map<double, std::vector<long long>> by_k;
  if (const auto it = eff.find("seeds_by_k"); it != eff.end()) {
    if (!it->is_object()) throw std::invalid_argument("sweep: seeds_by_k must be an object");
    for (const auto& [key, val] : it->items()) {
      std::size_t pos = 0;
      const double k = std::stod(key, &pos);
      if (pos != key.size()) throw std::invalid_argument("sweep: bad k key \"" + key + "\"");
      by_k[k] = parse_seeds(val, "seeds_by_k");
    }
  }

  for (const auto& mname : model_names)
    for (const auto& gname : gate_names)
      for (double k : ks) {
        const auto it = by_k.find(k);
        const std::vector<long long>* seed_list =
            it != by_k.end() ? &it->second : (seeds ? &*seeds : nullptr);
        if (seed_list == nullptr)
          throw std::invalid_argument("sweep: no seeds for k=" + fmt_short(k));
        for (double lam : lambdas)
          for (long long seed : *seed_list) {
            RunSpec s = proto;
            s.model = models::parse_trunk(mname);
            s.gate = models::parse_gate(gname);
            s.physics.k = k;
            s.train.lambda_ic = lam;
            s.train.seed = static_cast<std::uint64_t>(seed);
            s.validate();
            out.push_back(s);
          }
      }
}

}  // namespace

std::vector<RunSpec> expand_sweep(const json& sweep) {
  static const std::initializer_list<std::string_view> kBlockKeys{
      "models", "gates", "k_values", "lambda_ic_values", "seeds", "seeds_by_k",
      "physics", "ic", "training", "n_eval"};
  check_keys(sweep, "sweep",
             {"models", "gates", "k_values", "lambda_ic_values", "seeds", "seeds_by_k", "physics",
              "ic", "training", "n_eval", "blocks", "description"});

  json top = sweep;
  top.erase("blocks");
  top.erase("description");

  std::vector<RunSpec> runs;
  if (const auto it = sweep.find("blocks"); it != sweep.end()) {
    if (!it->is_array() || it->empty())
      throw std::invalid_argument("sweep: blocks must be a non-empty list");
    for (const auto& block : *it) {
      check_keys(block, "sweep block", kBlockKeys);
      json eff = top;
      for (const auto& [key, val] : block.items()) {
        if ((key == "physics" || key == "ic" || key == "training") && eff.contains(key))
          eff[key].merge_patch(val);
        else
          eff[key] = val;
      }
      expand_block(eff, runs);
    }
  } else {
    expand_block(top, runs);
  }

  std::vector<std::pair<std::string, RunSpec>> keyed;
  keyed.reserve(runs.size());
  for (auto& r : runs) keyed.emplace_back(r.run_id(), std::move(r));
  std::sort(keyed.begin(), keyed.end(),
            [](const auto& a, const auto& b) { return run_order(a.second, b.second); });
  std::set<std::string> seen;
  std::vector<RunSpec> out;
  for (auto& [id, spec] : keyed)
    if (seen.insert(id).second) out.push_back(std::move(spec));
  if (out.empty()) throw std::invalid_argument("sweep: empty run set");
  return out;
}

// ---- single run -------------------------------------------------------------------

std::string_view to_string(RunStatus status) {
  return status == RunStatus::Ok ? "ok" : "aborted";
}

void write_params_bin(const fs::path& path, std::span<const double> values) {
  std::string bytes(values.size() * 8, '\0');
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto bits = std::bit_cast<std::uint64_t>(values[i]);
    for (int b = 0; b < 8; ++b) {
      bytes[i * 8 + static_cast<std::size_t>(b)] = static_cast<char>(bits & 0xFF);
      bits >>= 8;
    }
  }
  write_text(path, bytes);
}

std::vector<double> read_params_bin(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() % 8 != 0)
    throw std::runtime_error(path.string() + ": size is not a multiple of 8");
  std::vector<double> out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 7; b >= 0; --b)
      bits = (bits << 8) | static_cast<unsigned char>(bytes[i * 8 + static_cast<std::size_t>(b)]);
    out[i] = std::bit_cast<double>(bits);
  }
  return out;
}

namespace {

void write_run_dir(const fs::path& dir, const RunSpec& spec, const RunOutcome& out,
                   const kernels::KernelTable& table) {
  fs::create_directories(dir);
  const auto lay = models::layout(spec.model);
  json manifest = {
      {"run_id", out.record.run_id},
      {"config", to_json(spec)},
      {"status", to_string(out.record.status)},
      {"n_params", lay.total},
      {"params_layout",
       {{"encoding", "float64 little-endian"},
        {"head_w_offset", lay.head_w},
        {"head_b_offset", lay.head_b},
        {"omega_offset", spec.model == models::TrunkKind::AdaptiveFourier ? json(lay.omega)
                                                                          : json(nullptr)}}},
      {"environment",
       {{"stiffgate_version", kVersion},
        {"compiler", __VERSION__},
        {"kernel_table", std::string(table.name)}}}};
  if (!out.error.empty()) manifest["error"] = out.error;
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");

  std::string curve = "iter,loss,phys_loss,ic_loss\n";
  for (const auto& r : out.train.curve)
    curve += std::to_string(r.iter) + "," + fmt17(r.loss) + "," + fmt17(r.phys) + "," +
             fmt17(r.ic) + "\n";
  write_text(dir / "loss_curve.csv", curve);
  write_params_bin(dir / "params.bin", out.train.params.values());

  if (out.metrics) {
    const json m = {{"rel_l2_u", out.metrics->rel_l2_u},
                    {"max_ae_u", out.metrics->max_ae_u},
                    {"n_eval", out.metrics->n_eval},
                    {"ref_cache_key", evaluation::reference_cache_key(spec.physics, spec.ic,
                                                                      spec.n_eval)}};
    write_text(dir / "metrics.json", m.dump(2) + "\n");
  } else {
    fs::remove(dir / "metrics.json");
  }
}

}  // namespace

RunOutcome execute_run(const RunSpec& spec, evaluation::ReferenceCache& cache,
                       const std::optional<fs::path>& run_dir, const kernels::KernelTable& table) {
  spec.validate();
  const auto start = std::chrono::steady_clock::now();
  RunOutcome out;
  auto& rec = out.record;
  rec.run_id = spec.run_id();
  rec.model = models::to_string(spec.model);
  rec.gate = models::to_string(spec.gate);
  rec.k = spec.physics.k;
  rec.lambda_ic = spec.train.lambda_ic;
  rec.seed = static_cast<long long>(spec.train.seed);
  rec.rel_l2_u = rec.max_ae_u = std::numeric_limits<double>::quiet_NaN();

  const models::PinnModel model(spec.model, spec.gate, spec.ic, spec.physics.r_min);
  out.train = training::train_run(model, spec.physics, spec.train, table);
  rec.final_loss = out.train.final_loss;
  if (out.train.aborted) {
    out.error = out.train.abort_reason;
  } else {
    try {
      const auto ref = cache.get(spec.physics, spec.ic, spec.n_eval);
      training::BatchedObjective obj(model, spec.physics,
                                     {spec.train.lambda_phys, spec.train.lambda_ic}, table);
      dynamics::Trajectory pred{ref->times, obj.predict(out.train.params, ref->times)};
      const auto m = evaluation::metrics(pred, *ref);
      if (!std::isfinite(m.rel_l2_u) || !std::isfinite(m.max_ae_u))
        throw std::runtime_error("non-finite evaluation metrics");
      out.metrics = m;
      rec.rel_l2_u = m.rel_l2_u;
      rec.max_ae_u = m.max_ae_u;
    } catch (const std::exception& e) {
      out.error = std::string("evaluation failed: ") + e.what();
    }
  }
  rec.status = out.metrics ? RunStatus::Ok : RunStatus::Aborted;
  rec.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (run_dir) write_run_dir(*run_dir, spec, out, table);
  return out;
}

// ---- runs.csv -----------------------------------------------------------------------

std::string format_record(const RunRecord& r) {
  const auto num = [](double v) { return std::isfinite(v) ? fmt17(v) : std::string(); };
  char wall[32];
  std::snprintf(wall, sizeof wall, "%.3f", r.wall_time);
  return r.run_id + "," + r.model + "," + r.gate + "," + fmt17(r.k) + "," + fmt17(r.lambda_ic) +
         "," + std::to_string(r.seed) + "," + num(r.rel_l2_u) + "," + num(r.max_ae_u) + "," +
         num(r.final_loss) + "," + std::string(to_string(r.status)) + "," + wall;
}

std::vector<RunRecord> read_runs_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kRunsHeader)
    throw std::runtime_error(path.string() + ": unexpected header");
  std::vector<RunRecord> rows;
  std::map<std::string, std::size_t> index;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 11)
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected 11 fields");
    const auto num = [](const std::string& s) {
      return s.empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(s);
    };
    RunRecord r;
    r.run_id = f[0];
    r.model = f[1];
    r.gate = f[2];
    r.k = std::stod(f[3]);
    r.lambda_ic = std::stod(f[4]);
    r.seed = std::stoll(f[5]);
    r.rel_l2_u = num(f[6]);
    r.max_ae_u = num(f[7]);
    r.final_loss = num(f[8]);
    if (f[9] == "ok")
      r.status = RunStatus::Ok;
    else if (f[9] == "aborted")
      r.status = RunStatus::Aborted;
    else
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": bad status");
    r.wall_time = num(f[10]);
    if (const auto it = index.find(r.run_id); it != index.end()) {
      rows[it->second] = std::move(r);
    } else {
      index.emplace(r.run_id, rows.size());
      rows.push_back(std::move(r));
    }
  }
  return rows;
}

RunsWriter::RunsWriter(fs::path path) : path_(std::move(path)) {}

void RunsWriter::append(const RunRecord& rec) {
  std::lock_guard lock(mutex_);
  const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd < 0) throw std::runtime_error("cannot open " + path_.string());
  if (::flock(fd, LOCK_EX) != 0) {
    ::close(fd);
    throw std::runtime_error("cannot lock " + path_.string());
  }
  struct stat st {};
  ::fstat(fd, &st);
  std::string text = st.st_size == 0 ? std::string(kRunsHeader) + "\n" : std::string();
  text += format_record(rec) + "\n";
  const char* p = text.data();
  std::size_t left = text.size();
  bool ok = true;
  while (left > 0) {
    const ssize_t n = ::write(fd, p, left);
    if (n <= 0) {
      ok = false;
      break;
    }
    p += n;
    left -= static_cast<std::size_t>(n);
  }
  ::flock(fd, LOCK_UN);
  ::close(fd);
  if (!ok) throw std::runtime_error("append failed for " + path_.string());
}

SweepSummary run_sweep(const std::vector<RunSpec>& runs, const fs::path& out_dir,
                       evaluation::ReferenceCache& cache, const SweepOptions& options) {
  fs::create_directories(out_dir / "runs");
  const fs::path runs_csv = out_dir / "runs.csv";
  std::set<std::string> done_ids;
  if (fs::exists(runs_csv))
    for (const auto& r : read_runs_csv(runs_csv)) done_ids.insert(r.run_id);

  SweepSummary summary;
  summary.planned = runs.size();
  std::vector<const RunSpec*> pending;
  for (const auto& r : runs) {
    if (done_ids.count(r.run_id()))
      ++summary.skipped;
    else
      pending.push_back(&r);
  }
  if (options.shuffle_seed) {
    // Fisher-Yates on a counter stream so the order is reproducible too.
    const CounterStream stream(*options.shuffle_seed, StreamPurpose::Collocation);
    for (std::size_t i = pending.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(stream.bits(i) % i);
      std::swap(pending[i - 1], pending[j]);
    }
  }

  RunsWriter writer(runs_csv);
  std::size_t workers = options.workers != 0 ? options.workers
                                             : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, std::max<std::size_t>(pending.size(), 1));

  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::exception_ptr failure;
  std::size_t finished = 0;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= pending.size()) return;
      {
        std::lock_guard lock(mu);
        if (failure) return;
      }
      try {
        const RunSpec& spec = *pending[i];
        const auto out = execute_run(spec, cache, out_dir / "runs" / spec.run_id());
        writer.append(out.record);
        std::lock_guard lock(mu);
        ++finished;
        if (out.record.status == RunStatus::Ok)
          ++summary.ok;
        else
          ++summary.aborted;
        if (options.on_done) options.on_done(out.record, finished, pending.size());
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return summary;
}

// ---- aggregation ----------------------------------------------------------------------

CellTable aggregate(std::span<const RunRecord> records) {
  struct Bucket {
    std::vector<std::pair<long long, std::array<double, 2>>> ok;
    std::size_t aborted = 0;
  };
  using Key = std::tuple<double, std::string, std::string, double>;
  std::map<Key, Bucket> groups;
  CellTable table;
  for (const auto& r : records) {
    auto& b = groups[{r.lambda_ic, r.model, r.gate, r.k}];
    if (r.status == RunStatus::Ok) {
      b.ok.push_back({r.seed, {r.rel_l2_u, r.max_ae_u}});
    } else {
      ++b.aborted;
      ++table.n_aborted;
    }
  }
  for (auto& [key, b] : groups) {
    const auto& [lam, model, gate, k] = key;
    const std::string label = model + "/" + gate + "/k=" + fmt_short(k) + "/lambda_ic=" +
                              fmt_short(lam);
    if (b.aborted > 0)
      table.warnings.push_back(label + ": " + std::to_string(b.aborted) + " aborted run(s) excluded");
    if (b.ok.size() < 2) {
      table.warnings.push_back(label + ": fewer than 2 ok runs, cell skipped");
      continue;
    }
    std::sort(b.ok.begin(), b.ok.end());
    std::vector<double> rel, mae;
    for (const auto& [seed, v] : b.ok) {
      rel.push_back(v[0]);
      mae.push_back(v[1]);
    }
    Cell c;
    c.model = model;
    c.gate = gate;
    c.k = k;
    c.lambda_ic = lam;
    c.n = b.ok.size();
    c.n_aborted = b.aborted;
    c.rel_l2_u = stats::mean_ci95(rel);
    c.max_ae_u = stats::mean_ci95(mae);
    table.cells.push_back(std::move(c));
  }
  return table;
}

bool variant_keeps(std::string_view variant, const Cell& cell) {
  if (variant == "all_models") return true;
  if (variant == "noBaselineLinear") return !(cell.model == "baseline" && cell.gate == "linear");
  if (variant == "spectralOnly") return cell.model != "baseline";
  throw std::invalid_argument("unknown figure variant " + std::string(variant));
}

std::vector<fs::path> emit_figure_data(const CellTable& table, const fs::path& out_dir) {
  std::set<double> lambdas;
  for (const auto& c : table.cells) lambdas.insert(c.lambda_ic);
  std::vector<fs::path> written;
  for (double lam : lambdas) {
    const fs::path dir = lambdas.size() > 1 ? out_dir / ("lamIC" + fmt_short(lam)) : out_dir;
    fs::create_directories(dir);
    for (const char* metric : {"rel_l2_u", "max_ae_u"}) {
      for (std::string_view variant : kFigureVariants) {
        std::string text = "model,gate,k,mean,ci_lo,ci_hi,n\n";
        for (const auto& c : table.cells) {
          if (c.lambda_ic != lam || !variant_keeps(variant, c)) continue;
          const auto& ci = std::string_view(metric) == "rel_l2_u" ? c.rel_l2_u : c.max_ae_u;
          text += c.model + "," + c.gate + "," + fmt17(c.k) + "," + fmt17(ci.mean) + "," +
                  fmt17(ci.lo) + "," + fmt17(ci.hi) + "," + std::to_string(c.n) + "\n";
        }
        const fs::path file = dir / (std::string(metric) + "__" + std::string(variant) + ".csv");
        write_text(file, text);
        written.push_back(file);
      }
    }
  }
  return written;
}

std::string setting_label(double lambda_ic) { return "lIC" + fmt_short(lambda_ic); }

double parse_setting(std::string_view setting) {
  if (setting.substr(0, 3) != "lIC" || setting.size() == 3)
    throw std::invalid_argument("setting must look like lIC<lambda>, got " + std::string(setting));
  const std::string rest(setting.substr(3));
  std::size_t pos = 0;
  const double v = std::stod(rest, &pos);
  if (pos != rest.size() || !(v >= 0))
    throw std::invalid_argument("bad setting " + std::string(setting));
  return v;
}

std::vector<stats::StatTestResult> gate_table(std::span<const RunRecord> records,
                                              std::string_view setting, std::string_view model,
                                              std::vector<std::string>* warnings) {
  stats::ComparisonFamily family;
  family.setting = std::string(setting);
  family.model = std::string(model);
  family.lambda_ic = parse_setting(setting);
  std::set<double> ks;
  std::vector<stats::Observation> obs;
  std::size_t aborted = 0;
  for (const auto& r : records) {
    if (r.model != family.model || r.lambda_ic != family.lambda_ic) continue;
    if (r.status != RunStatus::Ok) {
      ++aborted;
      continue;
    }
    ks.insert(r.k);
    obs.push_back({r.model, r.gate, r.k, r.lambda_ic, r.seed, r.rel_l2_u, r.max_ae_u});
  }
  if (warnings != nullptr && aborted > 0)
    warnings->push_back(std::to_string(aborted) + " aborted run(s) excluded");
  family.k_values.assign(ks.begin(), ks.end());
  return stats::gate_comparison_table(obs, family, warnings);
}

void write_gate_table_csv(const fs::path& path, std::span<const stats::StatTestResult> rows) {
  const auto g = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return std::string(buf);
  };
  std::string text = "setting,k,metric,winner,n,mean_a,mean_b,frac_win,p_raw,p_holm,p_one_sided\n";
  for (const auto& r : rows)
    text += r.setting + "," + fmt_short(r.k) + "," + r.metric + "," + r.winner + "," +
            std::to_string(r.n) + "," + g(r.mean_a) + "," + g(r.mean_b) + "," + g(r.frac_win) +
            "," + g(r.p_raw) + "," + g(r.p_holm) + "," + g(r.p_one_sided) + "\n";
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_text(path, text);
}

}  // namespace stiffgate::harness
