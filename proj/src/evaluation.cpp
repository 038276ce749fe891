#include "stiffgate/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <unistd.h>

#include "stiffgate/hash.hpp"

namespace stiffgate::evaluation {

double wrap_angle_diff(double theta, double theta_ref) {
  const double d = theta - theta_ref;
  return std::atan2(std::sin(d), std::cos(d));
}

MetricResult metrics(const dynamics::Trajectory& pred, const dynamics::Trajectory& ref) {
  if (pred.size() != ref.size() || pred.states.size() != pred.size() ||
      ref.states.size() != ref.size())
    throw std::invalid_argument("metrics: trajectories have different lengths");
  if (ref.size() == 0) throw std::invalid_argument("metrics: empty trajectory");
  double err_sq = 0.0, ref_sq = 0.0, max_err = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    if (std::fabs(pred.times[i] - ref.times[i]) > 1e-12 * (1.0 + std::fabs(ref.times[i])))
      throw std::invalid_argument("metrics: time grids differ at index " + std::to_string(i));
    const auto& p = pred.states[i];
    const auto& r = ref.states[i];
    const double er = p.r - r.r;
    const double eth = wrap_angle_diff(p.theta, r.theta);
    const double e2 = er * er + eth * eth;
    err_sq += e2;
    ref_sq += r.r * r.r + r.theta * r.theta;
    max_err = std::max(max_err, std::sqrt(e2));
  }
  if (!(ref_sq > 0)) throw std::invalid_argument("metrics: reference trajectory has zero norm");
  return {std::sqrt(err_sq) / std::sqrt(ref_sq), max_err, ref.size()};
}

std::string reference_cache_key(const dynamics::PhysicsParams& p, const models::ICSpec& ic,
                                std::size_t n_eval) {
  std::ostringstream os;
  os.precision(17);
  os << "ref-v1|k=" << p.k << "|m=" << p.m << "|L0=" << p.L0 << "|g=" << p.g_grav
     << "|cr=" << p.c_r << "|ct=" << p.c_theta << "|rmin=" << p.r_min << "|T=" << p.T
     << "|r0=" << ic.r0 << "|th0=" << ic.theta0 << "|rd0=" << ic.rdot0
     << "|thd0=" << ic.thetadot0 << "|n=" << n_eval;
  return fnv1a128_hex(os.str());
}

ReferenceCache::ReferenceCache(std::optional<std::filesystem::path> dir) : dir_(std::move(dir)) {
  if (dir_) std::filesystem::create_directories(*dir_);
}

ReferenceCache ReferenceCache::from_environment() {
  const char* env = std::getenv("STIFFGATE_CACHE");
  if (env != nullptr && *env != '\0') return ReferenceCache(std::filesystem::path(env));
  return ReferenceCache();
}

std::shared_ptr<const dynamics::Trajectory> ReferenceCache::get(
    const dynamics::PhysicsParams& physics, const models::ICSpec& ic, std::size_t n_eval) {
  const std::string key = reference_cache_key(physics, ic, n_eval);
  std::lock_guard lock(mutex_);
  if (auto it = memo_.find(key); it != memo_.end()) return it->second;

  std::shared_ptr<const dynamics::Trajectory> traj;
  const auto file = dir_ ? std::optional(*dir_ / (key + ".csv")) : std::nullopt;
  if (file && std::filesystem::exists(*file)) {
    traj = std::make_shared<const dynamics::Trajectory>(read_trajectory_csv(*file));
  } else {
    const auto grid = dynamics::uniform_grid(physics.T, n_eval);
    traj = std::make_shared<const dynamics::Trajectory>(dynamics::solve_reference(
        {ic.r0, ic.theta0, ic.rdot0, ic.thetadot0}, physics, grid));
    ++solves_;
    if (file) {
      const auto tmp = file->string() + ".tmp" + std::to_string(::getpid()) + "_" +
                       std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
      write_trajectory_csv(tmp, *traj, &physics);
      std::filesystem::rename(tmp, *file);
    }
  }
  memo_.emplace(key, traj);
  return traj;
}

void write_trajectory_csv(const std::filesystem::path& path, const dynamics::Trajectory& traj,
                          const dynamics::PhysicsParams* physics_for_energy) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "t,r,theta,r_dot,theta_dot,energy\n";
  char line[256];
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const auto& s = traj.states[i];
    const double e = physics_for_energy ? dynamics::energy(s, *physics_for_energy) : 0.0;
    std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", traj.times[i], s.r,
                  s.theta, s.r_dot, s.theta_dot, e);
    out << line;
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

dynamics::Trajectory read_trajectory_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("t,r,theta,r_dot,theta_dot", 0) != 0)
    throw std::runtime_error("unexpected trajectory header in " + path.string());
  dynamics::Trajectory traj;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    double v[5];
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf", &v[0], &v[1], &v[2], &v[3], &v[4]) != 5)
      throw std::runtime_error("malformed trajectory row in " + path.string());
    traj.times.push_back(v[0]);
    traj.states.push_back({v[1], v[2], v[3], v[4]});
  }
  traj.validate();
  return traj;
}

}  // namespace stiffgate::evaluation
