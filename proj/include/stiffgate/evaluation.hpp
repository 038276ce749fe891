#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "stiffgate/dynamics.hpp"
#include "stiffgate/models.hpp"

namespace stiffgate::evaluation {

/// atan2(sin(theta - theta_ref), cos(theta - theta_ref)), in (-pi, pi].
double wrap_angle_diff(double theta, double theta_ref);

struct MetricResult {
  double rel_l2_u = 0.0;
  double max_ae_u = 0.0;
  std::size_t n_eval = 0;
};

/// e(t) = [r - r_ref, wrapped(theta - theta_ref)] on a shared grid.
/// rel_l2_u = |e| / |u_ref| with root-sum-of-squares over the grid and
/// u_ref = [r_ref, theta_ref] (raw, unwrapped angle); max_ae_u = max_t |e(t)|_2.
/// Throws std::invalid_argument when the grids differ.
MetricResult metrics(const dynamics::Trajectory& pred, const dynamics::Trajectory& ref);

/// Content address of a reference trajectory.
std::string reference_cache_key(const dynamics::PhysicsParams& physics, const models::ICSpec& ic,
                                std::size_t n_eval);

/// Reference trajectories on the uniform evaluation grid, memoized in memory
/// and optionally on disk (one CSV per key). Safe for concurrent use.
class ReferenceCache {
 public:
  explicit ReferenceCache(std::optional<std::filesystem::path> dir = std::nullopt);
  /// Directory from STIFFGATE_CACHE, if set.
  static ReferenceCache from_environment();

  std::shared_ptr<const dynamics::Trajectory> get(const dynamics::PhysicsParams& physics,
                                                  const models::ICSpec& ic, std::size_t n_eval);

  std::size_t solves() const { return solves_; }
  const std::optional<std::filesystem::path>& directory() const { return dir_; }

 private:
  std::optional<std::filesystem::path> dir_;
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<const dynamics::Trajectory>> memo_;
  std::size_t solves_ = 0;
};

void write_trajectory_csv(const std::filesystem::path& path, const dynamics::Trajectory& traj,
                          const dynamics::PhysicsParams* physics_for_energy = nullptr);
dynamics::Trajectory read_trajectory_csv(const std::filesystem::path& path);

}  // namespace stiffgate::evaluation
