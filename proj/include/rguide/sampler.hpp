#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rguide/errors.hpp"
#include "rguide/forward_process.hpp"
#include "rguide/guidance.hpp"
#include "rguide/oracle.hpp"

namespace rguide {

enum class Integrator { Euler, Heun };

/// Initial-state policy for a trajectory.
struct InitSpec {
  enum class Kind { Prior, Point, Gaussian };
  Kind kind = Kind::Prior;
  VectorXd point;           // Kind::Point
  VectorXd mean;            // Kind::Gaussian (empty -> zero)
  double std_dev = 1.0;     // Kind::Gaussian
};

struct SamplerConfig {
  Integrator integrator = Integrator::Heun;
  int n_steps = 128;
  std::vector<double> custom_time_grid;  // empty -> uniform on [t_min, T]
  double t_min_fraction = 1e-3;          // t_min = fraction * T, avoids score stiffness at 0
  std::uint64_t seed = 0;
  int state_stride = 0;  // 0 -> 1 if dim <= 3 else 10; final state always stored
  InitSpec init;
};

struct StepLog {
  double t = 0.0;
  double beta_used = 0.0;
  double e_prior = 0.0;
  double e_guid = 0.0;
  double efficiency = 0.0;
  double conditional_energy = 0.0;
  std::optional<double> manifold_distance;
  bool clamped = false;
  std::optional<VectorXd> state;  // stored every state_stride steps
};

struct TrajectoryRecord {
  std::vector<StepLog> steps;  // n_steps + 1 entries, one per visited state
  VectorXd x_final;
  double wall_time_s = 0.0;
  std::uint64_t seed = 0;
  int trajectory_index = 0;
  std::string rule_name;
  std::string condition;
  int n_steps = 0;

  bool complete() const {
    return n_steps >= 1 && steps.size() == static_cast<size_t>(n_steps) + 1 &&
           x_final.size() > 0;
  }
};

/// Raised when a trajectory aborts mid-run; carries the partial record.
class SampleError : public Error {
public:
  SampleError(const std::string& what, TrajectoryRecord partial)
      : Error(what), partial(std::move(partial)) {}
  TrajectoryRecord partial;
};

using GuidedScoreFn = std::function<VectorXd(const VectorXd& x, double t)>;

/// Strictly decreasing time grid with n_steps + 1 points from T to t_min.
std::vector<double> make_time_grid(const SamplerConfig& config, const ForwardProcess& process);

/// One integration step of dx/dt = f(x,t) - g^2(t) s(x,t) from t to t_next
/// (t > t_next). Euler evaluates the guided score once at (x, t); Heun also
/// re-evaluates it at the predictor point (full guidance rule included).
VectorXd step(const VectorXd& x, double t, double t_next, const GuidedScoreFn& guided_score,
              const ForwardProcess& process, Integrator integrator);

/// Integrates one guided trajectory, logging per-state diagnostics.
/// Deterministic given (oracle, rule, config, condition). Throws SampleError
/// with the partial record attached if any step produces a non-finite state.
TrajectoryRecord sample(const ScoreOracle& oracle, const GuidanceRule& rule,
                        const SamplerConfig& config, const std::string& condition,
                        const std::optional<VectorXd>& x_init = std::nullopt);

struct BatchResult {
  std::vector<TrajectoryRecord> records;               // index i seeded with seed + i
  std::vector<std::optional<std::string>> errors;      // per-trajectory failure messages
  bool all_ok() const {
    for (const auto& e : errors) {
      if (e) return false;
    }
    return true;
  }
};

/// n independent trajectories with seeds seed + index. Results are identical
/// under serial and parallel execution; per-trajectory failures are collected
/// without aborting the batch.
BatchResult sample_batch(const ScoreOracle& oracle, const GuidanceRule& rule,
                         const SamplerConfig& config, const std::string& condition, int n,
                         int jobs = 1);

}  // namespace rguide
