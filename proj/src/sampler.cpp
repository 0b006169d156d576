#include "rguide/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <random>
#include <sstream>
#include <thread>

namespace rguide {

namespace {

VectorXd draw_initial_state(const InitSpec& init, const ForwardProcess& process, double t_start,
                            Eigen::Index dim, std::uint64_t seed) {
  switch (init.kind) {
    case InitSpec::Kind::Point: {
      if (init.point.size() != dim) {
        throw DimensionError("sample: init point dimension mismatch");
      }
      return init.point;
    }
    case InitSpec::Kind::Gaussian: {
      std::mt19937_64 rng(seed);
      std::normal_distribution<double> normal(0.0, 1.0);
      VectorXd x(dim);
      for (Eigen::Index i = 0; i < dim; ++i) x[i] = init.std_dev * normal(rng);
      if (init.mean.size() == dim) x += init.mean;
      return x;
    }
    case InitSpec::Kind::Prior:
    default: {
      std::mt19937_64 rng(seed);
      std::normal_distribution<double> normal(0.0, 1.0);
      const double s = process.prior_std(t_start);
      VectorXd x(dim);
      for (Eigen::Index i = 0; i < dim; ++i) x[i] = s * normal(rng);
      return x;
    }
  }
}

}  // namespace

std::vector<double> make_time_grid(const SamplerConfig& config, const ForwardProcess& process) {
  const double T = process.horizon();
  if (!config.custom_time_grid.empty()) {
    const auto& g = config.custom_time_grid;
    if (g.size() < 2) throw DomainError("make_time_grid: custom grid needs >= 2 points");
    for (size_t i = 0; i < g.size(); ++i) {
      if (!(g[i] > 0.0) || !(g[i] <= T)) {
        throw DomainError("make_time_grid: custom grid times must lie in (0, horizon]");
      }
      if (i > 0 && !(g[i] < g[i - 1])) {
        throw DomainError("make_time_grid: custom grid must be strictly decreasing");
      }
    }
    return g;
  }
  if (config.n_steps < 1) throw DomainError("make_time_grid: n_steps must be >= 1");
  if (!(config.t_min_fraction > 0.0) || !(config.t_min_fraction < 1.0)) {
    throw DomainError("make_time_grid: t_min_fraction must be in (0, 1)");
  }
  const double t_min = config.t_min_fraction * T;
  std::vector<double> grid(static_cast<size_t>(config.n_steps) + 1);
  for (int i = 0; i <= config.n_steps; ++i) {
    grid[static_cast<size_t>(i)] =
        T + (t_min - T) * (static_cast<double>(i) / config.n_steps);
  }
  return grid;
}

VectorXd step(const VectorXd& x, double t, double t_next, const GuidedScoreFn& guided_score,
              const ForwardProcess& process, Integrator integrator) {
  if (!(t > t_next)) throw DomainError("step: need t > t_next");
  process.require_time(t);
  process.require_time(t_next);
  const double h = t_next - t;

  const VectorXd s1 = guided_score(x, t);
  const VectorXd f1 = process.drift_coefficient(t) * x - process.diffusion_sq(t) * s1;
  VectorXd x_next;
  if (integrator == Integrator::Euler) {
    x_next = x + h * f1;
  } else {
    const VectorXd x_pred = x + h * f1;
    const VectorXd s2 = guided_score(x_pred, t_next);
    const VectorXd f2 =
        process.drift_coefficient(t_next) * x_pred - process.diffusion_sq(t_next) * s2;
    x_next = x + 0.5 * h * (f1 + f2);
  }
  if (!x_next.allFinite()) {
    std::ostringstream os;
    os << "step: non-finite state integrating from t = " << t << " to t = " << t_next;
    throw NumericError(os.str());
  }
  return x_next;
}

TrajectoryRecord sample(const ScoreOracle& oracle, const GuidanceRule& rule,
                        const SamplerConfig& config, const std::string& condition,
                        const std::optional<VectorXd>& x_init) {
  const auto start_clock = std::chrono::steady_clock::now();
  const ForwardProcess& process = oracle.process();
  const auto grid = make_time_grid(config, process);
  const int n_steps = static_cast<int>(grid.size()) - 1;
  const Eigen::Index d = oracle.dim();
  const int stride = config.state_stride > 0 ? config.state_stride : (d <= 3 ? 1 : 10);

  TrajectoryRecord rec;
  rec.seed = config.seed;
  rec.rule_name = rule.name;
  rec.condition = condition;
  rec.n_steps = n_steps;
  rec.steps.reserve(static_cast<size_t>(n_steps) + 1);

  VectorXd x = x_init ? *x_init
                      : draw_initial_state(config.init, process, grid[0], d, config.seed);
  if (x.size() != d) throw DimensionError("sample: initial state dimension mismatch");

  const auto guided = [&](const VectorXd& xi, double ti, int index) {
    const VectorXd s0 = oracle.score_unconditional(xi, ti);
    const VectorXd ds = oracle.conditional_increment(xi, ti, condition);
    State st{xi, ti, process.alpha(ti), process.sigma(ti)};
    return guide(rule, s0, ds, st, index, n_steps);
  };

  for (int i = 0; i <= n_steps; ++i) {
    const double t = grid[static_cast<size_t>(i)];
    StepLog log;
    log.t = t;
    try {
      const GuidanceOutcome outcome = guided(x, t, std::min(i, n_steps - 1));
      log.beta_used = outcome.beta_used;
      log.e_prior = outcome.e_prior;
      log.e_guid = outcome.e_guid;
      log.efficiency = outcome.efficiency;
      log.clamped = outcome.clamped;
      log.conditional_energy = oracle.conditional_energy(x, t, condition).value;
      log.manifold_distance = oracle.manifold_distance(x);
      if (i % stride == 0 || i == n_steps) log.state = x;
      rec.steps.push_back(std::move(log));

      if (i < n_steps) {
        const int index = i;
        const GuidedScoreFn fn = [&, index](const VectorXd& xi, double ti) {
          return guided(xi, ti, index).guided_score;
        };
        x = step(x, t, grid[static_cast<size_t>(i) + 1], fn, process,
                 config.integrator);
      }
    } catch (const Error& e) {
      std::ostringstream os;
      os << "sample: trajectory aborted at step " << i << " (t = " << t << "): " << e.what();
      rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                      start_clock)
                            .count();
      throw SampleError(os.str(), std::move(rec));
    }
  }

  rec.x_final = x;
  rec.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_clock).count();
  return rec;
}

BatchResult sample_batch(const ScoreOracle& oracle, const GuidanceRule& rule,
                         const SamplerConfig& config, const std::string& condition, int n,
                         int jobs) {
  if (n < 1) throw DomainError("sample_batch: n must be >= 1");
  BatchResult result;
  result.records.resize(static_cast<size_t>(n));
  result.errors.resize(static_cast<size_t>(n));

  const auto run_one = [&](int i) {
    SamplerConfig c = config;
    c.seed = config.seed + static_cast<std::uint64_t>(i);
    try {
      result.records[static_cast<size_t>(i)] = sample(oracle, rule, c, condition);
    } catch (const SampleError& e) {
      result.records[static_cast<size_t>(i)] = e.partial;
      result.errors[static_cast<size_t>(i)] = e.what();
    }
    result.records[static_cast<size_t>(i)].trajectory_index = i;
  };

  const int workers = std::max(1, std::min(jobs, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) run_one(i);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    std::atomic<int> next{0};
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) run_one(i);
      });
    }
    for (auto& th : pool) th.join();
  }
  return result;
}

}  // namespace rguide
