#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rguide/sampler.hpp"

namespace rguide {

/// Scalar summary of one trajectory. Manifold-distance fields are present
/// only when the oracle defines a manifold.
struct TrajectorySummary {
  std::optional<double> max_manifold_distance;
  std::optional<double> mean_manifold_distance;
  double final_conditional_energy = 0.0;
  double energy_auc = 0.0;  // trapezoid of conditional energy over step index
  double mean_efficiency = 0.0;
  std::vector<double> beta_series;  // one entry per applied step
  double clamped_fraction = 0.0;
};

TrajectorySummary summarize(const TrajectoryRecord& record, const ScoreOracle& oracle);

struct Stats {
  double mean = 0.0;
  double stddev = 0.0;
};

Stats aggregate(const std::vector<double>& values);

struct RuleAggregate {
  std::string rule;
  int n_trajectories = 0;
  int n_failures = 0;
  Stats max_manifold_distance;
  Stats mean_manifold_distance;
  Stats final_conditional_energy;
  Stats energy_auc;
  Stats mean_efficiency;
  Stats clamped_fraction;
  bool has_manifold = false;
};

struct PairwiseDelta {
  std::string rule_a;
  std::string rule_b;
  double d_max_manifold_distance = 0.0;  // mean(a) - mean(b)
  double d_energy_auc = 0.0;
  double d_final_energy = 0.0;
  // a stays at least as close to the manifold and reduces energy at least as
  // fast, strictly better on one of the two.
  bool a_dominates_b = false;
};

struct ComparisonReport {
  std::vector<RuleAggregate> aggregates;
  std::vector<PairwiseDelta> deltas;  // ordered pairs (i, j), i < j in input order
  std::vector<std::vector<TrajectorySummary>> per_rule_summaries;
};

struct ComparisonResult {
  ComparisonReport report;
  std::vector<BatchResult> batches;  // one per rule, in input order
};

/// Runs one batch per rule with identical seed sets (paired comparison) and
/// aggregates the summaries.
ComparisonResult compare_rules(const ScoreOracle& oracle, const std::vector<GuidanceRule>& rules,
                               const SamplerConfig& config, const std::string& condition, int n,
                               int jobs = 1);

/// Scans [lo, hi] for monotonicity (nonincreasing within slack), then bisects
/// a scalar response until |f(s) - target| <= tolerance_rel * |target|.
/// Raises DomainError listing the scanned values when the bracket does not
/// contain the target or the response is not monotone.
double calibrate_scalar(const std::function<double(double)>& response, double lo, double hi,
                        double target, double tolerance_rel, int scan_points = 5,
                        int max_iterations = 60);

/// Identifies the rule's scale parameter (w for CFG, beta for fixed-strength
/// rules, gamma for the energy-balanced rule) and returns a copy with the
/// scale replaced.
GuidanceRule with_scale(const GuidanceRule& rule, double scale);
double scale_of(const GuidanceRule& rule);

/// Mean final conditional energy of a batch run at the given scale.
double mean_final_energy(const ScoreOracle& oracle, const GuidanceRule& rule,
                         const SamplerConfig& config, const std::string& condition, int n,
                         int jobs = 1);

/// Bisects the rule's scale parameter until the batch-mean final conditional
/// energy matches target_energy within tolerance_rel.
double calibrate_strength(const ScoreOracle& oracle, const GuidanceRule& rule_family,
                          const SamplerConfig& config, const std::string& condition, int n,
                          double target_energy, double tolerance_rel, double scale_lo,
                          double scale_hi, int jobs = 1);

}  // namespace rguide
