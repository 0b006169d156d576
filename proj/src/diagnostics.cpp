#include "rguide/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rguide {

TrajectorySummary summarize(const TrajectoryRecord& record, const ScoreOracle& oracle) {
  if (!record.complete()) {
    throw DomainError("summarize: incomplete trajectory record");
  }
  if (record.x_final.size() != oracle.dim()) {
    throw DimensionError("summarize: record/oracle dimension mismatch");
  }
  const int n = record.n_steps;
  TrajectorySummary s;

  bool has_dist = true;
  double dist_max = 0.0, dist_sum = 0.0;
  for (const auto& log : record.steps) {
    if (!log.manifold_distance) {
      has_dist = false;
      break;
    }
    dist_max = std::max(dist_max, *log.manifold_distance);
    dist_sum += *log.manifold_distance;
  }
  if (has_dist) {
    s.max_manifold_distance = dist_max;
    s.mean_manifold_distance = dist_sum / static_cast<double>(record.steps.size());
  }

  s.final_conditional_energy = record.steps.back().conditional_energy;
  double auc = 0.0;
  for (int i = 0; i < n; ++i) {
    auc += 0.5 * (record.steps[static_cast<size_t>(i)].conditional_energy +
                  record.steps[static_cast<size_t>(i) + 1].conditional_energy);
  }
  s.energy_auc = auc;

  double eff_sum = 0.0, beta_clamped = 0.0;
  s.beta_series.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto& log = record.steps[static_cast<size_t>(i)];
    eff_sum += log.efficiency;
    s.beta_series.push_back(log.beta_used);
    if (log.clamped) beta_clamped += 1.0;
  }
  s.mean_efficiency = eff_sum / n;
  s.clamped_fraction = beta_clamped / n;
  return s;
}

Stats aggregate(const std::vector<double>& values) {
  Stats st;
  if (values.empty()) return st;
  double sum = 0.0;
  for (double v : values) sum += v;
  st.mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - st.mean) * (v - st.mean);
  st.stddev = values.size() > 1
                  ? std::sqrt(sq / static_cast<double>(values.size() - 1))
                  : 0.0;
  return st;
}

ComparisonResult compare_rules(const ScoreOracle& oracle, const std::vector<GuidanceRule>& rules,
                               const SamplerConfig& config, const std::string& condition, int n,
                               int jobs) {
  if (rules.size() < 2) throw DomainError("compare_rules: need at least 2 rules");
  ComparisonResult result;
  result.batches.reserve(rules.size());
  result.report.per_rule_summaries.resize(rules.size());

  for (size_t r = 0; r < rules.size(); ++r) {
    // Identical seed set per rule: same config (and thus same seed + i).
    BatchResult batch = sample_batch(oracle, rules[r], config, condition, n, jobs);
    RuleAggregate agg;
    agg.rule = rules[r].name;
    agg.n_trajectories = n;
    std::vector<double> v_max, v_mean, v_final, v_auc, v_eff, v_clamped;
    for (int i = 0; i < n; ++i) {
      if (batch.errors[static_cast<size_t>(i)]) {
        ++agg.n_failures;
        continue;
      }
      const auto s = summarize(batch.records[static_cast<size_t>(i)], oracle);
      if (s.max_manifold_distance) {
        v_max.push_back(*s.max_manifold_distance);
        v_mean.push_back(*s.mean_manifold_distance);
      }
      v_final.push_back(s.final_conditional_energy);
      v_auc.push_back(s.energy_auc);
      v_eff.push_back(s.mean_efficiency);
      v_clamped.push_back(s.clamped_fraction);
      result.report.per_rule_summaries[r].push_back(std::move(s));
    }
    agg.has_manifold = !v_max.empty();
    agg.max_manifold_distance = aggregate(v_max);
    agg.mean_manifold_distance = aggregate(v_mean);
    agg.final_conditional_energy = aggregate(v_final);
    agg.energy_auc = aggregate(v_auc);
    agg.mean_efficiency = aggregate(v_eff);
    agg.clamped_fraction = aggregate(v_clamped);
    result.report.aggregates.push_back(std::move(agg));
    result.batches.push_back(std::move(batch));
  }

  for (size_t i = 0; i < rules.size(); ++i) {
    for (size_t j = i + 1; j < rules.size(); ++j) {
      const auto& a = result.report.aggregates[i];
      const auto& b = result.report.aggregates[j];
      PairwiseDelta d;
      d.rule_a = a.rule;
      d.rule_b = b.rule;
      d.d_max_manifold_distance =
          a.max_manifold_distance.mean - b.max_manifold_distance.mean;
      d.d_energy_auc = a.energy_auc.mean - b.energy_auc.mean;
      d.d_final_energy = a.final_conditional_energy.mean - b.final_conditional_energy.mean;
      d.a_dominates_b = d.d_max_manifold_distance <= 0.0 && d.d_energy_auc <= 0.0 &&
                        (d.d_max_manifold_distance < 0.0 || d.d_energy_auc < 0.0);
      result.report.deltas.push_back(std::move(d));
    }
  }
  return result;
}

double calibrate_scalar(const std::function<double(double)>& response, double lo, double hi,
                        double target, double tolerance_rel, int scan_points,
                        int max_iterations) {
  if (!(hi > lo)) throw DomainError("calibrate_scalar: need hi > lo");
  if (scan_points < 2) throw DomainError("calibrate_scalar: need >= 2 scan points");

  std::vector<std::pair<double, double>> scanned;
  for (int i = 0; i < scan_points; ++i) {
    const double s = lo + (hi - lo) * static_cast<double>(i) / (scan_points - 1);
    scanned.emplace_back(s, response(s));
  }
  const auto format_scan = [&scanned]() {
    std::ostringstream os;
    for (const auto& [s, e] : scanned) os << " (scale " << s << " -> " << e << ")";
    return os.str();
  };

  // Responses are deterministic, so a genuine increase means the assumed
  // monotone (nonincreasing) shape does not hold on this bracket.
  const double span = std::abs(scanned.front().second - scanned.back().second);
  for (int i = 1; i < scan_points; ++i) {
    if (scanned[static_cast<size_t>(i)].second >
        scanned[static_cast<size_t>(i - 1)].second + 1e-9 * (1.0 + span)) {
      throw DomainError("calibrate_scalar: response is not monotone on the bracket:" +
                        format_scan());
    }
  }

  const double tol = tolerance_rel * std::max(std::abs(target), 1e-12);
  const double e_lo = scanned.front().second;
  const double e_hi = scanned.back().second;
  if (target > e_lo + tol || target < e_hi - tol) {
    throw DomainError("calibrate_scalar: target " + std::to_string(target) +
                      " outside the bracketed response range:" + format_scan());
  }

  double a = lo, b = hi;
  double best_s = lo, best_err = std::abs(e_lo - target);
  if (std::abs(e_hi - target) < best_err) {
    best_s = hi;
    best_err = std::abs(e_hi - target);
  }
  for (int it = 0; it < max_iterations && best_err > tol; ++it) {
    const double mid = 0.5 * (a + b);
    const double e_mid = response(mid);
    scanned.emplace_back(mid, e_mid);
    if (std::abs(e_mid - target) < best_err) {
      best_s = mid;
      best_err = std::abs(e_mid - target);
    }
    if (e_mid > target) {
      a = mid;
    } else {
      b = mid;
    }
  }
  if (best_err > tol) {
    throw DomainError("calibrate_scalar: failed to reach the target within tolerance:" +
                      format_scan());
  }
  return best_s;
}

GuidanceRule with_scale(const GuidanceRule& rule, double scale) {
  GuidanceRule r = rule;
  switch (rule.kind) {
    case RuleKind::Cfg:
      r.w = scale;
      break;
    case RuleKind::Fixed:
    case RuleKind::Penalty:
      r.beta = scale;
      break;
    case RuleKind::Auto:
      r.gamma = scale;
      break;
    case RuleKind::LinearDecayCfg:
      throw DomainError("with_scale: the linear-decay rule has no single scale parameter");
  }
  return r;
}

double scale_of(const GuidanceRule& rule) {
  switch (rule.kind) {
    case RuleKind::Cfg:
      return rule.w;
    case RuleKind::Fixed:
    case RuleKind::Penalty:
      return rule.beta;
    case RuleKind::Auto:
      return rule.gamma;
    case RuleKind::LinearDecayCfg:
      throw DomainError("scale_of: the linear-decay rule has no single scale parameter");
  }
  throw DomainError("scale_of: unknown rule kind");
}

double mean_final_energy(const ScoreOracle& oracle, const GuidanceRule& rule,
                         const SamplerConfig& config, const std::string& condition, int n,
                         int jobs) {
  const BatchResult batch = sample_batch(oracle, rule, config, condition, n, jobs);
  double sum = 0.0;
  int ok = 0;
  for (int i = 0; i < n; ++i) {
    if (batch.errors[static_cast<size_t>(i)]) continue;
    sum += batch.records[static_cast<size_t>(i)].steps.back().conditional_energy;
    ++ok;
  }
  if (ok == 0) throw NumericError("mean_final_energy: every trajectory in the batch failed");
  return sum / ok;
}

double calibrate_strength(const ScoreOracle& oracle, const GuidanceRule& rule_family,
                          const SamplerConfig& config, const std::string& condition, int n,
                          double target_energy, double tolerance_rel, double scale_lo,
                          double scale_hi, int jobs) {
  // The energy-balanced rule with gamma -> 0 still applies no guidance, so
  // every family's response starts at the unconditional energy.
  const auto response = [&](double scale) {
    return mean_final_energy(oracle, with_scale(rule_family, scale), config, condition, n, jobs);
  };
  return calibrate_scalar(response, scale_lo, scale_hi, target_energy, tolerance_rel);
}

}  // namespace rguide
