#include "rguide/guidance.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <mutex>
#include <sstream>

namespace rguide {

namespace {

std::mutex g_sink_mutex;
WarningSink g_sink;  // empty -> stderr

VectorXd combine(const VectorXd& s0, double scale, const VectorXd& direction) {
  return s0 + scale * direction;
}

double efficiency_of_update(const MetricOperatord& m, const VectorXd& delta_s,
                            const VectorXd& update) {
  if (update.isZero(0.0)) return 0.0;
  // grad E = -ds for exact scores, so eta(u) = <ds, u> / |u|_M.
  return guidance_efficiency(m, VectorXd(-delta_s), update);
}

}  // namespace

void set_warning_sink(WarningSink sink) {
  std::lock_guard<std::mutex> lock(g_sink_mutex);
  g_sink = std::move(sink);
}

void emit_warning(const std::string& message) {
  std::lock_guard<std::mutex> lock(g_sink_mutex);
  if (g_sink) {
    g_sink(message);
  } else {
    std::cerr << "[rguide] warning: " << message << "\n";
  }
}

MetricOperatord build_metric(const MetricSpec& spec, const VectorXd& s0, const VectorXd& x,
                             const std::optional<VectorXd>& aux_diagonal) {
  if (!s0.allFinite()) throw NumericError("build_metric: non-finite s0");
  const Eigen::Index d = s0.size();

  const auto resolve_diagonal = [&]() -> VectorXd {
    const std::optional<VectorXd>& src = aux_diagonal ? aux_diagonal : spec.diagonal_weights;
    if (!src) {
      throw ConfigError("build_metric: diagonal metric requires an aux diagonal");
    }
    if (src->size() != d) {
      throw DimensionError("build_metric: aux diagonal dimension mismatch");
    }
    if (!src->allFinite() || (src->array() < 0.0).any()) {
      throw NumericError("build_metric: aux diagonal must be finite and nonnegative");
    }
    return *src + VectorXd::Constant(d, spec.epsilon_diag);
  };

  switch (spec.kind) {
    case MetricKind::Identity:
      return MetricOperatord::identity(d);
    case MetricKind::ScoreAnisotropic: {
      const auto n = stabilized_unit_normal(s0, spec.epsilon_norm);
      return MetricOperatord::rank_one_stabilized(n.vector, spec.lambda_tangent,
                                                  spec.lambda_normal());
    }
    case MetricKind::Radial: {
      const double xn = x.norm();
      if (xn == 0.0) {
        emit_warning("build_metric: radial direction undefined at x = 0, using identity metric");
        return MetricOperatord::identity(d);
      }
      return MetricOperatord::radial_penalty(VectorXd(x / xn), spec.lambda);
    }
    case MetricKind::ScoreAligned: {
      const double sn = s0.norm();
      if (sn == 0.0) {
        // I + lambda * 0 = I: the zero-score limit of the penalty.
        return MetricOperatord::identity(d);
      }
      const double lambda =
          spec.project ? std::numeric_limits<double>::infinity() : spec.lambda;
      return MetricOperatord::score_aligned_penalty(VectorXd(s0 / sn), lambda);
    }
    case MetricKind::Diagonal:
      return MetricOperatord::diagonal(resolve_diagonal());
    case MetricKind::Composite: {
      const auto n = stabilized_unit_normal(s0, spec.epsilon_norm);
      return MetricOperatord::composite(resolve_diagonal(), n.vector, spec.lambda_tangent,
                                        spec.lambda_normal());
    }
  }
  throw DomainError("build_metric: unknown metric kind");
}

AutoBetaResult auto_beta(double gamma, const MetricOperatord& metric, const VectorXd& s0,
                         const VectorXd& delta_s, double epsilon,
                         const std::array<double, 2>& clamp) {
  if (!(gamma >= 0.0)) throw DomainError("auto_beta: gamma must be >= 0");
  if (!(epsilon >= 0.0)) throw DomainError("auto_beta: epsilon must be >= 0");
  if (!(clamp[0] <= clamp[1])) throw DomainError("auto_beta: clamp lower must be <= upper");

  AutoBetaResult r;
  r.e_prior = metric_norm(metric, s0);
  const VectorXd v_nat = metric_inverse_apply(metric, delta_s);
  const double e_guid_sq = metric_quadratic_form(metric, v_nat);
  r.e_guid = std::sqrt(e_guid_sq);

  // |M^{-1} ds|_M^2 must equal ds^T M^{-1} ds; both are closed forms, so any
  // disagreement beyond roundoff signals a broken metric.
  const double dual_sq = delta_s.dot(v_nat);
  const double scale = std::max(std::abs(e_guid_sq), std::abs(dual_sq));
  if (scale > 0.0 && std::abs(e_guid_sq - dual_sq) > 1e-10 * scale) {
    std::ostringstream os;
    os << "auto_beta: |M^-1 ds|_M^2 = " << e_guid_sq << " disagrees with ds^T M^-1 ds = "
       << dual_sq;
    throw NumericError(os.str());
  }

  double raw;
  const double denom = r.e_guid + epsilon;
  if (denom == 0.0) {
    raw = r.e_prior == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  } else {
    raw = gamma * r.e_prior / denom;
  }
  r.beta = std::min(std::max(raw, clamp[0]), clamp[1]);
  r.clamped = raw > clamp[1] || raw < clamp[0];
  return r;
}

GuidanceOutcome guide(const GuidanceRule& rule, const VectorXd& s0, const VectorXd& delta_s,
                      const State& state, int step_index, int n_steps) {
  if (s0.size() != delta_s.size()) {
    throw DimensionError("guide: s0 and delta_s dimensions disagree");
  }
  if (!s0.allFinite() || !delta_s.allFinite()) {
    std::ostringstream os;
    os << "guide: non-finite inputs at step " << step_index;
    throw NumericError(os.str());
  }

  GuidanceOutcome out;
  switch (rule.kind) {
    case RuleKind::Cfg:
    case RuleKind::LinearDecayCfg: {
      double w = rule.w;
      if (rule.kind == RuleKind::LinearDecayCfg && n_steps > 1) {
        w = rule.w + (rule.w_end - rule.w) * static_cast<double>(step_index) / (n_steps - 1);
      }
      const auto metric = MetricOperatord::identity(s0.size());
      out.guided_score = combine(s0, w, delta_s);
      out.beta_used = w;
      out.e_prior = s0.norm();
      out.e_guid = delta_s.norm();
      out.efficiency = efficiency_of_update(metric, delta_s, VectorXd(w * delta_s));
      break;
    }
    case RuleKind::Fixed:
    case RuleKind::Penalty: {
      const auto metric = build_metric(rule.metric, s0, state.x);
      const VectorXd v_nat = metric_inverse_apply(metric, delta_s);
      out.guided_score = combine(s0, rule.beta, v_nat);
      out.beta_used = rule.beta;
      // The exact-projection metric has unbounded cost along s0; log the
      // prior energy on its feasible subspace (= |(I - ss^T) s0|) instead.
      out.e_prior = metric.is_projection()
                        ? std::sqrt(metric_inverse_quadratic_form(metric, s0))
                        : metric_norm(metric, s0);
      out.e_guid = metric_norm(metric, v_nat);
      out.efficiency =
          efficiency_of_update(metric, delta_s, VectorXd(rule.beta * v_nat));
      break;
    }
    case RuleKind::Auto: {
      const auto metric = build_metric(rule.metric, s0, state.x);
      if (metric.is_projection()) {
        throw ConfigError(
            "guide: energy balance is undefined under the exact-projection metric; "
            "use a finite lambda");
      }
      const VectorXd v_nat = metric_inverse_apply(metric, delta_s);
      const auto ab = auto_beta(rule.gamma, metric, s0, delta_s, rule.epsilon_auto,
                                rule.beta_clamp);
      out.guided_score = combine(s0, ab.beta, v_nat);
      out.beta_used = ab.beta;
      out.e_prior = ab.e_prior;
      out.e_guid = ab.e_guid;
      out.clamped = ab.clamped;
      out.efficiency = efficiency_of_update(metric, delta_s, VectorXd(ab.beta * v_nat));
      break;
    }
  }

  if (!out.guided_score.allFinite()) {
    std::ostringstream os;
    os << "guide: non-finite guided score at step " << step_index;
    throw NumericError(os.str());
  }
  return out;
}

}  // namespace rguide
