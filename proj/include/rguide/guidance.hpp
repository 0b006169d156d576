#pragma once

#include <Eigen/Core>

#include <array>
#include <functional>
#include <optional>
#include <string>

#include "rguide/errors.hpp"
#include "rguide/geometry.hpp"

namespace rguide {

using Eigen::VectorXd;

/// Latent state at one sampler step.
struct State {
  VectorXd x;
  double t = 0.0;
  double alpha = 1.0;
  double sigma = 0.0;
};

enum class MetricKind {
  Identity,
  ScoreAnisotropic,  // rank-one metric from the stabilized score direction
  Radial,            // I + lambda (x/|x|)(x/|x|)^T
  ScoreAligned,      // I + lambda s s^T, lambda = inf selects exact projection
  Diagonal,          // diag(aux + eps)
  Composite,         // diagonal-conjugated score-anisotropic metric
};

/// Recipe for building the per-step metric from (s0, x, aux diagonal).
struct MetricSpec {
  MetricKind kind = MetricKind::Identity;
  double lambda_tangent = 1.0;
  double rho = 10.0;  // lambda_normal / lambda_tangent
  double lambda = 1.0;
  bool project = false;  // ScoreAligned with lambda = inf
  double epsilon_norm = 1e-5;
  double epsilon_diag = 1e-6;
  std::optional<VectorXd> diagonal_weights;  // config-supplied aux diagonal

  double lambda_normal() const { return rho * lambda_tangent; }
};

enum class RuleKind {
  Cfg,             // s0 + w ds
  Fixed,           // s0 + beta M^{-1} ds
  Auto,            // energy-balanced beta(t)
  Penalty,         // quadratic-penalty metric with fixed beta (radial / projection)
  LinearDecayCfg,  // CFG with w interpolated linearly over steps
};

struct GuidanceRule {
  RuleKind kind = RuleKind::Cfg;
  std::string name = "cfg";
  double w = 1.0;
  double w_end = 1.0;  // LinearDecayCfg endpoint
  double beta = 1.0;
  double gamma = 1.0;
  MetricSpec metric;
  double epsilon_auto = 1e-6;
  std::array<double, 2> beta_clamp{0.0, 50.0};
};

struct GuidanceOutcome {
  VectorXd guided_score;
  double beta_used = 0.0;
  double e_prior = 0.0;     // |s0|_M
  double e_guid = 0.0;      // |M^{-1} ds|_M
  double efficiency = 0.0;  // eta of the applied update, 0 for a zero update
  bool clamped = false;
};

struct AutoBetaResult {
  double beta = 0.0;
  double e_prior = 0.0;
  double e_guid = 0.0;
  bool clamped = false;
};

/// Hook for non-fatal warnings (e.g. the radial metric's x = 0 fallback).
/// Default sink writes to stderr; tests may capture.
using WarningSink = std::function<void(const std::string&)>;
void set_warning_sink(WarningSink sink);
void emit_warning(const std::string& message);

/// Builds the per-step metric. The score-anisotropic normal is the
/// epsilon-stabilized direction of s0; the radial direction is x/|x| (falling
/// back to the identity metric with a warning at x = 0); diagonal weights are
/// aux + epsilon. aux_diagonal overrides spec.diagonal_weights when present.
MetricOperatord build_metric(const MetricSpec& spec, const VectorXd& s0, const VectorXd& x,
                             const std::optional<VectorXd>& aux_diagonal = std::nullopt);

/// Energy-balanced adaptive strength
///   beta = clamp(gamma |s0|_M / (|M^{-1} ds|_M + epsilon), clamp).
/// Also cross-checks |M^{-1} ds|_M^2 against ds^T M^{-1} ds (relative 1e-10).
AutoBetaResult auto_beta(double gamma, const MetricOperatord& metric, const VectorXd& s0,
                         const VectorXd& delta_s, double epsilon,
                         const std::array<double, 2>& clamp);

/// Applies a guidance rule at one step, producing the guided score and its
/// energy/efficiency diagnostics. step_index indexes the current step in
/// [0, n_steps) and drives the linear-decay schedule.
GuidanceOutcome guide(const GuidanceRule& rule, const VectorXd& s0, const VectorXd& delta_s,
                      const State& state, int step_index, int n_steps);

}  // namespace rguide
