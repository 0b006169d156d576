#pragma once

#include <Eigen/Core>

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rguide/errors.hpp"
#include "rguide/forward_process.hpp"

namespace rguide {

using Eigen::VectorXd;

/// Conditional energy E(x,t,c) = -log p_t(c|x) and its spatial gradient,
/// which equals s0 - s_c for exact scores.
struct ConditionalEnergy {
  double value = 0.0;
  VectorXd gradient;
};

/// Exact scores and log-densities of a synthetic distribution at every noise
/// level of its forward process. Implementations are immutable and all
/// evaluations are pure, so oracles may be shared across threads.
class ScoreOracle {
public:
  virtual ~ScoreOracle() = default;

  virtual Eigen::Index dim() const = 0;
  virtual const ForwardProcess& process() const = 0;

  virtual double log_density(const VectorXd& x, double t) const = 0;
  virtual VectorXd score_unconditional(const VectorXd& x, double t) const = 0;

  virtual double log_density_conditional(const VectorXd& x, double t,
                                         const std::string& label) const = 0;
  virtual VectorXd score_conditional(const VectorXd& x, double t,
                                     const std::string& label) const = 0;

  /// log p_t(c | x), computed in log space (never -inf for finite x).
  virtual double log_condition_prob(const VectorXd& x, double t,
                                    const std::string& label) const = 0;

  /// p(c): total weight of the labeled components.
  virtual double condition_prior(const std::string& label) const = 0;

  virtual std::vector<std::string> labels() const = 0;

  /// Distance to the data manifold, when the oracle defines one.
  virtual std::optional<double> manifold_distance(const VectorXd& x) const {
    (void)x;
    return std::nullopt;
  }

  /// Delta s = s_c - s0; equals -grad E for exact scores.
  VectorXd conditional_increment(const VectorXd& x, double t, const std::string& label) const;

  ConditionalEnergy conditional_energy(const VectorXd& x, double t,
                                       const std::string& label) const;
};

struct MixtureComponent {
  double weight = 1.0;
  VectorXd mean;
  VectorXd cov_diag;  // diagonal of the clean covariance
  std::string label;
};

/// Gaussian mixture whose noised marginal stays a Gaussian mixture:
/// component k at time t is N(alpha_t mu_k, alpha_t^2 Sigma_k + sigma_t^2 I).
class GaussianMixtureOracle final : public ScoreOracle {
public:
  GaussianMixtureOracle(std::vector<MixtureComponent> components, ForwardProcess process);

  Eigen::Index dim() const override { return dim_; }
  const ForwardProcess& process() const override { return process_; }

  double log_density(const VectorXd& x, double t) const override;
  VectorXd score_unconditional(const VectorXd& x, double t) const override;
  double log_density_conditional(const VectorXd& x, double t,
                                 const std::string& label) const override;
  VectorXd score_conditional(const VectorXd& x, double t,
                             const std::string& label) const override;
  double log_condition_prob(const VectorXd& x, double t, const std::string& label) const override;
  double condition_prior(const std::string& label) const override;
  std::vector<std::string> labels() const override;

  const std::vector<MixtureComponent>& components() const { return components_; }

private:
  std::vector<Eigen::Index> labeled_indices(const std::string& label) const;
  // Per-component log(w_k) + log N_k(x; t) into 'out' for the given subset.
  void component_log_terms(const VectorXd& x, double t,
                           const std::vector<Eigen::Index>& subset,
                           std::vector<double>& out) const;
  VectorXd score_of_subset(const VectorXd& x, double t,
                           const std::vector<Eigen::Index>& subset) const;
  double log_marginal_of_subset(const VectorXd& x, double t,
                                const std::vector<Eigen::Index>& subset) const;

  std::vector<MixtureComponent> components_;
  ForwardProcess process_;
  Eigen::Index dim_ = 0;
  std::vector<double> log_weights_;
  std::vector<Eigen::Index> all_indices_;
};

struct SpiralParams {
  double a = 0.35;
  double b = 0.18;
  double theta_min = 3.14159265358979323846;
  double theta_max = 6.0 * 3.14159265358979323846;
  double tube_std = 0.07;
  int n_anchors = 96;
  double condition_arc_fraction = 0.15;  // final fraction of arc length carries the label
  int distance_grid = 4096;
  std::string condition_label = "cond";
  std::string base_label = "base";
};

/// High-density tube around the 3D curve c(th) = (a th cos th, a th sin th, b th),
/// realized as a Gaussian mixture with anchors equally spaced in arc length.
/// Anchors in the final condition_arc_fraction of arc length carry the
/// condition label. Also defines a grid-based distance to the center curve.
class SpiralManifoldOracle final : public ScoreOracle {
public:
  SpiralManifoldOracle(SpiralParams params, ForwardProcess process);

  Eigen::Index dim() const override { return 3; }
  const ForwardProcess& process() const override { return mixture_->process(); }

  double log_density(const VectorXd& x, double t) const override {
    return mixture_->log_density(x, t);
  }
  VectorXd score_unconditional(const VectorXd& x, double t) const override {
    return mixture_->score_unconditional(x, t);
  }
  double log_density_conditional(const VectorXd& x, double t,
                                 const std::string& label) const override {
    return mixture_->log_density_conditional(x, t, label);
  }
  VectorXd score_conditional(const VectorXd& x, double t,
                             const std::string& label) const override {
    return mixture_->score_conditional(x, t, label);
  }
  double log_condition_prob(const VectorXd& x, double t,
                            const std::string& label) const override {
    return mixture_->log_condition_prob(x, t, label);
  }
  double condition_prior(const std::string& label) const override {
    return mixture_->condition_prior(label);
  }
  std::vector<std::string> labels() const override { return mixture_->labels(); }

  std::optional<double> manifold_distance(const VectorXd& x) const override;

  /// Distance evaluated on a grid of the given resolution (used by the
  /// fine-grid cross-check).
  double manifold_distance_with_grid(const VectorXd& x, int grid_points) const;

  /// Worst-case gap between the grid distance and the true curve distance:
  /// (max curve speed) * (grid spacing) / 2.
  double grid_tolerance() const;

  Eigen::Vector3d curve_point(double theta) const;
  /// Anchor parameters (equally spaced in arc length).
  const std::vector<double>& anchor_thetas() const { return anchor_thetas_; }
  double total_arc_length() const { return total_arc_length_; }
  const SpiralParams& params() const { return params_; }
  const GaussianMixtureOracle& mixture() const { return *mixture_; }

private:
  double curve_speed(double theta) const;

  SpiralParams params_;
  std::unique_ptr<GaussianMixtureOracle> mixture_;
  std::vector<double> anchor_thetas_;
  double total_arc_length_ = 0.0;
  Eigen::Matrix3Xd grid_points_;
};

}  // namespace rguide
