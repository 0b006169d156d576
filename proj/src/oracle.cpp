#include "rguide/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace rguide {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454836;

double log_sum_exp(const std::vector<double>& terms) {
  const double m = *std::max_element(terms.begin(), terms.end());
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - m);
  return m + std::log(acc);
}

}  // namespace

VectorXd ScoreOracle::conditional_increment(const VectorXd& x, double t,
                                            const std::string& label) const {
  return score_conditional(x, t, label) - score_unconditional(x, t);
}

ConditionalEnergy ScoreOracle::conditional_energy(const VectorXd& x, double t,
                                                  const std::string& label) const {
  ConditionalEnergy e;
  e.value = -log_condition_prob(x, t, label);
  e.gradient = score_unconditional(x, t) - score_conditional(x, t, label);
  return e;
}

GaussianMixtureOracle::GaussianMixtureOracle(std::vector<MixtureComponent> components,
                                             ForwardProcess process)
    : components_(std::move(components)), process_(process) {
  if (components_.empty()) {
    throw DomainError("GaussianMixtureOracle: need at least one component");
  }
  dim_ = components_.front().mean.size();
  if (dim_ < 1) throw DomainError("GaussianMixtureOracle: zero-dimensional mean");
  double total = 0.0;
  for (auto& c : components_) {
    if (!(c.weight > 0.0)) throw DomainError("GaussianMixtureOracle: weights must be > 0");
    if (c.mean.size() != dim_) {
      throw DimensionError("GaussianMixtureOracle: inconsistent component dimensions");
    }
    if (c.cov_diag.size() == 0) {
      c.cov_diag = VectorXd::Ones(dim_);
    } else if (c.cov_diag.size() == 1 && dim_ > 1) {
      c.cov_diag = VectorXd::Constant(dim_, c.cov_diag[0]);
    } else if (c.cov_diag.size() != dim_) {
      throw DimensionError("GaussianMixtureOracle: covariance diagonal size mismatch");
    }
    if ((c.cov_diag.array() <= 0.0).any()) {
      throw DomainError("GaussianMixtureOracle: covariance diagonal must be > 0");
    }
    if (!c.mean.allFinite() || !c.cov_diag.allFinite()) {
      throw NumericError("GaussianMixtureOracle: non-finite component parameters");
    }
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    std::ostringstream os;
    os << "GaussianMixtureOracle: weights must sum to 1 (got " << total << ")";
    throw DomainError(os.str());
  }
  log_weights_.reserve(components_.size());
  all_indices_.resize(components_.size());
  std::iota(all_indices_.begin(), all_indices_.end(), Eigen::Index{0});
  for (const auto& c : components_) log_weights_.push_back(std::log(c.weight));
}

std::vector<Eigen::Index> GaussianMixtureOracle::labeled_indices(const std::string& label) const {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(components_.size()); ++k) {
    if (components_[static_cast<size_t>(k)].label == label) idx.push_back(k);
  }
  if (idx.empty()) {
    std::ostringstream os;
    os << "GaussianMixtureOracle: unknown label '" << label << "'; known labels:";
    for (const auto& l : labels()) os << " '" << l << "'";
    throw DomainError(os.str());
  }
  return idx;
}

void GaussianMixtureOracle::component_log_terms(const VectorXd& x, double t,
                                                const std::vector<Eigen::Index>& subset,
                                                std::vector<double>& out) const {
  process_.require_time(t);
  if (x.size() != dim_) throw DimensionError("GaussianMixtureOracle: input dimension mismatch");
  if (!x.allFinite()) throw NumericError("GaussianMixtureOracle: non-finite input");
  const double a = process_.alpha(t);
  const double s2 = process_.sigma_sq(t);
  out.clear();
  out.reserve(subset.size());
  for (Eigen::Index k : subset) {
    const auto& c = components_[static_cast<size_t>(k)];
    double quad = 0.0;
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < dim_; ++i) {
      const double var = a * a * c.cov_diag[i] + s2;
      const double r = x[i] - a * c.mean[i];
      quad += r * r / var;
      logdet += std::log(var);
    }
    out.push_back(log_weights_[static_cast<size_t>(k)] -
                  0.5 * (quad + logdet + static_cast<double>(dim_) * kLogTwoPi));
  }
}

double GaussianMixtureOracle::log_marginal_of_subset(
    const VectorXd& x, double t, const std::vector<Eigen::Index>& subset) const {
  std::vector<double> terms;
  component_log_terms(x, t, subset, terms);
  return log_sum_exp(terms);
}

VectorXd GaussianMixtureOracle::score_of_subset(const VectorXd& x, double t,
                                                const std::vector<Eigen::Index>& subset) const {
  std::vector<double> terms;
  component_log_terms(x, t, subset, terms);
  const double m = *std::max_element(terms.begin(), terms.end());
  double denom = 0.0;
  VectorXd score = VectorXd::Zero(dim_);
  const double a = process_.alpha(t);
  const double s2 = process_.sigma_sq(t);
  for (size_t j = 0; j < subset.size(); ++j) {
    const auto& c = components_[static_cast<size_t>(subset[j])];
    const double r = std::exp(terms[j] - m);
    denom += r;
    // r * grad log N_k = r * (-(x - a mu) / var), accumulated componentwise
    for (Eigen::Index i = 0; i < dim_; ++i) {
      const double var = a * a * c.cov_diag[i] + s2;
      score[i] -= r * (x[i] - a * c.mean[i]) / var;
    }
  }
  score /= denom;
  return score;
}

double GaussianMixtureOracle::log_density(const VectorXd& x, double t) const {
  return log_marginal_of_subset(x, t, all_indices_);
}

VectorXd GaussianMixtureOracle::score_unconditional(const VectorXd& x, double t) const {
  return score_of_subset(x, t, all_indices_);
}

double GaussianMixtureOracle::log_density_conditional(const VectorXd& x, double t,
                                                      const std::string& label) const {
  const auto idx = labeled_indices(label);
  return log_marginal_of_subset(x, t, idx) - std::log(condition_prior(label));
}

VectorXd GaussianMixtureOracle::score_conditional(const VectorXd& x, double t,
                                                  const std::string& label) const {
  return score_of_subset(x, t, labeled_indices(label));
}

double GaussianMixtureOracle::log_condition_prob(const VectorXd& x, double t,
                                                 const std::string& label) const {
  const auto idx = labeled_indices(label);
  return log_marginal_of_subset(x, t, idx) - log_marginal_of_subset(x, t, all_indices_);
}

double GaussianMixtureOracle::condition_prior(const std::string& label) const {
  double w = 0.0;
  for (const auto& c : components_) {
    if (c.label == label) w += c.weight;
  }
  if (w == 0.0) labeled_indices(label);  // raises the unknown-label error
  return w;
}

std::vector<std::string> GaussianMixtureOracle::labels() const {
  std::vector<std::string> out;
  for (const auto& c : components_) {
    if (std::find(out.begin(), out.end(), c.label) == out.end()) out.push_back(c.label);
  }
  return out;
}

SpiralManifoldOracle::SpiralManifoldOracle(SpiralParams params, ForwardProcess process)
    : params_(std::move(params)) {
  if (!(params_.a > 0.0) || !(params_.b >= 0.0)) {
    throw DomainError("SpiralManifoldOracle: need a > 0 and b >= 0");
  }
  if (!(params_.theta_max > params_.theta_min)) {
    throw DomainError("SpiralManifoldOracle: need theta_max > theta_min");
  }
  if (!(params_.tube_std > 0.0)) throw DomainError("SpiralManifoldOracle: tube_std must be > 0");
  if (params_.n_anchors < 2) throw DomainError("SpiralManifoldOracle: need at least 2 anchors");
  if (params_.distance_grid < 8) {
    throw DomainError("SpiralManifoldOracle: distance_grid too coarse");
  }
  if (!(params_.condition_arc_fraction > 0.0) || !(params_.condition_arc_fraction < 1.0)) {
    throw DomainError("SpiralManifoldOracle: condition_arc_fraction must be in (0,1)");
  }
  if (params_.condition_label == params_.base_label) {
    throw DomainError("SpiralManifoldOracle: condition and base labels must differ");
  }

  // Cumulative arc length on a fine quadrature grid, inverted by linear
  // interpolation to place anchors equally spaced in arc length.
  const int quad_n = 20000;
  std::vector<double> thetas(quad_n + 1), arc(quad_n + 1, 0.0);
  const double dth = (params_.theta_max - params_.theta_min) / quad_n;
  for (int i = 0; i <= quad_n; ++i) thetas[static_cast<size_t>(i)] = params_.theta_min + i * dth;
  for (int i = 1; i <= quad_n; ++i) {
    const double mid_speed =
        0.5 * (curve_speed(thetas[static_cast<size_t>(i - 1)]) +
               curve_speed(thetas[static_cast<size_t>(i)]));
    arc[static_cast<size_t>(i)] = arc[static_cast<size_t>(i - 1)] + mid_speed * dth;
  }
  total_arc_length_ = arc.back();

  const int n = params_.n_anchors;
  anchor_thetas_.resize(static_cast<size_t>(n));
  size_t cursor = 0;
  for (int j = 0; j < n; ++j) {
    const double target = total_arc_length_ * static_cast<double>(j) / (n - 1);
    while (cursor + 1 < arc.size() && arc[cursor + 1] < target) ++cursor;
    const size_t hi = std::min(cursor + 1, arc.size() - 1);
    const double seg = arc[hi] - arc[cursor];
    const double frac = seg > 0.0 ? (target - arc[cursor]) / seg : 0.0;
    anchor_thetas_[static_cast<size_t>(j)] =
        thetas[cursor] + frac * (thetas[hi] - thetas[cursor]);
  }

  const double cond_start = total_arc_length_ * (1.0 - params_.condition_arc_fraction);
  std::vector<MixtureComponent> comps;
  comps.reserve(static_cast<size_t>(n));
  for (int j = 0; j < n; ++j) {
    const double s_j = total_arc_length_ * static_cast<double>(j) / (n - 1);
    MixtureComponent c;
    c.weight = 1.0 / n;
    c.mean = curve_point(anchor_thetas_[static_cast<size_t>(j)]);
    c.cov_diag = VectorXd::Constant(3, params_.tube_std * params_.tube_std);
    c.label = s_j >= cond_start ? params_.condition_label : params_.base_label;
    comps.push_back(std::move(c));
  }
  mixture_ = std::make_unique<GaussianMixtureOracle>(std::move(comps), process);

  grid_points_.resize(3, params_.distance_grid);
  const double g_dth = (params_.theta_max - params_.theta_min) / (params_.distance_grid - 1);
  for (int i = 0; i < params_.distance_grid; ++i) {
    grid_points_.col(i) = curve_point(params_.theta_min + i * g_dth);
  }
}

Eigen::Vector3d SpiralManifoldOracle::curve_point(double theta) const {
  return {params_.a * theta * std::cos(theta), params_.a * theta * std::sin(theta),
          params_.b * theta};
}

double SpiralManifoldOracle::curve_speed(double theta) const {
  return std::sqrt(params_.a * params_.a * (1.0 + theta * theta) + params_.b * params_.b);
}

std::optional<double> SpiralManifoldOracle::manifold_distance(const VectorXd& x) const {
  if (x.size() != 3) throw DimensionError("SpiralManifoldOracle: expected a 3-dimensional point");
  if (!x.allFinite()) throw NumericError("SpiralManifoldOracle: non-finite input");
  const Eigen::Vector3d p = x.head<3>();
  return std::sqrt((grid_points_.colwise() - p).colwise().squaredNorm().minCoeff());
}

double SpiralManifoldOracle::manifold_distance_with_grid(const VectorXd& x,
                                                         int grid_points) const {
  if (x.size() != 3) throw DimensionError("SpiralManifoldOracle: expected a 3-dimensional point");
  const Eigen::Vector3d p = x.head<3>();
  const double dth = (params_.theta_max - params_.theta_min) / (grid_points - 1);
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid_points; ++i) {
    best = std::min(best, (curve_point(params_.theta_min + i * dth) - p).squaredNorm());
  }
  return std::sqrt(best);
}

double SpiralManifoldOracle::grid_tolerance() const {
  const double max_speed = curve_speed(std::max(std::abs(params_.theta_min),
                                                std::abs(params_.theta_max)));
  const double dth = (params_.theta_max - params_.theta_min) / (params_.distance_grid - 1);
  return 0.5 * max_speed * dth;
}

}  // namespace rguide
