#pragma once

#include <cmath>

#include "rguide/errors.hpp"

namespace rguide {

/// Forward noising schedule of the probability-flow ODE
///   dx/dt = f(x,t) - g^2(t) s(x,t),   t in [0, T].
///
/// Variance preserving: beta(t) = beta_min + (beta_max - beta_min) t/T,
///   alpha(t) = exp(-B(t)/2) with B(t) = int_0^t beta, sigma^2 = 1 - alpha^2,
///   f(x,t) = -beta(t) x / 2, g^2(t) = beta(t).
/// Variance exploding: alpha = 1, sigma(t) = s_min (s_max/s_min)^(t/T),
///   f = 0, g^2(t) = d sigma^2/dt.
class ForwardProcess {
public:
  enum class Kind { VariancePreserving, VarianceExploding };

  static ForwardProcess variance_preserving(double beta_min, double beta_max, double horizon) {
    if (!(beta_min > 0.0) || !(beta_max >= beta_min)) {
      throw DomainError("ForwardProcess: need 0 < beta_min <= beta_max");
    }
    if (!(horizon > 0.0)) throw DomainError("ForwardProcess: horizon must be > 0");
    ForwardProcess p;
    p.kind_ = Kind::VariancePreserving;
    p.a_ = beta_min;
    p.b_ = beta_max;
    p.horizon_ = horizon;
    return p;
  }

  static ForwardProcess variance_exploding(double sigma_min, double sigma_max, double horizon) {
    if (!(sigma_min > 0.0) || !(sigma_max > sigma_min)) {
      throw DomainError("ForwardProcess: need 0 < sigma_min < sigma_max");
    }
    if (!(horizon > 0.0)) throw DomainError("ForwardProcess: horizon must be > 0");
    ForwardProcess p;
    p.kind_ = Kind::VarianceExploding;
    p.a_ = sigma_min;
    p.b_ = sigma_max;
    p.horizon_ = horizon;
    return p;
  }

  Kind kind() const { return kind_; }
  double horizon() const { return horizon_; }

  void require_time(double t) const {
    if (!(t >= 0.0) || !(t <= horizon_)) {
      throw DomainError("ForwardProcess: time outside [0, horizon]");
    }
  }

  /// Signal coefficient: x_t = alpha(t) x_0 + sigma(t) eps.
  double alpha(double t) const {
    if (kind_ == Kind::VarianceExploding) return 1.0;
    return std::exp(-0.5 * beta_integral(t));
  }

  double sigma_sq(double t) const {
    if (kind_ == Kind::VarianceExploding) {
      const double s = sigma(t);
      return s * s;
    }
    return -std::expm1(-beta_integral(t));
  }

  double sigma(double t) const {
    if (kind_ == Kind::VarianceExploding) {
      return a_ * std::pow(b_ / a_, t / horizon_);
    }
    return std::sqrt(sigma_sq(t));
  }

  /// f(x,t) = drift_coefficient(t) * x.
  double drift_coefficient(double t) const {
    if (kind_ == Kind::VarianceExploding) return 0.0;
    return -0.5 * beta_schedule(t);
  }

  /// g^2(t).
  double diffusion_sq(double t) const {
    if (kind_ == Kind::VarianceExploding) {
      return sigma_sq(t) * 2.0 * std::log(b_ / a_) / horizon_;
    }
    return beta_schedule(t);
  }

  /// Standard deviation of the sampling prior at time t (VP prior is the
  /// standard normal; VE prior is N(0, sigma(t)^2)).
  double prior_std(double t) const {
    if (kind_ == Kind::VarianceExploding) return sigma(t);
    return 1.0;
  }

  double beta_schedule(double t) const { return a_ + (b_ - a_) * (t / horizon_); }
  double beta_integral(double t) const { return a_ * t + 0.5 * (b_ - a_) * t * t / horizon_; }

private:
  ForwardProcess() = default;
  Kind kind_ = Kind::VariancePreserving;
  double a_ = 0.0;
  double b_ = 0.0;
  double horizon_ = 1.0;
};

}  // namespace rguide
