#pragma once

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <variant>

#include "rguide/errors.hpp"

namespace rguide {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

namespace detail {

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& v, const char* what) {
  if (!v.allFinite()) {
    throw NumericError(std::string(what) + ": non-finite entries");
  }
}

inline void require_dim(Eigen::Index expected, Eigen::Index got, const char* what) {
  if (expected != got) {
    std::ostringstream os;
    os << what << ": dimension mismatch (operator is " << expected << "-dimensional, vector is "
       << got << "-dimensional)";
    throw DimensionError(os.str());
  }
}

}  // namespace detail

/// Direction of a score vector under epsilon-stabilized normalization,
/// n = s0 / (|s0| + eps). The result has norm <= 1 and approaches a unit
/// vector as |s0|/eps grows; s0 = 0 maps to the zero vector.
template <typename Scalar = double>
struct UnitNormal {
  VectorX<Scalar> vector;
  Scalar source_norm = Scalar(0);
  Scalar epsilon = Scalar(1e-5);
};

template <typename Derived>
UnitNormal<typename Derived::Scalar> stabilized_unit_normal(
    const Eigen::MatrixBase<Derived>& s0, typename Derived::Scalar epsilon = 1e-5) {
  using Scalar = typename Derived::Scalar;
  detail::require_finite(s0, "stabilized_unit_normal");
  if (!(epsilon > Scalar(0))) {
    throw DomainError("stabilized_unit_normal: epsilon must be positive");
  }
  UnitNormal<Scalar> n;
  n.source_norm = s0.norm();
  n.epsilon = epsilon;
  n.vector = s0 / (n.source_norm + epsilon);
  return n;
}

/// Positive-definite Riemannian metric exposed only through matrix-free
/// apply / inverse-apply / quadratic forms. Every operation is O(d); no
/// dense matrix is ever materialized.
///
/// Supported structures:
///   Identity                   M = I
///   RankOneAnisotropic         M = lt*I + (ln - lt) m m^T,  |m| <= 1
///   RadialPenalty              M = I + lambda x x^T,        |x| = 1
///   ScoreAlignedPenalty        M = I + lambda s s^T,        |s| = 1, lambda = inf
///                              handled as an exact orthogonal projection
///                              on the inverse path
///   Diagonal                   M = diag(w),                 w > 0
///   Composite                  M = D^{1/2} (lt*I + (ln-lt) m m^T) D^{1/2}
///
/// Rank-one inverses use the Sherman-Morrison identity; for a unit normal
/// the RankOneAnisotropic inverse reduces to
///   M^{-1} v = v/lt - ((ln-lt)/(lt*ln)) (m^T v) m.
/// Sub-unit normals (epsilon-stabilized scores) use the generalized form
/// with denominator lt + (ln-lt)|m|^2, which is exact for any |m| <= 1 and
/// coincides with the above at |m| = 1.
template <typename Scalar = double>
class MetricOperator {
public:
  using Vector = VectorX<Scalar>;

  struct Identity {
    Eigen::Index dim;
  };
  struct RankOneAnisotropic {
    Vector normal;           // |normal| <= 1 (exactly 1 for the canonical form)
    Scalar lambda_tangent;   // > 0
    Scalar lambda_normal;    // > 0
    Scalar normal_sq;        // cached |normal|^2
  };
  struct RadialPenalty {
    Vector direction;  // unit
    Scalar lambda;     // >= 0
  };
  struct ScoreAlignedPenalty {
    Vector direction;  // unit
    Scalar lambda;     // >= 0, finite
    bool project;      // lambda = inf: exact projection on the inverse path
  };
  struct Diagonal {
    Vector weights;  // > 0
  };
  struct Composite {
    Vector sqrt_weights;   // componentwise sqrt of the diagonal factor
    Vector scaled_normal;  // normal re-expressed in the D^{1/2}-scaled space, |.| <= 1
    Scalar lambda_tangent;
    Scalar lambda_normal;
    Scalar normal_sq;
  };

  using Variant =
      std::variant<Identity, RankOneAnisotropic, RadialPenalty, ScoreAlignedPenalty, Diagonal,
                   Composite>;

  static MetricOperator identity(Eigen::Index dim) {
    if (dim < 1) throw DomainError("MetricOperator::identity: dim must be >= 1");
    return MetricOperator(Identity{dim});
  }

  /// Canonical rank-one form: requires a unit normal within 1e-12.
  template <typename Derived>
  static MetricOperator rank_one(const Eigen::MatrixBase<Derived>& normal, Scalar lambda_tangent,
                                 Scalar lambda_normal) {
    detail::require_finite(normal, "MetricOperator::rank_one");
    const Scalar nrm = normal.norm();
    if (std::abs(nrm - Scalar(1)) > Scalar(1e-12)) {
      throw DomainError("MetricOperator::rank_one: normal must have unit norm (within 1e-12)");
    }
    return rank_one_checked(normal.eval(), lambda_tangent, lambda_normal);
  }

  /// Rank-one form for epsilon-stabilized normals with |normal| <= 1.
  template <typename Derived>
  static MetricOperator rank_one_stabilized(const Eigen::MatrixBase<Derived>& normal,
                                            Scalar lambda_tangent, Scalar lambda_normal) {
    detail::require_finite(normal, "MetricOperator::rank_one_stabilized");
    if (normal.norm() > Scalar(1) + Scalar(1e-12)) {
      throw DomainError("MetricOperator::rank_one_stabilized: |normal| must be <= 1");
    }
    return rank_one_checked(normal.eval(), lambda_tangent, lambda_normal);
  }

  template <typename Derived>
  static MetricOperator radial_penalty(const Eigen::MatrixBase<Derived>& direction,
                                       Scalar lambda) {
    detail::require_finite(direction, "MetricOperator::radial_penalty");
    require_unit(direction, "MetricOperator::radial_penalty");
    if (!(lambda >= Scalar(0)) || !std::isfinite(lambda)) {
      throw DomainError("MetricOperator::radial_penalty: lambda must be finite and >= 0");
    }
    return MetricOperator(RadialPenalty{direction.eval(), lambda});
  }

  /// lambda may be +infinity, selecting the exact-projection path.
  template <typename Derived>
  static MetricOperator score_aligned_penalty(const Eigen::MatrixBase<Derived>& direction,
                                              Scalar lambda) {
    detail::require_finite(direction, "MetricOperator::score_aligned_penalty");
    require_unit(direction, "MetricOperator::score_aligned_penalty");
    if (std::isnan(lambda) || lambda < Scalar(0)) {
      throw DomainError("MetricOperator::score_aligned_penalty: lambda must be >= 0");
    }
    const bool project = std::isinf(lambda);
    return MetricOperator(ScoreAlignedPenalty{direction.eval(), project ? Scalar(0) : lambda,
                                              project});
  }

  template <typename Derived>
  static MetricOperator diagonal(const Eigen::MatrixBase<Derived>& weights) {
    detail::require_finite(weights, "MetricOperator::diagonal");
    if (weights.size() < 1 || (weights.array() <= Scalar(0)).any()) {
      throw DomainError("MetricOperator::diagonal: weights must be strictly positive");
    }
    return MetricOperator(Diagonal{weights.eval()});
  }

  /// Combined metric M = D^{1/2} R D^{1/2} with R the rank-one anisotropic
  /// factor. The normal is re-normalized in the D^{1/2}-scaled space while
  /// keeping its original (stabilized) magnitude, so |normal| < 1 still
  /// attenuates the anisotropy and normal = 0 yields R = lt*I.
  template <typename DerivedW, typename DerivedN>
  static MetricOperator composite(const Eigen::MatrixBase<DerivedW>& weights,
                                  const Eigen::MatrixBase<DerivedN>& normal,
                                  Scalar lambda_tangent, Scalar lambda_normal) {
    detail::require_finite(weights, "MetricOperator::composite");
    detail::require_finite(normal, "MetricOperator::composite");
    if (weights.size() != normal.size()) {
      throw DimensionError("MetricOperator::composite: weights/normal dimension mismatch");
    }
    if ((weights.array() <= Scalar(0)).any()) {
      throw DomainError("MetricOperator::composite: weights must be strictly positive");
    }
    check_eigenvalues(lambda_tangent, lambda_normal, "MetricOperator::composite");
    const Scalar magnitude = normal.norm();
    if (magnitude > Scalar(1) + Scalar(1e-12)) {
      throw DomainError("MetricOperator::composite: |normal| must be <= 1");
    }
    Composite c;
    c.sqrt_weights = weights.array().sqrt();
    Vector scaled = c.sqrt_weights.cwiseProduct(normal);
    const Scalar scaled_norm = scaled.norm();
    if (scaled_norm > Scalar(0)) {
      c.scaled_normal = scaled * (magnitude / scaled_norm);
    } else {
      c.scaled_normal = Vector::Zero(weights.size());
    }
    c.lambda_tangent = lambda_tangent;
    c.lambda_normal = lambda_normal;
    c.normal_sq = c.scaled_normal.squaredNorm();
    return MetricOperator(std::move(c));
  }

  Eigen::Index dim() const {
    return std::visit(
        [](const auto& op) -> Eigen::Index {
          using T = std::decay_t<decltype(op)>;
          if constexpr (std::is_same_v<T, Identity>) {
            return op.dim;
          } else if constexpr (std::is_same_v<T, RankOneAnisotropic>) {
            return op.normal.size();
          } else if constexpr (std::is_same_v<T, RadialPenalty>) {
            return op.direction.size();
          } else if constexpr (std::is_same_v<T, ScoreAlignedPenalty>) {
            return op.direction.size();
          } else if constexpr (std::is_same_v<T, Diagonal>) {
            return op.weights.size();
          } else {
            return op.sqrt_weights.size();
          }
        },
        op_);
  }

  bool is_identity() const { return std::holds_alternative<Identity>(op_); }
  bool is_projection() const {
    const auto* p = std::get_if<ScoreAlignedPenalty>(&op_);
    return p != nullptr && p->project;
  }

  const Variant& variant() const { return op_; }

private:
  explicit MetricOperator(Variant op) : op_(std::move(op)) {}

  static void check_eigenvalues(Scalar lt, Scalar ln, const char* what) {
    if (!(lt > Scalar(0)) || !std::isfinite(lt) || !(ln > Scalar(0)) || !std::isfinite(ln)) {
      throw DomainError(std::string(what) + ": eigenvalues must be finite and > 0");
    }
  }

  static MetricOperator rank_one_checked(Vector normal, Scalar lt, Scalar ln) {
    check_eigenvalues(lt, ln, "MetricOperator::rank_one");
    RankOneAnisotropic r;
    r.normal_sq = normal.squaredNorm();
    r.normal = std::move(normal);
    r.lambda_tangent = lt;
    r.lambda_normal = ln;
    return MetricOperator(std::move(r));
  }

  template <typename Derived>
  static void require_unit(const Eigen::MatrixBase<Derived>& v, const char* what) {
    if (std::abs(v.norm() - Scalar(1)) > Scalar(1e-12)) {
      throw DomainError(std::string(what) + ": direction must have unit norm (within 1e-12)");
    }
  }

  Variant op_;
};

using MetricOperatord = MetricOperator<double>;
using UnitNormald = UnitNormal<double>;

namespace detail {

// Relative size of the component of v along unit direction u below which a
// vector counts as orthogonal to u for projection-metric quadratic forms.
inline constexpr double kProjectionAlignmentTol = 1e-9;

}  // namespace detail

/// out = M v.
template <typename Scalar, typename Derived>
void metric_apply_into(const MetricOperator<Scalar>& m, const Eigen::MatrixBase<Derived>& v,
                       Eigen::Ref<VectorX<std::type_identity_t<Scalar>>> out) {
  detail::require_dim(m.dim(), v.size(), "metric_apply");
  detail::require_finite(v, "metric_apply");
  using M = MetricOperator<Scalar>;
  std::visit(
      [&](const auto& op) {
        using T = std::decay_t<decltype(op)>;
        if constexpr (std::is_same_v<T, typename M::Identity>) {
          out = v;
        } else if constexpr (std::is_same_v<T, typename M::RankOneAnisotropic>) {
          const Scalar c = op.lambda_normal - op.lambda_tangent;
          if (c == Scalar(0)) {
            out = op.lambda_tangent * v;
          } else {
            const Scalar proj = op.normal.dot(v);
            out = op.lambda_tangent * v + (c * proj) * op.normal;
          }
        } else if constexpr (std::is_same_v<T, typename M::RadialPenalty>) {
          const Scalar proj = op.direction.dot(v);
          out = v + (op.lambda * proj) * op.direction;
        } else if constexpr (std::is_same_v<T, typename M::ScoreAlignedPenalty>) {
          if (op.project) {
            const Scalar proj = op.direction.dot(v);
            const Scalar scale = v.norm();
            if (std::abs(proj) > detail::kProjectionAlignmentTol * scale) {
              throw NumericError(
                  "metric_apply: vector has a component along the projected direction; "
                  "the exact-projection metric is unbounded there");
            }
            out = v;
          } else {
            const Scalar proj = op.direction.dot(v);
            out = v + (op.lambda * proj) * op.direction;
          }
        } else if constexpr (std::is_same_v<T, typename M::Diagonal>) {
          out = op.weights.cwiseProduct(v);
        } else {
          const Scalar c = op.lambda_normal - op.lambda_tangent;
          out = op.sqrt_weights.cwiseProduct(v);
          if (c == Scalar(0)) {
            out = op.lambda_tangent * out;
          } else {
            const Scalar proj = op.scaled_normal.dot(out);
            out = op.lambda_tangent * out + (c * proj) * op.scaled_normal;
          }
          out = out.cwiseProduct(op.sqrt_weights);
        }
      },
      m.variant());
}

template <typename Scalar, typename Derived>
VectorX<Scalar> metric_apply(const MetricOperator<Scalar>& m,
                             const Eigen::MatrixBase<Derived>& v) {
  VectorX<Scalar> out(v.size());
  metric_apply_into(m, v, out);
  return out;
}

/// out = M^{-1} v. For the exact-projection metric this is (I - s s^T) v.
template <typename Scalar, typename Derived>
void metric_inverse_apply_into(const MetricOperator<Scalar>& m,
                               const Eigen::MatrixBase<Derived>& v,
                               Eigen::Ref<VectorX<std::type_identity_t<Scalar>>> out) {
  detail::require_dim(m.dim(), v.size(), "metric_inverse_apply");
  detail::require_finite(v, "metric_inverse_apply");
  using M = MetricOperator<Scalar>;
  std::visit(
      [&](const auto& op) {
        using T = std::decay_t<decltype(op)>;
        if constexpr (std::is_same_v<T, typename M::Identity>) {
          out = v;
        } else if constexpr (std::is_same_v<T, typename M::RankOneAnisotropic>) {
          const Scalar lt = op.lambda_tangent;
          const Scalar c = op.lambda_normal - lt;
          if (c == Scalar(0)) {
            out = v / lt;
          } else {
            const Scalar proj = op.normal.dot(v);
            const Scalar k = c / (lt * (lt + c * op.normal_sq));
            out = v / lt - (k * proj) * op.normal;
          }
        } else if constexpr (std::is_same_v<T, typename M::RadialPenalty>) {
          const Scalar proj = op.direction.dot(v);
          out = v - (op.lambda / (Scalar(1) + op.lambda) * proj) * op.direction;
        } else if constexpr (std::is_same_v<T, typename M::ScoreAlignedPenalty>) {
          const Scalar proj = op.direction.dot(v);
          if (op.project) {
            out = v - proj * op.direction;
          } else {
            out = v - (op.lambda / (Scalar(1) + op.lambda) * proj) * op.direction;
          }
        } else if constexpr (std::is_same_v<T, typename M::Diagonal>) {
          out = v.cwiseQuotient(op.weights);
        } else {
          const Scalar lt = op.lambda_tangent;
          const Scalar c = op.lambda_normal - lt;
          out = v.cwiseQuotient(op.sqrt_weights);
          if (c == Scalar(0)) {
            out = out / lt;
          } else {
            const Scalar proj = op.scaled_normal.dot(out);
            const Scalar k = c / (lt * (lt + c * op.normal_sq));
            out = out / lt - (k * proj) * op.scaled_normal;
          }
          out = out.cwiseQuotient(op.sqrt_weights);
        }
      },
      m.variant());
}

template <typename Scalar, typename Derived>
VectorX<Scalar> metric_inverse_apply(const MetricOperator<Scalar>& m,
                                     const Eigen::MatrixBase<Derived>& v) {
  VectorX<Scalar> out(v.size());
  metric_inverse_apply_into(m, v, out);
  return out;
}

/// v^T M v >= 0, zero iff v = 0. For the exact-projection metric the form is
/// finite only for vectors orthogonal to the projected direction (where it
/// equals |v|^2); anything else raises NumericError.
template <typename Scalar, typename Derived>
Scalar metric_quadratic_form(const MetricOperator<Scalar>& m,
                             const Eigen::MatrixBase<Derived>& v) {
  detail::require_dim(m.dim(), v.size(), "metric_quadratic_form");
  detail::require_finite(v, "metric_quadratic_form");
  using M = MetricOperator<Scalar>;
  return std::visit(
      [&](const auto& op) -> Scalar {
        using T = std::decay_t<decltype(op)>;
        if constexpr (std::is_same_v<T, typename M::Identity>) {
          return v.squaredNorm();
        } else if constexpr (std::is_same_v<T, typename M::RankOneAnisotropic>) {
          const Scalar c = op.lambda_normal - op.lambda_tangent;
          const Scalar proj = op.normal.dot(v);
          return op.lambda_tangent * v.squaredNorm() + c * proj * proj;
        } else if constexpr (std::is_same_v<T, typename M::RadialPenalty>) {
          const Scalar proj = op.direction.dot(v);
          return v.squaredNorm() + op.lambda * proj * proj;
        } else if constexpr (std::is_same_v<T, typename M::ScoreAlignedPenalty>) {
          const Scalar proj = op.direction.dot(v);
          if (op.project) {
            if (std::abs(proj) > detail::kProjectionAlignmentTol * v.norm()) {
              throw NumericError(
                  "metric_quadratic_form: unbounded under the exact-projection metric");
            }
            return v.squaredNorm();
          }
          return v.squaredNorm() + op.lambda * proj * proj;
        } else if constexpr (std::is_same_v<T, typename M::Diagonal>) {
          return (op.weights.array() * v.array().square()).sum();
        } else {
          const Scalar c = op.lambda_normal - op.lambda_tangent;
          const Scalar scaled_sq = (op.sqrt_weights.array() * v.array()).square().sum();
          const Scalar proj = (op.scaled_normal.array() * op.sqrt_weights.array() * v.array()).sum();
          return op.lambda_tangent * scaled_sq + c * proj * proj;
        }
      },
      m.variant());
}

/// v^T M^{-1} v, the squared dual norm. Finite for every metric including the
/// exact projection, where it equals |(I - s s^T) v|^2.
template <typename Scalar, typename Derived>
Scalar metric_inverse_quadratic_form(const MetricOperator<Scalar>& m,
                                     const Eigen::MatrixBase<Derived>& v) {
  detail::require_dim(m.dim(), v.size(), "metric_inverse_quadratic_form");
  detail::require_finite(v, "metric_inverse_quadratic_form");
  using M = MetricOperator<Scalar>;
  return std::visit(
      [&](const auto& op) -> Scalar {
        using T = std::decay_t<decltype(op)>;
        if constexpr (std::is_same_v<T, typename M::Identity>) {
          return v.squaredNorm();
        } else if constexpr (std::is_same_v<T, typename M::RankOneAnisotropic>) {
          const Scalar lt = op.lambda_tangent;
          const Scalar c = op.lambda_normal - lt;
          const Scalar proj = op.normal.dot(v);
          const Scalar k = c / (lt * (lt + c * op.normal_sq));
          return v.squaredNorm() / lt - k * proj * proj;
        } else if constexpr (std::is_same_v<T, typename M::RadialPenalty>) {
          const Scalar proj = op.direction.dot(v);
          return v.squaredNorm() - op.lambda / (Scalar(1) + op.lambda) * proj * proj;
        } else if constexpr (std::is_same_v<T, typename M::ScoreAlignedPenalty>) {
          const Scalar proj = op.direction.dot(v);
          if (op.project) {
            return v.squaredNorm() - proj * proj;
          }
          return v.squaredNorm() - op.lambda / (Scalar(1) + op.lambda) * proj * proj;
        } else if constexpr (std::is_same_v<T, typename M::Diagonal>) {
          return (v.array().square() / op.weights.array()).sum();
        } else {
          const Scalar lt = op.lambda_tangent;
          const Scalar c = op.lambda_normal - lt;
          const Scalar k = c / (lt * (lt + c * op.normal_sq));
          const auto scaled = v.array() / op.sqrt_weights.array();
          const Scalar scaled_sq = scaled.square().sum();
          const Scalar proj = (op.scaled_normal.array() * scaled).sum();
          return scaled_sq / lt - k * proj * proj;
        }
      },
      m.variant());
}

/// Geodesic length |v|_M = sqrt(v^T M v).
template <typename Scalar, typename Derived>
Scalar metric_norm(const MetricOperator<Scalar>& m, const Eigen::MatrixBase<Derived>& v) {
  return std::sqrt(metric_quadratic_form(m, v));
}

/// Unique minimizer u* = -beta M^{-1} g of (1/2) u^T M u + beta <g, u>.
template <typename Scalar, typename Derived>
VectorX<Scalar> solve_quadratic_guidance(const MetricOperator<Scalar>& m,
                                         const Eigen::MatrixBase<Derived>& energy_gradient,
                                         Scalar beta) {
  if (!(beta >= Scalar(0)) || !std::isfinite(beta)) {
    throw DomainError("solve_quadratic_guidance: beta must be finite and >= 0");
  }
  if (beta == Scalar(0)) {
    detail::require_dim(m.dim(), energy_gradient.size(), "solve_quadratic_guidance");
    detail::require_finite(energy_gradient, "solve_quadratic_guidance");
    return VectorX<Scalar>::Zero(energy_gradient.size());
  }
  VectorX<Scalar> u = metric_inverse_apply(m, energy_gradient);
  u *= -beta;
  return u;
}

/// Direction of maximal energy decrease per unit geodesic length:
/// v* = -delta M^{-1} g / sqrt(g^T M^{-1} g), with |v*|_M = delta.
template <typename Scalar, typename Derived>
VectorX<Scalar> steepest_descent_direction(const MetricOperator<Scalar>& m,
                                           const Eigen::MatrixBase<Derived>& energy_gradient,
                                           Scalar step) {
  if (!(step > Scalar(0)) || !std::isfinite(step)) {
    throw DomainError("steepest_descent_direction: step must be finite and > 0");
  }
  detail::require_dim(m.dim(), energy_gradient.size(), "steepest_descent_direction");
  detail::require_finite(energy_gradient, "steepest_descent_direction");
  if (energy_gradient.isZero(Scalar(0))) {
    throw NumericError("steepest_descent_direction: zero gradient has no descent direction");
  }
  const Scalar dual_sq = metric_inverse_quadratic_form(m, energy_gradient);
  if (!(dual_sq > Scalar(0))) {
    throw NumericError(
        "steepest_descent_direction: gradient has no component in the feasible subspace");
  }
  VectorX<Scalar> v = metric_inverse_apply(m, energy_gradient);
  v *= -step / std::sqrt(dual_sq);
  return v;
}

/// Guidance efficiency eta(u) = -<g, u> / |u|_M: energy decrease per unit
/// geodesic step. Maximized over u by the natural-gradient direction
/// -M^{-1} g, where it equals |g|_{M^{-1}}.
template <typename Scalar, typename DerivedG, typename DerivedU>
Scalar guidance_efficiency(const MetricOperator<Scalar>& m,
                           const Eigen::MatrixBase<DerivedG>& energy_gradient,
                           const Eigen::MatrixBase<DerivedU>& u) {
  detail::require_dim(m.dim(), energy_gradient.size(), "guidance_efficiency");
  detail::require_dim(m.dim(), u.size(), "guidance_efficiency");
  detail::require_finite(energy_gradient, "guidance_efficiency");
  detail::require_finite(u, "guidance_efficiency");
  if (u.isZero(Scalar(0))) {
    throw NumericError("guidance_efficiency: undefined for a zero update");
  }
  return -energy_gradient.dot(u) / metric_norm(m, u);
}

}  // namespace rguide
