#pragma once

#include <Eigen/Dense>

#include <functional>
#include <random>
#include <variant>

#include "rguide/geometry.hpp"
#include "rguide/oracle.hpp"

namespace rguide::testing {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline VectorXd random_vector(std::mt19937_64& rng, Eigen::Index d, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, 1.0);
  VectorXd v(d);
  for (Eigen::Index i = 0; i < d; ++i) v[i] = scale * normal(rng);
  return v;
}

inline VectorXd random_unit(std::mt19937_64& rng, Eigen::Index d) {
  VectorXd v = random_vector(rng, d);
  return v / v.norm();
}

inline VectorXd random_positive(std::mt19937_64& rng, Eigen::Index d, double lo = 0.2,
                                double hi = 5.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  VectorXd v(d);
  for (Eigen::Index i = 0; i < d; ++i) v[i] = u(rng);
  return v;
}

/// Dense assembly of a metric operator, written independently of the
/// matrix-free closed forms so it can serve as an oracle for them.
inline MatrixXd dense_metric(const MetricOperatord& m) {
  using M = MetricOperatord;
  const auto d = m.dim();
  return std::visit(
      [&](const auto& op) -> MatrixXd {
        using T = std::decay_t<decltype(op)>;
        if constexpr (std::is_same_v<T, M::Identity>) {
          return MatrixXd::Identity(d, d);
        } else if constexpr (std::is_same_v<T, M::RankOneAnisotropic>) {
          return op.lambda_tangent * MatrixXd::Identity(d, d) +
                 (op.lambda_normal - op.lambda_tangent) * op.normal * op.normal.transpose();
        } else if constexpr (std::is_same_v<T, M::RadialPenalty>) {
          return MatrixXd::Identity(d, d) +
                 op.lambda * op.direction * op.direction.transpose();
        } else if constexpr (std::is_same_v<T, M::ScoreAlignedPenalty>) {
          if (op.project) {
            throw std::logic_error("dense_metric: exact projection has no finite dense form");
          }
          return MatrixXd::Identity(d, d) +
                 op.lambda * op.direction * op.direction.transpose();
        } else if constexpr (std::is_same_v<T, M::Diagonal>) {
          return MatrixXd(op.weights.asDiagonal());
        } else {
          const MatrixXd D_half = MatrixXd(op.sqrt_weights.asDiagonal());
          const MatrixXd R =
              op.lambda_tangent * MatrixXd::Identity(d, d) +
              (op.lambda_normal - op.lambda_tangent) * op.scaled_normal *
                  op.scaled_normal.transpose();
          return D_half * R * D_half;
        }
      },
      m.variant());
}

/// Componentwise central finite-difference gradient with the scale-aware
/// step h = 1e-5 (1 + |x|).
inline VectorXd finite_difference_gradient(const std::function<double(const VectorXd&)>& f,
                                           const VectorXd& x) {
  const double h = 1e-5 * (1.0 + x.norm());
  VectorXd g(x.size());
  VectorXd xp = x, xm = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + h;
    xm[i] = x[i] - h;
    g[i] = (f(xp) - f(xm)) / (2.0 * h);
    xp[i] = x[i];
    xm[i] = x[i];
  }
  return g;
}

inline double rel_error(double got, double want) {
  return std::abs(got - want) / std::max(1.0, std::abs(want));
}

inline double rel_error(const VectorXd& got, const VectorXd& want) {
  return (got - want).norm() / std::max(1.0, want.norm());
}

}  // namespace rguide::testing
