#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <random>

#include "rguide/geometry.hpp"
#include "test_support.hpp"

using namespace rguide;
using namespace rguide::testing;

namespace {

MetricOperatord random_rank_one(std::mt19937_64& rng, Eigen::Index d) {
  std::uniform_real_distribution<double> lam(0.2, 20.0);
  return MetricOperatord::rank_one(random_unit(rng, d), lam(rng), lam(rng));
}

// One metric of every structure at the given dimension.
std::vector<MetricOperatord> metric_zoo(std::mt19937_64& rng, Eigen::Index d) {
  std::uniform_real_distribution<double> lam(0.2, 20.0);
  std::vector<MetricOperatord> zoo;
  zoo.push_back(MetricOperatord::identity(d));
  zoo.push_back(random_rank_one(rng, d));
  zoo.push_back(MetricOperatord::radial_penalty(random_unit(rng, d), lam(rng)));
  zoo.push_back(MetricOperatord::score_aligned_penalty(random_unit(rng, d), lam(rng)));
  zoo.push_back(MetricOperatord::diagonal(random_positive(rng, d)));
  zoo.push_back(MetricOperatord::composite(random_positive(rng, d),
                                           VectorXd(0.9 * random_unit(rng, d)), lam(rng),
                                           lam(rng)));
  return zoo;
}

}  // namespace

TEST_SUITE_BEGIN("geometry");

TEST_CASE("identity apply returns its input") {
  std::mt19937_64 rng(1);
  const auto m = MetricOperatord::identity(5);
  const VectorXd v = random_vector(rng, 5);
  CHECK(metric_apply(m, v) == v);
  CHECK(metric_inverse_apply(m, v) == v);
}

TEST_CASE("rank-one eigenstructure") {
  const Eigen::Index d = 6;
  VectorXd e1 = VectorXd::Zero(d);
  e1[0] = 1.0;
  const auto m = MetricOperatord::rank_one(e1, 1.0, 10.0);

  SUBCASE("normal direction carries lambda_normal") {
    CHECK(rel_error(metric_apply(m, e1), VectorXd(10.0 * e1)) < 1e-15);
    CHECK(rel_error(metric_inverse_apply(m, e1), VectorXd(0.1 * e1)) < 1e-15);
    CHECK(metric_quadratic_form(m, e1) == doctest::Approx(10.0));
  }
  SUBCASE("tangent directions carry lambda_tangent") {
    VectorXd e2 = VectorXd::Zero(d);
    e2[1] = 1.0;
    CHECK(rel_error(metric_apply(m, e2), e2) < 1e-15);
  }
  SUBCASE("random tangent vector") {
    std::mt19937_64 rng(2);
    VectorXd v = random_vector(rng, d);
    v -= v.dot(e1) * e1;  // remove the normal component
    CHECK(rel_error(metric_apply(m, v), VectorXd(1.0 * v)) < 1e-12);
  }
}

TEST_CASE("apply matches densely assembled operator") {
  std::mt19937_64 rng(3);
  for (Eigen::Index d : {2, 8, 64}) {
    for (const auto& m : metric_zoo(rng, d)) {
      const VectorXd v = random_vector(rng, d);
      const MatrixXd dense = dense_metric(m);
      CHECK(rel_error(metric_apply(m, v), VectorXd(dense * v)) < 1e-12);
      CHECK(rel_error(metric_quadratic_form(m, v), v.dot(dense * v)) < 1e-12);
    }
  }
}

TEST_CASE("inverse apply matches the dense inverse") {
  std::mt19937_64 rng(4);
  for (Eigen::Index d : {2, 8, 16, 64}) {
    for (const auto& m : metric_zoo(rng, d)) {
      const VectorXd v = random_vector(rng, d);
      const MatrixXd dense = dense_metric(m);
      const VectorXd want = dense.partialPivLu().solve(v);
      CHECK(rel_error(metric_inverse_apply(m, v), want) < 1e-10);
      CHECK(rel_error(metric_inverse_quadratic_form(m, v), v.dot(want)) < 1e-10);
    }
  }
}

TEST_CASE("apply and inverse apply are mutual inverses") {
  std::mt19937_64 rng(5);
  for (Eigen::Index d : {2, 8, 64}) {
    for (const auto& m : metric_zoo(rng, d)) {
      const VectorXd v = random_vector(rng, d);
      CHECK(rel_error(metric_inverse_apply(m, metric_apply(m, v)), v) < 1e-10);
      CHECK(rel_error(metric_apply(m, metric_inverse_apply(m, v)), v) < 1e-10);
    }
  }
}

TEST_CASE("quadratic form is positive definite") {
  std::mt19937_64 rng(6);
  for (const auto& m : metric_zoo(rng, 7)) {
    CHECK(metric_quadratic_form(m, VectorXd(VectorXd::Zero(7))) == 0.0);
    for (int rep = 0; rep < 20; ++rep) {
      const VectorXd v = random_vector(rng, 7);
      CHECK(metric_quadratic_form(m, v) > 0.0);
    }
  }
}

TEST_CASE("stabilized unit normal") {
  std::mt19937_64 rng(7);
  SUBCASE("dominant norm gives nearly unit direction") {
    VectorXd s0 = VectorXd::Zero(4);
    s0[0] = 1e3;
    const auto n = stabilized_unit_normal(s0);
    CHECK(n.vector[0] == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(n.vector.norm() <= 1.0);
  }
  SUBCASE("zero score maps to the zero vector and an isotropic metric") {
    const VectorXd s0 = VectorXd::Zero(4);
    const auto n = stabilized_unit_normal(s0);
    CHECK(n.vector.isZero(0.0));
    const auto m = MetricOperatord::rank_one_stabilized(n.vector, 2.0, 20.0);
    const VectorXd v = random_vector(rng, 4);
    CHECK(metric_apply(m, v) == VectorXd(2.0 * v));
  }
  SUBCASE("norm is always below one") {
    for (int rep = 0; rep < 50; ++rep) {
      const VectorXd s0 = random_vector(rng, 5, std::pow(10.0, rep % 7 - 3));
      CHECK(stabilized_unit_normal(s0).vector.norm() < 1.0);
    }
  }
}

TEST_CASE("sub-unit rank-one normals keep the exact inverse") {
  std::mt19937_64 rng(8);
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::Index d = 8;
    std::uniform_real_distribution<double> mag(0.0, 1.0);
    const VectorXd m_vec = mag(rng) * random_unit(rng, d);
    const auto m = MetricOperatord::rank_one_stabilized(m_vec, 1.0, 10.0);
    const VectorXd v = random_vector(rng, d);
    const MatrixXd dense = dense_metric(m);
    CHECK(rel_error(metric_inverse_apply(m, v), VectorXd(dense.partialPivLu().solve(v))) <
          1e-10);
  }
}

TEST_CASE("solve_quadratic_guidance") {
  std::mt19937_64 rng(9);
  SUBCASE("identity metric recovers the CFG direction") {
    const auto m = MetricOperatord::identity(5);
    const VectorXd g = random_vector(rng, 5);
    CHECK(rel_error(solve_quadratic_guidance(m, g, 1.0), VectorXd(-g)) < 1e-15);
  }
  SUBCASE("beta = 0 yields the zero update") {
    const auto m = random_rank_one(rng, 5);
    const VectorXd g = random_vector(rng, 5);
    CHECK(solve_quadratic_guidance(m, g, 0.0).isZero(0.0));
  }
  SUBCASE("minimizes the objective against random perturbations") {
    const Eigen::Index d = 8;
    const auto m = random_rank_one(rng, d);
    const MatrixXd dense = dense_metric(m);
    const VectorXd g = random_vector(rng, d);
    const double beta = 1.7;
    const VectorXd u_star = solve_quadratic_guidance(m, g, beta);
    const auto objective = [&](const VectorXd& u) {
      return 0.5 * u.dot(dense * u) + beta * g.dot(u);
    };
    const double j_star = objective(u_star);
    const double scale = std::max(u_star.norm(), 1.0);
    for (int rep = 0; rep < 10000; ++rep) {
      const VectorXd u = u_star + 0.3 * scale * random_vector(rng, d);
      CHECK(j_star <= objective(u) + 1e-12);
    }
  }
}

TEST_CASE("steepest descent direction") {
  std::mt19937_64 rng(10);
  SUBCASE("euclidean case") {
    const auto m = MetricOperatord::identity(3);
    VectorXd g = VectorXd::Zero(3);
    g[0] = 1.0;
    CHECK(rel_error(steepest_descent_direction(m, g, 1.0), VectorXd(-g)) < 1e-14);
  }
  SUBCASE("anisotropic closed form") {
    VectorXd e1 = VectorXd::Zero(4);
    e1[0] = 1.0;
    const auto m = MetricOperatord::rank_one(e1, 1.0, 10.0);
    const VectorXd v = steepest_descent_direction(m, e1, 1.0);
    CHECK(rel_error(v, VectorXd(-e1 / std::sqrt(10.0))) < 1e-12);
    CHECK(std::abs(metric_norm(m, v) - 1.0) < 1e-10);
  }
  SUBCASE("geodesic step length and alignment are exact") {
    for (int rep = 0; rep < 30; ++rep) {
      const Eigen::Index d = 6;
      const auto m = random_rank_one(rng, d);
      const VectorXd g = random_vector(rng, d);
      const double delta = 0.5 + rep * 0.1;
      const VectorXd v = steepest_descent_direction(m, g, delta);
      CHECK(std::abs(metric_norm(m, v) - delta) < 1e-10);
      const double want = -delta * std::sqrt(metric_inverse_quadratic_form(m, g));
      CHECK(rel_error(g.dot(v), want) < 1e-10);
    }
  }
  SUBCASE("beats random competitors on the metric sphere") {
    const Eigen::Index d = 6;
    const auto m = random_rank_one(rng, d);
    const VectorXd g = random_vector(rng, d);
    const double delta = 1.3;
    const VectorXd v_star = steepest_descent_direction(m, g, delta);
    const double best = g.dot(v_star);
    for (int rep = 0; rep < 100000; ++rep) {
      VectorXd w = random_vector(rng, d);
      w *= delta / metric_norm(m, w);
      CHECK(best <= g.dot(w) + 1e-9);
    }
  }
  SUBCASE("zero gradient is an error") {
    const auto m = MetricOperatord::identity(3);
    CHECK_THROWS_AS(steepest_descent_direction(m, VectorXd(VectorXd::Zero(3)), 1.0),
                    NumericError);
  }
}

TEST_CASE("guidance efficiency") {
  std::mt19937_64 rng(11);
  const Eigen::Index d = 6;
  const auto m = random_rank_one(rng, d);
  const VectorXd g = random_vector(rng, d);

  SUBCASE("the natural-gradient direction attains the dual norm") {
    const VectorXd u = -metric_inverse_apply(m, g);
    const double want = std::sqrt(metric_inverse_quadratic_form(m, g));
    CHECK(rel_error(guidance_efficiency(m, g, u), want) < 1e-12);
    CHECK(rel_error(guidance_efficiency(m, g, VectorXd(-u)), -want) < 1e-12);
  }
  SUBCASE("beats the euclidean direction off the eigenbasis") {
    const double eta_nat = guidance_efficiency(m, g, VectorXd(-metric_inverse_apply(m, g)));
    const double eta_euc = guidance_efficiency(m, g, VectorXd(-g));
    CHECK(eta_nat >= eta_euc - 1e-12);
    const VectorXd mg = metric_apply(m, g);
    const bool eigenvector = rel_error(mg, VectorXd((mg.norm() / g.norm()) * g)) < 1e-12;
    if (!eigenvector) CHECK(eta_nat > eta_euc);
  }
  SUBCASE("zero update is an error") {
    CHECK_THROWS_AS(guidance_efficiency(m, g, VectorXd(VectorXd::Zero(d))), NumericError);
  }
}

TEST_CASE("generalized Cauchy-Schwarz bound") {
  std::mt19937_64 rng(12);
  for (int rep = 0; rep < 10000; ++rep) {
    const Eigen::Index d = 2 + rep % 7;
    const auto m = random_rank_one(rng, d);
    const VectorXd g = random_vector(rng, d);
    const VectorXd v = random_vector(rng, d);
    const double lhs = std::abs(g.dot(v));
    const double rhs = std::sqrt(metric_inverse_quadratic_form(m, g)) * metric_norm(m, v);
    CHECK(lhs <= rhs + 1e-9);
  }
  // Equality iff v is parallel to M^{-1} g.
  for (int rep = 0; rep < 100; ++rep) {
    const Eigen::Index d = 5;
    const auto m = random_rank_one(rng, d);
    const VectorXd g = random_vector(rng, d);
    const VectorXd v = 2.3 * metric_inverse_apply(m, g);
    const double lhs = std::abs(g.dot(v));
    const double rhs = std::sqrt(metric_inverse_quadratic_form(m, g)) * metric_norm(m, v);
    CHECK(std::abs(lhs - rhs) <= 1e-8 * rhs);
  }
}

TEST_CASE("score-aligned penalty approaches the exact projection") {
  std::mt19937_64 rng(13);
  const Eigen::Index d = 8;
  const VectorXd s_hat = random_unit(rng, d);
  const VectorXd v = random_vector(rng, d);

  const auto proj = MetricOperatord::score_aligned_penalty(
      s_hat, std::numeric_limits<double>::infinity());
  const VectorXd exact = metric_inverse_apply(proj, v);
  CHECK(std::abs(s_hat.dot(exact)) < 1e-12 * v.norm());

  SUBCASE("projection kills the aligned component") {
    VectorXd e1 = VectorXd::Zero(d), e2 = VectorXd::Zero(d);
    e1[0] = 1.0;
    e2[1] = 1.0;
    const auto p = MetricOperatord::score_aligned_penalty(
        e1, std::numeric_limits<double>::infinity());
    CHECK(rel_error(metric_inverse_apply(p, VectorXd(e1 + e2)), e2) < 1e-15);
  }
  SUBCASE("aligned component decreases monotonically in lambda") {
    double prev = std::numeric_limits<double>::infinity();
    for (double lambda : {1e2, 1e4, 1e6}) {
      const auto m = MetricOperatord::score_aligned_penalty(s_hat, lambda);
      const double comp = std::abs(s_hat.dot(metric_inverse_apply(m, v)));
      CHECK(comp < prev);
      prev = comp;
    }
  }
  SUBCASE("lambda = 1e6 is within 1e-4 of the projection") {
    const auto m = MetricOperatord::score_aligned_penalty(s_hat, 1e6);
    CHECK(rel_error(metric_inverse_apply(m, v), exact) < 1e-4);
  }
  SUBCASE("quadratic form is unbounded off the feasible subspace") {
    CHECK_THROWS_AS(metric_quadratic_form(proj, s_hat), NumericError);
    CHECK(metric_quadratic_form(proj, exact) == doctest::Approx(exact.squaredNorm()));
  }
}

TEST_CASE("construction-time validation") {
  std::mt19937_64 rng(14);
  const VectorXd u = random_unit(rng, 4);
  CHECK_THROWS_AS(MetricOperatord::rank_one(u, -1.0, 2.0), DomainError);
  CHECK_THROWS_AS(MetricOperatord::rank_one(u, 1.0, 0.0), DomainError);
  CHECK_THROWS_AS(MetricOperatord::rank_one(VectorXd(2.0 * u), 1.0, 2.0), DomainError);
  CHECK_THROWS_AS(MetricOperatord::rank_one_stabilized(VectorXd(1.5 * u), 1.0, 2.0),
                  DomainError);
  CHECK_THROWS_AS(MetricOperatord::radial_penalty(u, -0.5), DomainError);
  CHECK_THROWS_AS(MetricOperatord::diagonal(VectorXd(VectorXd::Zero(4))), DomainError);
  VectorXd bad = u;
  bad[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(MetricOperatord::rank_one(bad, 1.0, 2.0), NumericError);
}

TEST_CASE("operation error paths") {
  std::mt19937_64 rng(15);
  const auto m = random_rank_one(rng, 4);
  CHECK_THROWS_AS(metric_apply(m, VectorXd(random_vector(rng, 5))), DimensionError);
  VectorXd bad = random_vector(rng, 4);
  bad[2] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(metric_apply(m, bad), NumericError);
  CHECK_THROWS_AS(metric_inverse_apply(m, bad), NumericError);
  CHECK_THROWS_AS(solve_quadratic_guidance(m, VectorXd(random_vector(rng, 4)), -1.0),
                  DomainError);
}

TEST_CASE("rho = 1 collapses to the scaled identity bitwise") {
  std::mt19937_64 rng(16);
  const VectorXd n = random_unit(rng, 6);
  const auto m = MetricOperatord::rank_one(n, 1.0, 1.0);
  const VectorXd v = random_vector(rng, 6);
  CHECK(metric_apply(m, v) == v);
  CHECK(metric_inverse_apply(m, v) == v);
}

TEST_SUITE_END();
