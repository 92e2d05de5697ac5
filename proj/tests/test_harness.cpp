#include "ew/harness.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <cmath>

using namespace ew;

namespace {

Scenario small_scenario() {
  Scenario s;
  s.n = 30;
  s.p = 5;
  s.theta_star = (CoefVector(5) << 1.0, 0, -0.5, 0, 0).finished();
  s.noise_level = 1.0;
  s.seed = 17;
  return s;
}

}  // namespace

TEST_CASE("deterministic designs have unit empirical column norms") {
  Scenario s = small_scenario();
  for (DesignKind kind : {DesignKind::Orthonormal, DesignKind::Correlated}) {
    s.design = kind;
    s.rho = 0.6;
    const Matrix phi = deterministic_design(s);
    CHECK((phi.colwise().squaredNorm() / s.n).array().sqrt().matrix().isOnes(1e-12));
    CHECK(deterministic_design(s) == phi);
  }
  s.design = DesignKind::Orthonormal;
  const Matrix q = deterministic_design(s);
  CHECK((q.transpose() * q / s.n).isIdentity(1e-12));

  s.design = DesignKind::Correlated;
  const Matrix c = deterministic_design(s);
  // Adjacent columns share the rho-weighted seed column.
  CHECK(std::abs(c.col(1).dot(c.col(0)) / s.n - 0.6 / std::sqrt(1.36)) < 1e-12);

  s.p = 40;
  s.theta_star = CoefVector::Zero(40);
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

TEST_CASE("generate") {
  Scenario s = small_scenario();
  s.noise_level = 0.0;
  Rng rng(1);
  const DesignSample zero = generate(s, rng);
  CHECK(empirical_risk(zero, s.theta_star) == 0.0);

  s.n = 10'000;
  s.p = 2;
  s.theta_star = CoefVector::Zero(2);
  s.noise_level = 1.0;
  const DesignSample noisy = generate(s, rng);
  const double mean = noisy.y().mean();
  const double var = (noisy.y().array() - mean).square().sum() / (s.n - 1);
  CHECK(std::abs(var - 1.0) < 3 * std::sqrt(2.0 / s.n));

  s.noise = NoiseKind::UniformBounded;
  s.noise_level = 0.5;
  const DesignSample bounded = generate(s, rng);
  CHECK(bounded.y().cwiseAbs().maxCoeff() <= 0.5);
}

TEST_CASE("noise moment condition") {
  Scenario s = small_scenario();
  s.noise = NoiseKind::UniformBounded;
  for (double b : {0.1, 1.0, 3.0}) {
    s.noise_level = b;
    CHECK(s.noise_variance() == doctest::Approx(b * b / 3));
    CHECK(s.moment_constants().second == b);
    CHECK(check_moment_condition(s, 8));
  }
  s.noise = NoiseKind::Gaussian;
  s.noise_level = 2.0;
  CHECK(check_moment_condition(s, 8));
}

TEST_CASE("population excess risk") {
  Scenario s = small_scenario();
  CHECK(population_excess_risk(s, s.theta_star) == 0.0);
  CoefVector t = s.theta_star;
  t[0] += 1.0;
  CHECK(population_excess_risk(s, t) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(reference_theta(s) == s.theta_star);

  SUBCASE("random design Gram against Monte Carlo") {
    s.design = DesignKind::RandomUniform;
    s.p = 2;
    s.theta_star = (CoefVector(2) << 0.5, -1.0).finished();
    CHECK((reference_theta(s) - s.theta_star).cwiseAbs().maxCoeff() < 1e-12);
    const CoefVector theta = (CoefVector(2) << 1.0, 0.25).finished();
    const Vector delta = theta - s.theta_star;
    Rng rng(2);
    const int draws = 10'000'000;
    double sum = 0.0, sum2 = 0.0;
    for (int k = 0; k < draws; ++k) {
      const double v = std::sqrt(3.0) * (delta[0] * rng.uniform() + delta[1] * rng.uniform());
      sum += v * v;
      sum2 += v * v * v * v;
    }
    const double mc = sum / draws;
    const double se = std::sqrt((sum2 / draws - mc * mc) / draws);
    CHECK(std::abs(population_excess_risk(s, theta) - mc) < 3 * se);
  }
}

TEST_CASE("sup norms of the dictionary and regression function") {
  Scenario s = small_scenario();
  s.design = DesignKind::RandomUniform;
  CHECK(dictionary_sup_norm(s) == doctest::Approx(std::sqrt(3.0)));
  CHECK(f_inf_norm(s) == doctest::Approx(std::sqrt(3.0)));
}

TEST_CASE("run_replications") {
  Scenario s = small_scenario();
  EstimatorSpec est;
  est.exact = {.lambda = s.n / 4.0, .alpha = 0.5, .sigma2 = 1.0, .kmax = 5};

  SUBCASE("zero-noise single replication") {
    s.noise_level = 0.0;
    EstimatorSpec quiet = est;
    quiet.exact.sigma2 = 1e-6;
    quiet.exact.lambda = s.n / (4 * 1e-6);
    const ExperimentReport r = run_replications(quiet, s, 1, 5, 1.0);
    REQUIRE(r.replications.size() == 1);
    CHECK(r.replications[0].ok);
    CHECK(std::isfinite(r.mean));
    CHECK(r.mean >= 0.0);
    CHECK(r.mean < 1e-3);
  }
  SUBCASE("determinism and serial reference") {
    const ExperimentReport a = run_replications(est, s, 8, 99, 0.3);
    const ExperimentReport b = run_replications(est, s, 8, 99, 0.3);
    const ExperimentReport c = run_replications_serial(est, s, 8, 99, 0.3);
    for (int r = 0; r < 8; ++r) {
      CHECK(a.replications[r].excess_risk == b.replications[r].excess_risk);
      CHECK(a.replications[r].excess_risk == c.replications[r].excess_risk);
      CHECK(a.replications[r].sure == c.replications[r].sure);
    }
    CHECK(a.mean == c.mean);
    CHECK(a.violation_fraction == c.violation_fraction);
    CHECK((a.violation_fraction >= 0.0 && a.violation_fraction <= 1.0));
  }
  SUBCASE("failures are recorded, not fatal") {
    EstimatorSpec broken = est;
    broken.exact.budget = 3;
    const ExperimentReport r = run_replications(broken, s, 2, 1, 1.0);
    CHECK(r.failures == 2);
    CHECK(r.replications[0].error.find("budget") != std::string::npos);
  }
  SUBCASE("gibbs estimator") {
    EstimatorSpec g;
    g.kind = EstimatorSpec::Kind::Gibbs;
    g.gibbs.lambda = 5.0;
    g.gibbs.chain_length = 5000;
    g.gibbs.burn_in = 1000;
    const ExperimentReport r = run_replications(g, s, 3, 7, 10.0);
    CHECK(r.failures == 0);
    CHECK(r.violation_fraction == 0.0);
  }
}

TEST_CASE("quantile") {
  CHECK(quantile({3.0, 1.0, 2.0}, 0.5) == 2.0);
  CHECK(quantile({0.0, 10.0}, 0.25) == 2.5);
  CHECK_THROWS_AS(quantile({}, 0.5), std::invalid_argument);
}

TEST_CASE("quadrature posterior mean") {
  GibbsConfig cfg;
  cfg.K = 2.0;
  cfg.lambda = 0.0;
  const DesignSample one((Matrix(3, 1) << 1, 1, 1).finished(), (Vector(3) << 2, 3, 2.5).finished());

  const QuadratureResult flat = quadrature_gibbs_mean(one, cfg);
  CHECK(std::abs(flat.theta[0]) <= std::max(flat.error_estimate, 1e-12));

  cfg.lambda = 2.0;
  const QuadratureResult tilted = quadrature_gibbs_mean(one, cfg);
  CHECK(tilted.theta[0] > 0.0);
  CHECK(tilted.theta[0] < cfg.radius());
  const QuadratureResult coarse = quadrature_gibbs_mean(one, cfg, 100'000);
  CHECK(std::abs(coarse.theta[0] - tilted.theta[0]) < 1e-6);
  CHECK(tilted.error_estimate < 1e-6);

  // Atom at 0 plus the flat part: CDF jumps at 0 by the point mass.
  const auto cdf = quadrature_gibbs_cdf(one, cfg, {-3.0, -1e-9, 0.0, 3.0});
  CHECK(cdf[0] == 0.0);
  CHECK(cdf[2] > cdf[1]);
  CHECK(cdf[3] == doctest::Approx(1.0).epsilon(1e-12));

  Rng rng(3);
  const DesignSample two = test::random_sample(6, 2, rng);
  cfg.lambda = 1.0;
  const QuadratureResult q2 = quadrature_gibbs_mean(two, cfg, 1000);
  const QuadratureResult q2fine = quadrature_gibbs_mean(two, cfg, 2000);
  CHECK((q2.theta - q2fine.theta).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(l1_norm(q2fine.theta) < cfg.radius());

  CHECK_THROWS_AS(quadrature_gibbs_mean(test::random_sample(6, 3, rng), cfg), std::invalid_argument);
}

TEST_CASE("cross-validation") {
  const auto f1 = fold_assignment(23, 5, 4);
  CHECK(f1 == fold_assignment(23, 5, 4));
  CHECK(f1 != fold_assignment(23, 5, 5));
  std::array<int, 5> sizes{};
  for (int v : f1) sizes[v]++;
  for (int sz : sizes) CHECK((sz == 4 || sz == 5));

  Rng rng(6);
  const DesignSample s = test::random_sample(25, 3, rng);
  EstimatorSpec est;
  est.exact = {.lambda = 1.0, .alpha = 0.5, .sigma2 = 1.0, .kmax = 3};
  const CvResult one = cross_validate(s, est, {2.5}, 5, 1);
  CHECK(one.selected_lambda == 2.5);
  REQUIRE(one.rows.size() == 1);
  CHECK(one.rows[0].cv_error > 0.0);

  const CvResult tie = cross_validate(s, est, {4.0, 4.0, 1e-300}, 5, 1);
  CHECK(tie.selected_lambda <= 4.0);
  CHECK_THROWS_AS(cross_validate(s, est, {}, 5, 1), std::invalid_argument);
}
