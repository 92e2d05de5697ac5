#pragma once

// Simulation harness: synthetic scenarios with a known regression function,
// population excess risk, seeded Monte Carlo replications of either
// estimator, a quadrature oracle for the Gibbs posterior mean (p <= 2) and
// V-fold cross-validation of the temperature.

#include "ew/exact_ew.hpp"
#include "ew/gibbs_ew.hpp"
#include "ew/model.hpp"
#include "ew/rng.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ew {

enum class DesignKind { Orthonormal, Correlated, RandomUniform };
enum class NoiseKind { Gaussian, UniformBounded };

const char* design_name(DesignKind kind);
const char* noise_name(NoiseKind kind);

struct Scenario {
  DesignKind design = DesignKind::Orthonormal;
  double rho = 0.0;  // correlated design only
  int n = 50;
  int p = 10;
  CoefVector theta_star;
  NoiseKind noise = NoiseKind::Gaussian;
  double noise_level = 1.0;  // sigma^2 for gaussian, half-width b for uniform-bounded
  std::uint64_t seed = 1;    // fixes deterministic designs

  void validate() const;
  bool random_design() const { return design == DesignKind::RandomUniform; }
  /// Variance of one noise variable.
  double noise_variance() const;
  /// (sigma, xi) satisfying the subgaussian moment condition for this noise.
  std::pair<double, double> moment_constants() const;
};

/// Checks E|W|^k <= sigma^2 k! xi^(k-2) for k = 2..kmax with exact moments
/// of the scenario's noise law.
bool check_moment_condition(const Scenario& s, int kmax = 8);

/// The design for deterministic scenarios, a pure function of (kind, n, p, rho, seed).
///   orthonormal: sqrt(n) Q from a QR factorization of a Gaussian matrix
///   correlated:  column j = normalized(z_j + rho z_{j-1}) with z orthonormal as above
/// Every column has empirical norm 1.
Matrix deterministic_design(const Scenario& s);

/// Population Gram matrix E[phi(X) phi(X)^T] of the random-uniform dictionary
/// phi_j(x) = sqrt(3) x_j, X uniform on [0,1]^p: 1 on the diagonal, 3/4 off it.
Matrix population_gram(int p);

/// Draws one sample: the design (fixed for deterministic kinds, fresh from
/// rng for random-uniform), then y = phi theta_star + W.
DesignSample generate(const Scenario& s, Rng& rng);

/// Minimizer of the population risk. Solves the population normal equations
/// G theta = E[f(X) phi(X)] for random designs; theta_star otherwise.
CoefVector reference_theta(const Scenario& s);

/// R(theta) - R(theta_star): ||phi (theta - theta_star)||_n^2 for deterministic
/// designs, (theta - theta_star)^T G (theta - theta_star) for random ones.
double population_excess_risk(const Scenario& s, const CoefVector& theta);

/// sup_x |f(x)| for f = f_{theta_star} over the dictionary's range.
double f_inf_norm(const Scenario& s);
/// max_j sup_x |phi_j(x)| (exact for the random dictionary, empirical for fixed designs).
double dictionary_sup_norm(const Scenario& s);

struct EstimatorSpec {
  enum class Kind { Exact, Gibbs } kind = Kind::Exact;
  ExactEWConfig exact;
  GibbsConfig gibbs;
};

struct ReplicationResult {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double excess_risk = 0.0;     // population excess risk of the estimate
  double absolute_risk = 0.0;   // excess + noise variance
  double in_sample_loss = 0.0;  // ||f_hat - f||_n^2
  double sure = 0.0;            // exact estimator only
  double seconds = 0.0;
};

struct ExperimentReport {
  std::vector<ReplicationResult> replications;
  int failures = 0;
  double mean = 0.0;
  double standard_error = 0.0;
  double q05 = 0.0, q50 = 0.0, q95 = 0.0;
  double bound = 0.0;
  double violation_fraction = 0.0;
  double sure_mean = 0.0, sure_se = 0.0;  // exact estimator only
  double loss_mean = 0.0, loss_se = 0.0;  // in-sample loss
  double wall_seconds = 0.0;
};

/// Fits the estimator on `reps` independent samples. Replication r uses seed
/// derive_seed(base_seed, r) for data and splitmix64 of that for the chain.
/// Replications run concurrently; aggregation is in replication order.
/// violation_fraction counts excess risks above `bound`.
ExperimentReport run_replications(const EstimatorSpec& est, const Scenario& s, int reps,
                                  std::uint64_t base_seed, double bound);

/// Serial reference for run_replications (identical numbers apart from timing).
ExperimentReport run_replications_serial(const EstimatorSpec& est, const Scenario& s, int reps,
                                         std::uint64_t base_seed, double bound);

/// Empirical quantile by linear interpolation between order statistics.
double quantile(std::vector<double> values, double q);

struct QuadratureResult {
  CoefVector theta;
  double error_estimate;  // |I_h - I_{2h}| / 15 in sup norm
};

/// Posterior mean of the Gibbs measure by deterministic quadrature, p <= 2.
/// Sums the point mass at 0 and composite-Simpson integrals over each
/// Theta_{K+1}(J); the 2-D ball integral is nested with exact inner limits.
/// `points` is the per-axis resolution (>= 1e5 for p=1, >= 2000 for p=2).
QuadratureResult quadrature_gibbs_mean(const DesignSample& sample, const GibbsConfig& cfg,
                                       int points = 0);

/// CDF of theta_1 under the Gibbs measure for p = 1, evaluated at `at`.
std::vector<double> quadrature_gibbs_cdf(const DesignSample& sample, const GibbsConfig& cfg,
                                         const std::vector<double>& at, int points = 200'000);

struct CvRow {
  double lambda;
  double cv_error;  // mean held-out squared error
  double cv_se;
};

struct CvResult {
  std::vector<CvRow> rows;
  double selected_lambda;
};

/// Fold of each row: a seeded permutation, then position mod folds.
std::vector<int> fold_assignment(int n, int folds, std::uint64_t seed);

/// V-fold cross-validation of held-out squared error for each lambda.
/// Selection: minimal CV error, ties to the smaller lambda.
CvResult cross_validate(const DesignSample& sample, const EstimatorSpec& est,
                        const std::vector<double>& lambdas, int folds, std::uint64_t fold_seed);

}  // namespace ew
