#pragma once

// Exponential-weights aggregation of subset least-squares estimators over an
// explicitly enumerated family of supports, with the sparsity prior, the
// Stein unbiased risk estimate of the aggregate and the expectation bound.

#include "ew/model.hpp"
#include "ew/subset_lse.hpp"

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace ew {

inline constexpr std::uint64_t kDefaultSubsetBudget = 2'000'000;

/// Thrown when the number of supports to enumerate exceeds the budget.
class BudgetExceeded : public std::runtime_error {
public:
  explicit BudgetExceeded(std::uint64_t count);
  std::uint64_t count() const { return count_; }

private:
  std::uint64_t count_;
};

struct ExactEWConfig {
  double lambda = 0.0;
  double alpha = 0.5;
  double sigma2 = 0.0;
  int kmax = 12;
  double rank_tol = kDefaultRankTol;
  std::uint64_t budget = kDefaultSubsetBudget;

  /// Throws std::invalid_argument unless lambda > 0, alpha in (0,1), sigma2 > 0, kmax >= 0.
  void validate() const;
  /// True when lambda <= n / (4 sigma2), the range where the expectation bound holds.
  bool within_guarantee(int n) const;
};

/// min(n, p, 12): the default enumeration cap.
int default_kmax(int n, int p);

/// log pi_J for any support of the given size (-infinity when size > n).
double log_prior(int size, int p, int n, double alpha);

/// sum_{k=0}^{min(n,p,kmax)} C(p,k), saturating at UINT64_MAX.
std::uint64_t count_supports(int p, int n, int kmax);

/// Every support with |J| <= min(n,p,kmax), ordered by size then lexicographically.
std::vector<Support> enumerate_supports(int p, int n, int kmax,
                                        std::uint64_t budget = kDefaultSubsetBudget);

struct SureEstimate {
  double risk;        // unbiased estimate of ||f_hat - f||_n^2
  double divergence;  // sum_i d f_hat(X_i) / d Y_i
};

struct AggregateEstimate {
  CoefVector theta;
  std::vector<SubsetFit> ensemble;
  std::vector<double> log_weights;  // normalized, aligned with ensemble
  SureEstimate sure{0.0, 0.0};

  double weight(std::size_t k) const;
  /// Normalized log-weight of J, or -infinity when J was not enumerated.
  double log_weight_of(const Support& J) const;
};

/// Unnormalized log-weight log pi_J - lambda (r(theta_J) + 2 sigma^2 |J| / n).
double unnormalized_log_weight(const SubsetFit& fit, int p, int n, const ExactEWConfig& cfg);

/// Normalizes log-weights in place by log-sum-exp; returns the normalizer.
double normalize_log_weights(std::vector<double>& log_weights);

/// The aggregate. Subset fits run in parallel with OpenMP; the reduction is
/// serial in enumeration order so the result does not depend on thread count.
/// When cache is given, fits are taken from / stored into it.
AggregateEstimate aggregate_exact(const DesignSample& sample, const ExactEWConfig& cfg,
                                  FitCache* cache = nullptr);

/// Single-threaded reference for aggregate_exact; same output bit for bit.
AggregateEstimate aggregate_exact_serial(const DesignSample& sample, const ExactEWConfig& cfg);

double default_temperature_exact(int n, double sigma2);

SureEstimate sure_estimate(const DesignSample& sample, const AggregateEstimate& agg,
                           const ExactEWConfig& cfg);

/// Right-hand side of the expectation oracle inequality at theta_ref.
double bound_expectation(const CoefVector& theta_ref, double approx_error, int p, int n,
                         double sigma2, double alpha);

/// Same bound given only the support size of the reference vector.
double bound_expectation_size(int support_size, double approx_error, int p, int n,
                              double sigma2, double alpha);

}  // namespace ew
