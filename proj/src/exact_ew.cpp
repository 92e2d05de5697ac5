#include "ew/exact_ew.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace ew {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_binomial(int p, int k) {
  return std::lgamma(p + 1.0) - std::lgamma(k + 1.0) - std::lgamma(p - k + 1.0);
}

// log sum_{j=0}^{n} alpha^j
double log_geometric_mass(int n, double alpha) {
  return std::log1p(-std::pow(alpha, n + 1.0)) - std::log1p(-alpha);
}

int effective_kmax(int p, int n, int kmax) { return std::max(0, std::min({p, n, kmax})); }

// Fixed-order reduction shared by the serial and parallel paths.
AggregateEstimate reduce(const DesignSample& sample, const ExactEWConfig& cfg,
                         std::vector<SubsetFit> fits, std::vector<double> log_weights) {
  AggregateEstimate agg;
  normalize_log_weights(log_weights);
  agg.theta = CoefVector::Zero(sample.p());
  for (std::size_t k = 0; k < fits.size(); ++k) agg.theta += std::exp(log_weights[k]) * fits[k].theta;
  agg.ensemble = std::move(fits);
  agg.log_weights = std::move(log_weights);
  agg.sure = sure_estimate(sample, agg, cfg);
  return agg;
}

}  // namespace

BudgetExceeded::BudgetExceeded(std::uint64_t count)
    : std::runtime_error("support enumeration budget exceeded: " + std::to_string(count) +
                         " subsets"),
      count_(count) {}

void ExactEWConfig::validate() const {
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw std::invalid_argument("lambda must be positive and finite");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0,1)");
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2))
    throw std::invalid_argument("sigma2 must be positive and finite");
  if (kmax < 0) throw std::invalid_argument("kmax must be nonnegative");
  if (!(rank_tol > 0.0)) throw std::invalid_argument("rank_tol must be positive");
}

bool ExactEWConfig::within_guarantee(int n) const { return lambda <= n / (4.0 * sigma2); }

int default_kmax(int n, int p) { return std::min({n, p, 12}); }

double log_prior(int size, int p, int n, double alpha) {
  if (size < 0 || size > p)
    throw std::invalid_argument("log_prior: support size " + std::to_string(size) +
                                " outside [0, p=" + std::to_string(p) + "]");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("log_prior: alpha must lie in (0,1)");
  if (size > n) return kNegInf;
  return size * std::log(alpha) - log_geometric_mass(n, alpha) - log_binomial(p, size);
}

std::uint64_t count_supports(int p, int n, int kmax) {
  constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
  const int top = effective_kmax(p, n, kmax);
  std::uint64_t total = 0;
  // C(p,k) via the multiplicative recurrence, in long double to detect saturation.
  long double c = 1.0L;
  for (int k = 0; k <= top; ++k) {
    if (k > 0) c = c * (p - k + 1) / k;
    const long double rounded = std::round(c);
    if (rounded >= static_cast<long double>(kMax) - static_cast<long double>(total)) return kMax;
    total += static_cast<std::uint64_t>(rounded);
  }
  return total;
}

std::vector<Support> enumerate_supports(int p, int n, int kmax, std::uint64_t budget) {
  if (kmax < 0) throw std::invalid_argument("enumerate_supports: kmax must be nonnegative");
  const std::uint64_t count = count_supports(p, n, kmax);
  if (count > budget) throw BudgetExceeded(count);

  std::vector<Support> out;
  out.reserve(static_cast<std::size_t>(count));
  const int top = effective_kmax(p, n, kmax);
  for (int k = 0; k <= top; ++k) {
    std::vector<int> comb(k);
    std::iota(comb.begin(), comb.end(), 0);
    while (true) {
      out.emplace_back(comb);
      int i = k - 1;
      while (i >= 0 && comb[i] == p - k + i) --i;
      if (i < 0) break;
      ++comb[i];
      for (int j = i + 1; j < k; ++j) comb[j] = comb[j - 1] + 1;
    }
  }
  return out;
}

double AggregateEstimate::weight(std::size_t k) const { return std::exp(log_weights.at(k)); }

double AggregateEstimate::log_weight_of(const Support& J) const {
  for (std::size_t k = 0; k < ensemble.size(); ++k)
    if (ensemble[k].support == J) return log_weights[k];
  return kNegInf;
}

double unnormalized_log_weight(const SubsetFit& fit, int p, int n, const ExactEWConfig& cfg) {
  const int size = fit.support.size();
  return log_prior(size, p, n, cfg.alpha) -
         cfg.lambda * (fit.residual_risk + 2.0 * cfg.sigma2 * size / n);
}

double normalize_log_weights(std::vector<double>& log_weights) {
  if (log_weights.empty()) return kNegInf;
  const double top = *std::max_element(log_weights.begin(), log_weights.end());
  if (!std::isfinite(top)) throw std::domain_error("normalize_log_weights: no finite weight");
  double sum = 0.0;
  for (double lw : log_weights) sum += std::exp(lw - top);
  const double lse = top + std::log(sum);
  for (double& lw : log_weights) lw -= lse;
  return lse;
}

AggregateEstimate aggregate_exact(const DesignSample& sample, const ExactEWConfig& cfg,
                                  FitCache* cache) {
  cfg.validate();
  const std::vector<Support> supports = enumerate_supports(sample.p(), sample.n(), cfg.kmax, cfg.budget);
  const auto m = static_cast<std::int64_t>(supports.size());
  std::vector<SubsetFit> fits(supports.size());
  std::vector<double> log_weights(supports.size());

#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t k = 0; k < m; ++k) {
    fits[k] = cache ? *cache->get(sample, supports[k]) : fit_subset(sample, supports[k], cfg.rank_tol);
    log_weights[k] = unnormalized_log_weight(fits[k], sample.p(), sample.n(), cfg);
  }
  return reduce(sample, cfg, std::move(fits), std::move(log_weights));
}

AggregateEstimate aggregate_exact_serial(const DesignSample& sample, const ExactEWConfig& cfg) {
  cfg.validate();
  std::vector<SubsetFit> fits;
  std::vector<double> log_weights;
  for (const Support& J : enumerate_supports(sample.p(), sample.n(), cfg.kmax, cfg.budget)) {
    fits.push_back(fit_subset(sample, J, cfg.rank_tol));
    log_weights.push_back(unnormalized_log_weight(fits.back(), sample.p(), sample.n(), cfg));
  }
  return reduce(sample, cfg, std::move(fits), std::move(log_weights));
}

double default_temperature_exact(int n, double sigma2) {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("default_temperature_exact: sigma2 must be positive");
  return n / (4.0 * sigma2);
}

SureEstimate sure_estimate(const DesignSample& sample, const AggregateEstimate& agg,
                           const ExactEWConfig& cfg) {
  const int n = sample.n();
  const Vector f_hat = sample.phi() * agg.theta;
  Vector spread = Vector::Zero(n);    // sum_J w_J (f_J - f_hat)^2
  Vector leverage = Vector::Zero(n);  // sum_J w_J h_J,i
  for (std::size_t k = 0; k < agg.ensemble.size(); ++k) {
    const double w = std::exp(agg.log_weights[k]);
    if (w == 0.0) continue;
    const SubsetFit& fit = agg.ensemble[k];
    spread += w * (sample.phi() * fit.theta - f_hat).array().square().matrix();
    leverage += w * fit.leverages;
  }
  const double divergence = (2.0 * cfg.lambda / n) * spread.sum() + leverage.sum();
  const double fit_term = (f_hat - sample.y()).squaredNorm() / n;
  return {fit_term + 2.0 * cfg.sigma2 / n * divergence - cfg.sigma2, divergence};
}

double bound_expectation_size(int support_size, double approx_error, int p, int n, double sigma2,
                              double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("bound_expectation: alpha must lie in (0,1)");
  if (n < 1 || p < 1 || support_size < 0 || support_size > p)
    throw std::invalid_argument("bound_expectation: invalid dimensions");
  double bound = approx_error - 4.0 * sigma2 * std::log1p(-alpha) / n;
  if (support_size > 0) {
    const double s = support_size;
    bound += sigma2 * s / n * (4.0 * std::log(p * std::exp(1.0) / (s * alpha)) + 1.0);
  }
  return bound;
}

double bound_expectation(const CoefVector& theta_ref, double approx_error, int p, int n,
                         double sigma2, double alpha) {
  return bound_expectation_size(support_of(theta_ref).size(), approx_error, p, n, sigma2, alpha);
}

}  // namespace ew
