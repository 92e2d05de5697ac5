#include "ew/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace ew {

namespace {

constexpr double kSqrt3 = 1.7320508075688772935;

Matrix orthonormal_columns(int n, int p, std::uint64_t seed) {
  Rng rng(seed);
  Matrix g(n, p);
  for (int j = 0; j < p; ++j)
    for (int i = 0; i < n; ++i) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Matrix> qr(g);
  return qr.householderQ() * Matrix::Identity(n, p);
}

double simpson(const auto& f, double a, double b, int intervals) {
  if (intervals % 2) ++intervals;
  const double h = (b - a) / intervals;
  double sum = f(a) + f(b);
  for (int k = 1; k < intervals; ++k) sum += (k % 2 ? 4.0 : 2.0) * f(a + k * h);
  return sum * h / 3.0;
}

// r(theta) = c - 2 b^T theta + theta^T S theta for p <= 2.
struct QuadraticRisk {
  double c;
  Vector b;
  Matrix S;

  explicit QuadraticRisk(const DesignSample& sample)
      : c(sample.y().squaredNorm() / sample.n()),
        b(sample.phi().transpose() * sample.y() / sample.n()),
        S(sample.phi().transpose() * sample.phi() / sample.n()) {}

  double at1(int j, double t) const { return c - 2.0 * b[j] * t + S(j, j) * t * t; }
  double at2(double u, double v) const {
    return c - 2.0 * (b[0] * u + b[1] * v) + S(0, 0) * u * u + 2.0 * S(0, 1) * u * v + S(1, 1) * v * v;
  }
};

struct Moments {
  double mass = 0.0;
  Vector first;
};

// Unnormalized posterior mass and first moment, shifted by exp(lambda * r_lo).
Moments gibbs_moments(const DesignSample& sample, const GibbsConfig& cfg, int points) {
  const int p = sample.p();
  const int n = sample.n();
  const double R = cfg.radius();
  const double lambda = cfg.lambda;
  const QuadraticRisk risk(sample);
  const double r_lo = fit_subset(sample, Support(p == 1 ? std::vector<int>{0} : std::vector<int>{0, 1})).residual_risk;
  const auto tilt = [&](double r) { return std::exp(-lambda * (r - r_lo)); };

  Moments m;
  m.first = Vector::Zero(p);
  m.mass = std::exp(log_prior(0, p, n, cfg.alpha)) * tilt(risk.c);

  for (int j = 0; j < p; ++j) {
    const double w = std::exp(log_prior(1, p, n, cfg.alpha)) / (2.0 * R);
    m.mass += w * simpson([&](double t) { return tilt(risk.at1(j, t)); }, -R, R, points);
    m.first[j] += w * simpson([&](double t) { return t * tilt(risk.at1(j, t)); }, -R, R, points);
  }
  if (p == 2 && n >= 2) {
    const double w = std::exp(log_prior(2, p, n, cfg.alpha)) * 2.0 / (4.0 * R * R);
    // Inner integrals over v in [-(R-|u|), R-|u|]; outer split at u = 0 where |u| kinks.
    const auto inner = [&](double u, int which) {
      const double lim = R - std::abs(u);
      if (lim <= 0.0) return 0.0;
      return simpson(
          [&](double v) {
            const double e = tilt(risk.at2(u, v));
            return which == 0 ? e : which == 1 ? u * e : v * e;
          },
          -lim, lim, points);
    };
    for (int which = 0; which < 3; ++which) {
      const auto outer = [&](double u) { return inner(u, which); };
      const double val = simpson(outer, -R, 0.0, points) + simpson(outer, 0.0, R, points);
      if (which == 0) m.mass += w * val;
      else m.first[which - 1] += w * val;
    }
  }
  return m;
}

ReplicationResult replicate(const EstimatorSpec& est, const Scenario& s, std::uint64_t seed) {
  ReplicationResult out;
  out.seed = seed;
  const auto start = std::chrono::steady_clock::now();
  try {
    Rng rng(seed);
    const DesignSample sample = generate(s, rng);
    CoefVector theta;
    if (est.kind == EstimatorSpec::Kind::Exact) {
      const AggregateEstimate agg = aggregate_exact(sample, est.exact);
      theta = agg.theta;
      out.sure = agg.sure.risk;
    } else {
      GibbsConfig cfg = est.gibbs;
      cfg.seed = splitmix64(seed);
      theta = gibbs_estimate(sample, cfg).theta;
    }
    out.excess_risk = population_excess_risk(s, theta);
    out.absolute_risk = out.excess_risk + s.noise_variance();
    out.in_sample_loss = (sample.phi() * (theta - s.theta_star)).squaredNorm() / sample.n();
    out.ok = std::isfinite(out.excess_risk);
    if (!out.ok) out.error = "non-finite excess risk";
  } catch (const std::exception& e) {
    out.ok = false;
    out.error = e.what();
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

std::pair<double, double> mean_se(const std::vector<double>& v) {
  if (v.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (v.size() - 1) / v.size())};
}

ExperimentReport summarize(std::vector<ReplicationResult> reps, const EstimatorSpec& est, double bound) {
  ExperimentReport r;
  r.bound = bound;
  std::vector<double> excess, sure, loss;
  for (const auto& rep : reps) {
    r.wall_seconds += rep.seconds;
    if (!rep.ok) {
      ++r.failures;
      continue;
    }
    excess.push_back(rep.excess_risk);
    loss.push_back(rep.in_sample_loss);
    if (est.kind == EstimatorSpec::Kind::Exact) sure.push_back(rep.sure);
  }
  std::tie(r.mean, r.standard_error) = mean_se(excess);
  std::tie(r.loss_mean, r.loss_se) = mean_se(loss);
  if (!sure.empty()) std::tie(r.sure_mean, r.sure_se) = mean_se(sure);
  if (!excess.empty()) {
    r.q05 = quantile(excess, 0.05);
    r.q50 = quantile(excess, 0.5);
    r.q95 = quantile(excess, 0.95);
    const auto above = std::count_if(excess.begin(), excess.end(), [&](double x) { return x > bound; });
    r.violation_fraction = static_cast<double>(above) / excess.size();
  }
  r.replications = std::move(reps);
  return r;
}

}  // namespace

const char* design_name(DesignKind kind) {
  switch (kind) {
    case DesignKind::Orthonormal: return "orthonormal";
    case DesignKind::Correlated: return "correlated";
    case DesignKind::RandomUniform: return "random-uniform";
  }
  return "?";
}

const char* noise_name(NoiseKind kind) {
  return kind == NoiseKind::Gaussian ? "gaussian" : "uniform-bounded";
}

void Scenario::validate() const {
  if (n < 1 || p < 1) throw std::invalid_argument("scenario: n and p must be positive");
  if (theta_star.size() != p) throw std::invalid_argument("scenario: theta_star must have length p");
  if (design == DesignKind::Orthonormal && p > n)
    throw std::invalid_argument("scenario: orthonormal design requires p <= n");
  if (design == DesignKind::Correlated && p > n)
    throw std::invalid_argument("scenario: correlated design requires p <= n");
  if (!(noise_level >= 0.0)) throw std::invalid_argument("scenario: noise level must be nonnegative");
}

double Scenario::noise_variance() const {
  return noise == NoiseKind::Gaussian ? noise_level : noise_level * noise_level / 3.0;
}

std::pair<double, double> Scenario::moment_constants() const {
  if (noise == NoiseKind::Gaussian) {
    const double sigma = std::sqrt(noise_level);
    return {sigma, sigma};
  }
  return {noise_level / kSqrt3, noise_level};
}

bool check_moment_condition(const Scenario& s, int kmax) {
  const auto [sigma, xi] = s.moment_constants();
  for (int k = 2; k <= kmax; ++k) {
    double moment;
    if (s.noise == NoiseKind::Gaussian) {
      const double sd = std::sqrt(s.noise_level);
      moment = std::pow(sd, k) * std::pow(2.0, k / 2.0) * std::tgamma((k + 1) / 2.0) / std::sqrt(M_PI);
    } else {
      moment = std::pow(s.noise_level, k) / (k + 1.0);
    }
    const double limit = sigma * sigma * std::tgamma(k + 1.0) * std::pow(xi, k - 2);
    if (moment > limit * (1.0 + 1e-12)) return false;
  }
  return true;
}

Matrix deterministic_design(const Scenario& s) {
  if (s.random_design()) throw std::invalid_argument("deterministic_design: scenario has a random design");
  if (s.p > s.n) throw std::invalid_argument("deterministic_design: requires p <= n");
  const Matrix z = orthonormal_columns(s.n, s.p, s.seed) * std::sqrt(static_cast<double>(s.n));
  if (s.design == DesignKind::Orthonormal) return z;
  Matrix phi = z;
  for (int j = 1; j < s.p; ++j) phi.col(j) += s.rho * z.col(j - 1);
  for (int j = 0; j < s.p; ++j) phi.col(j) /= std::sqrt(phi.col(j).squaredNorm() / s.n);
  return phi;
}

Matrix population_gram(int p) {
  Matrix g = Matrix::Constant(p, p, 0.75);
  g.diagonal().setOnes();
  return g;
}

DesignSample generate(const Scenario& s, Rng& rng) {
  s.validate();
  Matrix phi;
  if (s.random_design()) {
    phi.resize(s.n, s.p);
    for (int j = 0; j < s.p; ++j)
      for (int i = 0; i < s.n; ++i) phi(i, j) = kSqrt3 * rng.uniform();
  } else {
    phi = deterministic_design(s);
  }
  Vector y = phi * s.theta_star;
  if (s.noise == NoiseKind::Gaussian) {
    const double sd = std::sqrt(s.noise_level);
    for (int i = 0; i < s.n; ++i) y[i] += sd * rng.normal();
  } else {
    for (int i = 0; i < s.n; ++i) y[i] += rng.uniform(-s.noise_level, s.noise_level);
  }
  return DesignSample(std::move(phi), std::move(y));
}

CoefVector reference_theta(const Scenario& s) {
  if (!s.random_design()) return s.theta_star;
  const Matrix g = population_gram(s.p);
  return g.ldlt().solve(g * s.theta_star);
}

double population_excess_risk(const Scenario& s, const CoefVector& theta) {
  const Vector delta = theta - s.theta_star;
  if (s.random_design()) return delta.dot(population_gram(s.p) * delta);
  return (deterministic_design(s) * delta).squaredNorm() / s.n;
}

double f_inf_norm(const Scenario& s) {
  if (s.random_design()) {
    const double pos = s.theta_star.cwiseMax(0.0).sum();
    const double neg = -s.theta_star.cwiseMin(0.0).sum();
    return kSqrt3 * std::max(pos, neg);
  }
  return (deterministic_design(s) * s.theta_star).cwiseAbs().maxCoeff();
}

double dictionary_sup_norm(const Scenario& s) {
  return s.random_design() ? kSqrt3 : deterministic_design(s).cwiseAbs().maxCoeff();
}

ExperimentReport run_replications(const EstimatorSpec& est, const Scenario& s, int reps,
                                  std::uint64_t base_seed, double bound) {
  if (reps < 1) throw std::invalid_argument("run_replications: reps must be at least 1");
  s.validate();
  std::vector<ReplicationResult> out(reps);
#pragma omp parallel for schedule(dynamic, 1)
  for (int r = 0; r < reps; ++r) out[r] = replicate(est, s, derive_seed(base_seed, r));
  return summarize(std::move(out), est, bound);
}

ExperimentReport run_replications_serial(const EstimatorSpec& est, const Scenario& s, int reps,
                                         std::uint64_t base_seed, double bound) {
  if (reps < 1) throw std::invalid_argument("run_replications: reps must be at least 1");
  s.validate();
  std::vector<ReplicationResult> out;
  for (int r = 0; r < reps; ++r) out.push_back(replicate(est, s, derive_seed(base_seed, r)));
  return summarize(std::move(out), est, bound);
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile: empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * (values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - lo) * (values[hi] - values[lo]);
}

QuadratureResult quadrature_gibbs_mean(const DesignSample& sample, const GibbsConfig& cfg, int points) {
  if (sample.p() > 2) throw std::invalid_argument("quadrature_gibbs_mean: unsupported for p > 2");
  cfg.validate();
  if (points <= 0) points = sample.p() == 1 ? 200'000 : 2000;
  points += points % 2;
  const Moments fine = gibbs_moments(sample, cfg, points);
  const Moments coarse = gibbs_moments(sample, cfg, points / 2 + (points / 2) % 2);
  const CoefVector mean = fine.first / fine.mass;
  const CoefVector mean_coarse = coarse.first / coarse.mass;
  return {mean, (mean - mean_coarse).cwiseAbs().maxCoeff() / 15.0};
}

std::vector<double> quadrature_gibbs_cdf(const DesignSample& sample, const GibbsConfig& cfg,
                                         const std::vector<double>& at, int points) {
  if (sample.p() != 1) throw std::invalid_argument("quadrature_gibbs_cdf: requires p = 1");
  cfg.validate();
  const int n = sample.n();
  const double R = cfg.radius();
  const QuadraticRisk risk(sample);
  const double r_lo = fit_subset(sample, Support({0})).residual_risk;
  const auto density = [&](double t) { return std::exp(-cfg.lambda * (risk.at1(0, t) - r_lo)); };
  const double atom = std::exp(log_prior(0, 1, n, cfg.alpha)) * density(0.0);
  const double w = std::exp(log_prior(1, 1, n, cfg.alpha)) / (2.0 * R);
  const double total = atom + w * simpson(density, -R, R, points);

  std::vector<double> out;
  for (double x : at) {
    const double hi = std::clamp(x, -R, R);
    const int m = std::max(2, static_cast<int>(points * (hi + R) / (2.0 * R)));
    double mass = hi > -R ? w * simpson(density, -R, hi, m) : 0.0;
    if (x >= 0.0) mass += atom;
    out.push_back(mass / total);
  }
  return out;
}

std::vector<int> fold_assignment(int n, int folds, std::uint64_t seed) {
  if (folds < 2 || folds > n) throw std::invalid_argument("fold_assignment: need 2 <= folds <= n");
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.index(i + 1)]);
  std::vector<int> fold(n);
  for (int k = 0; k < n; ++k) fold[perm[k]] = k % folds;
  return fold;
}

CvResult cross_validate(const DesignSample& sample, const EstimatorSpec& est, const std::vector<double>& lambdas,
                        int folds, std::uint64_t fold_seed) {
  if (lambdas.empty()) throw std::invalid_argument("cross_validate: empty lambda grid");
  const std::vector<int> fold = fold_assignment(sample.n(), folds, fold_seed);
  // errors[l][v]: held-out sum of squares of lambda l on fold v
  std::vector<std::vector<double>> errors(lambdas.size(), std::vector<double>(folds, 0.0));
  std::vector<int> fold_size(folds, 0);

  for (int v = 0; v < folds; ++v) {
    std::vector<int> train, test;
    for (int i = 0; i < sample.n(); ++i) (fold[i] == v ? test : train).push_back(i);
    fold_size[v] = static_cast<int>(test.size());
    const DesignSample train_sample = sample.select_rows(train);
    const DesignSample test_sample = sample.select_rows(test);
    FitCache cache(est.exact.rank_tol);
    for (std::size_t l = 0; l < lambdas.size(); ++l) {
      CoefVector theta;
      if (est.kind == EstimatorSpec::Kind::Exact) {
        ExactEWConfig cfg = est.exact;
        cfg.lambda = lambdas[l];
        theta = aggregate_exact(train_sample, cfg, &cache).theta;
      } else {
        GibbsConfig cfg = est.gibbs;
        cfg.lambda = lambdas[l];
        theta = gibbs_estimate(train_sample, cfg).theta;
      }
      errors[l][v] = (test_sample.y() - test_sample.phi() * theta).squaredNorm();
    }
  }

  CvResult result;
  result.selected_lambda = lambdas.front();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l < lambdas.size(); ++l) {
    std::vector<double> per_fold(folds);
    for (int v = 0; v < folds; ++v) per_fold[v] = errors[l][v] / fold_size[v];
    const double err = std::accumulate(errors[l].begin(), errors[l].end(), 0.0) / sample.n();
    const double se = mean_se(per_fold).second;
    result.rows.push_back({lambdas[l], err, se});
    if (err < best || (err == best && lambdas[l] < result.selected_lambda)) {
      best = err;
      result.selected_lambda = lambdas[l];
    }
  }
  return result;
}

}  // namespace ew
