#include "ew/gibbs_ew.hpp"

#include "ew/exact_ew.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace ew {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLogSqrt2Pi = 0.91893853320467274178;
constexpr std::int64_t kRefreshEvery = 4096;

double safe_log(double x) { return x > 0.0 ? std::log(x) : kNegInf; }

struct ChainResult {
  Vector theta_sum;
  Vector support_count;
  std::int64_t kept = 0;
  std::array<std::int64_t, kMoveKinds> proposed{};
  std::array<std::int64_t, kMoveKinds> accepted{};
  std::vector<TraceRow> trace;
};

ChainResult run_chain(const GibbsKernel& kernel, int chain) {
  const GibbsConfig& cfg = kernel.config();
  const int p = kernel.sample().p();
  Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(chain)));
  ChainState state = kernel.initial_state(rng);

  ChainResult out;
  out.theta_sum = Vector::Zero(p);
  out.support_count = Vector::Zero(p);
  const bool trace = cfg.record_trace && chain == 0;

  for (std::int64_t t = 1; t <= cfg.chain_length; ++t) {
    const auto [move, accepted] = kernel.step(state, rng);
    const auto m = static_cast<int>(move);
    ++out.proposed[m];
    if (accepted) ++out.accepted[m];
    if (t % kRefreshEvery == 0) state = ChainState::from_theta(kernel.sample(), std::move(state.theta));

    if (trace && t % cfg.thin == 0)
      out.trace.push_back({t, state.support.size(), l1_norm(state.theta), state.cached_risk, move, accepted});
    if (t > cfg.burn_in && (t - cfg.burn_in) % cfg.thin == 0) {
      out.theta_sum += state.theta;
      for (int j : state.support) out.support_count[j] += 1.0;
      ++out.kept;
    }
  }
  return out;
}

GibbsEstimate combine(const std::vector<ChainResult>& chains, int p) {
  GibbsEstimate est;
  Vector theta_sum = Vector::Zero(p);
  Vector count = Vector::Zero(p);
  std::array<std::int64_t, kMoveKinds> proposed{}, accepted{};
  for (const ChainResult& c : chains) {
    theta_sum += c.theta_sum;
    count += c.support_count;
    est.samples_used += c.kept;
    for (int m = 0; m < kMoveKinds; ++m) {
      proposed[m] += c.proposed[m];
      accepted[m] += c.accepted[m];
    }
  }
  const double kept = static_cast<double>(std::max<std::int64_t>(est.samples_used, 1));
  est.theta = theta_sum / kept;
  est.support_frequency = count / kept;
  for (int m = 0; m < kMoveKinds; ++m)
    est.acceptance_rates[m] = proposed[m] ? static_cast<double>(accepted[m]) / proposed[m] : 0.0;
  if (!chains.empty()) est.trace = chains.front().trace;
  return est;
}

}  // namespace

const char* move_name(MoveKind kind) {
  switch (kind) {
    case MoveKind::Update: return "update";
    case MoveKind::Add: return "add";
    case MoveKind::Remove: return "remove";
    case MoveKind::Swap: return "swap";
  }
  return "?";
}

double MoveProbs::of(MoveKind kind) const {
  switch (kind) {
    case MoveKind::Update: return update;
    case MoveKind::Add: return add;
    case MoveKind::Remove: return remove;
    case MoveKind::Swap: return swap;
  }
  return 0.0;
}

void GibbsConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be nonnegative and finite");
  if (!(K > 1.0)) throw std::invalid_argument("K must exceed 1 (Take K>1)");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0,1)");
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  if (!(xi > 0.0)) throw std::invalid_argument("xi must be positive");
  if (!(f_inf_bound >= 0.0)) throw std::invalid_argument("f_inf_bound must be nonnegative");
  if (!(L > 0.0)) throw std::invalid_argument("L must be positive");
  if (chain_length < 1 || burn_in < 0 || thin < 1)
    throw std::invalid_argument("chain_length and thin must be positive, burn_in nonnegative");
  if (burn_in >= chain_length) throw std::invalid_argument("burn_in must be smaller than chain_length");
  const double probs[] = {move_probs.update, move_probs.add, move_probs.remove, move_probs.swap};
  for (double q : probs)
    if (!(q >= 0.0)) throw std::invalid_argument("move probabilities must be nonnegative");
  if (std::abs(probs[0] + probs[1] + probs[2] + probs[3] - 1.0) > 1e-12)
    throw std::invalid_argument("move probabilities must sum to 1");
  if (!(step_size > 0.0)) throw std::invalid_argument("step_size must be positive");
  if (chains < 1) throw std::invalid_argument("chains must be at least 1");
}

double default_step_size(double K, int p) { return 0.1 * (K + 1.0) / std::sqrt(static_cast<double>(p)); }

ChainState ChainState::from_theta(const DesignSample& sample, CoefVector theta) {
  ChainState s;
  s.support = support_of(theta);
  s.residual = sample.y() - sample.phi() * theta;
  s.cached_risk = s.residual.squaredNorm() / sample.n();
  s.theta = std::move(theta);
  return s;
}

Support sample_prior_support(int p, int n, double alpha, Rng& rng) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("sample_prior_support: alpha must lie in (0,1)");
  const int top = std::min(n, p);
  // Inverse CDF of the truncated geometric law on {0..top}.
  std::vector<double> mass(top + 1);
  double a = 1.0;
  for (int k = 0; k <= top; ++k, a *= alpha) mass[k] = a;
  const double total = std::accumulate(mass.begin(), mass.end(), 0.0);
  double u = rng.uniform() * total;
  int k = 0;
  while (k < top && u >= mass[k]) u -= mass[k++];

  std::vector<int> pool(p);
  std::iota(pool.begin(), pool.end(), 0);
  for (int i = 0; i < k; ++i) std::swap(pool[i], pool[i + rng.index(p - i)]);
  pool.resize(k);
  return Support(std::move(pool));
}

CoefVector sample_uniform_l1_ball(const Support& J, int p, double radius, Rng& rng) {
  CoefVector theta = CoefVector::Zero(p);
  const int d = J.size();
  if (d == 0) return theta;
  // Flat Dirichlet magnitudes, random signs, radius with density ~ r^{d-1}.
  Vector e(d);
  for (int k = 0; k < d; ++k) e[k] = rng.exponential();
  const double scale = radius * std::pow(rng.uniform(), 1.0 / d) / e.sum();
  for (int k = 0; k < d; ++k) theta[J[k]] = (rng.coin() ? scale : -scale) * e[k];
  return theta;
}

GibbsKernel::GibbsKernel(const DesignSample& sample, const GibbsConfig& cfg)
    : sample_(sample), cfg_(cfg), max_size_(std::min(sample.n(), sample.p())),
      log_two_radius_(std::log(2.0 * cfg.radius())) {
  cfg_.validate();
  for (int m = 0; m < kMoveKinds; ++m) log_move_probs_[m] = safe_log(cfg_.move_probs.of(static_cast<MoveKind>(m)));
}

double GibbsKernel::log_target(const CoefVector& theta, double risk) const {
  const int d = support_of(theta).size();
  if (d > max_size_ || l1_norm(theta) > cfg_.radius()) return kNegInf;
  return log_prior(d, sample_.p(), sample_.n(), cfg_.alpha) + std::lgamma(d + 1.0) - d * log_two_radius_ -
         cfg_.lambda * risk;
}

double GibbsKernel::log_target(const CoefVector& theta) const {
  return log_target(theta, empirical_risk(sample_, theta));
}

double GibbsKernel::log_proposal(const CoefVector& from, const CoefVector& to) const {
  const int p = sample_.p();
  int d = 0;
  std::vector<int> diff;
  for (int j = 0; j < p; ++j) {
    if (from[j] != 0.0) ++d;
    if (from[j] != to[j]) diff.push_back(j);
  }
  const double log_d = std::log(static_cast<double>(d));
  const double log_free = std::log(static_cast<double>(p - d));
  const auto lp = [&](MoveKind m) { return log_move_probs_[static_cast<int>(m)]; };

  if (diff.empty()) {
    if (d == 0) return kNegInf;
    return lp(MoveKind::Update) - kLogSqrt2Pi - std::log(cfg_.step_size);
  }
  if (diff.size() == 1) {
    const int j = diff[0];
    if (from[j] != 0.0 && to[j] != 0.0) {
      const double z = (to[j] - from[j]) / cfg_.step_size;
      return lp(MoveKind::Update) - log_d - kLogSqrt2Pi - std::log(cfg_.step_size) - 0.5 * z * z;
    }
    if (from[j] == 0.0) {
      if (std::abs(to[j]) > cfg_.radius()) return kNegInf;
      return lp(MoveKind::Add) - log_free - log_two_radius_;
    }
    return lp(MoveKind::Remove) - log_d;
  }
  if (diff.size() == 2) {
    int j = diff[0], k = diff[1];
    if (from[j] == 0.0) std::swap(j, k);
    if (from[j] != 0.0 && to[j] == 0.0 && from[k] == 0.0 && to[k] == from[j])
      return lp(MoveKind::Swap) - log_d - log_free;
  }
  return kNegInf;
}

double GibbsKernel::log_acceptance_ratio(const CoefVector& from, double from_risk, const CoefVector& to,
                                         double to_risk) const {
  if (from == to) return 0.0;
  const double target_to = log_target(to, to_risk);
  if (target_to == kNegInf) return kNegInf;
  return target_to - log_target(from, from_risk) + log_proposal(to, from) - log_proposal(from, to);
}

double GibbsKernel::log_acceptance_ratio(const CoefVector& from, const CoefVector& to) const {
  return log_acceptance_ratio(from, empirical_risk(sample_, from), to, empirical_risk(sample_, to));
}

ChainState GibbsKernel::initial_state(Rng& rng) const {
  const Support J = sample_prior_support(sample_.p(), sample_.n(), cfg_.alpha, rng);
  return ChainState::from_theta(sample_, sample_uniform_l1_ball(J, sample_.p(), cfg_.radius(), rng));
}

GibbsKernel::StepResult GibbsKernel::step(ChainState& state, Rng& rng) const {
  const int p = sample_.p();
  const int d = state.support.size();
  const MoveProbs& mp = cfg_.move_probs;

  const double u = rng.uniform();
  MoveKind move = MoveKind::Swap;
  if (u < mp.update) move = MoveKind::Update;
  else if (u < mp.update + mp.add) move = MoveKind::Add;
  else if (u < mp.update + mp.add + mp.remove) move = MoveKind::Remove;

  const auto pick_inactive = [&](int rank) {
    for (int j = 0; j < p; ++j)
      if (state.theta[j] == 0.0 && rank-- == 0) return j;
    return -1;
  };

  // Changes as (coordinate, new value) pairs.
  int j1 = -1, j2 = -1;
  double v1 = 0.0, v2 = 0.0;
  switch (move) {
    case MoveKind::Update:
      if (d == 0) return {move, false};
      j1 = state.support[rng.index(d)];
      v1 = state.theta[j1] + cfg_.step_size * rng.normal();
      if (v1 == 0.0) return {move, false};
      break;
    case MoveKind::Add:
      if (d == p) return {move, false};
      j1 = pick_inactive(rng.index(p - d));
      v1 = rng.uniform(-cfg_.radius(), cfg_.radius());
      if (v1 == 0.0) return {move, false};
      break;
    case MoveKind::Remove:
      if (d == 0) return {move, false};
      j1 = state.support[rng.index(d)];
      v1 = 0.0;
      break;
    case MoveKind::Swap:
      if (d == 0 || d == p) return {move, false};
      j1 = state.support[rng.index(d)];
      j2 = pick_inactive(rng.index(p - d));
      v1 = 0.0;
      v2 = state.theta[j1];
      break;
  }

  CoefVector proposal = state.theta;
  Vector residual = state.residual;
  residual -= (v1 - proposal[j1]) * sample_.phi().col(j1);
  proposal[j1] = v1;
  if (j2 >= 0) {
    residual -= (v2 - proposal[j2]) * sample_.phi().col(j2);
    proposal[j2] = v2;
  }
  if (l1_norm(proposal) > cfg_.radius()) return {move, false};

  const double risk = residual.squaredNorm() / sample_.n();
  const double log_ratio = log_acceptance_ratio(state.theta, state.cached_risk, proposal, risk);
  if (!(log_ratio >= 0.0) && !(std::log(rng.uniform()) < log_ratio)) return {move, false};

  state.theta = std::move(proposal);
  state.residual = std::move(residual);
  state.cached_risk = risk;
  state.support = support_of(state.theta);
  if (l1_norm(state.theta) > cfg_.radius()) throw std::logic_error("accepted state left the l1 ball");
  return {move, true};
}

ChainState mh_step(const ChainState& state, const DesignSample& sample, const GibbsConfig& cfg, Rng& rng) {
  const GibbsKernel kernel(sample, cfg);
  ChainState next = state;
  kernel.step(next, rng);
  return next;
}

GibbsEstimate gibbs_estimate(const DesignSample& sample, const GibbsConfig& cfg) {
  const GibbsKernel kernel(sample, cfg);
  std::vector<ChainResult> chains(cfg.chains);
#pragma omp parallel for schedule(static)
  for (int c = 0; c < cfg.chains; ++c) chains[c] = run_chain(kernel, c);
  return combine(chains, sample.p());
}

GibbsEstimate gibbs_estimate_serial(const DesignSample& sample, const GibbsConfig& cfg) {
  const GibbsKernel kernel(sample, cfg);
  std::vector<ChainResult> chains;
  for (int c = 0; c < cfg.chains; ++c) chains.push_back(run_chain(kernel, c));
  return combine(chains, sample.p());
}

double gibbs_constant(double sigma, double xi, double f_inf_bound, double L, double K) {
  const double spread = L * (2.0 * K + 1.0);
  const double a = 2.0 * f_inf_bound + spread;
  return std::max(8.0 * sigma * sigma + a * a, 8.0 * (xi + a) * spread);
}

double default_temperature_gibbs(int n, double sigma, double xi, double f_inf_bound, double L, double K) {
  if (!(sigma > 0.0 && xi > 0.0 && L > 0.0 && f_inf_bound >= 0.0) || !(K >= 1.0))
    throw std::invalid_argument("default_temperature_gibbs: need sigma, xi, L > 0, F >= 0 and K >= 1");
  return n / (2.0 * gibbs_constant(sigma, xi, f_inf_bound, L, K));
}

double bound_probability(int support_size, double R_bar, double epsilon, int n, int p, double alpha, double K,
                         double C1, double L) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("bound_probability: epsilon must lie in (0,1)");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("bound_probability: alpha must lie in (0,1)");
  if (support_size < 0 || n < 1 || p < 1) throw std::invalid_argument("bound_probability: invalid dimensions");
  double bracket = std::log(2.0 / (epsilon * (1.0 - alpha)));
  if (support_size > 0) {
    const double s = support_size;
    bracket += s * std::log(K + 1.0) + s * std::log(std::exp(1.0) * n * p / (alpha * s));
  }
  return R_bar + 3.0 * L * L / (static_cast<double>(n) * n) + 8.0 * C1 / n * bracket;
}

}  // namespace ew
