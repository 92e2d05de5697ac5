#pragma once

// Gibbs estimator over sparse l1-balls: the mixture prior m = sum_J pi_J u_J
// (u_J uniform on the l1-ball of radius K+1 restricted to J), tilted by
// exp(-lambda r(theta)), sampled with reversible-jump Metropolis-Hastings.

#include "ew/model.hpp"
#include "ew/rng.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace ew {

enum class MoveKind : int { Update = 0, Add = 1, Remove = 2, Swap = 3 };
inline constexpr int kMoveKinds = 4;
const char* move_name(MoveKind kind);

struct MoveProbs {
  double update = 0.7;
  double add = 0.1;
  double remove = 0.1;
  double swap = 0.1;

  double of(MoveKind kind) const;
};

struct GibbsConfig {
  double lambda = 0.0;
  double K = 2.0;  // prior lives on the l1-ball of radius K+1
  double alpha = 0.5;
  double sigma = 1.0;
  double xi = 1.0;
  double f_inf_bound = 0.0;
  double L = 1.0;
  std::int64_t chain_length = 100'000;
  std::int64_t burn_in = 10'000;
  std::int64_t thin = 1;
  MoveProbs move_probs;
  double step_size = 0.1;
  int chains = 1;
  std::uint64_t seed = 1;
  bool record_trace = false;

  double radius() const { return K + 1.0; }
  /// Throws std::invalid_argument when an invariant is violated.
  void validate() const;
};

/// 0.1 (K+1) / sqrt(p).
double default_step_size(double K, int p);

struct ChainState {
  Support support;
  CoefVector theta;
  double cached_risk = 0.0;
  Vector residual;  // y - phi theta, kept in step with theta

  static ChainState from_theta(const DesignSample& sample, CoefVector theta);
};

struct TraceRow {
  std::int64_t iteration;
  int support_size;
  double l1;
  double risk;
  MoveKind move;
  bool accepted;
};

struct GibbsEstimate {
  CoefVector theta;
  std::array<double, kMoveKinds> acceptance_rates{};  // accepted / proposed, per move kind
  Vector support_frequency;
  std::int64_t samples_used = 0;
  std::vector<TraceRow> trace;  // first chain only, when requested
};

/// |J| = k with probability proportional to alpha^k on {0..min(n,p)}, then a uniform k-subset.
Support sample_prior_support(int p, int n, double alpha, Rng& rng);

/// Uniform draw from {theta supported on J : |theta|_1 <= radius} in R^p.
CoefVector sample_uniform_l1_ball(const Support& J, int p, double radius, Rng& rng);

/// Target and proposal densities of the sampler. Densities are with respect
/// to the reference measure sum_J Lebesgue_{|J|}, so the uniform l1-ball
/// density d!/(2R)^d enters the target explicitly.
class GibbsKernel {
public:
  GibbsKernel(const DesignSample& sample, const GibbsConfig& cfg);

  /// log pi_J + log(d!/(2R)^d) - lambda r; -infinity outside the prior support.
  double log_target(const CoefVector& theta, double risk) const;
  double log_target(const CoefVector& theta) const;
  /// log q(from -> to); -infinity when no single move connects the two.
  double log_proposal(const CoefVector& from, const CoefVector& to) const;
  /// log of the Metropolis-Hastings acceptance ratio for from -> to.
  double log_acceptance_ratio(const CoefVector& from, double from_risk, const CoefVector& to,
                              double to_risk) const;
  double log_acceptance_ratio(const CoefVector& from, const CoefVector& to) const;

  /// Prior draw: support from sample_prior_support, then uniform on the ball.
  ChainState initial_state(Rng& rng) const;

  struct StepResult {
    MoveKind move;
    bool accepted;
  };
  /// One MH transition in place. Proposals that leave the ball or cannot be
  /// formed (e.g. add with every coordinate active) are rejected.
  StepResult step(ChainState& state, Rng& rng) const;

  const DesignSample& sample() const { return sample_; }
  const GibbsConfig& config() const { return cfg_; }

private:
  const DesignSample& sample_;
  GibbsConfig cfg_;
  int max_size_;
  double log_two_radius_;
  std::array<double, kMoveKinds> log_move_probs_;
};

/// One MH transition returning the new state (the input state on rejection).
ChainState mh_step(const ChainState& state, const DesignSample& sample, const GibbsConfig& cfg,
                   Rng& rng);

/// Ergodic average of theta after burn-in, keeping every thin-th state.
/// Chains run concurrently with seeds derive_seed(cfg.seed, c); the cross-chain
/// average is taken in chain order.
GibbsEstimate gibbs_estimate(const DesignSample& sample, const GibbsConfig& cfg);

/// Single-threaded reference for gibbs_estimate; identical output.
GibbsEstimate gibbs_estimate_serial(const DesignSample& sample, const GibbsConfig& cfg);

/// max( 8 sigma^2 + (2F + L(2K+1))^2 , 8 (xi + 2F + L(2K+1)) L(2K+1) ).
double gibbs_constant(double sigma, double xi, double f_inf_bound, double L, double K);

/// n / (2 C1).
double default_temperature_gibbs(int n, double sigma, double xi, double f_inf_bound, double L,
                                 double K);

/// Right-hand side of the high-probability oracle inequality:
/// R_bar + 3L^2/n^2 + (8 C1/n)[ s log(K+1) + s log(e n p/(alpha s)) + log(2/(eps (1-alpha))) ].
double bound_probability(int support_size, double R_bar, double epsilon, int n, int p,
                         double alpha, double K, double C1, double L);

}  // namespace ew
