#pragma once

#include "ew/model.hpp"

#include <map>
#include <memory>
#include <mutex>

namespace ew {

inline constexpr double kDefaultRankTol = 1e-10;

/// Least-squares fit restricted to a support.
struct SubsetFit {
  Support support;
  CoefVector theta;      // length p, zero off-support
  double residual_risk;  // r(theta)
  int rank;              // numerical rank of A_J
  Vector leverages;      // diagonal of the submodel hat matrix, length n
};

/// Minimum-norm least squares over coefficient vectors supported on J.
///
/// Uses a thin SVD of the n x |J| submatrix A_J; singular values below
/// rank_tol * s_max count as zero, so the result is the pseudo-inverse
/// solution. Leverages are the squared row norms of the retained left
/// singular vectors, i.e. (1/n) Phi_J(X_i) Sigma_J^+ Phi_J(X_i)^T.
SubsetFit fit_subset(const DesignSample& sample, const Support& J,
                     double rank_tol = kDefaultRankTol);

/// Thread-safe memo of subset fits for one design sample.
class FitCache {
public:
  explicit FitCache(double rank_tol = kDefaultRankTol) : rank_tol_(rank_tol) {}

  std::shared_ptr<const SubsetFit> get(const DesignSample& sample, const Support& J);
  std::size_t size() const;
  double rank_tol() const { return rank_tol_; }

private:
  double rank_tol_;
  mutable std::mutex mu_;
  std::map<Support, std::shared_ptr<const SubsetFit>> fits_;
};

}  // namespace ew
