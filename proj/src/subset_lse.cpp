#include "ew/subset_lse.hpp"

#include <stdexcept>

namespace ew {

SubsetFit fit_subset(const DesignSample& sample, const Support& J, double rank_tol) {
  const int n = sample.n();
  const int p = sample.p();
  if (!(rank_tol > 0.0)) throw std::invalid_argument("fit_subset: rank_tol must be positive");
  if (!J.empty() && J.indices().back() >= p)
    throw std::invalid_argument("fit_subset: support index out of range for p=" + std::to_string(p));

  SubsetFit fit{J, CoefVector::Zero(p), 0.0, 0, Vector::Zero(n)};
  if (J.empty()) {
    fit.residual_risk = sample.y().squaredNorm() / n;
    return fit;
  }

  const int d = J.size();
  Matrix A(n, d);
  for (int k = 0; k < d; ++k) A.col(k) = sample.phi().col(J[k]);

  Eigen::JacobiSVD<Matrix> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double cutoff = rank_tol * (s.size() ? s[0] : 0.0);
  int rank = 0;
  while (rank < s.size() && s[rank] > cutoff) ++rank;
  fit.rank = rank;

  if (rank > 0) {
    const auto U = svd.matrixU().leftCols(rank);
    const auto V = svd.matrixV().leftCols(rank);
    const Vector uty = U.transpose() * sample.y();
    const Vector coef = V * (uty.array() / s.head(rank).array()).matrix();
    for (int k = 0; k < d; ++k) fit.theta[J[k]] = coef[k];
    fit.leverages = U.rowwise().squaredNorm();
  }
  fit.residual_risk = (sample.y() - sample.phi() * fit.theta).squaredNorm() / n;
  return fit;
}

std::shared_ptr<const SubsetFit> FitCache::get(const DesignSample& sample, const Support& J) {
  {
    std::lock_guard lock(mu_);
    if (auto it = fits_.find(J); it != fits_.end()) return it->second;
  }
  auto fit = std::make_shared<const SubsetFit>(fit_subset(sample, J, rank_tol_));
  std::lock_guard lock(mu_);
  return fits_.emplace(J, std::move(fit)).first->second;
}

std::size_t FitCache::size() const {
  std::lock_guard lock(mu_);
  return fits_.size();
}

}  // namespace ew
