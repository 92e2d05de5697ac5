#include "ew/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ew {

Support::Support(std::vector<int> indices, int p) : indices_(std::move(indices)) {
  std::sort(indices_.begin(), indices_.end());
  if (std::adjacent_find(indices_.begin(), indices_.end()) != indices_.end())
    throw std::invalid_argument("Support: duplicate index");
  if (!indices_.empty() && indices_.front() < 0)
    throw std::invalid_argument("Support: negative index");
  if (p > 0 && !indices_.empty() && indices_.back() >= p)
    throw std::invalid_argument("Support: index out of range for p=" + std::to_string(p));
}

bool Support::contains(int j) const {
  return std::binary_search(indices_.begin(), indices_.end(), j);
}

Support Support::with(int j) const {
  Support out = *this;
  out.indices_.insert(std::lower_bound(out.indices_.begin(), out.indices_.end(), j), j);
  return out;
}

Support Support::without(int j) const {
  Support out = *this;
  auto it = std::lower_bound(out.indices_.begin(), out.indices_.end(), j);
  if (it != out.indices_.end() && *it == j) out.indices_.erase(it);
  return out;
}

std::string Support::to_string() const {
  std::ostringstream os;
  os << '{';
  for (std::size_t k = 0; k < indices_.size(); ++k) {
    if (k) os << ',';
    os << indices_[k] + 1;
  }
  os << '}';
  return os.str();
}

Support support_of(const CoefVector& theta) {
  std::vector<int> idx;
  for (Eigen::Index j = 0; j < theta.size(); ++j)
    if (theta[j] != 0.0) idx.push_back(static_cast<int>(j));
  return Support(std::move(idx));
}

double l1_norm(const CoefVector& theta) { return theta.lpNorm<1>(); }

DesignSample::DesignSample(Matrix phi, Vector y) : phi_(std::move(phi)), y_(std::move(y)) {
  if (phi_.rows() < 1 || phi_.cols() < 1)
    throw std::invalid_argument("DesignSample: need n >= 1 and p >= 1");
  if (y_.size() != phi_.rows())
    throw std::invalid_argument("DesignSample: y has " + std::to_string(y_.size()) +
                                " entries but phi has " + std::to_string(phi_.rows()) + " rows");
  if (!phi_.allFinite() || !y_.allFinite())
    throw std::invalid_argument("DesignSample: non-finite entry");
}

Vector DesignSample::column_empirical_norms() const {
  return (phi_.colwise().squaredNorm() / static_cast<double>(n())).cwiseSqrt().transpose();
}

double DesignSample::max_abs_entry() const { return phi_.cwiseAbs().maxCoeff(); }

DesignSample DesignSample::with_response(Vector y) const { return DesignSample(phi_, std::move(y)); }

DesignSample DesignSample::select_rows(const std::vector<int>& rows) const {
  Matrix phi(static_cast<Eigen::Index>(rows.size()), phi_.cols());
  Vector y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    phi.row(static_cast<Eigen::Index>(k)) = phi_.row(rows[k]);
    y[static_cast<Eigen::Index>(k)] = y_[rows[k]];
  }
  return DesignSample(std::move(phi), std::move(y));
}

Vector predict(const DesignSample& sample, const CoefVector& theta) {
  if (theta.size() != sample.p())
    throw std::invalid_argument("predict: theta has length " + std::to_string(theta.size()) +
                                ", expected p=" + std::to_string(sample.p()));
  return sample.phi() * theta;
}

double empirical_risk(const DesignSample& sample, const CoefVector& theta) {
  return (sample.y() - predict(sample, theta)).squaredNorm() / static_cast<double>(sample.n());
}

double empirical_norm(const Vector& values) {
  if (values.size() == 0) throw std::invalid_argument("empirical_norm: empty vector");
  return std::sqrt(values.squaredNorm() / static_cast<double>(values.size()));
}

std::vector<NormViolation> check_normalization(const DesignSample& sample, double tol) {
  std::vector<NormViolation> out;
  const Vector norms = sample.column_empirical_norms();
  for (int j = 0; j < sample.p(); ++j)
    if (std::abs(norms[j] - 1.0) > tol) out.push_back({j, norms[j]});
  return out;
}

}  // namespace ew
