#pragma once

// Regression data model shared by every estimator: the design/response pair,
// coefficient vectors with their supports, and the empirical risk functionals.

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace ew {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Length-p coefficient vector. Coordinates are 0-based internally.
using CoefVector = Eigen::VectorXd;

/// Strictly increasing set of 0-based dictionary indices.
class Support {
public:
  Support() = default;
  /// Sorts and validates; throws std::invalid_argument on duplicates or
  /// out-of-range entries (when p > 0).
  explicit Support(std::vector<int> indices, int p = 0);

  const std::vector<int>& indices() const { return indices_; }
  int size() const { return static_cast<int>(indices_.size()); }
  bool empty() const { return indices_.empty(); }
  bool contains(int j) const;
  int operator[](std::size_t k) const { return indices_[k]; }

  auto begin() const { return indices_.begin(); }
  auto end() const { return indices_.end(); }

  /// Returns a copy with j inserted / removed (precondition: absent / present).
  Support with(int j) const;
  Support without(int j) const;

  bool operator==(const Support&) const = default;
  auto operator<=>(const Support& o) const { return indices_ <=> o.indices_; }

  /// 1-based rendering, e.g. "{1,3}".
  std::string to_string() const;

private:
  std::vector<int> indices_;
};

/// Set of coordinates with nonzero value.
Support support_of(const CoefVector& theta);
double l1_norm(const CoefVector& theta);

/// Design matrix phi (n x p, phi(i,j) = phi_j(X_i)) plus responses y.
class DesignSample {
public:
  DesignSample(Matrix phi, Vector y);

  const Matrix& phi() const { return phi_; }
  const Vector& y() const { return y_; }
  int n() const { return static_cast<int>(phi_.rows()); }
  int p() const { return static_cast<int>(phi_.cols()); }

  /// sqrt((1/n) sum_i phi(i,j)^2) for each column j.
  Vector column_empirical_norms() const;
  /// max_{i,j} |phi(i,j)|.
  double max_abs_entry() const;

  /// Same design with a different response vector.
  DesignSample with_response(Vector y) const;
  /// Rows selected by index, in the order given.
  DesignSample select_rows(const std::vector<int>& rows) const;

private:
  Matrix phi_;
  Vector y_;
};

Vector predict(const DesignSample& sample, const CoefVector& theta);

/// r(theta) = (1/n) sum_i (y_i - f_theta(X_i))^2.
double empirical_risk(const DesignSample& sample, const CoefVector& theta);

double empirical_norm(const Vector& values);

struct NormViolation {
  int column;  // 0-based
  double norm;
};

/// Columns whose empirical norm differs from 1 by more than tol. Diagnostic only.
std::vector<NormViolation> check_normalization(const DesignSample& sample, double tol);

}  // namespace ew
