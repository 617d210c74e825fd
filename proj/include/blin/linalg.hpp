#pragma once

#include <cstddef>

#include <Eigen/Dense>

namespace blin::linalg {

struct SymmetricEigen {
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;  // columns match values
};

SymmetricEigen eigen_symmetric(const Eigen::MatrixXd& a);

struct PsdReport {
  bool ok = true;
  double min_eigenvalue = 0.0;
  double max_eigenvalue = 0.0;
};

/// PSD up to tolerance: smallest eigenvalue >= -tol * max(largest, 0).
PsdReport check_psd(const Eigen::MatrixXd& a, double tol);

/// Largest |a_ij - a_ji| relative to max(1, max |a_ij|).
double relative_asymmetry(const Eigen::MatrixXd& a);

struct PseudoInverse {
  Eigen::MatrixXd matrix;
  Eigen::Index rank = 0;
  double lambda_max = 0.0;
  double lambda_min = 0.0;
};

// Moore-Penrose inverse of a symmetric PSD matrix through its
// eigendecomposition. Eigenvalues at or below rel_tol * lambda_max are
// treated as zero, so rank-deficient Gram matrices are the normal case.
PseudoInverse symmetric_pinv(const Eigen::MatrixXd& g, double rel_tol);

/// Upper triangle of a symmetric matrix as a vector in slot order.
Eigen::VectorXd to_slots(const Eigen::MatrixXd& m);
/// Inverse of to_slots.
Eigen::MatrixXd from_slots(const Eigen::VectorXd& v, std::size_t r);

}  // namespace blin::linalg
