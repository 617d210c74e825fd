#include "blin/linalg.hpp"

#include <algorithm>
#include <cmath>

#include "blin/common.hpp"

namespace blin::linalg {

SymmetricEigen eigen_symmetric(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) throw InputError("eigen_symmetric: matrix is not square");
  SymmetricEigen out;
  if (a.rows() == 0) return out;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a);
  if (solver.info() != Eigen::Success) throw InputError("eigen_symmetric: eigensolver did not converge");
  // Eigen returns ascending order.
  out.values = solver.eigenvalues().reverse();
  out.vectors = solver.eigenvectors().rowwise().reverse();
  return out;
}

PsdReport check_psd(const Eigen::MatrixXd& a, double tol) {
  PsdReport report;
  if (a.rows() == 0) return report;
  const auto eig = eigen_symmetric(a);
  report.max_eigenvalue = eig.values(0);
  report.min_eigenvalue = eig.values(eig.values.size() - 1);
  report.ok = report.min_eigenvalue >= -tol * std::max(report.max_eigenvalue, 0.0);
  return report;
}

double relative_asymmetry(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) return INFINITY;
  if (a.size() == 0) return 0.0;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  return (a - a.transpose()).cwiseAbs().maxCoeff() / scale;
}

PseudoInverse symmetric_pinv(const Eigen::MatrixXd& g, double rel_tol) {
  PseudoInverse out;
  const Eigen::Index n = g.rows();
  out.matrix = Eigen::MatrixXd::Zero(n, n);
  if (n == 0) return out;
  const auto eig = eigen_symmetric(g);
  out.lambda_max = eig.values(0);
  out.lambda_min = eig.values(n - 1);
  if (out.lambda_max <= 0.0) return out;
  const double cutoff = rel_tol * out.lambda_max;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double lambda = eig.values(k);
    if (lambda <= cutoff) break;
    const auto v = eig.vectors.col(k);
    out.matrix.noalias() += (v * v.transpose()) / lambda;
    ++out.rank;
  }
  return out;
}

Eigen::VectorXd to_slots(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw InputError("to_slots: matrix is not square");
  const auto r = static_cast<std::size_t>(m.rows());
  Eigen::VectorXd out(static_cast<Eigen::Index>(slot_count(r)));
  for (std::size_t s = 0; s < slot_count(r); ++s) {
    const auto [i, j] = slot_pair(r, s);
    out(static_cast<Eigen::Index>(s)) = m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  return out;
}

Eigen::MatrixXd from_slots(const Eigen::VectorXd& v, std::size_t r) {
  if (static_cast<std::size_t>(v.size()) != slot_count(r)) throw InputError("from_slots: wrong vector length");
  const auto n = static_cast<Eigen::Index>(r);
  Eigen::MatrixXd out(n, n);
  for (std::size_t s = 0; s < slot_count(r); ++s) {
    const auto [i, j] = slot_pair(r, s);
    out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v(static_cast<Eigen::Index>(s));
    out(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v(static_cast<Eigen::Index>(s));
  }
  return out;
}

}  // namespace blin::linalg
