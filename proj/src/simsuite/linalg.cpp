#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "domino/simsuite.hpp"

namespace domino::sim {

Matrix center_columns(const Matrix& z) {
  if (z.rows() == 0) return z;
  return z.rowwise() - z.colwise().mean();
}

Matrix inverse_sqrt_psd(const Matrix& s, double eps) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(s);
  if (es.info() != Eigen::Success) throw std::runtime_error("inverse_sqrt_psd: eigendecomposition failed");
  Vector inv = (es.eigenvalues().array().max(0.0) + eps).rsqrt();
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

Matrix orthonormal_basis(const Matrix& z) {
  Eigen::HouseholderQR<Matrix> qr(z);
  return qr.householderQ() * Matrix::Identity(z.rows(), z.cols());
}

Eigen::Index numerical_rank(const Matrix& z, double rel_tol) {
  if (z.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(z);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  return (s.array() > rel_tol * s(0)).count();
}

}  // namespace domino::sim
