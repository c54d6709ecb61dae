#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "domino/rng.hpp"

namespace oracle {

using Matrix = Eigen::MatrixXd;

inline Matrix centered(const Matrix& z) { return z.rowwise() - z.colwise().mean(); }

// Canonical correlations from the eigenvalues of Sii^-1 Sij Sjj^-1 Sji,
// via a general (non-symmetric) eigensolver. Descending, length min(di,dj).
inline std::vector<double> canonical_correlations(const Matrix& zi, const Matrix& zj) {
  const Matrix a = centered(zi), b = centered(zj);
  const Matrix sii = a.transpose() * a, sjj = b.transpose() * b, sij = a.transpose() * b;
  const Matrix m = sii.inverse() * sij * sjj.inverse() * sij.transpose();
  const Eigen::EigenSolver<Matrix> es(m, false);
  std::vector<double> rho;
  for (Eigen::Index k = 0; k < m.rows(); ++k) rho.push_back(std::sqrt(std::clamp(es.eigenvalues()[k].real(), 0.0, 1.0)));
  std::sort(rho.rbegin(), rho.rend());
  rho.resize(static_cast<std::size_t>(std::min(zi.cols(), zj.cols())));
  return rho;
}

inline double mean_cca(const Matrix& zi, const Matrix& zj) {
  const auto rho = canonical_correlations(zi, zj);
  double s = 0.0;
  for (double r : rho) s += r;
  return s / static_cast<double>(rho.size());
}

inline Matrix gaussian(Eigen::Index n, Eigen::Index d, domino::Rng& rng) {
  Matrix m(n, d);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < d; ++c) m(r, c) = rng.normal();
  return m;
}

// Orthonormal, zero-mean columns.
inline Matrix centered_orthonormal(Eigen::Index n, Eigen::Index d, domino::Rng& rng) {
  const Matrix q = Eigen::HouseholderQR<Matrix>(centered(gaussian(n, d, rng))).householderQ() * Matrix::Identity(n, d);
  return q;
}

inline Matrix random_orthogonal(Eigen::Index d, domino::Rng& rng) {
  return Eigen::HouseholderQR<Matrix>(gaussian(d, d, rng)).householderQ() * Matrix::Identity(d, d);
}

}  // namespace oracle
