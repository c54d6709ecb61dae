#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

#include "domino/datasets.hpp"
#include "domino/model.hpp"

namespace domino::sim {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// ---- linear algebra primitives ----

Matrix center_columns(const Matrix& z);

/// (S + eps I)^{-1/2} for symmetric positive semi-definite S.
Matrix inverse_sqrt_psd(const Matrix& s, double eps);

/// Thin Q factor of a reduced Householder QR.
Matrix orthonormal_basis(const Matrix& z);

/// Numerical rank from singular values relative to the largest.
Eigen::Index numerical_rank(const Matrix& z, double rel_tol = 1e-10);

// ---- measures ----

struct CcaOptions {
  /// Ridge added to both covariances on the regularized path.
  double eps = 1e-3;
};

/// Canonical correlations (descending) and canonical variates of Zi
/// (unit-norm columns of an n x k matrix).
struct CanonicalAnalysis {
  Vector rho;
  Matrix variates_i;
  bool degenerate = false;
};

/// Uses orthonormal bases of the centered inputs; rank-deficient inputs or
/// n <= d switch to the ridge-regularized whitening path and set
/// `degenerate`.
CanonicalAnalysis canonical_analysis(const Matrix& zi, const Matrix& zj, const CcaOptions& opts = {});

struct MeasureValue {
  double value = 0.0;
  bool degenerate = false;
};

/// Mean canonical correlation, (1/d) ||Q_j^T Q_i||_*.
MeasureValue cca_measure(const Matrix& zi, const Matrix& zj, const CcaOptions& opts = {});

/// Linear CKA on column-centered inputs. A zero input gives NaN with
/// `degenerate` set.
MeasureValue cka_linear(const Matrix& zi, const Matrix& zj);

/// CCA after projecting each centered input on the top singular directions
/// holding at least `variance_keep` of the squared singular mass.
MeasureValue svcca(const Matrix& zi, const Matrix& zj, double variance_keep = 0.99, const CcaOptions& opts = {});

/// Projection-weighted CCA oriented on Zi: weights proportional to
/// sum_c |<h_k, Zi[:,c]>| over canonical variates h_k of Zi.
struct PwccaResult {
  double value = 0.0;
  Vector weights;
  Vector rho;
  bool degenerate = false;
};
PwccaResult pwcca(const Matrix& zi, const Matrix& zj, const CcaOptions& opts = {});

// ---- reports ----

struct RepMatrix {
  Matrix z;
  int modality = 0;
  std::string split;
};

struct SimilarityValues {
  double cca = 0.0;
  double svcca = 0.0;
  double pwcca_ij = 0.0;
  double pwcca_ji = 0.0;
  double cka = 0.0;
  bool degenerate = false;
};

struct SimilarityOptions {
  double variance_keep = 0.99;
  CcaOptions cca;
};

struct SimilarityReport {
  std::string model;
  std::int64_t epoch = 0;
  SimilarityValues train;
  SimilarityValues holdout;
  bool centered = true;
  double variance_keep = 0.99;
  double cca_eps = 1e-3;

  /// All values lie in [0,1] up to `tol` (NaN fails).
  bool in_unit_range(double tol = 1e-8) const;
};

SimilarityValues similarity(const Matrix& zi, const Matrix& zj, const SimilarityOptions& opts = {});

/// similarity.json: {model, epoch, centered, variance_keep, cca_eps,
/// train: {cca, svcca, pwcca_ij, pwcca_ji, cka, degenerate}, holdout: {...}}.
/// NaN values are written as null.
std::string similarity_json(const SimilarityReport& report);
void write_similarity_json(const SimilarityReport& report, const std::filesystem::path& path);
SimilarityReport read_similarity_json(const std::filesystem::path& path);

/// Deterministic eval-mode latents for every sample, in split order.
template <typename T>
RepMatrix collect_representations(const model::Encoder<T>& encoder, const data::LabeledImageSet& images,
                                  int modality, std::string split, std::int64_t batch_size = 256);

}  // namespace domino::sim
