#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "domino/ndgrad/tape.hpp"
#include "domino/simsuite.hpp"

namespace domino::sim {

namespace {

void require_paired(const Matrix& zi, const Matrix& zj) {
  if (zi.rows() != zj.rows()) {
    throw std::invalid_argument("similarity: inputs have " + std::to_string(zi.rows()) + " and " +
                                std::to_string(zj.rows()) + " rows");
  }
  if (zi.rows() < 2 || zi.cols() < 1 || zj.cols() < 1) throw std::invalid_argument("similarity: empty input");
  if (!zi.allFinite() || !zj.allFinite()) throw std::invalid_argument("similarity: non-finite entries");
}

Vector clamp_unit(Vector v) { return v.array().min(1.0).max(0.0); }

}  // namespace

CanonicalAnalysis canonical_analysis(const Matrix& zi, const Matrix& zj, const CcaOptions& opts) {
  require_paired(zi, zj);
  const Matrix ci = center_columns(zi);
  const Matrix cj = center_columns(zj);
  const auto n = zi.rows();
  const auto k = std::min(zi.cols(), zj.cols());

  CanonicalAnalysis out;
  const bool short_data = n <= std::max(zi.cols(), zj.cols());
  out.degenerate = short_data || numerical_rank(ci) < ci.cols() || numerical_rank(cj) < cj.cols();
  if (!out.degenerate) {
    const Matrix qi = orthonormal_basis(ci);
    const Matrix qj = orthonormal_basis(cj);
    Eigen::JacobiSVD<Matrix> svd(qi.transpose() * qj, Eigen::ComputeThinU | Eigen::ComputeThinV);
    out.rho = clamp_unit(svd.singularValues().head(k));
    out.variates_i = qi * svd.matrixU().leftCols(k);
    return out;
  }
  const double scale = 1.0 / static_cast<double>(n - 1);
  const Matrix wi = inverse_sqrt_psd(scale * ci.transpose() * ci, opts.eps);
  const Matrix wj = inverse_sqrt_psd(scale * cj.transpose() * cj, opts.eps);
  const Matrix t = wi * (scale * ci.transpose() * cj) * wj;
  Eigen::JacobiSVD<Matrix> svd(t, Eigen::ComputeThinU | Eigen::ComputeThinV);
  out.rho = clamp_unit(svd.singularValues().head(k));
  Matrix h = ci * wi * svd.matrixU().leftCols(k);
  for (Eigen::Index c = 0; c < h.cols(); ++c) {
    const double norm = h.col(c).norm();
    if (norm > 0.0) h.col(c) /= norm;
  }
  out.variates_i = std::move(h);
  return out;
}

MeasureValue cca_measure(const Matrix& zi, const Matrix& zj, const CcaOptions& opts) {
  const auto ca = canonical_analysis(zi, zj, opts);
  return {ca.rho.mean(), ca.degenerate};
}

MeasureValue cka_linear(const Matrix& zi, const Matrix& zj) {
  require_paired(zi, zj);
  const Matrix ci = center_columns(zi);
  const Matrix cj = center_columns(zj);
  const double cross = (cj.transpose() * ci).squaredNorm();
  const double self_i = (ci.transpose() * ci).squaredNorm();
  const double self_j = (cj.transpose() * cj).squaredNorm();
  const double denom = std::sqrt(self_i * self_j);
  if (!(denom > 0.0)) return {std::numeric_limits<double>::quiet_NaN(), true};
  return {cross / denom, false};
}

namespace {

Matrix top_singular_projection(const Matrix& z, double variance_keep) {
  const Matrix c = center_columns(z);
  Eigen::JacobiSVD<Matrix> svd(c, Eigen::ComputeThinV);
  const Vector s2 = svd.singularValues().array().square();
  const double total = s2.sum();
  if (!(total > 0.0)) return c;
  Eigen::Index keep = s2.size();
  double cum = 0.0;
  for (Eigen::Index k = 0; k < s2.size(); ++k) {
    cum += s2(k);
    if (cum >= variance_keep * total * (1.0 - 1e-12)) {
      keep = k + 1;
      break;
    }
  }
  return c * svd.matrixV().leftCols(keep);
}

}  // namespace

MeasureValue svcca(const Matrix& zi, const Matrix& zj, double variance_keep, const CcaOptions& opts) {
  require_paired(zi, zj);
  if (!(variance_keep > 0.0 && variance_keep <= 1.0)) throw std::invalid_argument("svcca: variance_keep must be in (0,1]");
  return cca_measure(top_singular_projection(zi, variance_keep), top_singular_projection(zj, variance_keep), opts);
}

PwccaResult pwcca(const Matrix& zi, const Matrix& zj, const CcaOptions& opts) {
  const auto ca = canonical_analysis(zi, zj, opts);
  const Matrix ci = center_columns(zi);
  PwccaResult out;
  out.rho = ca.rho;
  out.degenerate = ca.degenerate;
  out.weights = (ca.variates_i.transpose() * ci).cwiseAbs().rowwise().sum();
  const double total = out.weights.sum();
  if (total > 0.0) {
    out.weights /= total;
  } else {
    out.weights.setConstant(1.0 / static_cast<double>(out.weights.size()));
  }
  out.value = out.weights.dot(out.rho);
  return out;
}

SimilarityValues similarity(const Matrix& zi, const Matrix& zj, const SimilarityOptions& opts) {
  SimilarityValues v;
  const auto cca = cca_measure(zi, zj, opts.cca);
  const auto sv = svcca(zi, zj, opts.variance_keep, opts.cca);
  const auto pij = pwcca(zi, zj, opts.cca);
  const auto pji = pwcca(zj, zi, opts.cca);
  const auto cka = cka_linear(zi, zj);
  v.cca = cca.value;
  v.svcca = sv.value;
  v.pwcca_ij = pij.value;
  v.pwcca_ji = pji.value;
  v.cka = cka.value;
  v.degenerate = cca.degenerate || sv.degenerate || pij.degenerate || pji.degenerate || cka.degenerate;
  return v;
}

bool SimilarityReport::in_unit_range(double tol) const {
  for (const auto* s : {&train, &holdout}) {
    for (double x : {s->cca, s->svcca, s->pwcca_ij, s->pwcca_ji, s->cka}) {
      if (!(x >= -tol && x <= 1.0 + tol)) return false;
    }
  }
  return true;
}

template <typename T>
RepMatrix collect_representations(const model::Encoder<T>& encoder, const data::LabeledImageSet& images,
                                  int modality, std::string split, std::int64_t batch_size) {
  const auto n = images.size();
  const auto latent = encoder.config().latent_dim;
  RepMatrix rep;
  rep.z.resize(n, latent);
  rep.modality = modality;
  rep.split = std::move(split);
  nd::Tape<T> tape;
  tape.set_recording(false);
  std::vector<std::int64_t> idx;
  for (std::int64_t begin = 0; begin < n; begin += batch_size) {
    const auto end = std::min(n, begin + batch_size);
    idx.clear();
    for (auto i = begin; i < end; ++i) idx.push_back(i);
    const auto x = nd::cast<T>(data::gather_images(images, idx));
    const auto out = encoder(tape, x, /*training=*/false);
    const auto zv = out.z.values();
    for (auto i = begin; i < end; ++i)
      for (std::int64_t c = 0; c < latent; ++c) rep.z(i, c) = static_cast<double>(zv[(i - begin) * latent + c]);
  }
  return rep;
}

template RepMatrix collect_representations<float>(const model::Encoder<float>&, const data::LabeledImageSet&, int,
                                                  std::string, std::int64_t);
template RepMatrix collect_representations<double>(const model::Encoder<double>&, const data::LabeledImageSet&, int,
                                                   std::string, std::int64_t);

}  // namespace domino::sim
