#include <cmath>
#include <stdexcept>

#include "domino/objectives.hpp"
#include "domino/simsuite.hpp"

namespace domino::objectives {

void CriticConfig::validate() const {
  if (d < 1) throw std::invalid_argument("critic: embedding dim must be positive");
  if (!(clip > 0.0)) throw std::invalid_argument("critic: clip must be positive");
  if (!(penalty >= 0.0)) throw std::invalid_argument("critic: penalty must be non-negative");
}

namespace {

template <typename T>
Array<T> clip_scores(Tape<T>& tape, const Array<T>& raw, double clip) {
  return nd::affine(tape, nd::tanh(tape, nd::affine(tape, raw, 1.0 / clip)), clip);
}

// Constant (G,N,N) masks selecting the diagonal of each block.
template <typename T>
std::pair<Array<T>, Array<T>> diagonal_masks(std::int64_t groups, std::int64_t n) {
  auto diag = Array<T>::zeros({groups, n, n});
  auto off = Array<T>::full({groups, n, n}, T(1));
  auto dv = diag.mutable_values();
  auto ov = off.mutable_values();
  for (std::int64_t g = 0; g < groups; ++g)
    for (std::int64_t i = 0; i < n; ++i) {
      dv[(g * n + i) * n + i] = T(1);
      ov[(g * n + i) * n + i] = T(0);
    }
  return {diag, off};
}

}  // namespace

template <typename T>
CriticScores<T> critic_scores(Tape<T>& tape, const Array<T>& u, const Array<T>& v, const CriticConfig& cfg) {
  cfg.validate();
  if (u.rank() != 2 || v.rank() != 2) {
    throw nd::ShapeError("critic_scores: expected (N,d) and (M,d), got " + nd::to_string(u.shape()) + " and " +
                         nd::to_string(v.shape()));
  }
  if (u.dim(1) != cfg.d || v.dim(1) != cfg.d) {
    throw nd::ShapeError("critic_scores: embedding dims " + std::to_string(u.dim(1)) + " and " +
                         std::to_string(v.dim(1)) + " do not match d=" + std::to_string(cfg.d));
  }
  auto raw = nd::affine(tape, nd::matmul(tape, u, v, /*transpose_b=*/true), 1.0 / std::sqrt(static_cast<double>(cfg.d)));
  return {raw, clip_scores(tape, raw, cfg.clip)};
}

template <typename T>
Array<T> infonce_from_raw(Tape<T>& tape, const Array<T>& raw, const CriticConfig& cfg) {
  cfg.validate();
  if (raw.rank() != 3 || raw.dim(1) != raw.dim(2)) {
    throw nd::ShapeError("infonce: scores must be (G,N,N), got " + nd::to_string(raw.shape()));
  }
  const auto groups = raw.dim(0), n = raw.dim(1);
  if (n < 2) throw std::invalid_argument("infonce: need N >= 2 rows (no negatives otherwise)");

  const auto clipped = clip_scores(tape, raw, cfg.clip);
  const auto [diag, off] = diagonal_masks<T>(groups, n);
  // Positive slot replaced by exp(-clip) in the denominator.
  auto floor = diag.clone();
  for (auto& v : floor.mutable_values()) v *= static_cast<T>(-cfg.clip);
  const auto negatives = nd::add(tape, nd::mul(tape, clipped, off), floor);
  const auto log_denominator = nd::mean(tape, nd::logsumexp(tape, negatives));
  const auto positive = nd::affine(tape, nd::sum(tape, nd::mul(tape, clipped, diag)),
                                   1.0 / static_cast<double>(groups * n));
  auto loss = nd::sub(tape, log_denominator, positive);
  if (cfg.penalty > 0.0) {
    loss = nd::add(tape, loss, nd::affine(tape, nd::mean(tape, nd::square(tape, raw)), cfg.penalty));
  }
  return loss;
}

template <typename T>
Array<T> symmetric_infonce_from_raw(Tape<T>& tape, const Array<T>& raw, const CriticConfig& cfg) {
  const auto forward = infonce_from_raw(tape, raw, cfg);
  const auto backward = infonce_from_raw(tape, nd::permute(tape, raw, {0, 2, 1}), cfg);
  return nd::affine(tape, nd::add(tape, forward, backward), 0.5);
}

template <typename T>
Array<T> infonce(Tape<T>& tape, const Array<T>& u, const Array<T>& v, const CriticConfig& cfg) {
  if (u.rank() != 2 || u.shape() != v.shape()) {
    throw nd::ShapeError("infonce: U and V must both be (N,d), got " + nd::to_string(u.shape()) + " and " +
                         nd::to_string(v.shape()));
  }
  if (u.dim(0) < 2) throw std::invalid_argument("infonce: need N >= 2 rows (no negatives otherwise)");
  const auto scores = critic_scores(tape, u, v, cfg);
  return infonce_from_raw(tape, nd::reshape(tape, scores.raw, {1, u.dim(0), v.dim(0)}), cfg);
}

template <typename T>
Array<T> soft_cca_loss(Tape<T>& tape, const Array<T>& zi, const Array<T>& zj, double eps) {
  if (zi.rank() != 2 || zj.rank() != 2 || zi.dim(0) != zj.dim(0)) {
    throw nd::ShapeError("soft_cca: expected (n,d_i) and (n,d_j), got " + nd::to_string(zi.shape()) + " and " +
                         nd::to_string(zj.shape()));
  }
  const auto n = zi.dim(0);
  if (n < 2) throw std::invalid_argument("soft_cca: need at least 2 samples");
  using sim::Matrix;
  auto to_matrix = [](const Array<T>& a) {
    Matrix m(a.dim(0), a.dim(1));
    auto v = a.values();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = static_cast<double>(v[r * m.cols() + c]);
    return m;
  };
  const Matrix hi = sim::center_columns(to_matrix(zi));
  const Matrix hj = sim::center_columns(to_matrix(zj));
  const double s = 1.0 / static_cast<double>(n - 1);
  const Matrix wi = sim::inverse_sqrt_psd(s * hi.transpose() * hi, eps);
  const Matrix wj = sim::inverse_sqrt_psd(s * hj.transpose() * hj, eps);
  Eigen::JacobiSVD<Matrix> svd(wi * (s * hi.transpose() * hj) * wj, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto k = std::min(zi.dim(1), zj.dim(1));
  const Matrix u = svd.matrixU().leftCols(k);
  const Matrix v = svd.matrixV().leftCols(k);
  const sim::Vector sv = svd.singularValues().head(k);
  const double scale = -1.0 / static_cast<double>(k);

  Array<T> out = Array<T>::scalar(static_cast<T>(scale * sv.sum()));
  if (tape.wants({&zi, &zj})) {
    // Closed-form gradient of the trace norm of Wi Sij Wj w.r.t. both inputs.
    const Matrix cross = wi * u * v.transpose() * wj;
    const Matrix self_i = -0.5 * wi * u * sv.asDiagonal() * u.transpose() * wi;
    const Matrix self_j = -0.5 * wj * v * sv.asDiagonal() * v.transpose() * wj;
    auto gi = std::make_shared<Matrix>(scale * s * (2.0 * hi * self_i + hj * cross.transpose()));
    auto gj = std::make_shared<Matrix>(scale * s * (2.0 * hj * self_j + hi * cross));
    tape.record("soft_cca", {zi, zj}, out, [zi, zj, gi, gj](std::span<const T> g) mutable {
      auto apply = [&](const Array<T>& z, const Matrix& grad) {
        if (!z.requires_grad()) return;
        auto dz = z.mutable_grad();
        for (Eigen::Index r = 0; r < grad.rows(); ++r)
          for (Eigen::Index c = 0; c < grad.cols(); ++c)
            dz[r * grad.cols() + c] += static_cast<T>(g[0] * grad(r, c));
      };
      apply(zi, *gi);
      apply(zj, *gj);
    });
  }
  return out;
}

#define DOMINO_INSTANTIATE_CRITIC(T)                                                                      \
  template CriticScores<T> critic_scores(Tape<T>&, const Array<T>&, const Array<T>&, const CriticConfig&); \
  template Array<T> infonce_from_raw(Tape<T>&, const Array<T>&, const CriticConfig&);                     \
  template Array<T> symmetric_infonce_from_raw(Tape<T>&, const Array<T>&, const CriticConfig&);           \
  template Array<T> infonce(Tape<T>&, const Array<T>&, const Array<T>&, const CriticConfig&);             \
  template Array<T> soft_cca_loss(Tape<T>&, const Array<T>&, const Array<T>&, double);

DOMINO_INSTANTIATE_CRITIC(float)
DOMINO_INSTANTIATE_CRITIC(double)

#undef DOMINO_INSTANTIATE_CRITIC

}  // namespace domino::objectives
