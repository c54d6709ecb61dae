#include "domino/ndgrad/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace domino::nd {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

[[noreturn]] void fail(std::string_view op, const std::string& what) {
  throw ShapeError(std::string(op) + ": " + what);
}

template <typename T>
void require_rank(std::string_view op, const Array<T>& a, int rank, std::string_view role) {
  if (a.rank() != rank) {
    fail(op, std::string(role) + " must have rank " + std::to_string(rank) + ", got shape " + to_string(a.shape()));
  }
}

template <typename T>
void require_same_shape(std::string_view op, const Array<T>& a, const Array<T>& b) {
  if (a.shape() != b.shape()) fail(op, "shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
}

template <typename T>
bool all_finite(std::span<const T> v) {
  return std::all_of(v.begin(), v.end(), [](T x) { return std::isfinite(x); });
}

// Debug-mode guard: a forward op on finite inputs must produce finite outputs.
template <typename T>
void check_finite(std::string_view op, const Array<T>& out, std::initializer_list<const Array<T>*> inputs) {
#ifdef DOMINO_CHECK_FINITE
  if (all_finite(out.values())) return;
  for (const auto* in : inputs) {
    if (in && in->defined() && !all_finite(in->values())) return;
  }
  throw std::runtime_error(std::string(op) + ": non-finite output from finite inputs");
#else
  (void)op;
  (void)out;
  (void)inputs;
#endif
}

template <typename T>
Buffer<T> scaled(std::span<const T> g, T s) {
  Buffer<T> out(g.begin(), g.end());
  for (auto& v : out) v *= s;
  return out;
}

// Columns of `cols` are output pixels (n, oy, ox); rows are (c, ky, kx).
template <typename T>
void im2col(const T* x, std::int64_t n_batch, std::int64_t channels, std::int64_t height, std::int64_t width, int k,
            int stride, int pad, std::int64_t out_h, std::int64_t out_w, T* cols) {
  const std::int64_t n_cols = n_batch * out_h * out_w;
  for (std::int64_t c = 0; c < channels; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* row = cols + ((c * k + ky) * k + kx) * n_cols;
        for (std::int64_t n = 0; n < n_batch; ++n) {
          const T* img = x + (n * channels + c) * height * width;
          for (std::int64_t oy = 0; oy < out_h; ++oy) {
            const std::int64_t iy = oy * stride - pad + ky;
            T* dst = row + (n * out_h + oy) * out_w;
            if (iy < 0 || iy >= height) {
              std::fill(dst, dst + out_w, T(0));
              continue;
            }
            for (std::int64_t ox = 0; ox < out_w; ++ox) {
              const std::int64_t ix = ox * stride - pad + kx;
              dst[ox] = (ix >= 0 && ix < width) ? img[iy * width + ix] : T(0);
            }
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters-adds columns back into an (N,C,H,W) buffer.
template <typename T>
void col2im(const T* cols, std::int64_t n_batch, std::int64_t channels, std::int64_t height, std::int64_t width, int k,
            int stride, int pad, std::int64_t out_h, std::int64_t out_w, T* x) {
  const std::int64_t n_cols = n_batch * out_h * out_w;
  for (std::int64_t c = 0; c < channels; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* row = cols + ((c * k + ky) * k + kx) * n_cols;
        for (std::int64_t n = 0; n < n_batch; ++n) {
          T* img = x + (n * channels + c) * height * width;
          for (std::int64_t oy = 0; oy < out_h; ++oy) {
            const std::int64_t iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= height) continue;
            const T* src = row + (n * out_h + oy) * out_w;
            for (std::int64_t ox = 0; ox < out_w; ++ox) {
              const std::int64_t ix = ox * stride - pad + kx;
              if (ix >= 0 && ix < width) img[iy * width + ix] += src[ox];
            }
          }
        }
      }
    }
  }
}

// (N, C, P) <-> (C, N*P) reorderings used by the conv kernels.
template <typename T>
void nchw_to_cnp(const T* src, std::int64_t n, std::int64_t c, std::int64_t p, T* dst) {
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < c; ++j) std::copy_n(src + (i * c + j) * p, p, dst + (j * n + i) * p);
}

template <typename T>
void cnp_to_nchw(const T* src, std::int64_t n, std::int64_t c, std::int64_t p, T* dst) {
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < c; ++j) std::copy_n(src + (j * n + i) * p, p, dst + (i * c + j) * p);
}

template <typename T>
void check_conv_weight(std::string_view op, const Array<T>& x, const Array<T>& w, const Array<T>* bias,
                       std::int64_t in_channels_axis_size, std::int64_t out_channels) {
  require_rank(op, x, 4, "input");
  require_rank(op, w, 4, "weight");
  if (w.dim(2) != w.dim(3)) fail(op, "kernel must be square, got weight " + to_string(w.shape()));
  if (in_channels_axis_size != x.dim(1)) {
    fail(op, "input channels " + std::to_string(x.dim(1)) + " do not match weight " + to_string(w.shape()));
  }
  if (bias && bias->defined() && (bias->rank() != 1 || bias->dim(0) != out_channels)) {
    fail(op, "bias shape " + to_string(bias->shape()) + " does not match " + std::to_string(out_channels) +
                 " output channels");
  }
}

// Row-major strides for a shape.
std::vector<std::int64_t> strides_of(const Shape& s) {
  std::vector<std::int64_t> st(s.size(), 1);
  for (int i = static_cast<int>(s.size()) - 2; i >= 0; --i) st[i] = st[i + 1] * s[i + 1];
  return st;
}

// Maps every output linear index of a permutation to its input linear index.
std::vector<std::int64_t> permutation_index(const Shape& in_shape, const std::vector<int>& perm) {
  const auto in_strides = strides_of(in_shape);
  Shape out_shape(perm.size());
  std::vector<std::int64_t> step(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    out_shape[i] = in_shape[perm[i]];
    step[i] = in_strides[perm[i]];
  }
  const auto total = numel(in_shape);
  std::vector<std::int64_t> index(static_cast<std::size_t>(total));
  std::vector<std::int64_t> counter(perm.size(), 0);
  std::int64_t src = 0;
  for (std::int64_t dst = 0; dst < total; ++dst) {
    index[dst] = src;
    for (int ax = static_cast<int>(perm.size()) - 1; ax >= 0; --ax) {
      if (++counter[ax] < out_shape[ax]) {
        src += step[ax];
        break;
      }
      src -= step[ax] * (out_shape[ax] - 1);
      counter[ax] = 0;
    }
  }
  return index;
}

template <typename T, typename Fwd, typename Deriv>
Array<T> unary(Tape<T>& tape, std::string_view op, const Array<T>& x, Fwd fwd, Deriv deriv) {
  auto xv = x.values();
  Buffer<T> v(xv.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = fwd(xv[i]);
  Array<T> out(x.shape(), std::move(v));
  check_finite(op, out, {&x});
  if (tape.wants({&x})) {
    tape.record(std::string(op), {x}, out, [x, out, deriv](std::span<const T> g) mutable {
      auto xv = x.values();
      auto yv = out.values();
      auto dx = x.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * deriv(xv[i], yv[i]);
    });
  }
  return out;
}

// Like unary, with the forward evaluated on an Eigen array expression.
template <typename T, typename Fwd, typename Deriv>
Array<T> vectorized_unary(Tape<T>& tape, std::string_view op, const Array<T>& x, Fwd fwd, Deriv deriv) {
  auto xv = x.values();
  Buffer<T> v(xv.size());
  const auto n = static_cast<Eigen::Index>(xv.size());
  Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>(v.data(), n) =
      fwd(Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>(xv.data(), n));
  Array<T> out(x.shape(), std::move(v));
  check_finite(op, out, {&x});
  if (tape.wants({&x})) {
    tape.record(std::string(op), {x}, out, [x, out, deriv](std::span<const T> g) mutable {
      auto xv = x.values();
      auto yv = out.values();
      auto dx = x.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * deriv(xv[i], yv[i]);
    });
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------- matmul

template <typename T>
Array<T> matmul(Tape<T>& tape, const Array<T>& a, const Array<T>& b, bool transpose_b) {
  constexpr std::string_view op = "matmul";
  require_rank(op, a, 2, "lhs");
  require_rank(op, b, 2, "rhs");
  const auto n = a.dim(0), k = a.dim(1);
  const auto bk = transpose_b ? b.dim(1) : b.dim(0);
  const auto m = transpose_b ? b.dim(0) : b.dim(1);
  if (k != bk) fail(op, "inner dimensions differ: " + to_string(a.shape()) + " x " + to_string(b.shape()));

  Buffer<T> v(static_cast<std::size_t>(n * m));
  ConstMatMap<T> A(a.values().data(), n, k);
  ConstMatMap<T> B(b.values().data(), b.dim(0), b.dim(1));
  MatMap<T> C(v.data(), n, m);
  if (transpose_b)
    C.noalias() = A * B.transpose();
  else
    C.noalias() = A * B;
  Array<T> out({n, m}, std::move(v));
  check_finite(op, out, {&a, &b});
  if (tape.wants({&a, &b})) {
    tape.record("matmul", {a, b}, out, [a, b, n, k, m, transpose_b](std::span<const T> g) mutable {
      ConstMatMap<T> G(g.data(), n, m);
      ConstMatMap<T> A(a.values().data(), n, k);
      ConstMatMap<T> B(b.values().data(), b.dim(0), b.dim(1));
      if (a.requires_grad()) {
        MatMap<T> dA(a.mutable_grad().data(), n, k);
        if (transpose_b)
          dA.noalias() += G * B;
        else
          dA.noalias() += G * B.transpose();
      }
      if (b.requires_grad()) {
        MatMap<T> dB(b.mutable_grad().data(), b.dim(0), b.dim(1));
        if (transpose_b)
          dB.noalias() += G.transpose() * A;
        else
          dB.noalias() += A.transpose() * G;
      }
    });
  }
  return out;
}

template <typename T>
Array<T> bmm(Tape<T>& tape, const Array<T>& a, const Array<T>& b, bool transpose_b) {
  constexpr std::string_view op = "bmm";
  require_rank(op, a, 3, "lhs");
  require_rank(op, b, 3, "rhs");
  const auto groups = a.dim(0), n = a.dim(1), k = a.dim(2);
  const auto bk = transpose_b ? b.dim(2) : b.dim(1);
  const auto m = transpose_b ? b.dim(1) : b.dim(2);
  if (b.dim(0) != groups || bk != k) {
    fail(op, "incompatible shapes " + to_string(a.shape()) + " x " + to_string(b.shape()));
  }
  const auto br = b.dim(1), bc = b.dim(2);
  Buffer<T> v(static_cast<std::size_t>(groups * n * m));
  for (std::int64_t gi = 0; gi < groups; ++gi) {
    ConstMatMap<T> A(a.values().data() + gi * n * k, n, k);
    ConstMatMap<T> B(b.values().data() + gi * br * bc, br, bc);
    MatMap<T> C(v.data() + gi * n * m, n, m);
    if (transpose_b)
      C.noalias() = A * B.transpose();
    else
      C.noalias() = A * B;
  }
  Array<T> out({groups, n, m}, std::move(v));
  check_finite(op, out, {&a, &b});
  if (tape.wants({&a, &b})) {
    tape.record("bmm", {a, b}, out, [a, b, groups, n, k, m, br, bc, transpose_b](std::span<const T> g) mutable {
      for (std::int64_t gi = 0; gi < groups; ++gi) {
        ConstMatMap<T> G(g.data() + gi * n * m, n, m);
        ConstMatMap<T> A(a.values().data() + gi * n * k, n, k);
        ConstMatMap<T> B(b.values().data() + gi * br * bc, br, bc);
        if (a.requires_grad()) {
          MatMap<T> dA(a.mutable_grad().data() + gi * n * k, n, k);
          if (transpose_b)
            dA.noalias() += G * B;
          else
            dA.noalias() += G * B.transpose();
        }
        if (b.requires_grad()) {
          MatMap<T> dB(b.mutable_grad().data() + gi * br * bc, br, bc);
          if (transpose_b)
            dB.noalias() += G.transpose() * A;
          else
            dB.noalias() += A.transpose() * G;
        }
      }
    });
  }
  return out;
}

template <typename T>
Array<T> add_bias(Tape<T>& tape, const Array<T>& x, const Array<T>& bias) {
  constexpr std::string_view op = "add_bias";
  require_rank(op, x, 2, "input");
  require_rank(op, bias, 1, "bias");
  const auto n = x.dim(0), m = x.dim(1);
  if (bias.dim(0) != m) fail(op, "bias " + to_string(bias.shape()) + " does not match " + to_string(x.shape()));
  Buffer<T> v(x.values().begin(), x.values().end());
  auto bv = bias.values();
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < m; ++j) v[i * m + j] += bv[j];
  Array<T> out(x.shape(), std::move(v));
  check_finite(op, out, {&x, &bias});
  if (tape.wants({&x, &bias})) {
    tape.record("add_bias", {x, bias}, out, [x, bias, n, m](std::span<const T> g) mutable {
      if (x.requires_grad()) x.accumulate_grad(g);
      if (bias.requires_grad()) {
        auto db = bias.mutable_grad();
        for (std::int64_t i = 0; i < n; ++i)
          for (std::int64_t j = 0; j < m; ++j) db[j] += g[i * m + j];
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------- convolution

template <typename T>
Array<T> conv2d(Tape<T>& tape, const Array<T>& x, const Array<T>& weight, const Array<T>* bias, Conv2dAttrs attrs) {
  constexpr std::string_view op = "conv2d";
  check_conv_weight(op, x, weight, bias, weight.dim(1), weight.dim(0));
  if (attrs.stride < 1 || attrs.pad < 0) fail(op, "stride must be >= 1 and pad >= 0");
  const auto N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const auto O = weight.dim(0);
  const int k = static_cast<int>(weight.dim(2));
  const int s = attrs.stride, p = attrs.pad;
  const auto Ho = (H + 2 * p - k) / s + 1;
  const auto Wo = (W + 2 * p - k) / s + 1;
  if (H + 2 * p < k || W + 2 * p < k || Ho < 1 || Wo < 1) {
    fail(op, "kernel " + to_string(weight.shape()) + " does not fit input " + to_string(x.shape()));
  }
  const auto K = C * k * k;
  const auto P = N * Ho * Wo;

  auto cols = std::make_shared<Buffer<T>>(static_cast<std::size_t>(K * P));
  im2col(x.values().data(), N, C, H, W, k, s, p, Ho, Wo, cols->data());
  Buffer<T> om(static_cast<std::size_t>(O * P));
  {
    ConstMatMap<T> Wm(weight.values().data(), O, K);
    ConstMatMap<T> Cm(cols->data(), K, P);
    MatMap<T> Om(om.data(), O, P);
    Om.noalias() = Wm * Cm;
    if (bias && bias->defined()) {
      auto bv = bias->values();
      for (std::int64_t o = 0; o < O; ++o) Om.row(o).array() += bv[o];
    }
  }
  Buffer<T> v(om.size());
  cnp_to_nchw(om.data(), N, O, Ho * Wo, v.data());
  Array<T> out({N, O, Ho, Wo}, std::move(v));
  check_finite(op, out, {&x, &weight, bias});

  if (tape.wants({&x, &weight, bias})) {
    Array<T> b = bias ? *bias : Array<T>();
    std::vector<Array<T>> inputs{x, weight};
    if (b.defined()) inputs.push_back(b);
    tape.record("conv2d", std::move(inputs), out,
                [x, weight, b, cols, N, C, H, W, O, k, s, p, Ho, Wo, K, P](std::span<const T> g) mutable {
                  Buffer<T> gm(static_cast<std::size_t>(O * P));
                  nchw_to_cnp(g.data(), N, O, Ho * Wo, gm.data());
                  ConstMatMap<T> G(gm.data(), O, P);
                  if (weight.requires_grad()) {
                    MatMap<T> dW(weight.mutable_grad().data(), O, K);
                    dW.noalias() += G * ConstMatMap<T>(cols->data(), K, P).transpose();
                  }
                  if (b.defined() && b.requires_grad()) {
                    auto db = b.mutable_grad();
                    for (std::int64_t o = 0; o < O; ++o) db[o] += G.row(o).sum();
                  }
                  if (x.requires_grad()) {
                    Buffer<T> dcols(static_cast<std::size_t>(K * P));
                    MatMap<T> dC(dcols.data(), K, P);
                    dC.noalias() = ConstMatMap<T>(weight.values().data(), O, K).transpose() * G;
                    col2im(dcols.data(), N, C, H, W, k, s, p, Ho, Wo, x.mutable_grad().data());
                  }
                });
  }
  return out;
}

template <typename T>
Array<T> conv_transpose2d(Tape<T>& tape, const Array<T>& x, const Array<T>& weight, const Array<T>* bias,
                          Conv2dAttrs attrs) {
  constexpr std::string_view op = "convT2d";
  check_conv_weight(op, x, weight, bias, weight.dim(0), weight.dim(1));
  if (attrs.stride < 1 || attrs.pad < 0) fail(op, "stride must be >= 1 and pad >= 0");
  const auto N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const auto O = weight.dim(1);
  const int k = static_cast<int>(weight.dim(2));
  const int s = attrs.stride, p = attrs.pad;
  const auto Ho = (H - 1) * s - 2 * p + k;
  const auto Wo = (W - 1) * s - 2 * p + k;
  if (Ho < 1 || Wo < 1 || (Ho + 2 * p - k) / s + 1 != H || (Wo + 2 * p - k) / s + 1 != W) {
    fail(op, "kernel " + to_string(weight.shape()) + " with stride/pad does not invert to input " +
                 to_string(x.shape()));
  }
  const auto K = O * k * k;
  const auto P = N * H * W;

  auto xm = std::make_shared<Buffer<T>>(static_cast<std::size_t>(C * P));
  nchw_to_cnp(x.values().data(), N, C, H * W, xm->data());
  Buffer<T> cols(static_cast<std::size_t>(K * P));
  {
    ConstMatMap<T> Wm(weight.values().data(), C, K);
    MatMap<T> Cm(cols.data(), K, P);
    Cm.noalias() = Wm.transpose() * ConstMatMap<T>(xm->data(), C, P);
  }
  Buffer<T> v(static_cast<std::size_t>(N * O * Ho * Wo), T(0));
  col2im(cols.data(), N, O, Ho, Wo, k, s, p, H, W, v.data());
  if (bias && bias->defined()) {
    auto bv = bias->values();
    for (std::int64_t n = 0; n < N; ++n)
      for (std::int64_t o = 0; o < O; ++o) {
        T* dst = v.data() + (n * O + o) * Ho * Wo;
        for (std::int64_t i = 0; i < Ho * Wo; ++i) dst[i] += bv[o];
      }
  }
  Array<T> out({N, O, Ho, Wo}, std::move(v));
  check_finite(op, out, {&x, &weight, bias});

  if (tape.wants({&x, &weight, bias})) {
    Array<T> b = bias ? *bias : Array<T>();
    std::vector<Array<T>> inputs{x, weight};
    if (b.defined()) inputs.push_back(b);
    tape.record("convT2d", std::move(inputs), out,
                [x, weight, b, xm, N, C, H, W, O, k, s, p, Ho, Wo, K, P](std::span<const T> g) mutable {
                  Buffer<T> dcols(static_cast<std::size_t>(K * P));
                  im2col(g.data(), N, O, Ho, Wo, k, s, p, H, W, dcols.data());
                  ConstMatMap<T> dC(dcols.data(), K, P);
                  if (weight.requires_grad()) {
                    MatMap<T> dW(weight.mutable_grad().data(), C, K);
                    dW.noalias() += ConstMatMap<T>(xm->data(), C, P) * dC.transpose();
                  }
                  if (b.defined() && b.requires_grad()) {
                    auto db = b.mutable_grad();
                    for (std::int64_t n = 0; n < N; ++n)
                      for (std::int64_t o = 0; o < O; ++o) {
                        const T* src = g.data() + (n * O + o) * Ho * Wo;
                        db[o] += std::accumulate(src, src + Ho * Wo, T(0));
                      }
                  }
                  if (x.requires_grad()) {
                    Buffer<T> dxm(static_cast<std::size_t>(C * P));
                    MatMap<T> dX(dxm.data(), C, P);
                    dX.noalias() = ConstMatMap<T>(weight.values().data(), C, K) * dC;
                    auto dx = x.mutable_grad();
                    Buffer<T> tmp(dx.size());
                    cnp_to_nchw(dxm.data(), N, C, H * W, tmp.data());
                    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += tmp[i];
                  }
                });
  }
  return out;
}

// ---------------------------------------------------------------- batchnorm

template <typename T>
Array<T> batchnorm2d(Tape<T>& tape, const Array<T>& x, const Array<T>& gamma, const Array<T>& beta,
                     BatchNormStats<T>* stats, BatchNormAttrs attrs) {
  constexpr std::string_view op = "batchnorm2d";
  if (x.rank() != 4 && x.rank() != 2) fail(op, "input must be (N,C,H,W) or (N,C), got " + to_string(x.shape()));
  const auto N = x.dim(0), C = x.dim(1);
  const auto HW = x.rank() == 4 ? x.dim(2) * x.dim(3) : 1;
  if (gamma.shape() != Shape{C} || beta.shape() != Shape{C}) {
    fail(op, "scale/shift must have shape (" + std::to_string(C) + "), got " + to_string(gamma.shape()) + " and " +
                 to_string(beta.shape()));
  }
  if (!attrs.training && !stats) fail(op, "eval mode requires running statistics");
  if (stats && (static_cast<std::int64_t>(stats->running_mean.size()) != C ||
                static_cast<std::int64_t>(stats->running_var.size()) != C)) {
    fail(op, "running statistics do not have " + std::to_string(C) + " channels");
  }
  const auto M = N * HW;
  const T eps = static_cast<T>(attrs.eps);
  auto xv = x.values();
  auto gv = gamma.values();
  auto bv = beta.values();

  Buffer<T> mean(static_cast<std::size_t>(C)), inv_std(static_cast<std::size_t>(C));
  if (attrs.training) {
    for (std::int64_t c = 0; c < C; ++c) {
      double s = 0.0;
      for (std::int64_t n = 0; n < N; ++n) {
        const T* src = xv.data() + (n * C + c) * HW;
        for (std::int64_t i = 0; i < HW; ++i) s += src[i];
      }
      const double mu = s / static_cast<double>(M);
      double ss = 0.0;
      for (std::int64_t n = 0; n < N; ++n) {
        const T* src = xv.data() + (n * C + c) * HW;
        for (std::int64_t i = 0; i < HW; ++i) ss += (src[i] - mu) * (src[i] - mu);
      }
      const double var = ss / static_cast<double>(M);
      mean[c] = static_cast<T>(mu);
      inv_std[c] = static_cast<T>(1.0 / std::sqrt(var + attrs.eps));
      if (stats) {
        const double unbiased = M > 1 ? ss / static_cast<double>(M - 1) : var;
        const double mom = attrs.momentum;
        stats->running_mean[c] = static_cast<T>((1.0 - mom) * stats->running_mean[c] + mom * mu);
        stats->running_var[c] = static_cast<T>((1.0 - mom) * stats->running_var[c] + mom * unbiased);
      }
    }
  } else {
    for (std::int64_t c = 0; c < C; ++c) {
      mean[c] = stats->running_mean[c];
      inv_std[c] = T(1) / std::sqrt(stats->running_var[c] + eps);
    }
  }

  Buffer<T> v(xv.size());
  for (std::int64_t n = 0; n < N; ++n)
    for (std::int64_t c = 0; c < C; ++c) {
      const auto off = (n * C + c) * HW;
      for (std::int64_t i = 0; i < HW; ++i) v[off + i] = (xv[off + i] - mean[c]) * inv_std[c] * gv[c] + bv[c];
    }
  Array<T> out(x.shape(), std::move(v));
  check_finite(op, out, {&x, &gamma, &beta});

  if (tape.wants({&x, &gamma, &beta})) {
    const bool training = attrs.training;
    tape.record("batchnorm2d", {x, gamma, beta}, out,
                [x, gamma, beta, mean, inv_std, N, C, HW, M, training](std::span<const T> g) mutable {
                  auto xv = x.values();
                  auto gv = gamma.values();
                  for (std::int64_t c = 0; c < C; ++c) {
                    double sum_g = 0.0, sum_gx = 0.0;
                    for (std::int64_t n = 0; n < N; ++n) {
                      const auto off = (n * C + c) * HW;
                      for (std::int64_t i = 0; i < HW; ++i) {
                        const double xhat = (xv[off + i] - mean[c]) * inv_std[c];
                        sum_g += g[off + i];
                        sum_gx += g[off + i] * xhat;
                      }
                    }
                    if (gamma.requires_grad()) gamma.mutable_grad()[c] += static_cast<T>(sum_gx);
                    if (beta.requires_grad()) beta.mutable_grad()[c] += static_cast<T>(sum_g);
                    if (!x.requires_grad()) continue;
                    auto dx = x.mutable_grad();
                    const double scale = static_cast<double>(gv[c]) * inv_std[c];
                    const double mg = sum_g / static_cast<double>(M);
                    const double mgx = sum_gx / static_cast<double>(M);
                    for (std::int64_t n = 0; n < N; ++n) {
                      const auto off = (n * C + c) * HW;
                      for (std::int64_t i = 0; i < HW; ++i) {
                        if (training) {
                          const double xhat = (xv[off + i] - mean[c]) * inv_std[c];
                          dx[off + i] += static_cast<T>(scale * (g[off + i] - mg - xhat * mgx));
                        } else {
                          dx[off + i] += static_cast<T>(scale * g[off + i]);
                        }
                      }
                    }
                  }
                });
  }
  return out;
}

// ---------------------------------------------------------------- elementwise

template <typename T>
Array<T> leaky_relu(Tape<T>& tape, const Array<T>& x, double slope) {
  const T a = static_cast<T>(slope);
  return vectorized_unary(
      tape, "leaky_relu", x, [a](const auto& v) { return (v > T(0)).select(v, a * v); },
      [a](T v, T) { return v > T(0) ? T(1) : a; });
}

template <typename T>
Array<T> relu(Tape<T>& tape, const Array<T>& x) {
  return vectorized_unary(
      tape, "relu", x, [](const auto& a) { return a.max(T(0)); }, [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Array<T> tanh(Tape<T>& tape, const Array<T>& x) {
  return vectorized_unary(
      tape, "tanh", x, [](const auto& a) { return a.tanh(); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Array<T> exp(Tape<T>& tape, const Array<T>& x) {
  return vectorized_unary(
      tape, "exp", x, [](const auto& a) { return a.exp(); }, [](T, T y) { return y; });
}

template <typename T>
Array<T> log(Tape<T>& tape, const Array<T>& x) {
  return unary(
      tape, "log", x, [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; });
}

template <typename T>
Array<T> square(Tape<T>& tape, const Array<T>& x) {
  return unary(
      tape, "square", x, [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

template <typename T>
Array<T> affine(Tape<T>& tape, const Array<T>& x, double factor, double offset) {
  const T f = static_cast<T>(factor), o = static_cast<T>(offset);
  return unary(
      tape, "affine", x, [f, o](T v) { return v * f + o; }, [f](T, T) { return f; });
}

template <typename T>
Array<T> add(Tape<T>& tape, const Array<T>& a, const Array<T>& b) {
  require_same_shape("add", a, b);
  Buffer<T> v(a.values().begin(), a.values().end());
  auto bv = b.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] += bv[i];
  Array<T> out(a.shape(), std::move(v));
  check_finite("add", out, {&a, &b});
  if (tape.wants({&a, &b})) {
    tape.record("add", {a, b}, out, [a, b](std::span<const T> g) mutable {
      if (a.requires_grad()) a.accumulate_grad(g);
      if (b.requires_grad()) b.accumulate_grad(g);
    });
  }
  return out;
}

template <typename T>
Array<T> sub(Tape<T>& tape, const Array<T>& a, const Array<T>& b) {
  require_same_shape("sub", a, b);
  Buffer<T> v(a.values().begin(), a.values().end());
  auto bv = b.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] -= bv[i];
  Array<T> out(a.shape(), std::move(v));
  check_finite("sub", out, {&a, &b});
  if (tape.wants({&a, &b})) {
    tape.record("sub", {a, b}, out, [a, b](std::span<const T> g) mutable {
      if (a.requires_grad()) a.accumulate_grad(g);
      if (b.requires_grad()) {
        auto db = b.mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) db[i] -= g[i];
      }
    });
  }
  return out;
}

template <typename T>
Array<T> mul(Tape<T>& tape, const Array<T>& a, const Array<T>& b) {
  require_same_shape("mul", a, b);
  Buffer<T> v(a.values().begin(), a.values().end());
  auto bv = b.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] *= bv[i];
  Array<T> out(a.shape(), std::move(v));
  check_finite("mul", out, {&a, &b});
  if (tape.wants({&a, &b})) {
    tape.record("mul", {a, b}, out, [a, b](std::span<const T> g) mutable {
      auto av = a.values();
      auto bv = b.values();
      if (a.requires_grad()) {
        auto da = a.mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * bv[i];
      }
      if (b.requires_grad()) {
        auto db = b.mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i] * av[i];
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------- reductions

template <typename T>
Array<T> sum(Tape<T>& tape, const Array<T>& x) {
  auto xv = x.values();
  double s = 0.0;
  for (auto v : xv) s += v;
  Array<T> out = Array<T>::scalar(static_cast<T>(s));
  if (tape.wants({&x})) {
    tape.record("sum", {x}, out, [x](std::span<const T> g) mutable {
      auto dx = x.mutable_grad();
      for (auto& d : dx) d += g[0];
    });
  }
  return out;
}

template <typename T>
Array<T> mean(Tape<T>& tape, const Array<T>& x) {
  auto xv = x.values();
  double s = 0.0;
  for (auto v : xv) s += v;
  const auto n = static_cast<double>(xv.size());
  Array<T> out = Array<T>::scalar(static_cast<T>(s / n));
  if (tape.wants({&x})) {
    tape.record("mean", {x}, out, [x, n](std::span<const T> g) mutable {
      auto dx = x.mutable_grad();
      const T step = static_cast<T>(g[0] / n);
      for (auto& d : dx) d += step;
    });
  }
  return out;
}

template <typename T>
Array<T> logsumexp(Tape<T>& tape, const Array<T>& x) {
  constexpr std::string_view op = "logsumexp";
  if (x.rank() < 1) fail(op, "input must have at least one axis");
  const auto K = x.dim(-1);
  const auto R = x.size() / K;
  Shape out_shape(x.shape().begin(), x.shape().end() - 1);
  auto xv = x.values();
  Buffer<T> v(static_cast<std::size_t>(R));
  using Row = Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>;
  for (std::int64_t r = 0; r < R; ++r) {
    const Row row(xv.data() + r * K, K);
    const T m = row.maxCoeff();
    v[r] = m + std::log((row - m).exp().sum());
  }
  Array<T> out(out_shape, std::move(v));
  check_finite(op, out, {&x});
  if (tape.wants({&x})) {
    tape.record("logsumexp", {x}, out, [x, out, K, R](std::span<const T> g) mutable {
      auto xv = x.values();
      auto yv = out.values();
      auto dx = x.mutable_grad();
      using Row = Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>;
      using MutRow = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>;
      for (std::int64_t r = 0; r < R; ++r) {
        MutRow(dx.data() + r * K, K) += g[r] * (Row(xv.data() + r * K, K) - yv[r]).exp();
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------- shape

template <typename T>
Array<T> reshape(Tape<T>& tape, const Array<T>& x, Shape shape) {
  if (numel(shape) != x.size()) {
    fail("reshape", "cannot view " + to_string(x.shape()) + " as " + to_string(shape));
  }
  Array<T> out(std::move(shape), Buffer<T>(x.values().begin(), x.values().end()));
  if (tape.wants({&x})) {
    tape.record("reshape", {x}, out, [x](std::span<const T> g) mutable { x.accumulate_grad(g); });
  }
  return out;
}

template <typename T>
Array<T> concat(Tape<T>& tape, const std::vector<Array<T>>& parts, int axis) {
  constexpr std::string_view op = "concat";
  if (parts.empty()) fail(op, "no inputs");
  const int rank = parts[0].rank();
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) fail(op, "axis out of range for shape " + to_string(parts[0].shape()));
  Shape out_shape = parts[0].shape();
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    if (p.rank() != rank) fail(op, "rank mismatch " + to_string(parts[0].shape()) + " vs " + to_string(p.shape()));
    for (int d = 0; d < rank; ++d) {
      if (d != axis && p.dim(d) != parts[0].dim(d)) {
        fail(op, "shape mismatch off the concat axis: " + to_string(parts[0].shape()) + " vs " + to_string(p.shape()));
      }
    }
    out_shape[axis] += p.dim(axis);
  }
  std::int64_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= out_shape[d];
  for (int d = axis + 1; d < rank; ++d) inner *= out_shape[d];
  const auto out_row = out_shape[axis] * inner;

  Buffer<T> v(static_cast<std::size_t>(numel(out_shape)));
  std::vector<std::int64_t> offsets;
  std::int64_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const auto chunk = p.dim(axis) * inner;
    for (std::int64_t o = 0; o < outer; ++o) std::copy_n(p.values().data() + o * chunk, chunk, v.data() + o * out_row + off);
    off += chunk;
  }
  Array<T> out(out_shape, std::move(v));
  bool any = false;
  for (const auto& p : parts) any = any || tape.wants({&p});
  if (any) {
    tape.record("concat", parts, out, [parts, offsets, outer, inner, out_row, axis](std::span<const T> g) mutable {
      for (std::size_t i = 0; i < parts.size(); ++i) {
        if (!parts[i].requires_grad()) continue;
        const auto chunk = parts[i].dim(axis) * inner;
        auto dp = parts[i].mutable_grad();
        for (std::int64_t o = 0; o < outer; ++o)
          for (std::int64_t j = 0; j < chunk; ++j) dp[o * chunk + j] += g[o * out_row + offsets[i] + j];
      }
    });
  }
  return out;
}

template <typename T>
Array<T> slice(Tape<T>& tape, const Array<T>& x, int axis, std::int64_t begin, std::int64_t end) {
  constexpr std::string_view op = "slice";
  const int rank = x.rank();
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) fail(op, "axis out of range for shape " + to_string(x.shape()));
  if (begin < 0 || end > x.dim(axis) || begin >= end) {
    fail(op, "range [" + std::to_string(begin) + "," + std::to_string(end) + ") invalid for shape " +
                 to_string(x.shape()));
  }
  Shape out_shape = x.shape();
  out_shape[axis] = end - begin;
  std::int64_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= out_shape[d];
  for (int d = axis + 1; d < rank; ++d) inner *= out_shape[d];
  const auto in_row = x.dim(axis) * inner;
  const auto chunk = (end - begin) * inner;
  Buffer<T> v(static_cast<std::size_t>(outer * chunk));
  for (std::int64_t o = 0; o < outer; ++o)
    std::copy_n(x.values().data() + o * in_row + begin * inner, chunk, v.data() + o * chunk);
  Array<T> out(out_shape, std::move(v));
  if (tape.wants({&x})) {
    tape.record("slice", {x}, out, [x, outer, inner, in_row, chunk, begin](std::span<const T> g) mutable {
      auto dx = x.mutable_grad();
      for (std::int64_t o = 0; o < outer; ++o)
        for (std::int64_t j = 0; j < chunk; ++j) dx[o * in_row + begin * inner + j] += g[o * chunk + j];
    });
  }
  return out;
}

template <typename T>
Array<T> permute(Tape<T>& tape, const Array<T>& x, std::vector<int> perm) {
  constexpr std::string_view op = "permute";
  const int rank = x.rank();
  if (static_cast<int>(perm.size()) != rank) fail(op, "permutation length does not match shape " + to_string(x.shape()));
  std::vector<bool> seen(static_cast<std::size_t>(rank), false);
  for (int a : perm) {
    if (a < 0 || a >= rank || seen[a]) fail(op, "invalid permutation for shape " + to_string(x.shape()));
    seen[a] = true;
  }
  Shape out_shape(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) out_shape[i] = x.shape()[perm[i]];
  auto index = std::make_shared<std::vector<std::int64_t>>(permutation_index(x.shape(), perm));
  auto xv = x.values();
  Buffer<T> v(xv.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = xv[(*index)[i]];
  Array<T> out(out_shape, std::move(v));
  if (tape.wants({&x})) {
    tape.record("permute", {x}, out, [x, index](std::span<const T> g) mutable {
      auto dx = x.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) dx[(*index)[i]] += g[i];
    });
  }
  return out;
}

// ---------------------------------------------------------------- losses

template <typename T>
Array<T> softmax_xent(Tape<T>& tape, const Array<T>& logits, std::span<const int> labels) {
  constexpr std::string_view op = "softmax_xent";
  require_rank(op, logits, 2, "logits");
  const auto n = logits.dim(0), k = logits.dim(1);
  if (static_cast<std::int64_t>(labels.size()) != n) {
    fail(op, std::to_string(labels.size()) + " labels for logits " + to_string(logits.shape()));
  }
  for (int y : labels) {
    if (y < 0 || y >= k) fail(op, "label " + std::to_string(y) + " outside [0," + std::to_string(k) + ")");
  }
  auto lv = logits.values();
  auto probs = std::make_shared<Buffer<T>>(lv.size());
  double total = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const T* row = lv.data() + i * k;
    const T m = *std::max_element(row, row + k);
    double s = 0.0;
    for (std::int64_t j = 0; j < k; ++j) s += std::exp(static_cast<double>(row[j] - m));
    const double lse = m + std::log(s);
    for (std::int64_t j = 0; j < k; ++j) (*probs)[i * k + j] = static_cast<T>(std::exp(row[j] - lse));
    total += lse - row[labels[i]];
  }
  Array<T> out = Array<T>::scalar(static_cast<T>(total / static_cast<double>(n)));
  check_finite(op, out, {&logits});
  if (tape.wants({&logits})) {
    std::vector<int> ys(labels.begin(), labels.end());
    tape.record("softmax_xent", {logits}, out, [logits, probs, ys, n, k](std::span<const T> g) mutable {
      auto dl = logits.mutable_grad();
      const T s = static_cast<T>(g[0] / static_cast<double>(n));
      for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t j = 0; j < k; ++j) dl[i * k + j] += s * (*probs)[i * k + j];
        dl[i * k + ys[i]] -= s;
      }
    });
  }
  return out;
}

template <typename T>
Array<T> mse(Tape<T>& tape, const Array<T>& a, const Array<T>& b) {
  require_same_shape("mse", a, b);
  auto av = a.values();
  auto bv = b.values();
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double d = av[i] - bv[i];
    s += d * d;
  }
  const auto n = static_cast<double>(av.size());
  Array<T> out = Array<T>::scalar(static_cast<T>(s / n));
  if (tape.wants({&a, &b})) {
    tape.record("mse", {a, b}, out, [a, b, n](std::span<const T> g) mutable {
      auto av = a.values();
      auto bv = b.values();
      const T s = static_cast<T>(2.0 * g[0] / n);
      if (a.requires_grad()) {
        auto da = a.mutable_grad();
        for (std::size_t i = 0; i < av.size(); ++i) da[i] += s * (av[i] - bv[i]);
      }
      if (b.requires_grad()) {
        auto db = b.mutable_grad();
        for (std::size_t i = 0; i < av.size(); ++i) db[i] -= s * (av[i] - bv[i]);
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------- dispatch

namespace {
constexpr std::array<std::pair<OpKind, std::string_view>, 16> kOpNames{{
    {OpKind::matmul, "matmul"},
    {OpKind::conv2d, "conv2d"},
    {OpKind::convT2d, "convT2d"},
    {OpKind::batchnorm2d, "batchnorm2d"},
    {OpKind::leaky_relu, "leaky_relu"},
    {OpKind::relu, "relu"},
    {OpKind::tanh, "tanh"},
    {OpKind::exp, "exp"},
    {OpKind::log, "log"},
    {OpKind::sum, "sum"},
    {OpKind::mean, "mean"},
    {OpKind::reshape, "reshape"},
    {OpKind::concat, "concat"},
    {OpKind::slice, "slice"},
    {OpKind::softmax_xent, "softmax_xent"},
    {OpKind::mse, "mse"},
}};
constexpr auto kAllKinds = [] {
  std::array<OpKind, kOpNames.size()> kinds{};
  for (std::size_t i = 0; i < kOpNames.size(); ++i) kinds[i] = kOpNames[i].first;
  return kinds;
}();
}  // namespace

OpKind parse_op_kind(std::string_view name) {
  for (const auto& [kind, n] : kOpNames)
    if (n == name) return kind;
  throw std::invalid_argument("unknown op kind '" + std::string(name) + "'");
}

std::string_view op_kind_name(OpKind kind) {
  for (const auto& [k, n] : kOpNames)
    if (k == kind) return n;
  throw std::invalid_argument("unknown op kind");
}

std::span<const OpKind> all_op_kinds() { return kAllKinds; }

template <typename T>
Array<T> forward_op(Tape<T>& tape, OpKind kind, std::span<const Array<T>> in, const OpAttrs<T>& attrs) {
  auto need = [&](std::size_t lo, std::size_t hi) {
    if (in.size() < lo || in.size() > hi) {
      throw ShapeError(std::string(op_kind_name(kind)) + ": expected " + std::to_string(lo) +
                       (lo == hi ? "" : "-" + std::to_string(hi)) + " inputs, got " + std::to_string(in.size()));
    }
  };
  switch (kind) {
    case OpKind::matmul:
      need(2, 2);
      return matmul(tape, in[0], in[1]);
    case OpKind::conv2d:
      need(2, 3);
      return conv2d(tape, in[0], in[1], in.size() == 3 ? &in[2] : nullptr, attrs.conv);
    case OpKind::convT2d:
      need(2, 3);
      return conv_transpose2d(tape, in[0], in[1], in.size() == 3 ? &in[2] : nullptr, attrs.conv);
    case OpKind::batchnorm2d:
      need(3, 3);
      return batchnorm2d(tape, in[0], in[1], in[2], attrs.bn_stats, attrs.bn);
    case OpKind::leaky_relu:
      need(1, 1);
      return leaky_relu(tape, in[0], attrs.slope);
    case OpKind::relu:
      need(1, 1);
      return relu(tape, in[0]);
    case OpKind::tanh:
      need(1, 1);
      return tanh(tape, in[0]);
    case OpKind::exp:
      need(1, 1);
      return exp(tape, in[0]);
    case OpKind::log:
      need(1, 1);
      return log(tape, in[0]);
    case OpKind::sum:
      need(1, 1);
      return sum(tape, in[0]);
    case OpKind::mean:
      need(1, 1);
      return mean(tape, in[0]);
    case OpKind::reshape:
      need(1, 1);
      return reshape(tape, in[0], attrs.shape);
    case OpKind::concat:
      need(1, in.size() ? in.size() : 1);
      return concat(tape, std::vector<Array<T>>(in.begin(), in.end()), attrs.axis);
    case OpKind::slice:
      need(1, 1);
      return slice(tape, in[0], attrs.axis, attrs.begin, attrs.end);
    case OpKind::softmax_xent:
      need(1, 1);
      return softmax_xent(tape, in[0], std::span<const int>(attrs.labels));
    case OpKind::mse:
      need(2, 2);
      return mse(tape, in[0], in[1]);
  }
  throw std::invalid_argument("forward_op: unknown op kind");
}

#define DOMINO_INSTANTIATE_OPS(T)                                                                                    \
  template Array<T> matmul(Tape<T>&, const Array<T>&, const Array<T>&, bool);                                        \
  template Array<T> bmm(Tape<T>&, const Array<T>&, const Array<T>&, bool);                                           \
  template Array<T> add_bias(Tape<T>&, const Array<T>&, const Array<T>&);                                            \
  template Array<T> conv2d(Tape<T>&, const Array<T>&, const Array<T>&, const Array<T>*, Conv2dAttrs);                \
  template Array<T> conv_transpose2d(Tape<T>&, const Array<T>&, const Array<T>&, const Array<T>*, Conv2dAttrs);      \
  template Array<T> batchnorm2d(Tape<T>&, const Array<T>&, const Array<T>&, const Array<T>&, BatchNormStats<T>*,     \
                                BatchNormAttrs);                                                                     \
  template Array<T> leaky_relu(Tape<T>&, const Array<T>&, double);                                                   \
  template Array<T> relu(Tape<T>&, const Array<T>&);                                                                 \
  template Array<T> tanh(Tape<T>&, const Array<T>&);                                                                 \
  template Array<T> exp(Tape<T>&, const Array<T>&);                                                                  \
  template Array<T> log(Tape<T>&, const Array<T>&);                                                                  \
  template Array<T> square(Tape<T>&, const Array<T>&);                                                               \
  template Array<T> add(Tape<T>&, const Array<T>&, const Array<T>&);                                                 \
  template Array<T> sub(Tape<T>&, const Array<T>&, const Array<T>&);                                                 \
  template Array<T> mul(Tape<T>&, const Array<T>&, const Array<T>&);                                                 \
  template Array<T> affine(Tape<T>&, const Array<T>&, double, double);                                               \
  template Array<T> sum(Tape<T>&, const Array<T>&);                                                                  \
  template Array<T> mean(Tape<T>&, const Array<T>&);                                                                 \
  template Array<T> logsumexp(Tape<T>&, const Array<T>&);                                                            \
  template Array<T> reshape(Tape<T>&, const Array<T>&, Shape);                                                       \
  template Array<T> concat(Tape<T>&, const std::vector<Array<T>>&, int);                                             \
  template Array<T> slice(Tape<T>&, const Array<T>&, int, std::int64_t, std::int64_t);                               \
  template Array<T> permute(Tape<T>&, const Array<T>&, std::vector<int>);                                            \
  template Array<T> softmax_xent(Tape<T>&, const Array<T>&, std::span<const int>);                                   \
  template Array<T> mse(Tape<T>&, const Array<T>&, const Array<T>&);                                                 \
  template Array<T> forward_op(Tape<T>&, OpKind, std::span<const Array<T>>, const OpAttrs<T>&);

DOMINO_INSTANTIATE_OPS(float)
DOMINO_INSTANTIATE_OPS(double)

#undef DOMINO_INSTANTIATE_OPS

}  // namespace domino::nd
