#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "domino/ndgrad/array.hpp"
#include "domino/ndgrad/tape.hpp"

namespace domino::nd {

// Differentiable ops. Each op records itself on `tape` when any input
// requires grad and the tape is recording. Shapes are never broadcast
// except for the per-channel affine in batchnorm2d and the row bias in
// add_bias.

// ---- linear algebra ----

/// (n,k) x (k,m) -> (n,m). With transpose_b, b is (m,k).
template <typename T>
Array<T> matmul(Tape<T>& tape, const Array<T>& a, const Array<T>& b, bool transpose_b = false);

/// Batched (g,n,k) x (g,k,m) -> (g,n,m). With transpose_b, b is (g,m,k).
template <typename T>
Array<T> bmm(Tape<T>& tape, const Array<T>& a, const Array<T>& b, bool transpose_b = false);

/// x (n,m) + bias (m) broadcast over rows.
template <typename T>
Array<T> add_bias(Tape<T>& tape, const Array<T>& x, const Array<T>& bias);

// ---- convolution ----

struct Conv2dAttrs {
  int stride = 1;
  int pad = 0;
};

/// x (N,C,H,W), weight (O,C,k,k), optional bias (O).
template <typename T>
Array<T> conv2d(Tape<T>& tape, const Array<T>& x, const Array<T>& weight, const Array<T>* bias,
                Conv2dAttrs attrs);

/// Transposed convolution; x (N,C,H,W), weight (C,O,k,k), optional bias (O).
/// Output side is (H-1)*stride - 2*pad + k.
template <typename T>
Array<T> conv_transpose2d(Tape<T>& tape, const Array<T>& x, const Array<T>& weight, const Array<T>* bias,
                          Conv2dAttrs attrs);

// ---- normalization ----

/// Running statistics owned by the layer, updated in training mode.
template <typename T>
struct BatchNormStats {
  std::vector<T> running_mean;
  std::vector<T> running_var;

  explicit BatchNormStats(std::int64_t channels = 0)
      : running_mean(static_cast<std::size_t>(channels), T(0)),
        running_var(static_cast<std::size_t>(channels), T(1)) {}
};

struct BatchNormAttrs {
  bool training = true;
  double momentum = 0.1;
  double eps = 1e-5;
};

/// x (N,C,H,W) or (N,C); gamma, beta (C). Training mode normalizes with
/// biased batch statistics and folds the unbiased variance into `stats`.
/// Eval mode is the affine map (x - mean) / sqrt(var + eps) * gamma + beta
/// with the running statistics.
template <typename T>
Array<T> batchnorm2d(Tape<T>& tape, const Array<T>& x, const Array<T>& gamma, const Array<T>& beta,
                     BatchNormStats<T>* stats, BatchNormAttrs attrs);

// ---- elementwise ----

template <typename T>
Array<T> leaky_relu(Tape<T>& tape, const Array<T>& x, double slope = 0.2);
template <typename T>
Array<T> relu(Tape<T>& tape, const Array<T>& x);
template <typename T>
Array<T> tanh(Tape<T>& tape, const Array<T>& x);
template <typename T>
Array<T> exp(Tape<T>& tape, const Array<T>& x);
template <typename T>
Array<T> log(Tape<T>& tape, const Array<T>& x);
template <typename T>
Array<T> square(Tape<T>& tape, const Array<T>& x);

template <typename T>
Array<T> add(Tape<T>& tape, const Array<T>& a, const Array<T>& b);
template <typename T>
Array<T> sub(Tape<T>& tape, const Array<T>& a, const Array<T>& b);
/// Elementwise product; either side may be a constant mask.
template <typename T>
Array<T> mul(Tape<T>& tape, const Array<T>& a, const Array<T>& b);
/// x * factor + offset.
template <typename T>
Array<T> affine(Tape<T>& tape, const Array<T>& x, double factor, double offset = 0.0);

// ---- reductions ----

template <typename T>
Array<T> sum(Tape<T>& tape, const Array<T>& x);
template <typename T>
Array<T> mean(Tape<T>& tape, const Array<T>& x);
/// Max-shifted log-sum-exp over the last axis; drops that axis.
template <typename T>
Array<T> logsumexp(Tape<T>& tape, const Array<T>& x);

// ---- shape ----

template <typename T>
Array<T> reshape(Tape<T>& tape, const Array<T>& x, Shape shape);
template <typename T>
Array<T> concat(Tape<T>& tape, const std::vector<Array<T>>& parts, int axis);
/// Half-open range [begin, end) along `axis`.
template <typename T>
Array<T> slice(Tape<T>& tape, const Array<T>& x, int axis, std::int64_t begin, std::int64_t end);
/// Output axis i is input axis perm[i].
template <typename T>
Array<T> permute(Tape<T>& tape, const Array<T>& x, std::vector<int> perm);

// ---- losses ----

/// Mean softmax cross-entropy of logits (n,k) against integer labels.
template <typename T>
Array<T> softmax_xent(Tape<T>& tape, const Array<T>& logits, std::span<const int> labels);

/// Mean squared difference over all entries.
template <typename T>
Array<T> mse(Tape<T>& tape, const Array<T>& a, const Array<T>& b);

// ---- generic dispatch ----

enum class OpKind {
  matmul,
  conv2d,
  convT2d,
  batchnorm2d,
  leaky_relu,
  relu,
  tanh,
  exp,
  log,
  sum,
  mean,
  reshape,
  concat,
  slice,
  softmax_xent,
  mse,
};

/// Throws std::invalid_argument naming `name` when it is not an op kind.
OpKind parse_op_kind(std::string_view name);
std::string_view op_kind_name(OpKind kind);
std::span<const OpKind> all_op_kinds();

template <typename T>
struct OpAttrs {
  Conv2dAttrs conv;
  BatchNormAttrs bn;
  BatchNormStats<T>* bn_stats = nullptr;
  double slope = 0.2;
  int axis = 0;
  std::int64_t begin = 0;
  std::int64_t end = 0;
  Shape shape;
  std::vector<int> labels;
};

/// Runs the op named by `kind`. Input order follows the typed functions:
/// conv2d/convT2d take (x, weight[, bias]); batchnorm2d takes (x, gamma, beta).
template <typename T>
Array<T> forward_op(Tape<T>& tape, OpKind kind, std::span<const Array<T>> inputs, const OpAttrs<T>& attrs);

}  // namespace domino::nd
