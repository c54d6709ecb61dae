#include <cmath>

#include "domino/ndgrad/grad_check.hpp"
#include "domino/rng.hpp"

namespace domino::nd {

namespace {

Array<double> normal(Shape shape, Rng& rng, double scale = 1.0) {
  Array<double> a = Array<double>::zeros(std::move(shape));
  for (auto& v : a.mutable_values()) v = scale * rng.normal();
  return a;
}

Array<double> uniform(Shape shape, Rng& rng, double lo, double hi) {
  Array<double> a = Array<double>::zeros(std::move(shape));
  for (auto& v : a.mutable_values()) v = rng.uniform(lo, hi);
  return a;
}

// Values bounded away from the kink at 0 so central differences never
// straddle it.
Array<double> away_from_zero(Shape shape, Rng& rng) {
  Array<double> a = Array<double>::zeros(std::move(shape));
  for (auto& v : a.mutable_values()) v = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.05, 1.5);
  return a;
}

}  // namespace

OpFixture make_op_fixture(OpKind kind, std::uint64_t seed) {
  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(kind) + 1));
  OpFixture f;
  f.kind = kind;
  auto& in = f.inputs;
  auto& at = f.attrs;
  switch (kind) {
    case OpKind::matmul:
      in = {normal({3, 4}, rng), normal({4, 5}, rng)};
      break;
    case OpKind::conv2d:
      in = {normal({2, 3, 6, 6}, rng), normal({4, 3, 3, 3}, rng, 0.5), normal({4}, rng)};
      at.conv = {2, 1};
      break;
    case OpKind::convT2d:
      in = {normal({2, 3, 3, 3}, rng), normal({3, 2, 4, 4}, rng, 0.5), normal({2}, rng)};
      at.conv = {2, 1};
      break;
    case OpKind::batchnorm2d:
      in = {normal({4, 3, 3, 3}, rng), uniform({3}, rng, 0.5, 1.5), normal({3}, rng)};
      f.stats = std::make_shared<BatchNormStats<double>>(3);
      at.bn.training = true;
      at.bn_stats = f.stats.get();
      break;
    case OpKind::leaky_relu:
    case OpKind::relu:
      in = {away_from_zero({3, 5}, rng)};
      at.slope = 0.2;
      break;
    case OpKind::tanh:
      in = {normal({3, 5}, rng)};
      break;
    case OpKind::exp:
      in = {normal({3, 5}, rng, 0.5)};
      break;
    case OpKind::log:
      in = {uniform({3, 5}, rng, 0.5, 2.0)};
      break;
    case OpKind::sum:
    case OpKind::mean:
      in = {normal({3, 4}, rng)};
      break;
    case OpKind::reshape:
      in = {normal({2, 6}, rng)};
      at.shape = {3, 4};
      break;
    case OpKind::concat:
      in = {normal({2, 3}, rng), normal({2, 2}, rng)};
      at.axis = 1;
      break;
    case OpKind::slice:
      in = {normal({4, 5}, rng)};
      at.axis = 1;
      at.begin = 1;
      at.end = 4;
      break;
    case OpKind::softmax_xent:
      in = {normal({5, 4}, rng)};
      at.labels = {0, 3, 1, 2, 3};
      break;
    case OpKind::mse:
      in = {normal({3, 4}, rng), normal({3, 4}, rng)};
      break;
  }
  for (auto& x : in) x.set_requires_grad(true);

  Tape<double> probe;
  probe.set_recording(false);
  const auto out = forward_op(probe, kind, std::span<const Array<double>>(in), at);
  f.weights = uniform(out.shape(), rng, 0.5, 1.5);
  return f;
}

GradCheckResult check_op_gradient(OpKind kind, std::uint64_t seed, double eps) {
  const auto f = make_op_fixture(kind, seed);
  return grad_check(
      [&f](Tape<double>& tape) {
        const auto out = forward_op(tape, f.kind, std::span<const Array<double>>(f.inputs), f.attrs);
        return sum(tape, mul(tape, out, f.weights));
      },
      f.inputs, eps);
}

}  // namespace domino::nd
