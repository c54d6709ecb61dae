#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include <cstdint>
#include <memory>

#include "domino/ndgrad/array.hpp"
#include "domino/ndgrad/ops.hpp"
#include "domino/ndgrad/tape.hpp"

namespace domino::nd {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
  // Index into the concatenation of all checked arrays.
  std::size_t worst_coord = 0;
};

using ScalarGraph = std::function<Array<double>(Tape<double>&)>;

/// Compares reverse-mode gradients of `f` w.r.t. every array in `wrt` with
/// central differences: max |g - (f(w+eps) - f(w-eps)) / 2eps| / (|g| + 1e-8).
/// Arrays in `wrt` are perturbed in place and restored. With max_coords > 0,
/// an evenly strided subset of coordinates is checked.
GradCheckResult grad_check(const ScalarGraph& f, std::vector<Array<double>> wrt, double eps = 1e-5,
                           std::size_t max_coords = 0);

/// Single-input form: `f` builds a scalar from x.
GradCheckResult grad_check(const std::function<Array<double>(Tape<double>&, const Array<double>&)>& f,
                           const Array<double>& x, double eps = 1e-5);

// ---- per-op fixtures ----

/// Random 64-bit inputs for one op kind. Non-scalar outputs are reduced as
/// sum(out * weights) with fixed random weights so every gradient is O(1).
struct OpFixture {
  OpKind kind = OpKind::matmul;
  std::vector<Array<double>> inputs;
  OpAttrs<double> attrs;
  Array<double> weights;
  std::shared_ptr<BatchNormStats<double>> stats;
};

OpFixture make_op_fixture(OpKind kind, std::uint64_t seed);

/// grad_check of one op kind on its fixture, w.r.t. every input.
GradCheckResult check_op_gradient(OpKind kind, std::uint64_t seed, double eps = 1e-5);

}  // namespace domino::nd
