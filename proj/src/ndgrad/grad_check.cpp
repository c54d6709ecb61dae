#include "domino/ndgrad/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace domino::nd {

namespace {

double evaluate(const ScalarGraph& f) {
  Tape<double> tape;
  tape.set_recording(false);
  auto y = f(tape);
  return y.item();
}

}  // namespace

GradCheckResult grad_check(const ScalarGraph& f, std::vector<Array<double>> wrt, double eps, std::size_t max_coords) {
  for (auto& w : wrt) {
    w.set_requires_grad(true);
    if (w.has_grad()) w.zero_grad();
  }
  Tape<double> tape;
  auto root = f(tape);
  if (root.size() != 1) throw ShapeError("grad_check: graph output must be a scalar, got " + to_string(root.shape()));
  tape.backward(root);

  std::vector<std::vector<double>> analytic;
  std::size_t total = 0;
  for (auto& w : wrt) {
    analytic.emplace_back(w.has_grad() ? std::vector<double>(w.grad().begin(), w.grad().end())
                                       : std::vector<double>(static_cast<std::size_t>(w.size()), 0.0));
    total += static_cast<std::size_t>(w.size());
  }
  const std::size_t stride = (max_coords == 0 || max_coords >= total) ? 1 : total / max_coords;

  GradCheckResult result;
  std::size_t flat = 0;
  for (std::size_t a = 0; a < wrt.size(); ++a) {
    auto values = wrt[a].mutable_values();
    for (std::size_t i = 0; i < values.size(); ++i, ++flat) {
      if (flat % stride != 0) continue;
      const double saved = values[i];
      values[i] = saved + eps;
      const double up = evaluate(f);
      values[i] = saved - eps;
      const double down = evaluate(f);
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double g = analytic[a][i];
      const double err = std::abs(g - numeric) / (std::abs(g) + 1e-8);
      ++result.coords_checked;
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_coord = flat;
      }
    }
  }
  return result;
}

GradCheckResult grad_check(const std::function<Array<double>(Tape<double>&, const Array<double>&)>& f,
                           const Array<double>& x, double eps) {
  Array<double> input = x.clone();
  return grad_check([&](Tape<double>& tape) { return f(tape, input); }, {input}, eps);
}

}  // namespace domino::nd
