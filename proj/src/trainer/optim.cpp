#include <cmath>
#include <numbers>
#include <stdexcept>

#include "domino/trainer.hpp"

namespace domino::trainer {

std::string_view precision_name(Precision p) { return p == Precision::f32 ? "f32" : "f64"; }

Precision parse_precision(std::string_view name) {
  if (name == "f32" || name == "float32" || name == "float") return Precision::f32;
  if (name == "f64" || name == "float64" || name == "double") return Precision::f64;
  throw std::invalid_argument("unknown precision '" + std::string(name) + "' (expected f32 or f64)");
}

template <typename T>
OptimizerState<T> make_optimizer(std::span<const Array<T>> params, const RAdamConfig& config) {
  OptimizerState<T> state;
  state.config = config;
  for (const auto& p : params) {
    state.m.emplace_back(static_cast<std::size_t>(p.size()), T(0));
    state.v.emplace_back(static_cast<std::size_t>(p.size()), T(0));
  }
  return state;
}

double radam_rho(std::int64_t t, double beta2) {
  const double rho_inf = 2.0 / (1.0 - beta2) - 1.0;
  const double b2t = std::pow(beta2, static_cast<double>(t));
  return rho_inf - 2.0 * static_cast<double>(t) * b2t / (1.0 - b2t);
}

template <typename T>
bool radam_step(OptimizerState<T>& state, std::span<const Array<T>> params, double lr) {
  if (params.size() != state.m.size()) throw std::invalid_argument("radam_step: parameter count changed");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (static_cast<std::size_t>(params[k].size()) != state.m[k].size()) {
      throw nd::ShapeError("radam_step: parameter " + std::to_string(k) + " changed size");
    }
    if (!params[k].has_grad()) continue;
    for (T g : params[k].grad()) {
      if (!std::isfinite(g)) {
        ++state.skipped;
        return false;
      }
    }
  }

  const auto& c = state.config;
  const auto t = ++state.step;
  const double bias1 = 1.0 - std::pow(c.beta1, static_cast<double>(t));
  const double bias2 = 1.0 - std::pow(c.beta2, static_cast<double>(t));
  const double rho_inf = 2.0 / (1.0 - c.beta2) - 1.0;
  const double rho = radam_rho(t, c.beta2);
  const bool adaptive = rho > c.rho_threshold;
  const double rect =
      adaptive ? std::sqrt((rho - 4.0) * (rho - 2.0) * rho_inf / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho)) : 0.0;

  for (std::size_t k = 0; k < params.size(); ++k) {
    Array<T> p = params[k];
    if (!p.has_grad()) continue;
    auto g = p.grad();
    auto w = p.mutable_values();
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double gi = g[i];
      const double mi = c.beta1 * m[i] + (1.0 - c.beta1) * gi;
      const double vi = c.beta2 * v[i] + (1.0 - c.beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double m_hat = mi / bias1;
      double update = m_hat;
      if (adaptive) update = rect * m_hat / (std::sqrt(vi / bias2) + c.eps);
      w[i] = static_cast<T>(w[i] - lr * update);
    }
  }
  return true;
}

double onecycle_lr(std::int64_t step, std::int64_t total_steps, const ScheduleConfig& cfg) {
  if (total_steps < 1 || step < 0 || step >= total_steps) {
    throw std::out_of_range("onecycle_lr: step " + std::to_string(step) + " outside [0, " +
                            std::to_string(total_steps) + ")");
  }
  auto cosine = [](double from, double to, double pct) {
    return to + (from - to) * 0.5 * (1.0 + std::cos(std::numbers::pi * pct));
  };
  const double s = static_cast<double>(step);
  const double peak = cfg.warmup_fraction * static_cast<double>(total_steps);
  const double last = static_cast<double>(total_steps - 1);
  if (s <= peak) return peak > 0.0 ? cosine(cfg.lr, cfg.max_lr, s / peak) : cfg.max_lr;
  const double span = last - peak;
  return cosine(cfg.max_lr, cfg.lr / cfg.final_div, span > 0.0 ? (s - peak) / span : 1.0);
}

template OptimizerState<float> make_optimizer(std::span<const Array<float>>, const RAdamConfig&);
template OptimizerState<double> make_optimizer(std::span<const Array<double>>, const RAdamConfig&);
template bool radam_step(OptimizerState<float>&, std::span<const Array<float>>, double);
template bool radam_step(OptimizerState<double>&, std::span<const Array<double>>, double);

}  // namespace domino::trainer
