#include <cmath>

#include "domino/model.hpp"

namespace domino::model {

double xavier_bound(std::int64_t fan_in, std::int64_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

template <typename T>
void xavier_uniform(Array<T>& w, std::int64_t fan_in, std::int64_t fan_out, Rng& rng) {
  const double a = xavier_bound(fan_in, fan_out);
  for (auto& v : w.mutable_values()) v = static_cast<T>(rng.uniform(-a, a));
}

template <typename T>
Conv2d<T>::Conv2d(std::int64_t in, std::int64_t out, int kernel, int stride, int pad, bool with_bias, Rng& rng)
    : weight(Array<T>::zeros({out, in, kernel, kernel}, true)), attrs{stride, pad} {
  xavier_uniform(weight, in * kernel * kernel, out * kernel * kernel, rng);
  if (with_bias) bias = Array<T>::zeros({out}, true);
}

template <typename T>
Array<T> Conv2d<T>::operator()(Tape<T>& tape, const Array<T>& x) const {
  return nd::conv2d(tape, x, weight, bias.defined() ? &bias : nullptr, attrs);
}

template <typename T>
void Conv2d<T>::collect(const std::string& prefix, std::vector<NamedParam<T>>& out) const {
  out.push_back({prefix + ".weight", weight});
  if (bias.defined()) out.push_back({prefix + ".bias", bias});
}

template <typename T>
ConvTranspose2d<T>::ConvTranspose2d(std::int64_t in, std::int64_t out, int kernel, int stride, int pad,
                                    bool with_bias, Rng& rng)
    : weight(Array<T>::zeros({in, out, kernel, kernel}, true)), attrs{stride, pad} {
  xavier_uniform(weight, out * kernel * kernel, in * kernel * kernel, rng);
  if (with_bias) bias = Array<T>::zeros({out}, true);
}

template <typename T>
Array<T> ConvTranspose2d<T>::operator()(Tape<T>& tape, const Array<T>& x) const {
  return nd::conv_transpose2d(tape, x, weight, bias.defined() ? &bias : nullptr, attrs);
}

template <typename T>
void ConvTranspose2d<T>::collect(const std::string& prefix, std::vector<NamedParam<T>>& out) const {
  out.push_back({prefix + ".weight", weight});
  if (bias.defined()) out.push_back({prefix + ".bias", bias});
}

template <typename T>
Linear<T>::Linear(std::int64_t in, std::int64_t out, Rng& rng)
    : weight(Array<T>::zeros({out, in}, true)), bias(Array<T>::zeros({out}, true)) {
  xavier_uniform(weight, in, out, rng);
}

template <typename T>
Array<T> Linear<T>::operator()(Tape<T>& tape, const Array<T>& x) const {
  return nd::add_bias(tape, nd::matmul(tape, x, weight, /*transpose_b=*/true), bias);
}

template <typename T>
void Linear<T>::collect(const std::string& prefix, std::vector<NamedParam<T>>& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

template <typename T>
BatchNorm<T>::BatchNorm(std::int64_t channels)
    : gamma(Array<T>::full({channels}, T(1), true)),
      beta(Array<T>::zeros({channels}, true)),
      stats(std::make_unique<nd::BatchNormStats<T>>(channels)) {}

template <typename T>
Array<T> BatchNorm<T>::operator()(Tape<T>& tape, const Array<T>& x, bool training) const {
  auto a = attrs;
  a.training = training;
  return nd::batchnorm2d(tape, x, gamma, beta, stats.get(), a);
}

template <typename T>
void BatchNorm<T>::collect(const std::string& prefix, std::vector<NamedParam<T>>& out) const {
  out.push_back({prefix + ".gamma", gamma});
  out.push_back({prefix + ".beta", beta});
}

template <typename T>
void BatchNorm<T>::collect_stats(const std::string& prefix, std::vector<NamedStats<T>>& out) const {
  out.push_back({prefix, stats.get()});
}

template <typename T>
void store(nd::Checkpoint& ck, const std::vector<NamedParam<T>>& params, const std::vector<NamedStats<T>>& stats) {
  for (const auto& p : params) ck.put(p.name, p.value);
  for (const auto& s : stats) {
    const auto c = static_cast<std::int64_t>(s.stats->running_mean.size());
    ck.put(s.name + ".running_mean", Array<T>({c}, s.stats->running_mean));
    ck.put(s.name + ".running_var", Array<T>({c}, s.stats->running_var));
  }
}

template <typename T>
void restore(const nd::Checkpoint& ck, const std::vector<NamedParam<T>>& params,
             const std::vector<NamedStats<T>>& stats) {
  for (auto p : params) {
    const auto stored = ck.get<T>(p.name);
    if (stored.shape() != p.value.shape()) {
      throw nd::FormatError("checkpoint: '" + p.name + "' has shape " + nd::to_string(stored.shape()) +
                            ", model expects " + nd::to_string(p.value.shape()));
    }
    auto dst = p.value.mutable_values();
    std::copy(stored.values().begin(), stored.values().end(), dst.begin());
  }
  for (const auto& s : stats) {
    const auto mean = ck.get<T>(s.name + ".running_mean");
    const auto var = ck.get<T>(s.name + ".running_var");
    if (mean.size() != static_cast<std::int64_t>(s.stats->running_mean.size()) || var.size() != mean.size()) {
      throw nd::FormatError("checkpoint: running statistics '" + s.name + "' have the wrong channel count");
    }
    s.stats->running_mean.assign(mean.values().begin(), mean.values().end());
    s.stats->running_var.assign(var.values().begin(), var.values().end());
  }
}

#define DOMINO_INSTANTIATE_LAYERS(T)                                                                        \
  template void xavier_uniform<T>(Array<T>&, std::int64_t, std::int64_t, Rng&);                             \
  template struct Conv2d<T>;                                                                                \
  template struct ConvTranspose2d<T>;                                                                       \
  template struct Linear<T>;                                                                                \
  template struct BatchNorm<T>;                                                                             \
  template void store<T>(nd::Checkpoint&, const std::vector<NamedParam<T>>&, const std::vector<NamedStats<T>>&); \
  template void restore<T>(const nd::Checkpoint&, const std::vector<NamedParam<T>>&,                        \
                           const std::vector<NamedStats<T>>&);

DOMINO_INSTANTIATE_LAYERS(float)
DOMINO_INSTANTIATE_LAYERS(double)

#undef DOMINO_INSTANTIATE_LAYERS

}  // namespace domino::model
