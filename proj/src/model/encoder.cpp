#include "domino/model.hpp"

namespace domino::model {

template <typename T>
Encoder<T>::Encoder(const EncoderConfig& config, std::string name) : config_(config), name_(std::move(name)) {
  if (config.conv_feature_side != 8) {
    throw std::invalid_argument(name_ + ": the 32x32 layer stack emits its conv features at side 8");
  }
  Rng rng(mix_seed(config.seed, 0xE1C));
  const auto b = config.base_channels;
  conv1_ = Conv2d<T>(config.in_channels, b, 4, 2, 1, /*with_bias=*/true, rng);
  conv2_ = Conv2d<T>(b, 2 * b, 4, 2, 1, false, rng);
  conv3_ = Conv2d<T>(2 * b, 4 * b, 4, 2, 1, false, rng);
  bn2_ = BatchNorm<T>(2 * b);
  bn3_ = BatchNorm<T>(4 * b);
  fc_ = Linear<T>(4 * b * 4 * 4, config.latent_dim, rng);
}

template <typename T>
EncoderOutputs<T> Encoder<T>::operator()(Tape<T>& tape, const Array<T>& x, bool training) const {
  if (x.rank() != 4 || x.dim(2) != 32 || x.dim(3) != 32) {
    throw nd::ShapeError(name_ + ": expected (B,C,32,32) input, got " + nd::to_string(x.shape()));
  }
  if (x.dim(1) != config_.in_channels) {
    throw nd::ShapeError(name_ + ": expected " + std::to_string(config_.in_channels) + " channels, got " +
                         nd::to_string(x.shape()));
  }
  const double slope = config_.leaky_slope;
  auto h1 = nd::leaky_relu(tape, conv1_(tape, x), slope);
  auto c = nd::leaky_relu(tape, bn2_(tape, conv2_(tape, h1), training), slope);
  auto h3 = nd::leaky_relu(tape, bn3_(tape, conv3_(tape, c), training), slope);
  auto flat = nd::reshape(tape, h3, {h3.dim(0), h3.size() / h3.dim(0)});
  return {c, fc_(tape, flat)};
}

template <typename T>
std::vector<NamedParam<T>> Encoder<T>::parameters() const {
  std::vector<NamedParam<T>> out;
  conv1_.collect(name_ + "/conv1", out);
  conv2_.collect(name_ + "/conv2", out);
  bn2_.collect(name_ + "/bn2", out);
  conv3_.collect(name_ + "/conv3", out);
  bn3_.collect(name_ + "/bn3", out);
  fc_.collect(name_ + "/fc", out);
  return out;
}

template <typename T>
std::vector<NamedStats<T>> Encoder<T>::statistics() const {
  std::vector<NamedStats<T>> out;
  bn2_.collect_stats(name_ + "/bn2", out);
  bn3_.collect_stats(name_ + "/bn3", out);
  return out;
}

template class Encoder<float>;
template class Encoder<double>;

}  // namespace domino::model
