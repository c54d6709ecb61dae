#include "domino/model.hpp"

namespace domino::model {

template <typename T>
Decoder<T>::Decoder(const EncoderConfig& config, std::string name) : config_(config), name_(std::move(name)) {
  Rng rng(mix_seed(config.seed, 0xDEC));
  const auto b = config.base_channels;
  fc_ = Linear<T>(config.latent_dim, 4 * b * 4 * 4, rng);
  bn0_ = BatchNorm<T>(4 * b);
  up1_ = ConvTranspose2d<T>(4 * b, 2 * b, 4, 2, 1, false, rng);
  bn1_ = BatchNorm<T>(2 * b);
  up2_ = ConvTranspose2d<T>(2 * b, b, 4, 2, 1, false, rng);
  bn2_ = BatchNorm<T>(b);
  up3_ = ConvTranspose2d<T>(b, config.in_channels, 4, 2, 1, true, rng);
}

template <typename T>
Array<T> Decoder<T>::operator()(Tape<T>& tape, const Array<T>& z, bool training) const {
  if (z.rank() != 2 || z.dim(1) != config_.latent_dim) {
    throw nd::ShapeError(name_ + ": expected (B," + std::to_string(config_.latent_dim) + ") latents, got " +
                         nd::to_string(z.shape()));
  }
  const auto b = config_.base_channels;
  auto h = nd::reshape(tape, fc_(tape, z), {z.dim(0), 4 * b, 4, 4});
  h = nd::relu(tape, bn0_(tape, h, training));
  h = nd::relu(tape, bn1_(tape, up1_(tape, h), training));
  h = nd::relu(tape, bn2_(tape, up2_(tape, h), training));
  return nd::affine(tape, nd::tanh(tape, up3_(tape, h)), 0.5, 0.5);
}

template <typename T>
std::vector<NamedParam<T>> Decoder<T>::parameters() const {
  std::vector<NamedParam<T>> out;
  fc_.collect(name_ + "/fc", out);
  bn0_.collect(name_ + "/bn0", out);
  up1_.collect(name_ + "/up1", out);
  bn1_.collect(name_ + "/bn1", out);
  up2_.collect(name_ + "/up2", out);
  bn2_.collect(name_ + "/bn2", out);
  up3_.collect(name_ + "/up3", out);
  return out;
}

template <typename T>
std::vector<NamedStats<T>> Decoder<T>::statistics() const {
  std::vector<NamedStats<T>> out;
  bn0_.collect_stats(name_ + "/bn0", out);
  bn1_.collect_stats(name_ + "/bn1", out);
  bn2_.collect_stats(name_ + "/bn2", out);
  return out;
}

template class Decoder<float>;
template class Decoder<double>;

}  // namespace domino::model
