#include <algorithm>

#include "domino/model.hpp"

namespace domino::model {

template <typename T>
ProjectionHeads<T>::ProjectionHeads(std::int64_t in_channels, std::int64_t embed_dim, std::uint64_t seed,
                                    std::string name)
    : in_channels_(in_channels), embed_dim_(embed_dim), name_(std::move(name)) {
  Rng rng(mix_seed(seed, 0x4EAD));
  a1_ = Conv2d<T>(in_channels, embed_dim, 1, 1, 0, /*with_bias=*/true, rng);
  a2_ = Conv2d<T>(embed_dim, embed_dim, 1, 1, 0, true, rng);
  b_ = Conv2d<T>(in_channels, embed_dim, 1, 1, 0, false, rng);
  auto w = b_.weight.mutable_values();
  std::fill(w.begin(), w.end(), T(0));
  for (std::int64_t o = 0; o < std::min(in_channels, embed_dim); ++o) w[o * in_channels + o] = T(1);
  bn_ = BatchNorm<T>(embed_dim);
}

template <typename T>
Array<T> ProjectionHeads<T>::path_a(Tape<T>& tape, const Array<T>& c) const {
  return a2_(tape, nd::relu(tape, a1_(tape, c)));
}

template <typename T>
Array<T> ProjectionHeads<T>::path_b(Tape<T>& tape, const Array<T>& c) const {
  return b_(tape, c);
}

template <typename T>
Array<T> ProjectionHeads<T>::project_conv(Tape<T>& tape, const Array<T>& c, bool training) const {
  if (c.rank() != 4 || c.dim(1) != in_channels_) {
    throw nd::ShapeError(name_ + ": expected (B," + std::to_string(in_channels_) + ",H,W) features, got " +
                         nd::to_string(c.shape()));
  }
  return bn_(tape, nd::add(tape, path_a(tape, c), path_b(tape, c)), training);
}

template <typename T>
std::vector<NamedParam<T>> ProjectionHeads<T>::parameters() const {
  std::vector<NamedParam<T>> out;
  a1_.collect(name_ + "/conv_a1", out);
  a2_.collect(name_ + "/conv_a2", out);
  b_.collect(name_ + "/conv_b", out);
  bn_.collect(name_ + "/bn", out);
  return out;
}

template <typename T>
std::vector<NamedStats<T>> ProjectionHeads<T>::statistics() const {
  std::vector<NamedStats<T>> out;
  bn_.collect_stats(name_ + "/bn", out);
  return out;
}

template class ProjectionHeads<float>;
template class ProjectionHeads<double>;

}  // namespace domino::model
