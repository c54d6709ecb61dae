#include <algorithm>
#include <numeric>
#include <set>
#include <stdexcept>

#include "domino/datasets.hpp"
#include "domino/rng.hpp"

namespace domino::data {

EpochSampler::EpochSampler(std::int64_t n, std::int64_t batch_size, std::uint64_t seed)
    : n_(n), batch_size_(batch_size), seed_(seed) {
  if (batch_size < 2) throw std::invalid_argument("EpochSampler: batch size must be at least 2");
  if (n < 2) throw std::invalid_argument("EpochSampler: need at least 2 samples");
}

std::vector<std::vector<std::int64_t>> EpochSampler::epoch(std::int64_t e) const {
  std::vector<std::int64_t> order(static_cast<std::size_t>(n_));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(seed_, static_cast<std::uint64_t>(e)));
  rng.shuffle(std::span<std::int64_t>(order));
  std::vector<std::vector<std::int64_t>> batches;
  for (std::int64_t begin = 0; begin < n_; begin += batch_size_) {
    const auto end = std::min(n_, begin + batch_size_);
    if (end - begin < 2) break;
    batches.emplace_back(order.begin() + begin, order.begin() + end);
  }
  return batches;
}

std::int64_t EpochSampler::batches_per_epoch() const {
  const auto full = n_ / batch_size_;
  return full + ((n_ % batch_size_) >= 2 ? 1 : 0);
}

nd::Array<float> gather_images(const LabeledImageSet& set, std::span<const std::int64_t> indices) {
  auto shape = set.images.shape();
  const auto stride = set.images.size() / shape[0];
  shape[0] = static_cast<std::int64_t>(indices.size());
  std::vector<float> v(static_cast<std::size_t>(stride * shape[0]));
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] < 0 || indices[k] >= set.size()) throw std::out_of_range("gather_images: index out of range");
    auto img = set.image(indices[k]);
    std::copy(img.begin(), img.end(), v.begin() + static_cast<std::int64_t>(k) * stride);
  }
  return nd::Array<float>(std::move(shape), std::move(v));
}

MultimodalBatch gather(const PairedSet& set, std::span<const std::int64_t> indices) {
  MultimodalBatch b;
  b.x1 = gather_images(set.view1, indices);
  b.x2 = gather_images(set.view2, indices);
  b.labels.reserve(indices.size());
  for (auto i : indices) b.labels.push_back(set.view1.labels[i]);
  b.pair_kind = set.kind;
  return b;
}

TwoDomainPairer::TwoDomainPairer(LabeledImageSet a, LabeledImageSet b, std::uint64_t seed)
    : a_(std::move(a)), b_(std::move(b)), seed_(seed) {
  int classes = std::max(a_.num_classes, b_.num_classes);
  for (int y : a_.labels) classes = std::max(classes, y + 1);
  for (int y : b_.labels) classes = std::max(classes, y + 1);
  by_label_.resize(static_cast<std::size_t>(classes));
  for (std::int64_t i = 0; i < b_.size(); ++i) by_label_[b_.labels[i]].push_back(i);
  std::set<int> missing;
  for (int y : a_.labels)
    if (by_label_[y].empty()) missing.insert(y);
  if (!missing.empty()) {
    std::string list;
    for (int y : missing) list += (list.empty() ? "" : ",") + std::to_string(y);
    throw std::invalid_argument("pair_two_domain: labels {" + list + "} of " + a_.name + " have no partner in " +
                                b_.name);
  }
}

std::vector<std::int64_t> TwoDomainPairer::partners(std::int64_t e) const {
  Rng rng(mix_seed(seed_, static_cast<std::uint64_t>(e)));
  std::vector<std::int64_t> out(static_cast<std::size_t>(a_.size()));
  for (std::int64_t i = 0; i < a_.size(); ++i) {
    const auto& pool = by_label_[a_.labels[i]];
    out[i] = pool[rng.below(pool.size())];
  }
  return out;
}

PairedSet TwoDomainPairer::epoch_pairs(std::int64_t e) const {
  const auto idx = partners(e);
  PairedSet out;
  out.kind = PairKind::two_domain;
  out.view1 = a_;
  out.view2.images = gather_images(b_, idx);
  out.view2.labels.reserve(idx.size());
  for (auto j : idx) out.view2.labels.push_back(b_.labels[j]);
  out.view2.name = b_.name;
  out.view2.num_classes = b_.num_classes;
  return out;
}

std::vector<MultimodalBatch> TwoDomainPairer::batches(std::int64_t e, std::int64_t batch_size) const {
  const auto pairs = epoch_pairs(e);
  EpochSampler sampler(pairs.size(), batch_size, mix_seed(seed_, 0x5eed));
  std::vector<MultimodalBatch> out;
  for (const auto& idx : sampler.epoch(e)) out.push_back(gather(pairs, idx));
  return out;
}

PairedSet pair_two_domain(const LabeledImageSet& a, const LabeledImageSet& b, std::uint64_t seed) {
  return TwoDomainPairer(a, b, seed).epoch_pairs(0);
}

}  // namespace domino::data
