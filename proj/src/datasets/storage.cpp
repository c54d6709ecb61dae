#include <stdexcept>

#include "domino/datasets.hpp"

namespace domino::data {

namespace {

nd::Checkpoint to_checkpoint(const LabeledImageSet& set) {
  nd::Checkpoint ck;
  ck.put("images", set.images);
  std::vector<float> labels(set.labels.begin(), set.labels.end());
  ck.put("labels", nd::Array<float>({set.size()}, std::move(labels)));
  ck.put("num_classes", nd::Array<float>::scalar(static_cast<float>(set.num_classes)));
  return ck;
}

LabeledImageSet from_checkpoint(const nd::Checkpoint& ck, std::string name) {
  LabeledImageSet set;
  set.images = ck.get<float>("images");
  if (set.images.rank() != 4) throw nd::FormatError("dataset: images must be N x C x H x W");
  const auto labels = ck.get<float>("labels");
  for (float y : labels.values()) set.labels.push_back(static_cast<int>(y));
  if (static_cast<std::int64_t>(set.labels.size()) != set.images.dim(0)) {
    throw nd::FormatError("dataset: image and label counts differ");
  }
  set.num_classes = static_cast<int>(ck.get<float>("num_classes").item());
  set.name = std::move(name);
  return set;
}

PairKind kind_from_code(int code) {
  switch (code) {
    case 0:
      return PairKind::two_view;
    case 1:
      return PairKind::two_domain;
    case 2:
      return PairKind::synthetic;
  }
  throw nd::FormatError("dataset: unknown pair kind code " + std::to_string(code));
}

}  // namespace

void save_image_set(const LabeledImageSet& set, const std::filesystem::path& path) { to_checkpoint(set).save(path); }

LabeledImageSet load_image_set(const std::filesystem::path& path, std::string name) {
  return from_checkpoint(nd::Checkpoint::load(path), name.empty() ? path.stem().string() : std::move(name));
}

void save_splits(const PairedSplits& splits, const std::filesystem::path& dir) {
  for (auto [prefix, set] : {std::pair{"train", &splits.train}, std::pair{"holdout", &splits.holdout}}) {
    auto v1 = to_checkpoint(set->view1);
    v1.put("pair_kind", nd::Array<float>::scalar(static_cast<float>(static_cast<int>(set->kind))));
    v1.save(dir / (std::string(prefix) + "_view1.ndck"));
    to_checkpoint(set->view2).save(dir / (std::string(prefix) + "_view2.ndck"));
  }
}

PairedSplits load_splits(const std::filesystem::path& dir) {
  PairedSplits out;
  for (auto [prefix, set] : {std::pair{"train", &out.train}, std::pair{"holdout", &out.holdout}}) {
    const auto v1 = nd::Checkpoint::load(dir / (std::string(prefix) + "_view1.ndck"));
    set->view1 = from_checkpoint(v1, std::string(prefix) + "/view1");
    set->view2 = load_image_set(dir / (std::string(prefix) + "_view2.ndck"), std::string(prefix) + "/view2");
    set->kind = v1.contains("pair_kind") ? kind_from_code(static_cast<int>(v1.get<float>("pair_kind").item()))
                                         : PairKind::synthetic;
    set->validate();
  }
  return out;
}

}  // namespace domino::data
