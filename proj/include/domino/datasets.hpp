#pragma once

#include <cstdint>
#include <filesystem>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "domino/ndgrad/array.hpp"
#include "domino/ndgrad/checkpoint.hpp"

namespace domino::data {

inline constexpr std::int64_t kImageSide = 32;

/// N x C x H x W images in [0,1] with one integer label per image.
struct LabeledImageSet {
  nd::Array<float> images;
  std::vector<int> labels;
  std::string name;
  int num_classes = 0;

  std::int64_t size() const { return static_cast<std::int64_t>(labels.size()); }
  std::int64_t channels() const { return images.dim(1); }
  /// Pixels of image i (C*H*W values).
  std::span<const float> image(std::int64_t i) const;

  /// Throws std::invalid_argument when intensities leave [0,1] or labels
  /// leave [0, num_classes).
  void validate() const;
};

enum class PairKind { two_view, two_domain, synthetic };

std::string_view pair_kind_name(PairKind kind);

/// Index-aligned pair of modalities: view1[k] and view2[k] describe the same
/// instance (two_view, synthetic) or the same class (two_domain).
struct PairedSet {
  LabeledImageSet view1;
  LabeledImageSet view2;
  PairKind kind = PairKind::synthetic;

  std::int64_t size() const { return view1.size(); }
  const LabeledImageSet& modality(int m) const;
  void validate() const;
};

struct MultimodalBatch {
  nd::Array<float> x1;
  nd::Array<float> x2;
  std::vector<int> labels;
  PairKind pair_kind = PairKind::synthetic;

  std::int64_t size() const { return static_cast<std::int64_t>(labels.size()); }
  const nd::Array<float>& modality(int m) const { return m == 0 ? x1 : x2; }
};

// ---- IDX ----

/// Reads an IDX image/label pair (MNIST layout), rescales intensities to
/// [0,1] and resizes to 32x32 bilinearly. Throws nd::FormatError on a wrong
/// magic number, a truncated payload or mismatched counts.
LabeledImageSet load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                         std::int64_t limit = 0);

/// Writers for fixtures; images are u8 N x H x W.
void write_idx_images(const std::filesystem::path& path, std::int64_t rows, std::int64_t cols,
                      std::span<const std::uint8_t> pixels);
void write_idx_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels);

// ---- transforms ----

/// Bilinear resize of one C x H x W image (half-pixel centers, edge clamp).
std::vector<float> resize_bilinear(std::span<const float> image, std::int64_t channels, std::int64_t height,
                                   std::int64_t width, std::int64_t out_height, std::int64_t out_width);

/// Rotates a C x H x W image about its center by `angle` radians using
/// bilinear sampling; samples outside the image read as zero.
std::vector<float> rotate_bilinear(std::span<const float> image, std::int64_t channels, std::int64_t height,
                                   std::int64_t width, double angle);

/// Min-max rescale to [0,1]; a constant image maps to zeros.
void rescale_unit(std::span<float> image);

struct TwoViewOptions {
  double max_angle = std::numbers::pi / 4;
  double noise_scale = 1.0;
};

/// view1: rotation by Uniform[-max_angle, max_angle]; view2: image plus
/// Uniform[0, noise_scale) noise, min-max rescaled per image. Each image
/// draws from its own stream seeded by (seed, index).
PairedSet make_two_view(const LabeledImageSet& set, std::uint64_t seed, TwoViewOptions options = {});

// ---- synthetic ----

/// Class-dependent glyphs (bars, discs, rings, ...) at jittered positions.
LabeledImageSet synth_glyphs(std::span<const int> labels, int num_classes, std::uint64_t seed);

/// Class-dependent sinusoidal gratings with random phase.
LabeledImageSet synth_gratings(std::span<const int> labels, int num_classes, std::uint64_t seed);

/// Balanced labels: class histogram is uniform within +-1.
std::vector<int> balanced_labels(std::int64_t n, int num_classes, std::uint64_t seed);

/// Modality 1 = glyph, modality 2 = grating of the same class. Requires
/// n >= num_classes.
PairedSet synth_multimodal(std::int64_t n, int num_classes, std::uint64_t seed);

/// Two-view corruption applied to synthetic glyphs; CI stand-in for
/// Two-View MNIST.
PairedSet synth_two_view(std::int64_t n, int num_classes, std::uint64_t seed);

// ---- sampling ----

/// Shuffled batches over index-aligned pairs. The order of epoch e is a
/// pure function of (seed, e); every sample appears once per epoch. A final
/// batch smaller than 2 is dropped.
class EpochSampler {
 public:
  EpochSampler(std::int64_t n, std::int64_t batch_size, std::uint64_t seed);

  std::vector<std::vector<std::int64_t>> epoch(std::int64_t e) const;
  std::int64_t batches_per_epoch() const;

 private:
  std::int64_t n_;
  std::int64_t batch_size_;
  std::uint64_t seed_;
};

MultimodalBatch gather(const PairedSet& set, std::span<const std::int64_t> indices);

/// Gathers images of one modality.
nd::Array<float> gather_images(const LabeledImageSet& set, std::span<const std::int64_t> indices);

/// Pairs every sample of `a` with a same-label sample of `b`, resampled per
/// epoch. Throws std::invalid_argument when a label of `a` has no partner.
class TwoDomainPairer {
 public:
  TwoDomainPairer(LabeledImageSet a, LabeledImageSet b, std::uint64_t seed);

  /// Partner index in `b` for every index of `a`, for epoch e.
  std::vector<std::int64_t> partners(std::int64_t e) const;
  /// Materialized index-aligned pairing for epoch e.
  PairedSet epoch_pairs(std::int64_t e) const;
  /// Batches of epoch e in shuffled order.
  std::vector<MultimodalBatch> batches(std::int64_t e, std::int64_t batch_size) const;

 private:
  LabeledImageSet a_;
  LabeledImageSet b_;
  std::uint64_t seed_;
  std::vector<std::vector<std::int64_t>> by_label_;
};

PairedSet pair_two_domain(const LabeledImageSet& a, const LabeledImageSet& b, std::uint64_t seed);

// ---- storage ----

/// Stores images (N,C,H,W) and labels as NDCK arrays "images", "labels",
/// "num_classes".
void save_image_set(const LabeledImageSet& set, const std::filesystem::path& path);
LabeledImageSet load_image_set(const std::filesystem::path& path, std::string name = {});

struct PairedSplits {
  PairedSet train;
  PairedSet holdout;
};

/// Writes train_view{1,2}.ndck and holdout_view{1,2}.ndck under `dir`.
void save_splits(const PairedSplits& splits, const std::filesystem::path& dir);
PairedSplits load_splits(const std::filesystem::path& dir);

}  // namespace domino::data
