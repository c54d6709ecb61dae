#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "domino/datasets.hpp"
#include "domino/rng.hpp"

namespace domino::data {

std::span<const float> LabeledImageSet::image(std::int64_t i) const {
  const auto stride = images.size() / size();
  return images.values().subspan(static_cast<std::size_t>(i * stride), static_cast<std::size_t>(stride));
}

void LabeledImageSet::validate() const {
  if (!images.defined() || images.rank() != 4) throw std::invalid_argument(name + ": images must be N x C x H x W");
  if (images.dim(0) != size()) throw std::invalid_argument(name + ": image and label counts differ");
  for (float v : images.values()) {
    if (!(v >= 0.0f && v <= 1.0f)) throw std::invalid_argument(name + ": intensity outside [0,1]");
  }
  for (int y : labels) {
    if (y < 0 || y >= num_classes) throw std::invalid_argument(name + ": label " + std::to_string(y) + " out of range");
  }
}

std::string_view pair_kind_name(PairKind kind) {
  switch (kind) {
    case PairKind::two_view:
      return "two_view";
    case PairKind::two_domain:
      return "two_domain";
    case PairKind::synthetic:
      return "synthetic";
  }
  return "unknown";
}

const LabeledImageSet& PairedSet::modality(int m) const {
  if (m == 0) return view1;
  if (m == 1) return view2;
  throw std::invalid_argument("modality index " + std::to_string(m) + " is not 0 or 1");
}

void PairedSet::validate() const {
  view1.validate();
  view2.validate();
  if (view1.size() != view2.size()) throw std::invalid_argument("paired set: modality sizes differ");
  if (kind != PairKind::two_domain && view1.labels != view2.labels) {
    throw std::invalid_argument("paired set: modalities are not index-aligned");
  }
}

std::vector<float> resize_bilinear(std::span<const float> image, std::int64_t channels, std::int64_t height,
                                   std::int64_t width, std::int64_t out_height, std::int64_t out_width) {
  std::vector<float> out(static_cast<std::size_t>(channels * out_height * out_width));
  const double sy = static_cast<double>(height) / static_cast<double>(out_height);
  const double sx = static_cast<double>(width) / static_cast<double>(out_width);
  for (std::int64_t c = 0; c < channels; ++c) {
    const float* src = image.data() + c * height * width;
    float* dst = out.data() + c * out_height * out_width;
    for (std::int64_t y = 0; y < out_height; ++y) {
      const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(height - 1));
      const auto y0 = static_cast<std::int64_t>(fy);
      const auto y1 = std::min(y0 + 1, height - 1);
      const double wy = fy - static_cast<double>(y0);
      for (std::int64_t x = 0; x < out_width; ++x) {
        const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(width - 1));
        const auto x0 = static_cast<std::int64_t>(fx);
        const auto x1 = std::min(x0 + 1, width - 1);
        const double wx = fx - static_cast<double>(x0);
        const double top = (1 - wx) * src[y0 * width + x0] + wx * src[y0 * width + x1];
        const double bottom = (1 - wx) * src[y1 * width + x0] + wx * src[y1 * width + x1];
        dst[y * out_width + x] = static_cast<float>((1 - wy) * top + wy * bottom);
      }
    }
  }
  return out;
}

std::vector<float> rotate_bilinear(std::span<const float> image, std::int64_t channels, std::int64_t height,
                                   std::int64_t width, double angle) {
  std::vector<float> out(static_cast<std::size_t>(channels * height * width));
  const double cy = (height - 1) / 2.0, cx = (width - 1) / 2.0;
  const double ca = std::cos(angle), sa = std::sin(angle);
  for (std::int64_t c = 0; c < channels; ++c) {
    const float* src = image.data() + c * height * width;
    float* dst = out.data() + c * height * width;
    auto at = [&](std::int64_t y, std::int64_t x) -> double {
      return (y < 0 || y >= height || x < 0 || x >= width) ? 0.0 : src[y * width + x];
    };
    for (std::int64_t y = 0; y < height; ++y) {
      for (std::int64_t x = 0; x < width; ++x) {
        const double dx = x - cx, dy = y - cy;
        const double fx = ca * dx + sa * dy + cx;
        const double fy = -sa * dx + ca * dy + cy;
        const auto x0 = static_cast<std::int64_t>(std::floor(fx));
        const auto y0 = static_cast<std::int64_t>(std::floor(fy));
        const double wx = fx - static_cast<double>(x0), wy = fy - static_cast<double>(y0);
        const double v = (1 - wy) * ((1 - wx) * at(y0, x0) + wx * at(y0, x0 + 1)) +
                         wy * ((1 - wx) * at(y0 + 1, x0) + wx * at(y0 + 1, x0 + 1));
        dst[y * width + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return out;
}

void rescale_unit(std::span<float> image) {
  if (image.empty()) return;
  const auto [lo, hi] = std::minmax_element(image.begin(), image.end());
  const float mn = *lo, range = *hi - *lo;
  if (range <= 0.0f) {
    std::fill(image.begin(), image.end(), 0.0f);
    return;
  }
  for (auto& v : image) v = std::clamp((v - mn) / range, 0.0f, 1.0f);
}

PairedSet make_two_view(const LabeledImageSet& set, std::uint64_t seed, TwoViewOptions options) {
  const auto n = set.size();
  const auto c = set.images.dim(1), h = set.images.dim(2), w = set.images.dim(3);
  const auto stride = c * h * w;
  std::vector<float> rotated(static_cast<std::size_t>(n * stride));
  std::vector<float> noisy(static_cast<std::size_t>(n * stride));
  for (std::int64_t i = 0; i < n; ++i) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
    const double angle = rng.uniform(-options.max_angle, options.max_angle);
    auto img = set.image(i);
    auto r = rotate_bilinear(img, c, h, w, angle);
    std::copy(r.begin(), r.end(), rotated.begin() + i * stride);
    float* dst = noisy.data() + i * stride;
    for (std::int64_t j = 0; j < stride; ++j) dst[j] = img[j] + static_cast<float>(rng.uniform() * options.noise_scale);
    rescale_unit(std::span<float>(dst, static_cast<std::size_t>(stride)));
  }
  PairedSet out;
  out.kind = PairKind::two_view;
  out.view1 = {nd::Array<float>(set.images.shape(), std::move(rotated)), set.labels, set.name + "/rotated",
               set.num_classes};
  out.view2 = {nd::Array<float>(set.images.shape(), std::move(noisy)), set.labels, set.name + "/noisy",
               set.num_classes};
  return out;
}

}  // namespace domino::data
