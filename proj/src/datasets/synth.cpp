#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "domino/datasets.hpp"
#include "domino/rng.hpp"

namespace domino::data {

namespace {

constexpr int kGlyphShapes = 10;

// Signed distance (negative inside) of glyph `shape` at offset (dx, dy)
// from its center; `s` is the half-extent, `t` the stroke half-width.
double glyph_distance(int shape, double dx, double dy, double s, double t) {
  const double r = std::hypot(dx, dy);
  const double ax = std::abs(dx), ay = std::abs(dy);
  auto box = [](double qx, double qy, double hx, double hy) { return std::max(qx - hx, qy - hy); };
  switch (shape) {
    case 0:  // disc
      return r - s;
    case 1:  // vertical bar
      return box(ax, ay, t, s);
    case 2:  // horizontal bar
      return box(ax, ay, s, t);
    case 3:  // ring
      return std::abs(r - s) - 0.7 * t;
    case 4:  // plus
      return std::min(box(ax, ay, t, s), box(ax, ay, s, t));
    case 5: {  // diagonal
      const double u = (dx - dy) / std::numbers::sqrt2, v = (dx + dy) / std::numbers::sqrt2;
      return box(std::abs(u), std::abs(v), 0.8 * t, s);
    }
    case 6: {  // anti-diagonal
      const double u = (dx + dy) / std::numbers::sqrt2, v = (dx - dy) / std::numbers::sqrt2;
      return box(std::abs(u), std::abs(v), 0.8 * t, s);
    }
    case 7:  // square outline
      return std::abs(std::max(ax, ay) - 0.8 * s) - 0.6 * t;
    case 8: {  // two dots
      const double d1 = std::hypot(dx - 0.6 * s, dy), d2 = std::hypot(dx + 0.6 * s, dy);
      return std::min(d1, d2) - 0.4 * s;
    }
    default:  // triangle, apex up
      return std::max(dy - 0.8 * s, 0.87 * (ax - (dy + s) / 1.8));
  }
}

}  // namespace

std::vector<int> balanced_labels(std::int64_t n, int num_classes, std::uint64_t seed) {
  if (num_classes < 1) throw std::invalid_argument("balanced_labels: num_classes must be positive");
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % num_classes);
  Rng rng(mix_seed(seed, 0x1abe1));
  rng.shuffle(std::span<int>(labels));
  return labels;
}

LabeledImageSet synth_glyphs(std::span<const int> labels, int num_classes, std::uint64_t seed) {
  const auto n = static_cast<std::int64_t>(labels.size());
  const auto side = kImageSide;
  std::vector<float> pixels(static_cast<std::size_t>(n * side * side));
  for (std::int64_t i = 0; i < n; ++i) {
    Rng rng(mix_seed(mix_seed(seed, 0x61f), static_cast<std::uint64_t>(i)));
    const int k = labels[i];
    const int shape = k % kGlyphShapes;
    const double scale = 1.0 + 0.35 * (k / kGlyphShapes);
    const double cx = (side - 1) / 2.0 + rng.uniform(-2.0, 2.0);
    const double cy = (side - 1) / 2.0 + rng.uniform(-2.0, 2.0);
    const double s = 7.0 * scale * rng.uniform(0.8, 1.2);
    const double t = 2.0 * rng.uniform(0.8, 1.2);
    const double intensity = rng.uniform(0.7, 1.0);
    float* dst = pixels.data() + i * side * side;
    for (std::int64_t y = 0; y < side; ++y)
      for (std::int64_t x = 0; x < side; ++x) {
        const double d = glyph_distance(shape, x - cx, y - cy, s, t);
        dst[y * side + x] = static_cast<float>(intensity * std::clamp(0.5 - d, 0.0, 1.0));
      }
  }
  LabeledImageSet set;
  set.images = nd::Array<float>({n, 1, side, side}, std::move(pixels));
  set.labels.assign(labels.begin(), labels.end());
  set.name = "glyphs";
  set.num_classes = num_classes;
  return set;
}

LabeledImageSet synth_gratings(std::span<const int> labels, int num_classes, std::uint64_t seed) {
  const auto n = static_cast<std::int64_t>(labels.size());
  const auto side = kImageSide;
  std::vector<float> pixels(static_cast<std::size_t>(n * side * side));
  for (std::int64_t i = 0; i < n; ++i) {
    Rng rng(mix_seed(mix_seed(seed, 0x97a), static_cast<std::uint64_t>(i)));
    const int k = labels[i];
    const double theta = std::numbers::pi * k / num_classes;
    const double freq = (3.0 + 2.0 * (k % 2)) / static_cast<double>(side);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double amplitude = 0.5 * rng.uniform(0.8, 1.0);
    const double ct = std::cos(theta), st = std::sin(theta);
    float* dst = pixels.data() + i * side * side;
    for (std::int64_t y = 0; y < side; ++y)
      for (std::int64_t x = 0; x < side; ++x) {
        const double v = 0.5 + amplitude * std::sin(2.0 * std::numbers::pi * freq * (x * ct + y * st) + phase);
        dst[y * side + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
  }
  LabeledImageSet set;
  set.images = nd::Array<float>({n, 1, side, side}, std::move(pixels));
  set.labels.assign(labels.begin(), labels.end());
  set.name = "gratings";
  set.num_classes = num_classes;
  return set;
}

PairedSet synth_multimodal(std::int64_t n, int num_classes, std::uint64_t seed) {
  if (n < num_classes) throw std::invalid_argument("synth_multimodal: n must be at least num_classes");
  const auto labels = balanced_labels(n, num_classes, seed);
  PairedSet out;
  out.kind = PairKind::synthetic;
  out.view1 = synth_glyphs(labels, num_classes, seed);
  out.view2 = synth_gratings(labels, num_classes, seed);
  return out;
}

PairedSet synth_two_view(std::int64_t n, int num_classes, std::uint64_t seed) {
  if (n < num_classes) throw std::invalid_argument("synth_two_view: n must be at least num_classes");
  const auto labels = balanced_labels(n, num_classes, seed);
  return make_two_view(synth_glyphs(labels, num_classes, seed), mix_seed(seed, 2));
}

}  // namespace domino::data
