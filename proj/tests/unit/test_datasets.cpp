#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>
#include <set>

#include "domino/datasets.hpp"
#include "domino/ndgrad/checkpoint.hpp"
#include "helpers.hpp"

using namespace domino;
using namespace domino::data;
using testutil::TempDir;

namespace {

void write_be32(std::ofstream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

// Hand-rolled IDX writer, independent of the library's.
void craft_idx(const std::filesystem::path& path, std::uint32_t magic, std::vector<std::uint32_t> dims,
               const std::vector<std::uint8_t>& payload) {
  std::ofstream out(path, std::ios::binary);
  write_be32(out, magic);
  for (auto d : dims) write_be32(out, d);
  out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
}

// FNV-1a over the float bit patterns.
std::uint64_t fingerprint(std::span<const float> v) {
  std::uint64_t h = 1469598103934665603ULL;
  for (float f : v) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    for (int k = 0; k < 4; ++k) {
      h ^= (bits >> (8 * k)) & 0xFF;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

LabeledImageSet single_image(std::vector<float> pixels, int label = 0) {
  LabeledImageSet s;
  s.images = nd::Array<float>({1, 1, 32, 32}, std::move(pixels));
  s.labels = {label};
  s.num_classes = 10;
  s.name = "one";
  return s;
}

std::vector<float> blob_image() {
  std::vector<float> img(32 * 32, 0.0f);
  for (int y = 8; y < 24; ++y)
    for (int x = 12; x < 20; ++x) img[y * 32 + x] = 0.25f + 0.02f * static_cast<float>(y - 8);
  return img;
}

Eigen::MatrixXd pixels(const LabeledImageSet& s) {
  const auto n = s.size();
  const auto p = s.images.size() / n;
  Eigen::MatrixXd m(n, p + 1);
  for (std::int64_t i = 0; i < n; ++i) {
    auto img = s.image(i);
    for (std::int64_t j = 0; j < p; ++j) m(i, j) = img[j];
    m(i, p) = 1.0;
  }
  return m;
}

}  // namespace

TEST_CASE("load_idx rescales and resizes a crafted file") {
  TempDir dir("idx");
  std::vector<std::uint8_t> px(2 * 4 * 4, 0);
  // A 2x2 block survives the 8x upscale at full intensity.
  for (int k : {5, 6, 9, 10}) px[k] = 255;
  px[16 + 3] = 128;
  craft_idx(dir / "img", 0x00000803, {2, 4, 4}, px);
  craft_idx(dir / "lab", 0x00000801, {2}, {3, 7});
  const auto set = load_idx(dir / "img", dir / "lab");
  CHECK(set.images.shape() == nd::Shape{2, 1, 32, 32});
  CHECK(set.labels == std::vector<int>{3, 7});
  const auto first = set.image(0);
  CHECK(*std::max_element(first.begin(), first.end()) == doctest::Approx(1.0f));
  set.validate();
}

TEST_CASE("load_idx rejects a wrong magic and a truncated payload") {
  TempDir dir("idx_bad");
  craft_idx(dir / "img", 0x00000803, {1, 4, 4}, std::vector<std::uint8_t>(16, 9));
  craft_idx(dir / "lab", 0x00000801, {1}, {1});
  craft_idx(dir / "lab_as_img", 0x00000803, {1}, {1});
  CHECK_THROWS_AS(load_idx(dir / "img", dir / "lab_as_img"), nd::FormatError);
  craft_idx(dir / "short", 0x00000803, {2, 4, 4}, std::vector<std::uint8_t>(20, 9));
  CHECK_THROWS_AS(load_idx(dir / "short", dir / "lab"), nd::FormatError);
}

TEST_CASE("library IDX writers round-trip through the reader") {
  TempDir dir("idx_rt");
  std::vector<std::uint8_t> px(3 * 32 * 32);
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<std::uint8_t>(i % 251);
  write_idx_images(dir / "i", 32, 32, px);
  write_idx_labels(dir / "l", std::vector<std::uint8_t>{0, 1, 2});
  const auto set = load_idx(dir / "i", dir / "l");
  CHECK(set.images.values()[7] == doctest::Approx(7.0f / 255.0f));
}

TEST_CASE("zero image gives view2 as rescaled pure noise") {
  const auto set = single_image(std::vector<float>(32 * 32, 0.0f));
  const auto pair = make_two_view(set, 3);
  const auto v2 = pair.view2.image(0);
  CHECK(*std::min_element(v2.begin(), v2.end()) == 0.0f);
  CHECK(*std::max_element(v2.begin(), v2.end()) == 1.0f);
  std::set<float> distinct(v2.begin(), v2.end());
  CHECK(distinct.size() > 500);
  const auto v1 = pair.view1.image(0);
  CHECK(std::all_of(v1.begin(), v1.end(), [](float v) { return v == 0.0f; }));
}

TEST_CASE("zero rotation leaves view1 equal to the input") {
  const auto img = blob_image();
  const auto pair = make_two_view(single_image(img), 5, {0.0, 1.0});
  const auto v1 = pair.view1.image(0);
  for (std::size_t i = 0; i < img.size(); ++i) CHECK(v1[i] == doctest::Approx(img[i]).epsilon(1e-6));
}

TEST_CASE("two-view output with a fixed seed is frozen") {
  // Frozen from a reference run; guards the corruption pipeline.
  const auto pair = make_two_view(single_image(blob_image(), 4), 7);
  CHECK(fingerprint(pair.view1.images.values()) == 4509212637630323499ULL);
  CHECK(fingerprint(pair.view2.images.values()) == 2472623013595184977ULL);
  CHECK(pair.view1.labels == std::vector<int>{4});
  CHECK(pair.view2.labels == std::vector<int>{4});
}

TEST_CASE("two-view pairs stay index aligned") {
  const auto pair = synth_two_view(60, 10, 1);
  pair.validate();
  CHECK(pair.view1.labels == pair.view2.labels);
  const auto batch = gather(pair, std::vector<std::int64_t>{5, 17, 3});
  CHECK(batch.labels == std::vector<int>{pair.view1.labels[5], pair.view1.labels[17], pair.view1.labels[3]});
  CHECK(std::equal(batch.x2.values().begin() + 1024, batch.x2.values().begin() + 2048, pair.view2.image(17).begin()));
}

TEST_CASE("synthetic data is balanced, bounded and deterministic") {
  const auto a = synth_multimodal(203, 10, 42);
  const auto b = synth_multimodal(203, 10, 42);
  a.validate();
  std::map<int, int> hist;
  for (int y : a.view1.labels) ++hist[y];
  CHECK(hist.size() == 10);
  for (const auto& [label, count] : hist) CHECK(std::abs(count - 20) <= 1);
  CHECK(std::memcmp(a.view1.images.values().data(), b.view1.images.values().data(), 203 * 1024 * 4) == 0);
  CHECK(std::memcmp(a.view2.images.values().data(), b.view2.images.values().data(), 203 * 1024 * 4) == 0);
  const auto c = synth_multimodal(203, 10, 43);
  CHECK(fingerprint(c.view1.images.values()) != fingerprint(a.view1.images.values()));
  CHECK_THROWS(synth_multimodal(5, 10, 0));
}

TEST_CASE("least-squares probe on raw glyph pixels exceeds 90 percent") {
  const auto train = synth_multimodal(2000, 10, 1).view1;
  const auto test = synth_multimodal(500, 10, 2).view1;
  const auto X = pixels(train);
  Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(train.size(), 10);
  for (std::int64_t i = 0; i < train.size(); ++i) Y(i, train.labels[i]) = 1.0;
  const Eigen::MatrixXd gram = X.transpose() * X + 1e-1 * Eigen::MatrixXd::Identity(X.cols(), X.cols());
  const Eigen::MatrixXd W = gram.ldlt().solve(X.transpose() * Y);
  const Eigen::MatrixXd scores = pixels(test) * W;
  int correct = 0;
  for (std::int64_t i = 0; i < test.size(); ++i) {
    Eigen::Index k;
    scores.row(i).maxCoeff(&k);
    correct += static_cast<int>(k) == test.labels[i];
  }
  CHECK(static_cast<double>(correct) / static_cast<double>(test.size()) > 0.9);
}

TEST_CASE("epoch sampler covers every sample once per epoch") {
  const EpochSampler sampler(130, 64, 9);
  CHECK(sampler.batches_per_epoch() == 3);
  for (std::int64_t e = 0; e < 3; ++e) {
    std::vector<std::int64_t> seen;
    for (const auto& b : sampler.epoch(e)) seen.insert(seen.end(), b.begin(), b.end());
    std::sort(seen.begin(), seen.end());
    REQUIRE(seen.size() == 130);
    for (std::int64_t i = 0; i < 130; ++i) CHECK(seen[i] == i);
  }
  CHECK(sampler.epoch(0) == sampler.epoch(0));
  CHECK(sampler.epoch(0) != sampler.epoch(1));
  // A trailing batch of one is dropped.
  const EpochSampler odd(129, 64, 9);
  CHECK(odd.batches_per_epoch() == 2);
  CHECK(odd.epoch(0).size() == 2);
}

TEST_CASE("two-domain pairing matches labels and resamples per epoch") {
  const auto a = synth_multimodal(100, 10, 1).view1;
  auto b = synth_multimodal(150, 10, 2).view2;
  const TwoDomainPairer pairer(a, b, 4);
  for (std::int64_t e = 0; e < 2; ++e) {
    const auto partners = pairer.partners(e);
    REQUIRE(static_cast<std::int64_t>(partners.size()) == a.size());
    for (std::int64_t k = 0; k < a.size(); ++k) CHECK(b.labels[partners[k]] == a.labels[k]);
  }
  CHECK(pairer.partners(0) == TwoDomainPairer(a, b, 4).partners(0));
  CHECK(pairer.partners(0) != pairer.partners(1));
  CHECK(pairer.partners(0) != TwoDomainPairer(a, b, 5).partners(0));

  std::int64_t emitted = 0;
  for (const auto& batch : pairer.batches(0, 32)) {
    CHECK(batch.pair_kind == PairKind::two_domain);
    emitted += batch.size();
  }
  CHECK(emitted == a.size());

  auto disjoint = b;
  for (auto& y : disjoint.labels) y = 10 + y % 2;
  disjoint.num_classes = 12;
  CHECK_THROWS_AS(TwoDomainPairer(a, disjoint, 0), std::invalid_argument);
}

TEST_CASE("image sets round-trip through the checkpoint container") {
  TempDir dir("sets");
  const auto splits = PairedSplits{synth_multimodal(20, 10, 1), synth_multimodal(10, 10, 2)};
  save_splits(splits, dir.path());
  const auto back = load_splits(dir.path());
  CHECK(back.train.view1.labels == splits.train.view1.labels);
  CHECK(fingerprint(back.holdout.view2.images.values()) == fingerprint(splits.holdout.view2.images.values()));
}
