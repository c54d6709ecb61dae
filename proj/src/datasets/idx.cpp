#include <cstdio>
#include <fstream>
#include <iterator>

#include "domino/datasets.hpp"

namespace domino::data {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const std::vector<std::uint8_t>& b, std::size_t off, const std::filesystem::path& path) {
  if (off + 4 > b.size()) throw nd::FormatError("IDX: truncated header in " + path.string());
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) | (std::uint32_t{b[off + 2]} << 8) |
         std::uint32_t{b[off + 3]};
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::string magic_hex(std::uint32_t m) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08X", m);
  return buf;
}

}  // namespace

LabeledImageSet load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                         std::int64_t limit) {
  const auto ib = read_file(images_path);
  const auto lb = read_file(labels_path);

  const auto im = be32(ib, 0, images_path);
  if (im != kImageMagic) {
    throw nd::FormatError("IDX: " + images_path.string() + " has magic " + magic_hex(im) + ", expected image magic " +
                          magic_hex(kImageMagic));
  }
  const auto lm = be32(lb, 0, labels_path);
  if (lm != kLabelMagic) {
    throw nd::FormatError("IDX: " + labels_path.string() + " has magic " + magic_hex(lm) + ", expected label magic " +
                          magic_hex(kLabelMagic));
  }
  std::int64_t n = be32(ib, 4, images_path);
  const std::int64_t rows = be32(ib, 8, images_path);
  const std::int64_t cols = be32(ib, 12, images_path);
  const std::int64_t n_labels = be32(lb, 4, labels_path);
  if (n != n_labels) {
    throw nd::FormatError("IDX: " + std::to_string(n) + " images but " + std::to_string(n_labels) + " labels");
  }
  if (n < 1 || rows < 1 || cols < 1) throw nd::FormatError("IDX: empty dataset in " + images_path.string());
  if (static_cast<std::int64_t>(ib.size()) < 16 + n * rows * cols) {
    throw nd::FormatError("IDX: truncated image payload in " + images_path.string() + " (" +
                          std::to_string(ib.size() - 16) + " of " + std::to_string(n * rows * cols) + " bytes)");
  }
  if (static_cast<std::int64_t>(lb.size()) < 8 + n) {
    throw nd::FormatError("IDX: truncated label payload in " + labels_path.string());
  }
  if (limit > 0 && limit < n) n = limit;

  const auto side = kImageSide;
  std::vector<float> pixels(static_cast<std::size_t>(n * side * side));
  std::vector<float> src(static_cast<std::size_t>(rows * cols));
  std::vector<int> labels(static_cast<std::size_t>(n));
  int max_label = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    const auto* p = ib.data() + 16 + i * rows * cols;
    for (std::int64_t j = 0; j < rows * cols; ++j) src[j] = static_cast<float>(p[j]) / 255.0f;
    auto resized = (rows == side && cols == side) ? src : resize_bilinear(src, 1, rows, cols, side, side);
    std::copy(resized.begin(), resized.end(), pixels.begin() + i * side * side);
    labels[i] = lb[8 + i];
    max_label = std::max(max_label, labels[i]);
  }
  LabeledImageSet set;
  set.images = nd::Array<float>({n, 1, side, side}, std::move(pixels));
  set.labels = std::move(labels);
  set.name = images_path.stem().string();
  set.num_classes = max_label + 1;
  return set;
}

void write_idx_images(const std::filesystem::path& path, std::int64_t rows, std::int64_t cols,
                      std::span<const std::uint8_t> pixels) {
  const auto n = static_cast<std::int64_t>(pixels.size()) / (rows * cols);
  std::vector<std::uint8_t> out;
  put_be32(out, kImageMagic);
  put_be32(out, static_cast<std::uint32_t>(n));
  put_be32(out, static_cast<std::uint32_t>(rows));
  put_be32(out, static_cast<std::uint32_t>(cols));
  out.insert(out.end(), pixels.begin(), pixels.end());
  write_file(path, out);
}

void write_idx_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels) {
  std::vector<std::uint8_t> out;
  put_be32(out, kLabelMagic);
  put_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.insert(out.end(), labels.begin(), labels.end());
  write_file(path, out);
}

}  // namespace domino::data
