#include "domino/ndgrad/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace domino::nd {

namespace {

constexpr char kMagic[4] = {'N', 'D', 'C', 'K'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <typename U>
  void le(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& in) : in_(in) {}
  void need(std::size_t n) const {
    if (pos_ + n > in_.size()) {
      throw FormatError("NDCK: truncated payload at byte " + std::to_string(pos_) + " (need " + std::to_string(n) +
                        " more)");
    }
  }
  template <typename U>
  U le() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(in_[pos_ + i]) << (8 * i));
    pos_ += sizeof(U);
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }
  std::size_t pos() const { return pos_; }

 private:
  const std::vector<std::uint8_t>& in_;
  std::size_t pos_ = 0;
};

}  // namespace

template <typename T>
void Checkpoint::put(const std::string& name, const Array<T>& array) {
  Entry e;
  e.name = name;
  e.shape = array.shape();
  e.payload = std::vector<T>(array.values().begin(), array.values().end());
  put_raw(std::move(e));
}

void Checkpoint::put_raw(Entry entry) {
  if (entry.name.size() > 0xFFFF) throw FormatError("NDCK: name too long: " + entry.name.substr(0, 32) + "...");
  if (entry.shape.size() > 0xFF) throw FormatError("NDCK: rank too large for " + entry.name);
  if (auto i = find(entry.name)) {
    entries_[*i] = std::move(entry);
  } else {
    entries_.push_back(std::move(entry));
  }
}

std::optional<std::size_t> Checkpoint::find(const std::string& name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].name == name) return i;
  return std::nullopt;
}

bool Checkpoint::contains(const std::string& name) const { return find(name).has_value(); }

const Checkpoint::Entry& Checkpoint::entry(const std::string& name) const {
  auto i = find(name);
  if (!i) throw FormatError("NDCK: no array named '" + name + "'");
  return entries_[*i];
}

template <typename T>
Array<T> Checkpoint::get(const std::string& name) const {
  const auto& e = entry(name);
  return std::visit(
      [&](const auto& data) {
        std::vector<T> v(data.begin(), data.end());
        return Array<T>(e.shape, std::move(v));
      },
      e.payload);
}

std::vector<std::uint8_t> Checkpoint::to_bytes() const {
  Writer w;
  w.bytes(kMagic, 4);
  w.le<std::uint32_t>(kVersion);
  w.le<std::uint32_t>(static_cast<std::uint32_t>(entries_.size()));
  for (const auto& e : entries_) {
    w.le<std::uint16_t>(static_cast<std::uint16_t>(e.name.size()));
    w.bytes(e.name.data(), e.name.size());
    w.le<std::uint8_t>(static_cast<std::uint8_t>(e.dtype()));
    w.le<std::uint8_t>(static_cast<std::uint8_t>(e.shape.size()));
    for (auto d : e.shape) w.le<std::uint32_t>(static_cast<std::uint32_t>(d));
    if (const auto* f = std::get_if<std::vector<float>>(&e.payload)) {
      for (float v : *f) w.le<std::uint32_t>(std::bit_cast<std::uint32_t>(v));
    } else {
      for (double v : std::get<std::vector<double>>(e.payload)) w.le<std::uint64_t>(std::bit_cast<std::uint64_t>(v));
    }
  }
  return w.take();
}

Checkpoint Checkpoint::from_bytes(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  r.need(4);
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("NDCK: bad magic");
  r.str(4);
  const auto version = r.le<std::uint32_t>();
  if (version != kVersion) throw FormatError("NDCK: unsupported version " + std::to_string(version));
  const auto count = r.le<std::uint32_t>();
  Checkpoint ck;
  for (std::uint32_t i = 0; i < count; ++i) {
    Entry e;
    const auto name_len = r.le<std::uint16_t>();
    e.name = r.str(name_len);
    const auto dtype = r.le<std::uint8_t>();
    const auto rank = r.le<std::uint8_t>();
    std::int64_t n = 1;
    for (std::uint8_t d = 0; d < rank; ++d) {
      const auto extent = r.le<std::uint32_t>();
      if (extent == 0) throw FormatError("NDCK: zero extent in '" + e.name + "'");
      e.shape.push_back(extent);
      n *= extent;
    }
    if (dtype == static_cast<std::uint8_t>(DType::f32)) {
      r.need(static_cast<std::size_t>(n) * 4);
      std::vector<float> v(static_cast<std::size_t>(n));
      for (auto& x : v) x = std::bit_cast<float>(r.le<std::uint32_t>());
      e.payload = std::move(v);
    } else if (dtype == static_cast<std::uint8_t>(DType::f64)) {
      r.need(static_cast<std::size_t>(n) * 8);
      std::vector<double> v(static_cast<std::size_t>(n));
      for (auto& x : v) x = std::bit_cast<double>(r.le<std::uint64_t>());
      e.payload = std::move(v);
    } else {
      throw FormatError("NDCK: unknown dtype " + std::to_string(dtype) + " for '" + e.name + "'");
    }
    ck.entries_.push_back(std::move(e));
  }
  if (!r.done()) throw FormatError("NDCK: trailing bytes after " + std::to_string(r.pos()));
  return ck;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto bytes = to_bytes();
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_bytes(bytes);
}

template void Checkpoint::put<float>(const std::string&, const Array<float>&);
template void Checkpoint::put<double>(const std::string&, const Array<double>&);
template Array<float> Checkpoint::get<float>(const std::string&) const;
template Array<double> Checkpoint::get<double>(const std::string&) const;

}  // namespace domino::nd
