#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "domino/ndgrad/array.hpp"

namespace domino::nd {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

/// Named-array container ("NDCK"): magic, u32 version, u32 count, then per
/// array u16 name length, UTF-8 name, u8 dtype, u8 rank, u32 dims and the
/// little-endian payload. Entry order is preserved, so load -> save is
/// byte-identical.
class Checkpoint {
 public:
  static constexpr std::uint32_t kVersion = 1;

  struct Entry {
    std::string name;
    Shape shape;
    std::variant<std::vector<float>, std::vector<double>> payload;

    DType dtype() const { return payload.index() == 0 ? DType::f32 : DType::f64; }
  };

  template <typename T>
  void put(const std::string& name, const Array<T>& array);
  void put_raw(Entry entry);

  bool contains(const std::string& name) const;
  const Entry& entry(const std::string& name) const;
  /// Converts to T when the stored dtype differs.
  template <typename T>
  Array<T> get(const std::string& name) const;

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  std::vector<std::uint8_t> to_bytes() const;
  static Checkpoint from_bytes(const std::vector<std::uint8_t>& bytes);

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

 private:
  std::optional<std::size_t> find(const std::string& name) const;
  std::vector<Entry> entries_;
};

}  // namespace domino::nd
