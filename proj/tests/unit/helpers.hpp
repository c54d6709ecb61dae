#pragma once

#include <filesystem>
#include <string>

#include "domino/ndgrad/array.hpp"
#include "domino/rng.hpp"

namespace testutil {

using domino::nd::Array;
using domino::nd::Shape;

template <typename T = double>
Array<T> normal(Shape shape, domino::Rng& rng, double scale = 1.0, bool requires_grad = false) {
  auto a = Array<T>::zeros(std::move(shape), requires_grad);
  for (auto& v : a.mutable_values()) v = static_cast<T>(scale * rng.normal());
  return a;
}

template <typename T = double>
Array<T> from(Shape shape, std::initializer_list<T> values, bool requires_grad = false) {
  return Array<T>(std::move(shape), std::vector<T>(values), requires_grad);
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("domino_test_" + tag + "_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testutil
