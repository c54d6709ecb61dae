#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <new>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace domino::nd {

using Shape = std::vector<std::int64_t>;

std::int64_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// Raised for invalid shapes or op arguments; the message names the op.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Allocates on 64-byte boundaries. Vectorized kernels peel a scalar
/// prefix up to the first aligned element, so a fixed alignment makes their
/// results depend on the shape alone and runs repeat bit for bit.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlignment{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlignment)); }
  void deallocate(T* p, std::size_t n) noexcept { ::operator delete(p, n * sizeof(T), kAlignment); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
};

template <typename T>
using Buffer = std::vector<T, AlignedAllocator<T>>;

/// Dense row-major array with an optional gradient buffer.
///
/// Array is a shared handle: copies alias the same storage, which is how the
/// tape and the model refer to one parameter. Values are treated as
/// immutable once an op has consumed them; only optimizers and initializers
/// write through mutable_values().
template <typename T>
class Array {
 public:
  using value_type = T;

  Array() = default;
  Array(Shape shape, Buffer<T> values, bool requires_grad = false);
  /// Copies into aligned storage.
  Array(Shape shape, const std::vector<T>& values, bool requires_grad = false);

  static Array zeros(Shape shape, bool requires_grad = false);
  static Array full(Shape shape, T value, bool requires_grad = false);
  static Array scalar(T value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::int64_t dim(int axis) const;
  int rank() const { return static_cast<int>(shape().size()); }
  std::int64_t size() const;

  std::span<const T> values() const;
  std::span<T> mutable_values();
  T item() const;

  bool requires_grad() const;
  void set_requires_grad(bool flag);

  bool has_grad() const;
  std::span<const T> grad() const;
  // Gradient buffers belong to the shared storage, so handles to const
  // arrays (e.g. captured inputs of a backward closure) may write them.
  /// Allocates a zero gradient on first use.
  std::span<T> mutable_grad() const;
  void zero_grad() const;
  void accumulate_grad(std::span<const T> delta) const;

  /// Detached deep copy with requires_grad cleared.
  Array clone() const;

  bool same_storage(const Array& other) const { return impl_ == other.impl_; }

 private:
  struct Impl {
    Shape shape;
    Buffer<T> values;
    Buffer<T> grad;
    bool requires_grad = false;
  };
  const Impl& impl() const;
  Impl& impl();
  Impl& shared_impl() const;

  std::shared_ptr<Impl> impl_;
};

extern template class Array<float>;
extern template class Array<double>;

/// Detached copy converted to another precision.
template <typename To, typename From>
Array<To> cast(const Array<From>& a) {
  auto v = a.values();
  return Array<To>(a.shape(), Buffer<To>(v.begin(), v.end()));
}

}  // namespace domino::nd
