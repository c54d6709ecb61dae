#include "domino/ndgrad/array.hpp"

#include <algorithm>
#include <sstream>

namespace domino::nd {

std::int64_t numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

template <typename T>
Array<T>::Array(Shape shape, Buffer<T> values, bool requires_grad)
    : impl_(std::make_shared<Impl>()) {
  for (auto d : shape) {
    if (d <= 0) throw ShapeError("Array: non-positive extent in shape " + to_string(shape));
  }
  if (numel(shape) != static_cast<std::int64_t>(values.size())) {
    throw ShapeError("Array: shape " + to_string(shape) + " does not match " +
                     std::to_string(values.size()) + " values");
  }
  impl_->shape = std::move(shape);
  impl_->values = std::move(values);
  impl_->requires_grad = requires_grad;
}

template <typename T>
Array<T>::Array(Shape shape, const std::vector<T>& values, bool requires_grad)
    : Array(std::move(shape), Buffer<T>(values.begin(), values.end()), requires_grad) {}

template <typename T>
Array<T> Array<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T(0), requires_grad);
}

template <typename T>
Array<T> Array<T>::full(Shape shape, T value, bool requires_grad) {
  auto n = numel(shape);
  return Array(std::move(shape), Buffer<T>(static_cast<std::size_t>(n), value), requires_grad);
}

template <typename T>
Array<T> Array<T>::scalar(T value, bool requires_grad) {
  return Array(Shape{}, Buffer<T>{value}, requires_grad);
}

template <typename T>
const typename Array<T>::Impl& Array<T>::impl() const {
  if (!impl_) throw std::logic_error("Array: use of undefined array");
  return *impl_;
}

template <typename T>
typename Array<T>::Impl& Array<T>::impl() {
  if (!impl_) throw std::logic_error("Array: use of undefined array");
  return *impl_;
}

template <typename T>
typename Array<T>::Impl& Array<T>::shared_impl() const {
  if (!impl_) throw std::logic_error("Array: use of undefined array");
  return *impl_;
}

template <typename T>
const Shape& Array<T>::shape() const {
  return impl().shape;
}

template <typename T>
std::int64_t Array<T>::dim(int axis) const {
  const auto& s = shape();
  if (axis < 0) axis += static_cast<int>(s.size());
  if (axis < 0 || axis >= static_cast<int>(s.size())) {
    throw ShapeError("Array::dim: axis out of range for shape " + to_string(s));
  }
  return s[static_cast<std::size_t>(axis)];
}

template <typename T>
std::int64_t Array<T>::size() const {
  return static_cast<std::int64_t>(impl().values.size());
}

template <typename T>
std::span<const T> Array<T>::values() const {
  return impl().values;
}

template <typename T>
std::span<T> Array<T>::mutable_values() {
  return impl().values;
}

template <typename T>
T Array<T>::item() const {
  if (size() != 1) throw ShapeError("Array::item: array of shape " + to_string(shape()) + " is not a scalar");
  return impl().values[0];
}

template <typename T>
bool Array<T>::requires_grad() const {
  return impl().requires_grad;
}

template <typename T>
void Array<T>::set_requires_grad(bool flag) {
  impl().requires_grad = flag;
}

template <typename T>
bool Array<T>::has_grad() const {
  return !impl().grad.empty();
}

template <typename T>
std::span<const T> Array<T>::grad() const {
  return impl().grad;
}

template <typename T>
std::span<T> Array<T>::mutable_grad() const {
  auto& im = shared_impl();
  if (im.grad.empty()) im.grad.assign(im.values.size(), T(0));
  return im.grad;
}

template <typename T>
void Array<T>::zero_grad() const {
  auto& im = shared_impl();
  std::fill(im.grad.begin(), im.grad.end(), T(0));
}

template <typename T>
void Array<T>::accumulate_grad(std::span<const T> delta) const {
  auto g = mutable_grad();
  if (delta.size() != g.size()) throw ShapeError("Array::accumulate_grad: size mismatch");
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += delta[i];
}

template <typename T>
Array<T> Array<T>::clone() const {
  const auto& im = impl();
  return Array(im.shape, im.values, false);
}

template class Array<float>;
template class Array<double>;

}  // namespace domino::nd
