#include "domino/ndgrad/tape.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace domino::nd {

template <typename T>
bool Tape<T>::wants(std::initializer_list<const Array<T>*> inputs) const {
  if (!recording_) return false;
  for (const auto* a : inputs) {
    if (a && a->defined() && a->requires_grad()) return true;
  }
  return false;
}

template <typename T>
void Tape<T>::record(std::string op, std::vector<Array<T>> inputs, Array<T>& output, BackwardFn fn) {
  output.set_requires_grad(true);
  entries_.push_back(Entry{std::move(op), std::move(inputs), output, std::move(fn)});
}

template <typename T>
void Tape<T>::backward(const Array<T>& root) {
  if (root.size() != 1) {
    throw ShapeError("backward: root must be a scalar, got shape " + to_string(root.shape()));
  }
  std::size_t end = entries_.size();
  while (end > 0 && !entries_[end - 1].output.same_storage(root)) --end;
  if (end == 0) throw std::invalid_argument("backward: root is not recorded on this tape");

  Array<T> seed = root;
  auto g = seed.mutable_grad();
  g[0] = T(1);
  for (std::size_t i = end; i-- > 0;) {
    auto& e = entries_[i];
    if (!e.output.has_grad()) continue;
    e.backward(e.output.grad());
  }
}

template class Tape<float>;
template class Tape<double>;

void keep_freed_memory() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_TOP_PAD, 64 << 20);
#endif
}

}  // namespace domino::nd
