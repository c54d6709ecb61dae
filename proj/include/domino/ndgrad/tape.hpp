#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "domino/ndgrad/array.hpp"

namespace domino::nd {

/// Records differentiable ops in execution order, which is a topological
/// order of the graph. A tape belongs to one thread.
template <typename T>
class Tape {
 public:
  /// Receives the gradient of the entry's output and accumulates into inputs.
  using BackwardFn = std::function<void(std::span<const T> grad_out)>;

  struct Entry {
    std::string op;
    std::vector<Array<T>> inputs;
    Array<T> output;
    BackwardFn backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  bool recording() const { return recording_; }
  void set_recording(bool on) { recording_ = on; }

  /// True when `inputs` would make an op's output part of the graph.
  bool wants(std::initializer_list<const Array<T>*> inputs) const;

  /// Appends an entry and marks `output` as requiring grad.
  void record(std::string op, std::vector<Array<T>> inputs, Array<T>& output, BackwardFn fn);

  std::size_t size() const { return entries_.size(); }
  const Entry& entry(std::size_t i) const { return entries_.at(i); }
  void clear() { entries_.clear(); }

  /// Reverse sweep from a scalar root. Leaf gradients accumulate, so call
  /// zero_grad on parameters between steps.
  void backward(const Array<T>& root);

 private:
  std::vector<Entry> entries_;
  bool recording_ = true;
};

/// Disables recording for the lifetime of the guard.
template <typename T>
class NoGradGuard {
 public:
  explicit NoGradGuard(Tape<T>& tape) : tape_(tape), previous_(tape.recording()) { tape.set_recording(false); }
  ~NoGradGuard() { tape_.set_recording(previous_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  Tape<T>& tape_;
  bool previous_;
};

template <typename T>
void backward(Tape<T>& tape, const Array<T>& root) {
  tape.backward(root);
}

extern template class Tape<float>;
extern template class Tape<double>;

/// Keeps freed activation buffers in the heap instead of returning them to
/// the OS, so each training step reuses pages rather than faulting in new
/// ones. Call once at startup; a no-op off glibc.
void keep_freed_memory();

}  // namespace domino::nd
