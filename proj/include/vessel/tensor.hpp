#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vessel {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class AutodiffError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Dense row-major tensor. Copies share storage; data is treated as immutable
// once an op has consumed it, only grad buffers are written during backward.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  BasicTensor(Shape shape, std::vector<T> data, bool requires_grad = false);

  static BasicTensor zeros(Shape shape, bool requires_grad = false);
  static BasicTensor full(Shape shape, T value, bool requires_grad = false);
  static BasicTensor scalar(T value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const T> data() const;
  // For parameters and freshly built outputs only.
  std::span<T> mutable_data();
  T item() const;

  bool requires_grad() const;
  void set_requires_grad(bool value);

  bool has_grad() const;
  std::span<const T> grad() const;
  // Allocates a zero-filled buffer on first use.
  std::span<T> grad_buffer() const;
  void zero_grad();

  std::uint64_t id() const;

  // Fresh storage, no grad, requires_grad off.
  BasicTensor clone() const;

  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> out(numel());
    auto src = data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<U>(src[i]);
    return BasicTensor<U>(shape(), std::move(out));
  }

 private:
  struct Node {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;
    bool requires_grad = false;
    std::uint64_t id = 0;
  };
  std::shared_ptr<Node> node_;

  const Node& node() const;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

// Ordered record of differentiable ops. Ops append to the tape that is active
// on the calling thread (see TapeScope); nothing is recorded without one.
template <typename T>
class Tape {
 public:
  struct Node {
    std::string_view op;
    std::vector<std::uint64_t> input_ids;
    std::uint64_t output_id = 0;
    BasicTensor<T> output;
    std::function<void()> backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(std::string_view op, std::vector<std::uint64_t> input_ids, BasicTensor<T> output,
              std::function<void()> backward);

  // Seeds d(loss)/d(loss) = 1 and runs every recorded node up to the loss
  // exactly once, newest first.
  void backward(const BasicTensor<T>& loss);

  void clear();
  std::size_t size() const { return nodes_.size(); }
  const std::vector<Node>& nodes() const { return nodes_; }
  bool consumed() const { return consumed_; }

  static Tape* active();

 private:
  template <typename>
  friend class TapeScope;
  template <typename>
  friend class NoGradScope;

  std::vector<Node> nodes_;
  bool consumed_ = false;

  static Tape*& active_slot();
};

template <typename T>
class TapeScope {
 public:
  explicit TapeScope(Tape<T>& tape) : previous_(Tape<T>::active_slot()) { Tape<T>::active_slot() = &tape; }
  ~TapeScope() { Tape<T>::active_slot() = previous_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape<T>* previous_;
};

// Suspends recording, e.g. for finite-difference probes inside a taped region.
template <typename T>
class NoGradScope {
 public:
  NoGradScope() : previous_(Tape<T>::active()) { slot() = nullptr; }
  ~NoGradScope() { slot() = previous_; }
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape<T>* previous_;
  static Tape<T>*& slot();
};

namespace detail {

// Returns the active tape when any input needs a gradient, else nullptr.
template <typename T>
Tape<T>* recording_tape(std::initializer_list<const BasicTensor<T>*> inputs) {
  Tape<T>* tape = Tape<T>::active();
  if (tape == nullptr) return nullptr;
  for (const auto* t : inputs) {
    if (t != nullptr && t->defined() && t->requires_grad()) return tape;
  }
  return nullptr;
}

template <typename T>
Tape<T>* recording_tape(std::span<const BasicTensor<T>> inputs) {
  Tape<T>* tape = Tape<T>::active();
  if (tape == nullptr) return nullptr;
  for (const auto& t : inputs) {
    if (t.defined() && t.requires_grad()) return tape;
  }
  return nullptr;
}

// Debug builds verify that finite inputs give finite outputs.
template <typename T>
void check_finite(std::string_view op, std::span<const T> values);

}  // namespace detail

}  // namespace vessel
