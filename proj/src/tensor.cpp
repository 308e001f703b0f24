#include "vessel/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include <fmt/ranges.h>

namespace vessel {

namespace {
std::atomic<std::uint64_t> next_tensor_id{1};
}

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) { return fmt::format("[{}]", fmt::join(shape, ",")); }

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> data, bool requires_grad) {
  for (std::size_t e : shape) {
    if (e == 0) throw ShapeError(fmt::format("tensor extents must be positive, got {}", shape_str(shape)));
  }
  if (shape_numel(shape) != data.size()) {
    throw ShapeError(fmt::format("shape {} holds {} values but {} were given", shape_str(shape),
                                 shape_numel(shape), data.size()));
  }
  node_ = std::make_shared<Node>();
  node_->shape = std::move(shape);
  node_->data = std::move(data);
  node_->requires_grad = requires_grad;
  node_->id = next_tensor_id.fetch_add(1, std::memory_order_relaxed);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T(0), requires_grad);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::full(Shape shape, T value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return BasicTensor(std::move(shape), std::vector<T>(n, value), requires_grad);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::scalar(T value, bool requires_grad) {
  return BasicTensor(Shape{}, std::vector<T>{value}, requires_grad);
}

template <typename T>
const typename BasicTensor<T>::Node& BasicTensor<T>::node() const {
  if (!node_) throw AutodiffError("use of an undefined tensor");
  return *node_;
}

template <typename T>
const Shape& BasicTensor<T>::shape() const {
  return node().shape;
}

template <typename T>
std::size_t BasicTensor<T>::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) throw ShapeError(fmt::format("axis {} out of range for shape {}", axis, shape_str(s)));
  return s[axis];
}

template <typename T>
std::size_t BasicTensor<T>::numel() const {
  return node().data.size();
}

template <typename T>
std::span<const T> BasicTensor<T>::data() const {
  return node().data;
}

template <typename T>
std::span<T> BasicTensor<T>::mutable_data() {
  node();
  return node_->data;
}

template <typename T>
T BasicTensor<T>::item() const {
  if (numel() != 1) throw ShapeError(fmt::format("item() on tensor of shape {}", shape_str(shape())));
  return node().data[0];
}

template <typename T>
bool BasicTensor<T>::requires_grad() const {
  return node().requires_grad;
}

template <typename T>
void BasicTensor<T>::set_requires_grad(bool value) {
  node();
  node_->requires_grad = value;
}

template <typename T>
bool BasicTensor<T>::has_grad() const {
  return !node().grad.empty();
}

template <typename T>
std::span<const T> BasicTensor<T>::grad() const {
  return node().grad;
}

template <typename T>
std::span<T> BasicTensor<T>::grad_buffer() const {
  node();
  if (node_->grad.empty()) node_->grad.assign(node_->data.size(), T(0));
  return node_->grad;
}

template <typename T>
void BasicTensor<T>::zero_grad() {
  node();
  std::fill(node_->grad.begin(), node_->grad.end(), T(0));
}

template <typename T>
std::uint64_t BasicTensor<T>::id() const {
  return node().id;
}

template <typename T>
BasicTensor<T> BasicTensor<T>::clone() const {
  return BasicTensor(shape(), node().data);
}

template <typename T>
Tape<T>*& Tape<T>::active_slot() {
  thread_local Tape<T>* slot = nullptr;
  return slot;
}

template <typename T>
Tape<T>* Tape<T>::active() {
  return active_slot();
}

template <typename T>
Tape<T>*& NoGradScope<T>::slot() {
  return Tape<T>::active_slot();
}

template <typename T>
void Tape<T>::record(std::string_view op, std::vector<std::uint64_t> input_ids, BasicTensor<T> output,
                     std::function<void()> backward) {
  if (consumed_) throw AutodiffError(fmt::format("op '{}' recorded on a tape that already ran backward", op));
  output.set_requires_grad(true);
  const auto out_id = output.id();
  nodes_.push_back(Node{op, std::move(input_ids), out_id, std::move(output), std::move(backward)});
}

template <typename T>
void Tape<T>::backward(const BasicTensor<T>& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw AutodiffError(fmt::format("backward needs a scalar loss, got shape {}",
                                    loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  }
  if (consumed_) throw AutodiffError("backward already ran on this tape; clear() it first");
  const auto it = std::find_if(nodes_.rbegin(), nodes_.rend(),
                               [&](const Node& n) { return n.output_id == loss.id(); });
  if (it == nodes_.rend()) throw AutodiffError("loss was not produced on this tape");

  loss.grad_buffer()[0] += T(1);
  for (auto node = it; node != nodes_.rend(); ++node) {
    if (!node->output.has_grad()) continue;
    node->backward();
  }
  consumed_ = true;
}

template <typename T>
void Tape<T>::clear() {
  nodes_.clear();
  consumed_ = false;
}

namespace detail {

template <typename T>
void check_finite([[maybe_unused]] std::string_view op, [[maybe_unused]] std::span<const T> values) {
#ifndef NDEBUG
  for (T v : values) {
    if (!std::isfinite(v)) throw NumericError(fmt::format("op '{}' produced a non-finite value", op));
  }
#endif
}

template void check_finite<float>(std::string_view, std::span<const float>);
template void check_finite<double>(std::string_view, std::span<const double>);

}  // namespace detail

template class BasicTensor<float>;
template class BasicTensor<double>;
template class Tape<float>;
template class Tape<double>;
template class NoGradScope<float>;
template class NoGradScope<double>;

}  // namespace vessel
