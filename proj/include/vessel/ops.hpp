#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "vessel/tensor.hpp"

namespace vessel {

template <typename T>
struct Conv2dParams {
  BasicTensor<T> weight;  // [out_ch, in_ch, kh, kw]
  BasicTensor<T> bias;    // [out_ch]; may be undefined
  std::size_t stride = 1;
  std::size_t pad_h = 0;
  std::size_t pad_w = 0;
};

template <typename T>
struct GroupNormParams {
  std::size_t groups = 16;
  T epsilon = T(1e-5);
  BasicTensor<T> gamma;  // [C], init 1
  BasicTensor<T> beta;   // [C], init 0

  static GroupNormParams make(std::size_t channels, std::size_t groups = 16, T epsilon = T(1e-5));
};

// Elementwise, same shape.
template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> div(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& x, T factor);
template <typename T>
BasicTensor<T> add_scalar(const BasicTensor<T>& x, T value);
template <typename T>
BasicTensor<T> log(const BasicTensor<T>& x);
// Gradient passes where lo <= x <= hi.
template <typename T>
BasicTensor<T> clamp(const BasicTensor<T>& x, T lo, T hi);

// Scalar reductions, accumulated in double.
template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& x);

// Subgradient 0 at x == 0.
template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const Conv2dParams<T>& p);

template <typename T>
BasicTensor<T> max_pool2d(const BasicTensor<T>& x, std::size_t window, std::size_t stride, std::size_t pad = 0);
template <typename T>
BasicTensor<T> avg_pool2d(const BasicTensor<T>& x, std::size_t window, std::size_t stride, std::size_t pad = 0);

// Nearest neighbour: each pixel becomes a 2x2 block.
template <typename T>
BasicTensor<T> upsample2x(const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> concat_channels(std::span<const BasicTensor<T>> xs);
template <typename T>
BasicTensor<T> concat_channels(std::initializer_list<BasicTensor<T>> xs) {
  std::vector<BasicTensor<T>> v(xs);
  return concat_channels<T>(std::span<const BasicTensor<T>>(v));
}

// Inverted dropout; identity when !training or rate == 0. The keep mask is a
// pure function of (seed, element index).
template <typename T>
BasicTensor<T> dropout(const BasicTensor<T>& x, double rate, bool training, std::uint64_t seed);

template <typename T>
BasicTensor<T> group_norm(const BasicTensor<T>& x, const GroupNormParams<T>& p);

// Untaped data movement along the batch axis.
template <typename T>
BasicTensor<T> stack_batch(std::span<const BasicTensor<T>> items);
template <typename T>
BasicTensor<T> select_batch(const BasicTensor<T>& x, std::size_t index);

}  // namespace vessel
