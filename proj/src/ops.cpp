#include "vessel/ops.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "vessel/kernels.hpp"
#include "vessel/random.hpp"

namespace vessel {

namespace {

using index_t = std::ptrdiff_t;

constexpr std::size_t kParallelThreshold = 1 << 15;

template <typename T>
void require_same_shape(std::string_view op, const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(fmt::format("{}: shape mismatch {} vs {}", op, shape_str(a.shape()), shape_str(b.shape())));
  }
}

template <typename T>
void require_nchw(std::string_view op, const BasicTensor<T>& x) {
  if (x.rank() != 4) throw ShapeError(fmt::format("{}: expected NCHW input, got {}", op, shape_str(x.shape())));
}

template <typename T, typename F>
BasicTensor<T> map_unary(const BasicTensor<T>& x, F f) {
  std::vector<T> out(x.numel());
  auto in = x.data();
  const index_t n = static_cast<index_t>(out.size());
#pragma omp parallel for schedule(static) if (out.size() > kParallelThreshold)
  for (index_t i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = f(in[static_cast<std::size_t>(i)]);
  return BasicTensor<T>(x.shape(), std::move(out));
}

template <typename T>
void add_into(std::span<T> dst, std::span<const T> src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

template <typename T>
GroupNormParams<T> GroupNormParams<T>::make(std::size_t channels, std::size_t groups, T epsilon) {
  GroupNormParams p;
  p.groups = groups;
  p.epsilon = epsilon;
  p.gamma = BasicTensor<T>::full({channels}, T(1));
  p.beta = BasicTensor<T>::zeros({channels});
  return p;
}

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape("add", a, b);
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  BasicTensor<T> y(a.shape(), std::move(out));
  if (auto* tape = detail::recording_tape<T>({&a, &b})) {
    tape->record("add", {a.id(), b.id()}, y, [a, b, y] {
      if (a.requires_grad()) add_into(a.grad_buffer(), y.grad());
      if (b.requires_grad()) add_into(b.grad_buffer(), y.grad());
    });
  }
  return y;
}

template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape("sub", a, b);
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  BasicTensor<T> y(a.shape(), std::move(out));
  if (auto* tape = detail::recording_tape<T>({&a, &b})) {
    tape->record("sub", {a.id(), b.id()}, y, [a, b, y] {
      if (a.requires_grad()) add_into(a.grad_buffer(), y.grad());
      if (b.requires_grad()) {
        auto gb = b.grad_buffer();
        auto gy = y.grad();
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= gy[i];
      }
    });
  }
  return y;
}

template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape("mul", a, b);
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  BasicTensor<T> y(a.shape(), std::move(out));
  if (auto* tape = detail::recording_tape<T>({&a, &b})) {
    tape->record("mul", {a.id(), b.id()}, y, [a, b, y] {
      auto gy = y.grad();
      if (a.requires_grad()) {
        auto ga = a.grad_buffer();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gy[i] * b.data()[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad_buffer();
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += gy[i] * a.data()[i];
      }
    });
  }
  return y;
}

template <typename T>
BasicTensor<T> div(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape("div", a, b);
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] / b.data()[i];
  BasicTensor<T> y(a.shape(), std::move(out));
  detail::check_finite<T>("div", y.data());
  if (auto* tape = detail::recording_tape<T>({&a, &b})) {
    tape->record("div", {a.id(), b.id()}, y, [a, b, y] {
      auto gy = y.grad();
      if (a.requires_grad()) {
        auto ga = a.grad_buffer();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gy[i] / b.data()[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad_buffer();
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= gy[i] * y.data()[i] / b.data()[i];
      }
    });
  }
  return y;
}

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& x, T factor) {
  auto y = map_unary(x, [factor](T v) { return v * factor; });
  if (auto* tape = detail::recording_tape<T>({&x})) {
    tape->record("scale", {x.id()}, y, [x, y, factor] {
      auto gx = x.grad_buffer();
      auto gy = y.grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * factor;
    });
  }
  return y;
}

template <typename T>
BasicTensor<T> add_scalar(const BasicTensor<T>& x, T value) {
  auto y = map_unary(x, [value](T v) { return v + value; });
  if (auto* tape = detail::recording_tape<T>({&x})) {
    tape->record("add_scalar", {x.id()}, y, [x, y] { add_into(x.grad_buffer(), y.grad()); });
  }
  return y;
}

template <typename T>
BasicTensor<T> log(const BasicTensor<T>& x) {
  auto y = map_unary(x, [](T v) { return std::log(v); });
  detail::check_finite<T>("log", y.data());
  if (auto* tape = detail::recording_tape<T>({&x})) {
    tape->record("log", {x.id()}, y, [x, y] {
      auto gx = x.grad_buffer();
      auto gy = y.grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] / x.data()[i];
    });
  }
  return y;
}

template <typename T>
BasicTensor<T> clamp(const BasicTensor<T>& x, T lo, T hi) {
  auto y = map_unary(x, [lo, hi](T v) { return std::clamp(v, lo, hi); });
  if (auto* tape = detail::recording_tape<T>({&x})) {
    tape->record("clamp", {x.id()}, y, [x, y, lo, hi] {
      auto gx = x.grad_buffer();
      auto gy = y.grad();
      for (std::size_t i = 0; i < gx.size(); ++i) {
        const T v = x.data()[i];
        if (v >= lo && v <= hi) gx[i] += gy[i];
      }
    });
  }
  return y;
}

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& x) {
  double acc = 0;
  for (T v : x.data()) acc += v;
  auto y = BasicTensor<T>::scalar(static_cast<T>(acc));
  if (auto* tape = detail::recording_tape<T>({&x})) {
    tape->record("sum", {x.id()}, y, [x, y] {
      const T g = y.grad()[0];
      for (T& v : x.grad_buffer()) v += g;
    });
  }
  return y;
}

template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& x) {
  double acc = 0;
  for (T v : x.data()) acc += v;
  const double n = static_cast<double>(x.numel());
  auto y = BasicTensor<T>::scalar(static_cast<T>(acc / n));
  if (auto* tape = detail::recording_tape<T>({&x})) {
    tape->record("mean", {x.id()}, y, [x, y, n] {
      const T g = static_cast<T>(y.grad()[0] / n);
      for (T& v : x.grad_buffer()) v += g;
    });
  }
  return y;
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x) {
  // NaN passes through so non-finite activations stay visible.
  auto y = map_unary(x, [](T v) { return v < T(0) ? T(0) : v; });
  if (auto* tape = detail::recording_tape<T>({&x})) {
    tape->record("relu", {x.id()}, y, [x, y] {
      auto gx = x.grad_buffer();
      auto gy = y.grad();
      auto in = x.data();
      const index_t n = static_cast<index_t>(gx.size());
#pragma omp parallel for schedule(static) if (gx.size() > kParallelThreshold)
      for (index_t i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        if (in[k] > T(0)) gx[k] += gy[k];
      }
    });
  }
  return y;
}

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x) {
  // Split on sign so exp never overflows.
  auto y = map_unary(x, [](T v) {
    if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
    const T e = std::exp(v);
    return e / (T(1) + e);
  });
  if (auto* tape = detail::recording_tape<T>({&x})) {
    tape->record("sigmoid", {x.id()}, y, [x, y] {
      auto gx = x.grad_buffer();
      auto gy = y.grad();
      auto out = y.data();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * out[i] * (T(1) - out[i]);
    });
  }
  return y;
}

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const Conv2dParams<T>& p) {
  require_nchw("conv2d", x);
  const auto& w = p.weight;
  if (!w.defined() || w.rank() != 4) throw ShapeError("conv2d: weight must be [out_ch, in_ch, kh, kw]");
  if (x.dim(1) != w.dim(1)) {
    throw ShapeError(fmt::format("conv2d: input has {} channels but weight expects {} (input {}, weight {})", x.dim(1),
                                 w.dim(1), shape_str(x.shape()), shape_str(w.shape())));
  }
  if (p.stride < 1) throw ShapeError("conv2d: stride must be >= 1");
  if (p.bias.defined() && p.bias.shape() != Shape{w.dim(0)}) {
    throw ShapeError(fmt::format("conv2d: bias shape {} does not match {} filters", shape_str(p.bias.shape()), w.dim(0)));
  }
  ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), w.dim(0), w.dim(2), w.dim(3), p.stride, p.pad_h, p.pad_w};
  if (g.out_h() < 1 || g.out_w() < 1) {
    throw ShapeError(fmt::format("conv2d: kernel {}x{} does not fit input {} with padding ({},{})", g.kernel_h,
                                 g.kernel_w, shape_str(x.shape()), p.pad_h, p.pad_w));
  }
  std::vector<T> out(g.batch * g.out_channels * g.out_h() * g.out_w());
  std::span<const T> bias = p.bias.defined() ? p.bias.data() : std::span<const T>{};
  kernels::conv2d_forward<T>(g, x.data(), w.data(), bias, out);
  BasicTensor<T> y({g.batch, g.out_channels, g.out_h(), g.out_w()}, std::move(out));
  detail::check_finite<T>("conv2d", y.data());

  const BasicTensor<T>* bias_ptr = p.bias.defined() ? &p.bias : nullptr;
  if (auto* tape = detail::recording_tape<T>({&x, &w, bias_ptr})) {
    std::vector<std::uint64_t> ids{x.id(), w.id()};
    if (bias_ptr) ids.push_back(p.bias.id());
    tape->record("conv2d", std::move(ids), y, [g, x, w, b = p.bias, y] {
      std::span<T> dx = x.requires_grad() ? x.grad_buffer() : std::span<T>{};
      std::span<T> dw = w.requires_grad() ? w.grad_buffer() : std::span<T>{};
      std::span<T> db = (b.defined() && b.requires_grad()) ? b.grad_buffer() : std::span<T>{};
      kernels::conv2d_backward<T>(g, x.data(), w.data(), y.grad(), dx, dw, db);
    });
  }
  return y;
}

namespace {

template <typename T>
PoolGeometry pool_geometry(std::string_view op, const BasicTensor<T>& x, std::size_t window, std::size_t stride,
                           std::size_t pad) {
  require_nchw(op, x);
  if (window < 1 || stride < 1) throw ShapeError(fmt::format("{}: window and stride must be >= 1", op));
  if (pad >= window) throw ShapeError(fmt::format("{}: padding {} must be smaller than window {}", op, pad, window));
  PoolGeometry g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), window, stride, pad};
  if (g.out_h() < 1 || g.out_w() < 1) {
    throw ShapeError(fmt::format("{}: window {} larger than padded input {}", op, window, shape_str(x.shape())));
  }
  return g;
}

}  // namespace

template <typename T>
BasicTensor<T> max_pool2d(const BasicTensor<T>& x, std::size_t window, std::size_t stride, std::size_t pad) {
  const auto g = pool_geometry("max_pool2d", x, window, stride, pad);
  std::vector<T> out(g.batch * g.channels * g.out_h() * g.out_w());
  std::vector<std::size_t> argmax;
  kernels::max_pool2d_forward<T>(g, x.data(), out, argmax);
  BasicTensor<T> y({g.batch, g.channels, g.out_h(), g.out_w()}, std::move(out));
  if (auto* tape = detail::recording_tape<T>({&x})) {
    tape->record("max_pool2d", {x.id()}, y, [g, x, y, argmax = std::move(argmax)] {
      kernels::max_pool2d_backward<T>(g, y.grad(), argmax, x.grad_buffer());
    });
  }
  return y;
}

template <typename T>
BasicTensor<T> avg_pool2d(const BasicTensor<T>& x, std::size_t window, std::size_t stride, std::size_t pad) {
  const auto g = pool_geometry("avg_pool2d", x, window, stride, pad);
  std::vector<T> out(g.batch * g.channels * g.out_h() * g.out_w());
  kernels::avg_pool2d_forward<T>(g, x.data(), out);
  BasicTensor<T> y({g.batch, g.channels, g.out_h(), g.out_w()}, std::move(out));
  if (auto* tape = detail::recording_tape<T>({&x})) {
    tape->record("avg_pool2d", {x.id()}, y,
                 [g, x, y] { kernels::avg_pool2d_backward<T>(g, y.grad(), x.grad_buffer()); });
  }
  return y;
}

template <typename T>
BasicTensor<T> upsample2x(const BasicTensor<T>& x) {
  require_nchw("upsample2x", x);
  const std::size_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t oh = 2 * h, ow = 2 * w;
  std::vector<T> out(planes * oh * ow);
  auto in = x.data();
  const index_t np = static_cast<index_t>(planes);
#pragma omp parallel for schedule(static)
  for (index_t pl = 0; pl < np; ++pl) {
    const T* src = in.data() + static_cast<std::size_t>(pl) * h * w;
    T* dst = out.data() + static_cast<std::size_t>(pl) * oh * ow;
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) dst[oy * ow + ox] = src[(oy / 2) * w + ox / 2];
  }
  BasicTensor<T> y({x.dim(0), x.dim(1), oh, ow}, std::move(out));
  if (auto* tape = detail::recording_tape<T>({&x})) {
    tape->record("upsample2x", {x.id()}, y, [x, y, planes, h, w] {
      auto gx = x.grad_buffer();
      auto gy = y.grad();
      const std::size_t ow2 = 2 * w;
      const index_t np2 = static_cast<index_t>(planes);
#pragma omp parallel for schedule(static)
      for (index_t pl = 0; pl < np2; ++pl) {
        T* dst = gx.data() + static_cast<std::size_t>(pl) * h * w;
        const T* src = gy.data() + static_cast<std::size_t>(pl) * 4 * h * w;
        for (std::size_t iy = 0; iy < h; ++iy)
          for (std::size_t ix = 0; ix < w; ++ix) {
            const T* top = src + (2 * iy) * ow2 + 2 * ix;
            dst[iy * w + ix] += top[0] + top[1] + top[ow2] + top[ow2 + 1];
          }
      }
    });
  }
  return y;
}

template <typename T>
BasicTensor<T> concat_channels(std::span<const BasicTensor<T>> xs) {
  if (xs.empty()) throw ShapeError("concat_channels: no inputs");
  for (const auto& x : xs) require_nchw("concat_channels", x);
  const std::size_t n = xs[0].dim(0), h = xs[0].dim(2), w = xs[0].dim(3);
  std::size_t channels = 0;
  for (const auto& x : xs) {
    if (x.dim(0) != n || x.dim(2) != h || x.dim(3) != w) {
      throw ShapeError(fmt::format("concat_channels: shape mismatch {} vs {}", shape_str(xs[0].shape()),
                                   shape_str(x.shape())));
    }
    channels += x.dim(1);
  }
  if (xs.size() == 1) return xs[0];
  const std::size_t plane = h * w;
  std::vector<T> out(n * channels * plane);
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& x : xs) {
    offsets.push_back(offset);
    const std::size_t block = x.dim(1) * plane;
    for (std::size_t b = 0; b < n; ++b) {
      std::copy_n(x.data().data() + b * block, block, out.data() + (b * channels + offset) * plane);
    }
    offset += x.dim(1);
  }
  BasicTensor<T> y({n, channels, h, w}, std::move(out));
  if (auto* tape = detail::recording_tape<T>(xs)) {
    std::vector<std::uint64_t> ids;
    for (const auto& x : xs) ids.push_back(x.id());
    std::vector<BasicTensor<T>> inputs(xs.begin(), xs.end());
    tape->record("concat_channels", std::move(ids), y, [inputs, offsets, y, n, channels, plane] {
      auto gy = y.grad();
      for (std::size_t k = 0; k < inputs.size(); ++k) {
        const auto& x = inputs[k];
        if (!x.requires_grad()) continue;
        auto gx = x.grad_buffer();
        const std::size_t block = x.dim(1) * plane;
        for (std::size_t b = 0; b < n; ++b) {
          const T* src = gy.data() + (b * channels + offsets[k]) * plane;
          T* dst = gx.data() + b * block;
          for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
        }
      }
    });
  }
  return y;
}

template <typename T>
BasicTensor<T> dropout(const BasicTensor<T>& x, double rate, bool training, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument(fmt::format("dropout: rate {} not in [0, 1)", rate));
  if (!training || rate == 0.0) return x;
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  std::vector<T> mask(x.numel());
  std::vector<T> out(x.numel());
  auto in = x.data();
  const index_t n = static_cast<index_t>(out.size());
#pragma omp parallel for schedule(static) if (out.size() > kParallelThreshold)
  for (index_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    mask[k] = hash_uniform(seed, k) < rate ? T(0) : keep_scale;
    out[k] = in[k] * mask[k];
  }
  BasicTensor<T> y(x.shape(), std::move(out));
  if (auto* tape = detail::recording_tape<T>({&x})) {
    tape->record("dropout", {x.id()}, y, [x, y, mask = std::move(mask)] {
      auto gx = x.grad_buffer();
      auto gy = y.grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * mask[i];
    });
  }
  return y;
}

template <typename T>
BasicTensor<T> group_norm(const BasicTensor<T>& x, const GroupNormParams<T>& p) {
  require_nchw("group_norm", x);
  const std::size_t channels = x.dim(1);
  if (p.groups < 1 || channels % p.groups != 0) {
    throw ShapeError(fmt::format("group_norm: {} channels not divisible into {} groups", channels, p.groups));
  }
  if (!(p.epsilon > T(0))) throw std::invalid_argument("group_norm: epsilon must be positive");
  if (p.gamma.shape() != Shape{channels} || p.beta.shape() != Shape{channels}) {
    throw ShapeError(fmt::format("group_norm: gamma/beta must be [{}], got {} and {}", channels,
                                 shape_str(p.gamma.shape()), shape_str(p.beta.shape())));
  }
  NormGeometry g{x.dim(0), channels, x.dim(2) * x.dim(3), p.groups};
  std::vector<T> out(x.numel()), xhat(x.numel()), mu(g.batch * g.groups), rstd(g.batch * g.groups);
  kernels::group_norm_forward<T>(g, p.epsilon, x.data(), p.gamma.data(), p.beta.data(), out, xhat, mu, rstd);
  BasicTensor<T> y(x.shape(), std::move(out));
  detail::check_finite<T>("group_norm", y.data());
  if (auto* tape = detail::recording_tape<T>({&x, &p.gamma, &p.beta})) {
    tape->record("group_norm", {x.id(), p.gamma.id(), p.beta.id()}, y,
                 [g, x, gamma = p.gamma, beta = p.beta, y, xhat = std::move(xhat), rstd = std::move(rstd)] {
                   std::span<T> dx = x.requires_grad() ? x.grad_buffer() : std::span<T>{};
                   std::span<T> dg = gamma.requires_grad() ? gamma.grad_buffer() : std::span<T>{};
                   std::span<T> db = beta.requires_grad() ? beta.grad_buffer() : std::span<T>{};
                   kernels::group_norm_backward<T>(g, xhat, rstd, gamma.data(), y.grad(), dx, dg, db);
                 });
  }
  return y;
}

template <typename T>
BasicTensor<T> stack_batch(std::span<const BasicTensor<T>> items) {
  if (items.empty()) throw ShapeError("stack_batch: no items");
  Shape item_shape = items[0].shape();
  if (item_shape.size() == 4 && item_shape[0] == 1) item_shape.erase(item_shape.begin());
  std::vector<T> out;
  out.reserve(items.size() * shape_numel(item_shape));
  for (const auto& t : items) {
    if (t.numel() != shape_numel(item_shape)) {
      throw ShapeError(fmt::format("stack_batch: item shape {} differs from {}", shape_str(t.shape()),
                                   shape_str(item_shape)));
    }
    out.insert(out.end(), t.data().begin(), t.data().end());
  }
  Shape shape{items.size()};
  shape.insert(shape.end(), item_shape.begin(), item_shape.end());
  return BasicTensor<T>(std::move(shape), std::move(out));
}

template <typename T>
BasicTensor<T> select_batch(const BasicTensor<T>& x, std::size_t index) {
  if (x.rank() < 1 || index >= x.dim(0)) {
    throw ShapeError(fmt::format("select_batch: index {} out of range for {}", index, shape_str(x.shape())));
  }
  Shape shape = x.shape();
  shape[0] = 1;
  const std::size_t block = shape_numel(shape);
  std::vector<T> out(x.data().begin() + static_cast<index_t>(index * block),
                     x.data().begin() + static_cast<index_t>((index + 1) * block));
  return BasicTensor<T>(std::move(shape), std::move(out));
}

#define VESSEL_INSTANTIATE_OPS(T)                                                                       \
  template struct GroupNormParams<T>;                                                                   \
  template BasicTensor<T> add<T>(const BasicTensor<T>&, const BasicTensor<T>&);                         \
  template BasicTensor<T> sub<T>(const BasicTensor<T>&, const BasicTensor<T>&);                         \
  template BasicTensor<T> mul<T>(const BasicTensor<T>&, const BasicTensor<T>&);                         \
  template BasicTensor<T> div<T>(const BasicTensor<T>&, const BasicTensor<T>&);                         \
  template BasicTensor<T> scale<T>(const BasicTensor<T>&, T);                                           \
  template BasicTensor<T> add_scalar<T>(const BasicTensor<T>&, T);                                      \
  template BasicTensor<T> log<T>(const BasicTensor<T>&);                                                \
  template BasicTensor<T> clamp<T>(const BasicTensor<T>&, T, T);                                        \
  template BasicTensor<T> sum<T>(const BasicTensor<T>&);                                                \
  template BasicTensor<T> mean<T>(const BasicTensor<T>&);                                               \
  template BasicTensor<T> relu<T>(const BasicTensor<T>&);                                               \
  template BasicTensor<T> sigmoid<T>(const BasicTensor<T>&);                                            \
  template BasicTensor<T> conv2d<T>(const BasicTensor<T>&, const Conv2dParams<T>&);                     \
  template BasicTensor<T> max_pool2d<T>(const BasicTensor<T>&, std::size_t, std::size_t, std::size_t);  \
  template BasicTensor<T> avg_pool2d<T>(const BasicTensor<T>&, std::size_t, std::size_t, std::size_t);  \
  template BasicTensor<T> upsample2x<T>(const BasicTensor<T>&);                                         \
  template BasicTensor<T> concat_channels<T>(std::span<const BasicTensor<T>>);                          \
  template BasicTensor<T> dropout<T>(const BasicTensor<T>&, double, bool, std::uint64_t);               \
  template BasicTensor<T> group_norm<T>(const BasicTensor<T>&, const GroupNormParams<T>&);              \
  template BasicTensor<T> stack_batch<T>(std::span<const BasicTensor<T>>);                              \
  template BasicTensor<T> select_batch<T>(const BasicTensor<T>&, std::size_t);

VESSEL_INSTANTIATE_OPS(float)
VESSEL_INSTANTIATE_OPS(double)

}  // namespace vessel
