#include <cmath>
#include <limits>

#include "vessel/kernels.hpp"

namespace vessel::reference {

namespace {

using index_t = std::ptrdiff_t;

template <typename T>
T input_at(const ConvGeometry& g, std::span<const T> x, std::size_t n, std::size_t c, index_t iy, index_t ix) {
  if (iy < 0 || ix < 0 || iy >= static_cast<index_t>(g.in_h) || ix >= static_cast<index_t>(g.in_w)) return T(0);
  return x[((n * g.in_channels + c) * g.in_h + static_cast<std::size_t>(iy)) * g.in_w + static_cast<std::size_t>(ix)];
}

}  // namespace

template <typename T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> x, std::span<const T> weight,
                    std::span<const T> bias, std::span<T> y) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t o = 0; o < g.out_channels; ++o)
      for (std::size_t oy = 0; oy < oh; ++oy)
        for (std::size_t ox = 0; ox < ow; ++ox) {
          T acc = bias.empty() ? T(0) : bias[o];
          for (std::size_t c = 0; c < g.in_channels; ++c)
            for (std::size_t ki = 0; ki < g.kernel_h; ++ki)
              for (std::size_t kj = 0; kj < g.kernel_w; ++kj) {
                const index_t iy = static_cast<index_t>(oy * g.stride + ki) - static_cast<index_t>(g.pad_h);
                const index_t ix = static_cast<index_t>(ox * g.stride + kj) - static_cast<index_t>(g.pad_w);
                acc += weight[((o * g.in_channels + c) * g.kernel_h + ki) * g.kernel_w + kj] *
                       input_at(g, x, n, c, iy, ix);
              }
          y[((n * g.out_channels + o) * oh + oy) * ow + ox] = acc;
        }
}

template <typename T>
void conv2d_backward(const ConvGeometry& g, std::span<const T> x, std::span<const T> weight,
                     std::span<const T> dy, std::span<T> dx, std::span<T> dweight, std::span<T> dbias) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t o = 0; o < g.out_channels; ++o)
      for (std::size_t oy = 0; oy < oh; ++oy)
        for (std::size_t ox = 0; ox < ow; ++ox) {
          const T d = dy[((n * g.out_channels + o) * oh + oy) * ow + ox];
          if (!dbias.empty()) dbias[o] += d;
          for (std::size_t c = 0; c < g.in_channels; ++c)
            for (std::size_t ki = 0; ki < g.kernel_h; ++ki)
              for (std::size_t kj = 0; kj < g.kernel_w; ++kj) {
                const index_t iy = static_cast<index_t>(oy * g.stride + ki) - static_cast<index_t>(g.pad_h);
                const index_t ix = static_cast<index_t>(ox * g.stride + kj) - static_cast<index_t>(g.pad_w);
                if (iy < 0 || ix < 0 || iy >= static_cast<index_t>(g.in_h) || ix >= static_cast<index_t>(g.in_w))
                  continue;
                const std::size_t widx = ((o * g.in_channels + c) * g.kernel_h + ki) * g.kernel_w + kj;
                const std::size_t xidx = ((n * g.in_channels + c) * g.in_h + static_cast<std::size_t>(iy)) * g.in_w +
                                         static_cast<std::size_t>(ix);
                if (!dweight.empty()) dweight[widx] += d * x[xidx];
                if (!dx.empty()) dx[xidx] += d * weight[widx];
              }
        }
}

template <typename T>
void max_pool2d_forward(const PoolGeometry& g, std::span<const T> x, std::span<T> y) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  for (std::size_t p = 0; p < g.batch * g.channels; ++p)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        T best = -std::numeric_limits<T>::infinity();
        for (std::size_t wy = 0; wy < g.window; ++wy)
          for (std::size_t wx = 0; wx < g.window; ++wx) {
            const index_t iy = static_cast<index_t>(oy * g.stride + wy) - static_cast<index_t>(g.pad);
            const index_t ix = static_cast<index_t>(ox * g.stride + wx) - static_cast<index_t>(g.pad);
            if (iy < 0 || ix < 0 || iy >= static_cast<index_t>(g.in_h) || ix >= static_cast<index_t>(g.in_w))
              continue;
            const T v = x[(p * g.in_h + static_cast<std::size_t>(iy)) * g.in_w + static_cast<std::size_t>(ix)];
            if (v > best) best = v;
          }
        y[(p * oh + oy) * ow + ox] = best;
      }
}

template <typename T>
void avg_pool2d_forward(const PoolGeometry& g, std::span<const T> x, std::span<T> y) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  for (std::size_t p = 0; p < g.batch * g.channels; ++p)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        T sum = 0;
        std::size_t count = 0;
        for (std::size_t wy = 0; wy < g.window; ++wy)
          for (std::size_t wx = 0; wx < g.window; ++wx) {
            const index_t iy = static_cast<index_t>(oy * g.stride + wy) - static_cast<index_t>(g.pad);
            const index_t ix = static_cast<index_t>(ox * g.stride + wx) - static_cast<index_t>(g.pad);
            if (iy < 0 || ix < 0 || iy >= static_cast<index_t>(g.in_h) || ix >= static_cast<index_t>(g.in_w))
              continue;
            sum += x[(p * g.in_h + static_cast<std::size_t>(iy)) * g.in_w + static_cast<std::size_t>(ix)];
            ++count;
          }
        y[(p * oh + oy) * ow + ox] = sum / static_cast<T>(count);
      }
}

template <typename T>
void group_norm_forward(const NormGeometry& g, T eps, std::span<const T> x, std::span<T> y) {
  const std::size_t per_group = g.channels / g.groups;
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t grp = 0; grp < g.groups; ++grp) {
      const std::size_t c_begin = grp * per_group, c_end = c_begin + per_group;
      long double sum = 0;
      std::size_t m = 0;
      for (std::size_t c = c_begin; c < c_end; ++c)
        for (std::size_t s = 0; s < g.spatial; ++s, ++m) sum += x[(n * g.channels + c) * g.spatial + s];
      const long double mu = sum / m;
      long double var = 0;
      for (std::size_t c = c_begin; c < c_end; ++c)
        for (std::size_t s = 0; s < g.spatial; ++s) {
          const long double d = x[(n * g.channels + c) * g.spatial + s] - mu;
          var += d * d;
        }
      var /= m;
      const long double sigma = std::sqrt(var + eps);
      for (std::size_t c = c_begin; c < c_end; ++c)
        for (std::size_t s = 0; s < g.spatial; ++s) {
          const std::size_t i = (n * g.channels + c) * g.spatial + s;
          y[i] = static_cast<T>((x[i] - mu) / sigma);
        }
    }
}

#define VESSEL_INSTANTIATE_REFERENCE(T)                                                                      \
  template void conv2d_forward<T>(const ConvGeometry&, std::span<const T>, std::span<const T>,             \
                                  std::span<const T>, std::span<T>);                                       \
  template void conv2d_backward<T>(const ConvGeometry&, std::span<const T>, std::span<const T>,            \
                                   std::span<const T>, std::span<T>, std::span<T>, std::span<T>);          \
  template void max_pool2d_forward<T>(const PoolGeometry&, std::span<const T>, std::span<T>);              \
  template void avg_pool2d_forward<T>(const PoolGeometry&, std::span<const T>, std::span<T>);              \
  template void group_norm_forward<T>(const NormGeometry&, T, std::span<const T>, std::span<T>);

VESSEL_INSTANTIATE_REFERENCE(float)
VESSEL_INSTANTIATE_REFERENCE(double)

}  // namespace vessel::reference
