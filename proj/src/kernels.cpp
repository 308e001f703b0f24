#include "vessel/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstring>
#include <limits>

#include <omp.h>

namespace vessel {

std::size_t ConvGeometry::out_h() const {
  const std::size_t padded = in_h + 2 * pad_h;
  return padded < kernel_h ? 0 : (padded - kernel_h) / stride + 1;
}

std::size_t ConvGeometry::out_w() const {
  const std::size_t padded = in_w + 2 * pad_w;
  return padded < kernel_w ? 0 : (padded - kernel_w) / stride + 1;
}

std::size_t PoolGeometry::out_h() const {
  const std::size_t padded = in_h + 2 * pad;
  return padded < window ? 0 : (padded - window) / stride + 1;
}

std::size_t PoolGeometry::out_w() const {
  const std::size_t padded = in_w + 2 * pad;
  return padded < window ? 0 : (padded - window) / stride + 1;
}

namespace kernels {

namespace {

using index_t = std::ptrdiff_t;

constexpr std::size_t kRowBlock = 4;
constexpr std::size_t kColBlock = 512;

// C rows [i0, i0+rows) accumulate A(i,p) * B[p, :], p ascending. A is read
// through (row_stride, depth_stride) so one routine serves NN and TN layouts.
template <typename T>
inline void rank1_rows(std::size_t i0, std::size_t rows, std::size_t n, std::size_t k, const T* a,
                       std::size_t row_stride, std::size_t depth_stride, const T* b, T* c) {
  for (std::size_t j0 = 0; j0 < n; j0 += kColBlock) {
    const std::size_t cols = std::min(kColBlock, n - j0);
    if (rows == kRowBlock) {
      T* c0 = c + (i0 + 0) * n + j0;
      T* c1 = c + (i0 + 1) * n + j0;
      T* c2 = c + (i0 + 2) * n + j0;
      T* c3 = c + (i0 + 3) * n + j0;
      for (std::size_t p = 0; p < k; ++p) {
        const T a0 = a[(i0 + 0) * row_stride + p * depth_stride];
        const T a1 = a[(i0 + 1) * row_stride + p * depth_stride];
        const T a2 = a[(i0 + 2) * row_stride + p * depth_stride];
        const T a3 = a[(i0 + 3) * row_stride + p * depth_stride];
        const T* brow = b + p * n + j0;
        for (std::size_t j = 0; j < cols; ++j) {
          const T bv = brow[j];
          c0[j] += a0 * bv;
          c1[j] += a1 * bv;
          c2[j] += a2 * bv;
          c3[j] += a3 * bv;
        }
      }
    } else {
      for (std::size_t r = 0; r < rows; ++r) {
        T* crow = c + (i0 + r) * n + j0;
        for (std::size_t p = 0; p < k; ++p) {
          const T av = a[(i0 + r) * row_stride + p * depth_stride];
          const T* brow = b + p * n + j0;
          for (std::size_t j = 0; j < cols; ++j) crow[j] += av * brow[j];
        }
      }
    }
  }
}

template <typename T>
void gemm_rows(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t row_stride,
               std::size_t depth_stride, const T* b, T* c, bool accumulate) {
  const index_t blocks = static_cast<index_t>((m + kRowBlock - 1) / kRowBlock);
#pragma omp parallel for schedule(static)
  for (index_t blk = 0; blk < blocks; ++blk) {
    const std::size_t i0 = static_cast<std::size_t>(blk) * kRowBlock;
    const std::size_t rows = std::min(kRowBlock, m - i0);
    if (!accumulate) std::fill(c + i0 * n, c + (i0 + rows) * n, T(0));
    rank1_rows(i0, rows, n, k, a, row_stride, depth_stride, b, c);
  }
}

template <typename T>
inline T dot(const T* x, const T* y, std::size_t len) {
  constexpr std::size_t kLanes = 8;
  T partial[kLanes] = {};
  std::size_t p = 0;
  for (; p + kLanes <= len; p += kLanes) {
    for (std::size_t u = 0; u < kLanes; ++u) partial[u] += x[p + u] * y[p + u];
  }
  T tail = 0;
  for (; p < len; ++p) tail += x[p] * y[p];
  T total = 0;
  for (std::size_t u = 0; u < kLanes; ++u) total += partial[u];
  return total + tail;
}

template <typename T>
void im2col(const ConvGeometry& g, const T* x, T* col) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  const index_t rows = static_cast<index_t>(g.patch_size());
#pragma omp parallel for schedule(static)
  for (index_t r = 0; r < rows; ++r) {
    const std::size_t kj = static_cast<std::size_t>(r) % g.kernel_w;
    const std::size_t ki = (static_cast<std::size_t>(r) / g.kernel_w) % g.kernel_h;
    const std::size_t ch = static_cast<std::size_t>(r) / (g.kernel_w * g.kernel_h);
    const T* plane = x + ch * g.in_h * g.in_w;
    T* out = col + static_cast<std::size_t>(r) * oh * ow;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      const index_t iy = static_cast<index_t>(oy * g.stride + ki) - static_cast<index_t>(g.pad_h);
      T* orow = out + oy * ow;
      if (iy < 0 || iy >= static_cast<index_t>(g.in_h)) {
        std::fill(orow, orow + ow, T(0));
        continue;
      }
      const T* irow = plane + static_cast<std::size_t>(iy) * g.in_w;
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const index_t ix = static_cast<index_t>(ox * g.stride + kj) - static_cast<index_t>(g.pad_w);
        orow[ox] = (ix < 0 || ix >= static_cast<index_t>(g.in_w)) ? T(0) : irow[ix];
      }
    }
  }
}

template <typename T>
void col2im_add(const ConvGeometry& g, const T* col, T* dx) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  const index_t channels = static_cast<index_t>(g.in_channels);
#pragma omp parallel for schedule(static)
  for (index_t ch = 0; ch < channels; ++ch) {
    T* plane = dx + static_cast<std::size_t>(ch) * g.in_h * g.in_w;
    for (std::size_t ki = 0; ki < g.kernel_h; ++ki) {
      for (std::size_t kj = 0; kj < g.kernel_w; ++kj) {
        const std::size_t r = (static_cast<std::size_t>(ch) * g.kernel_h + ki) * g.kernel_w + kj;
        const T* in = col + r * oh * ow;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const index_t iy = static_cast<index_t>(oy * g.stride + ki) - static_cast<index_t>(g.pad_h);
          if (iy < 0 || iy >= static_cast<index_t>(g.in_h)) continue;
          T* drow = plane + static_cast<std::size_t>(iy) * g.in_w;
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const index_t ix = static_cast<index_t>(ox * g.stride + kj) - static_cast<index_t>(g.pad_w);
            if (ix >= 0 && ix < static_cast<index_t>(g.in_w)) drow[ix] += in[oy * ow + ox];
          }
        }
      }
    }
  }
}

bool is_pointwise(const ConvGeometry& g) {
  return g.kernel_h == 1 && g.kernel_w == 1 && g.stride == 1 && g.pad_h == 0 && g.pad_w == 0;
}

}  // namespace

template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c, bool accumulate) {
  gemm_rows(m, n, k, a, k, 1, b, c, accumulate);
}

template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c, bool accumulate) {
  gemm_rows(m, n, k, a, 1, m, b, c, accumulate);
}

template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c, bool accumulate) {
  const index_t rows = static_cast<index_t>(m);
#pragma omp parallel for schedule(static)
  for (index_t i = 0; i < rows; ++i) {
    const T* arow = a + static_cast<std::size_t>(i) * k;
    T* crow = c + static_cast<std::size_t>(i) * n;
    for (std::size_t j = 0; j < n; ++j) {
      const T v = dot(arow, b + j * k, k);
      crow[j] = accumulate ? crow[j] + v : v;
    }
  }
}

template <typename T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> x, std::span<const T> weight,
                    std::span<const T> bias, std::span<T> y) {
  const std::size_t plane_in = g.in_channels * g.in_h * g.in_w;
  const std::size_t pixels = g.out_h() * g.out_w();
  const std::size_t plane_out = g.out_channels * pixels;
  const bool direct = is_pointwise(g);
  std::vector<T> col(direct ? 0 : g.patch_size() * pixels);

  for (std::size_t n = 0; n < g.batch; ++n) {
    const T* xn = x.data() + n * plane_in;
    T* yn = y.data() + n * plane_out;
    const T* rhs = xn;
    if (!direct) {
      im2col(g, xn, col.data());
      rhs = col.data();
    }
    gemm_nn(g.out_channels, pixels, g.patch_size(), weight.data(), rhs, yn, false);
    if (!bias.empty()) {
      const index_t oc = static_cast<index_t>(g.out_channels);
#pragma omp parallel for schedule(static)
      for (index_t o = 0; o < oc; ++o) {
        T* row = yn + static_cast<std::size_t>(o) * pixels;
        const T b = bias[static_cast<std::size_t>(o)];
        for (std::size_t p = 0; p < pixels; ++p) row[p] += b;
      }
    }
  }
}

template <typename T>
void conv2d_backward(const ConvGeometry& g, std::span<const T> x, std::span<const T> weight,
                     std::span<const T> dy, std::span<T> dx, std::span<T> dweight, std::span<T> dbias) {
  const std::size_t plane_in = g.in_channels * g.in_h * g.in_w;
  const std::size_t pixels = g.out_h() * g.out_w();
  const std::size_t plane_out = g.out_channels * pixels;
  const std::size_t patch = g.patch_size();
  const bool direct = is_pointwise(g);
  std::vector<T> col(direct ? 0 : patch * pixels);
  std::vector<T> dcol(direct || dx.empty() ? 0 : patch * pixels);

  for (std::size_t n = 0; n < g.batch; ++n) {
    const T* xn = x.data() + n * plane_in;
    const T* dyn = dy.data() + n * plane_out;
    if (!dweight.empty()) {
      const T* rhs = xn;
      if (!direct) {
        im2col(g, xn, col.data());
        rhs = col.data();
      }
      gemm_nt(g.out_channels, patch, pixels, dyn, rhs, dweight.data(), true);
    }
    if (!dbias.empty()) {
      const index_t oc = static_cast<index_t>(g.out_channels);
#pragma omp parallel for schedule(static)
      for (index_t o = 0; o < oc; ++o) {
        const T* row = dyn + static_cast<std::size_t>(o) * pixels;
        T s = 0;
        for (std::size_t p = 0; p < pixels; ++p) s += row[p];
        dbias[static_cast<std::size_t>(o)] += s;
      }
    }
    if (!dx.empty()) {
      T* dxn = dx.data() + n * plane_in;
      if (direct) {
        gemm_tn(patch, pixels, g.out_channels, weight.data(), dyn, dxn, true);
      } else {
        gemm_tn(patch, pixels, g.out_channels, weight.data(), dyn, dcol.data(), false);
        col2im_add(g, dcol.data(), dxn);
      }
    }
  }
}

template <typename T>
void max_pool2d_forward(const PoolGeometry& g, std::span<const T> x, std::span<T> y,
                        std::vector<std::size_t>& argmax) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  argmax.assign(y.size(), 0);
  const index_t planes = static_cast<index_t>(g.batch * g.channels);
#pragma omp parallel for schedule(static)
  for (index_t pl = 0; pl < planes; ++pl) {
    const std::size_t in_base = static_cast<std::size_t>(pl) * g.in_h * g.in_w;
    const std::size_t out_base = static_cast<std::size_t>(pl) * oh * ow;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        T best = -std::numeric_limits<T>::infinity();
        std::size_t best_idx = in_base;
        bool found = false;
        for (std::size_t wy = 0; wy < g.window; ++wy) {
          const index_t iy = static_cast<index_t>(oy * g.stride + wy) - static_cast<index_t>(g.pad);
          if (iy < 0 || iy >= static_cast<index_t>(g.in_h)) continue;
          for (std::size_t wx = 0; wx < g.window; ++wx) {
            const index_t ix = static_cast<index_t>(ox * g.stride + wx) - static_cast<index_t>(g.pad);
            if (ix < 0 || ix >= static_cast<index_t>(g.in_w)) continue;
            const std::size_t idx = in_base + static_cast<std::size_t>(iy) * g.in_w + static_cast<std::size_t>(ix);
            if (!found || x[idx] > best) {
              best = x[idx];
              best_idx = idx;
              found = true;
            }
          }
        }
        y[out_base + oy * ow + ox] = best;
        argmax[out_base + oy * ow + ox] = best_idx;
      }
    }
  }
}

template <typename T>
void max_pool2d_backward(const PoolGeometry& g, std::span<const T> dy, std::span<const std::size_t> argmax,
                         std::span<T> dx) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  const index_t planes = static_cast<index_t>(g.batch * g.channels);
  // Each window's argmax lies in its own plane, so planes are independent.
#pragma omp parallel for schedule(static)
  for (index_t pl = 0; pl < planes; ++pl) {
    const std::size_t out_base = static_cast<std::size_t>(pl) * oh * ow;
    for (std::size_t o = 0; o < oh * ow; ++o) dx[argmax[out_base + o]] += dy[out_base + o];
  }
}

namespace {

struct WindowSpan {
  std::size_t y0, y1, x0, x1;
};

WindowSpan clip_window(const PoolGeometry& g, std::size_t oy, std::size_t ox) {
  const index_t ys = static_cast<index_t>(oy * g.stride) - static_cast<index_t>(g.pad);
  const index_t xs = static_cast<index_t>(ox * g.stride) - static_cast<index_t>(g.pad);
  const index_t w = static_cast<index_t>(g.window);
  return WindowSpan{static_cast<std::size_t>(std::max<index_t>(ys, 0)),
                    static_cast<std::size_t>(std::min<index_t>(ys + w, static_cast<index_t>(g.in_h))),
                    static_cast<std::size_t>(std::max<index_t>(xs, 0)),
                    static_cast<std::size_t>(std::min<index_t>(xs + w, static_cast<index_t>(g.in_w)))};
}

}  // namespace

template <typename T>
void avg_pool2d_forward(const PoolGeometry& g, std::span<const T> x, std::span<T> y) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  const index_t planes = static_cast<index_t>(g.batch * g.channels);
#pragma omp parallel for schedule(static)
  for (index_t pl = 0; pl < planes; ++pl) {
    const T* in = x.data() + static_cast<std::size_t>(pl) * g.in_h * g.in_w;
    T* out = y.data() + static_cast<std::size_t>(pl) * oh * ow;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const auto w = clip_window(g, oy, ox);
        T s = 0;
        for (std::size_t iy = w.y0; iy < w.y1; ++iy) {
          for (std::size_t ix = w.x0; ix < w.x1; ++ix) s += in[iy * g.in_w + ix];
        }
        out[oy * ow + ox] = s / static_cast<T>((w.y1 - w.y0) * (w.x1 - w.x0));
      }
    }
  }
}

template <typename T>
void avg_pool2d_backward(const PoolGeometry& g, std::span<const T> dy, std::span<T> dx) {
  const std::size_t oh = g.out_h(), ow = g.out_w();
  const index_t planes = static_cast<index_t>(g.batch * g.channels);
#pragma omp parallel for schedule(static)
  for (index_t pl = 0; pl < planes; ++pl) {
    T* din = dx.data() + static_cast<std::size_t>(pl) * g.in_h * g.in_w;
    const T* dout = dy.data() + static_cast<std::size_t>(pl) * oh * ow;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const auto w = clip_window(g, oy, ox);
        const T share = dout[oy * ow + ox] / static_cast<T>((w.y1 - w.y0) * (w.x1 - w.x0));
        for (std::size_t iy = w.y0; iy < w.y1; ++iy) {
          for (std::size_t ix = w.x0; ix < w.x1; ++ix) din[iy * g.in_w + ix] += share;
        }
      }
    }
  }
}

template <typename T>
void group_norm_forward(const NormGeometry& g, T eps, std::span<const T> x, std::span<const T> gamma,
                        std::span<const T> beta, std::span<T> y, std::span<T> xhat, std::span<T> mean,
                        std::span<T> rstd) {
  const std::size_t per_group = g.channels / g.groups;
  const std::size_t m = per_group * g.spatial;
  const index_t blocks = static_cast<index_t>(g.batch * g.groups);
#pragma omp parallel for schedule(static)
  for (index_t blk = 0; blk < blocks; ++blk) {
    const std::size_t base = static_cast<std::size_t>(blk) * m;
    double sum = 0;
    for (std::size_t i = 0; i < m; ++i) sum += x[base + i];
    const double mu = sum / static_cast<double>(m);
    double sq = 0;
    for (std::size_t i = 0; i < m; ++i) {
      const double d = x[base + i] - mu;
      sq += d * d;
    }
    const double inv = 1.0 / std::sqrt(sq / static_cast<double>(m) + static_cast<double>(eps));
    mean[static_cast<std::size_t>(blk)] = static_cast<T>(mu);
    rstd[static_cast<std::size_t>(blk)] = static_cast<T>(inv);
    const std::size_t c0 = (static_cast<std::size_t>(blk) % g.groups) * per_group;
    for (std::size_t c = 0; c < per_group; ++c) {
      const T gm = gamma[c0 + c], bt = beta[c0 + c];
      for (std::size_t s = 0; s < g.spatial; ++s) {
        const std::size_t i = base + c * g.spatial + s;
        const T h = static_cast<T>((x[i] - mu) * inv);
        xhat[i] = h;
        y[i] = gm * h + bt;
      }
    }
  }
}

template <typename T>
void group_norm_backward(const NormGeometry& g, std::span<const T> xhat, std::span<const T> rstd,
                         std::span<const T> gamma, std::span<const T> dy, std::span<T> dx,
                         std::span<T> dgamma, std::span<T> dbeta) {
  const std::size_t per_group = g.channels / g.groups;
  const std::size_t m = per_group * g.spatial;

  if (!dgamma.empty() || !dbeta.empty()) {
    const index_t channels = static_cast<index_t>(g.channels);
#pragma omp parallel for schedule(static)
    for (index_t c = 0; c < channels; ++c) {
      double sg = 0, sb = 0;
      for (std::size_t n = 0; n < g.batch; ++n) {
        const std::size_t base = (n * g.channels + static_cast<std::size_t>(c)) * g.spatial;
        for (std::size_t s = 0; s < g.spatial; ++s) {
          sg += static_cast<double>(dy[base + s]) * xhat[base + s];
          sb += dy[base + s];
        }
      }
      if (!dgamma.empty()) dgamma[static_cast<std::size_t>(c)] += static_cast<T>(sg);
      if (!dbeta.empty()) dbeta[static_cast<std::size_t>(c)] += static_cast<T>(sb);
    }
  }

  if (dx.empty()) return;
  const index_t blocks = static_cast<index_t>(g.batch * g.groups);
#pragma omp parallel for schedule(static)
  for (index_t blk = 0; blk < blocks; ++blk) {
    const std::size_t base = static_cast<std::size_t>(blk) * m;
    const std::size_t c0 = (static_cast<std::size_t>(blk) % g.groups) * per_group;
    double s1 = 0, s2 = 0;
    for (std::size_t c = 0; c < per_group; ++c) {
      const double gm = gamma[c0 + c];
      for (std::size_t s = 0; s < g.spatial; ++s) {
        const std::size_t i = base + c * g.spatial + s;
        const double d = dy[i] * gm;
        s1 += d;
        s2 += d * xhat[i];
      }
    }
    const double mean1 = s1 / static_cast<double>(m);
    const double mean2 = s2 / static_cast<double>(m);
    const double inv = rstd[static_cast<std::size_t>(blk)];
    for (std::size_t c = 0; c < per_group; ++c) {
      const double gm = gamma[c0 + c];
      for (std::size_t s = 0; s < g.spatial; ++s) {
        const std::size_t i = base + c * g.spatial + s;
        dx[i] += static_cast<T>(inv * (dy[i] * gm - mean1 - xhat[i] * mean2));
      }
    }
  }
}

#define VESSEL_INSTANTIATE_KERNELS(T)                                                                        \
  template void gemm_nn<T>(std::size_t, std::size_t, std::size_t, const T*, const T*, T*, bool);           \
  template void gemm_nt<T>(std::size_t, std::size_t, std::size_t, const T*, const T*, T*, bool);           \
  template void gemm_tn<T>(std::size_t, std::size_t, std::size_t, const T*, const T*, T*, bool);           \
  template void conv2d_forward<T>(const ConvGeometry&, std::span<const T>, std::span<const T>,             \
                                  std::span<const T>, std::span<T>);                                       \
  template void conv2d_backward<T>(const ConvGeometry&, std::span<const T>, std::span<const T>,            \
                                   std::span<const T>, std::span<T>, std::span<T>, std::span<T>);          \
  template void max_pool2d_forward<T>(const PoolGeometry&, std::span<const T>, std::span<T>,               \
                                      std::vector<std::size_t>&);                                          \
  template void max_pool2d_backward<T>(const PoolGeometry&, std::span<const T>,                            \
                                       std::span<const std::size_t>, std::span<T>);                        \
  template void avg_pool2d_forward<T>(const PoolGeometry&, std::span<const T>, std::span<T>);              \
  template void avg_pool2d_backward<T>(const PoolGeometry&, std::span<const T>, std::span<T>);             \
  template void group_norm_forward<T>(const NormGeometry&, T, std::span<const T>, std::span<const T>,      \
                                      std::span<const T>, std::span<T>, std::span<T>, std::span<T>,        \
                                      std::span<T>);                                                       \
  template void group_norm_backward<T>(const NormGeometry&, std::span<const T>, std::span<const T>,        \
                                       std::span<const T>, std::span<const T>, std::span<T>, std::span<T>, \
                                       std::span<T>);

VESSEL_INSTANTIATE_KERNELS(float)
VESSEL_INSTANTIATE_KERNELS(double)

}  // namespace kernels

}  // namespace vessel
