#pragma once

// Raw NCHW compute kernels. The kernels:: versions are OpenMP-parallel and
// used by the autodiff ops; reference:: holds straightforward serial loops
// kept as test oracles and benchmark baselines.
//
// Every parallel kernel partitions work over independent output elements and
// reduces in a fixed order, so results do not depend on the thread count.

#include <cstddef>
#include <span>
#include <vector>

namespace vessel {

struct ConvGeometry {
  std::size_t batch = 1;
  std::size_t in_channels = 1;
  std::size_t in_h = 1;
  std::size_t in_w = 1;
  std::size_t out_channels = 1;
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 1;
  std::size_t stride = 1;
  std::size_t pad_h = 0;
  std::size_t pad_w = 0;

  // Zero when the kernel does not fit.
  std::size_t out_h() const;
  std::size_t out_w() const;
  std::size_t patch_size() const { return in_channels * kernel_h * kernel_w; }
};

struct PoolGeometry {
  std::size_t batch = 1;
  std::size_t channels = 1;
  std::size_t in_h = 1;
  std::size_t in_w = 1;
  std::size_t window = 2;
  std::size_t stride = 2;
  std::size_t pad = 0;

  std::size_t out_h() const;
  std::size_t out_w() const;
};

struct NormGeometry {
  std::size_t batch = 1;
  std::size_t channels = 1;
  std::size_t spatial = 1;  // H * W
  std::size_t groups = 1;
};

namespace kernels {

// C[M,N] (+)= A[M,K] * B[K,N]
template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c, bool accumulate);
// C[M,N] (+)= A[M,K] * B[N,K]^T
template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c, bool accumulate);
// C[M,N] (+)= A[K,M]^T * B[K,N]
template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c, bool accumulate);

template <typename T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> x, std::span<const T> weight,
                    std::span<const T> bias, std::span<T> y);

// Accumulates into whichever of dx / dweight / dbias are non-empty.
template <typename T>
void conv2d_backward(const ConvGeometry& g, std::span<const T> x, std::span<const T> weight,
                     std::span<const T> dy, std::span<T> dx, std::span<T> dweight, std::span<T> dbias);

// argmax receives the flat input index of each window maximum (first on ties).
template <typename T>
void max_pool2d_forward(const PoolGeometry& g, std::span<const T> x, std::span<T> y,
                        std::vector<std::size_t>& argmax);
template <typename T>
void max_pool2d_backward(const PoolGeometry& g, std::span<const T> dy, std::span<const std::size_t> argmax,
                         std::span<T> dx);

// Padding cells are excluded from the divisor.
template <typename T>
void avg_pool2d_forward(const PoolGeometry& g, std::span<const T> x, std::span<T> y);
template <typename T>
void avg_pool2d_backward(const PoolGeometry& g, std::span<const T> dy, std::span<T> dx);

// Writes the normalized (pre-affine) values to xhat and per-(sample, group)
// mean / inverse std to mean and rstd, then y = gamma * xhat + beta.
template <typename T>
void group_norm_forward(const NormGeometry& g, T eps, std::span<const T> x, std::span<const T> gamma,
                        std::span<const T> beta, std::span<T> y, std::span<T> xhat, std::span<T> mean,
                        std::span<T> rstd);
template <typename T>
void group_norm_backward(const NormGeometry& g, std::span<const T> xhat, std::span<const T> rstd,
                         std::span<const T> gamma, std::span<const T> dy, std::span<T> dx,
                         std::span<T> dgamma, std::span<T> dbeta);

}  // namespace kernels

namespace reference {

template <typename T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> x, std::span<const T> weight,
                    std::span<const T> bias, std::span<T> y);
template <typename T>
void conv2d_backward(const ConvGeometry& g, std::span<const T> x, std::span<const T> weight,
                     std::span<const T> dy, std::span<T> dx, std::span<T> dweight, std::span<T> dbias);
template <typename T>
void max_pool2d_forward(const PoolGeometry& g, std::span<const T> x, std::span<T> y);
template <typename T>
void avg_pool2d_forward(const PoolGeometry& g, std::span<const T> x, std::span<T> y);
// Two-pass mean / variance per group, pre-affine output.
template <typename T>
void group_norm_forward(const NormGeometry& g, T eps, std::span<const T> x, std::span<T> y);

}  // namespace reference

}  // namespace vessel
