#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vessel/image.hpp"
#include "vessel/tensor.hpp"

namespace vessel {

struct PreprocessConfig {
  double clip_limit = 2.0;
  std::size_t tiles_x = 8;
  std::size_t tiles_y = 8;
  double gamma = 1.2;
};

// Per-channel CLAHE. Each tile's 256-bin histogram is clipped at
// clip_limit * (tile pixels / 256), the excess spread evenly over all bins,
// and mapped through lut[v] = round((cdf[v] - cdf_min) * 255 / (n - cdf_min)).
// Tiles holding a single grey level map through the identity. Pixels blend
// the four nearest tile mappings bilinearly by tile centre.
Image clahe(const Image& img, double clip_limit, std::size_t tiles_x, std::size_t tiles_y);

// out = round(255 * (in / 255)^gamma)
Image gamma_correct(const Image& img, double gamma);

// 5x5 per-channel median with reflect-101 borders.
Image median_filter5(const Image& img);

// Half-pixel-centre bilinear resampling.
Image resize_bilinear(const Image& img, std::size_t height, std::size_t width);
Image resize_nearest(const Image& img, std::size_t height, std::size_t width);
std::vector<float> resize_bilinear(std::span<const float> plane, std::size_t in_h, std::size_t in_w,
                                   std::size_t height, std::size_t width);

// [channels, H, W] float tensor, values / 255.
Tensor normalize01(const Image& img);

// clahe -> gamma_correct -> median_filter5 at native resolution.
Image preprocess_pipeline(const Image& img, const PreprocessConfig& cfg);

}  // namespace vessel
