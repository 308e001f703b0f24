#include "vessel/preprocess.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace vessel {

namespace {

using index_t = std::ptrdiff_t;
using Lut = std::array<float, 256>;

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

Lut equalize_tile(std::array<std::size_t, 256> hist, std::size_t area, double clip_limit) {
  Lut lut{};
  const auto occupied = std::count_if(hist.begin(), hist.end(), [](std::size_t h) { return h > 0; });
  if (occupied <= 1) {
    for (std::size_t v = 0; v < 256; ++v) lut[v] = static_cast<float>(v);
    return lut;
  }

  const double limit_real = clip_limit * static_cast<double>(area) / 256.0;
  if (limit_real < static_cast<double>(area)) {
    const auto limit = std::max<std::size_t>(1, static_cast<std::size_t>(limit_real));
    std::size_t excess = 0;
    for (auto& h : hist) {
      if (h > limit) {
        excess += h - limit;
        h = limit;
      }
    }
    const std::size_t share = excess / 256;
    std::size_t residual = excess % 256;
    for (auto& h : hist) h += share;
    if (residual > 0) {
      const std::size_t step = std::max<std::size_t>(256 / residual, 1);
      for (std::size_t v = 0; v < 256 && residual > 0; v += step, --residual) ++hist[v];
    }
  }

  std::array<std::size_t, 256> cdf{};
  std::size_t run = 0;
  for (std::size_t v = 0; v < 256; ++v) cdf[v] = (run += hist[v]);
  std::size_t cdf_min = 0;
  for (std::size_t v = 0; v < 256; ++v) {
    if (hist[v] > 0) {
      cdf_min = cdf[v];
      break;
    }
  }
  const std::size_t total = cdf[255];
  if (total == cdf_min) {
    for (std::size_t v = 0; v < 256; ++v) lut[v] = static_cast<float>(v);
    return lut;
  }
  for (std::size_t v = 0; v < 256; ++v) {
    const double num = cdf[v] > cdf_min ? static_cast<double>(cdf[v] - cdf_min) : 0.0;
    lut[v] = static_cast<float>(std::round(num * 255.0 / static_cast<double>(total - cdf_min)));
  }
  return lut;
}

// Neighbouring tile indices and blend weight for a pixel coordinate.
struct Blend {
  std::size_t lo, hi;
  double w;  // weight of hi
};

std::vector<Blend> blend_axis(std::size_t extent, std::size_t tiles) {
  std::vector<double> centres(tiles);
  for (std::size_t t = 0; t < tiles; ++t) {
    const std::size_t start = t * extent / tiles, end = (t + 1) * extent / tiles;
    centres[t] = (static_cast<double>(start) + static_cast<double>(end) - 1.0) / 2.0;
  }
  std::vector<Blend> out(extent);
  for (std::size_t p = 0; p < extent; ++p) {
    const double x = static_cast<double>(p);
    if (x <= centres.front()) {
      out[p] = {0, 0, 0.0};
    } else if (x >= centres.back()) {
      out[p] = {tiles - 1, tiles - 1, 0.0};
    } else {
      std::size_t t = 0;
      while (!(centres[t] <= x && x < centres[t + 1])) ++t;
      out[p] = {t, t + 1, (x - centres[t]) / (centres[t + 1] - centres[t])};
    }
  }
  return out;
}

std::size_t reflect101(index_t i, std::size_t n) {
  if (n == 1) return 0;
  const index_t period = 2 * (static_cast<index_t>(n) - 1);
  i = std::abs(i) % period;
  if (i >= static_cast<index_t>(n)) i = period - i;
  return static_cast<std::size_t>(i);
}

}  // namespace

Image clahe(const Image& img, double clip_limit, std::size_t tiles_x, std::size_t tiles_y) {
  if (tiles_x < 1 || tiles_y < 1) throw std::invalid_argument("clahe: tile counts must be >= 1");
  if (!(clip_limit > 0)) throw std::invalid_argument("clahe: clip_limit must be positive");
  if (img.empty()) return img;
  const std::size_t tx = std::min(tiles_x, img.width), ty = std::min(tiles_y, img.height);
  const std::size_t nch = img.channels;

  // luts[(ty_idx * tx + tx_idx) * nch + c]
  std::vector<Lut> luts(tx * ty * nch);
  const index_t tile_count = static_cast<index_t>(tx * ty);
#pragma omp parallel for schedule(static)
  for (index_t t = 0; t < tile_count; ++t) {
    const std::size_t j = static_cast<std::size_t>(t) % tx, i = static_cast<std::size_t>(t) / tx;
    const std::size_t x0 = j * img.width / tx, x1 = (j + 1) * img.width / tx;
    const std::size_t y0 = i * img.height / ty, y1 = (i + 1) * img.height / ty;
    for (std::size_t c = 0; c < nch; ++c) {
      std::array<std::size_t, 256> hist{};
      for (std::size_t y = y0; y < y1; ++y)
        for (std::size_t x = x0; x < x1; ++x) ++hist[img.at(x, y, c)];
      luts[static_cast<std::size_t>(t) * nch + c] = equalize_tile(hist, (x1 - x0) * (y1 - y0), clip_limit);
    }
  }

  const auto bx = blend_axis(img.width, tx);
  const auto by = blend_axis(img.height, ty);
  Image out(img.width, img.height, nch);
  const index_t rows = static_cast<index_t>(img.height);
#pragma omp parallel for schedule(static)
  for (index_t yi = 0; yi < rows; ++yi) {
    const auto y = static_cast<std::size_t>(yi);
    const Blend& v = by[y];
    for (std::size_t x = 0; x < img.width; ++x) {
      const Blend& h = bx[x];
      for (std::size_t c = 0; c < nch; ++c) {
        const std::uint8_t px = img.at(x, y, c);
        const auto lut = [&](std::size_t ti, std::size_t tj) { return luts[(ti * tx + tj) * nch + c][px]; };
        const double top = (1 - h.w) * lut(v.lo, h.lo) + h.w * lut(v.lo, h.hi);
        const double bottom = (1 - h.w) * lut(v.hi, h.lo) + h.w * lut(v.hi, h.hi);
        out.at(x, y, c) = to_byte((1 - v.w) * top + v.w * bottom);
      }
    }
  }
  return out;
}

Image gamma_correct(const Image& img, double gamma) {
  if (!(gamma > 0)) throw std::invalid_argument(fmt::format("gamma_correct: gamma {} must be positive", gamma));
  std::array<std::uint8_t, 256> lut{};
  for (std::size_t v = 0; v < 256; ++v) lut[v] = to_byte(255.0 * std::pow(static_cast<double>(v) / 255.0, gamma));
  Image out = img;
  for (auto& p : out.pixels) p = lut[p];
  return out;
}

Image median_filter5(const Image& img) {
  Image out(img.width, img.height, img.channels);
  const index_t rows = static_cast<index_t>(img.height);
#pragma omp parallel for schedule(static)
  for (index_t yi = 0; yi < rows; ++yi) {
    std::array<std::uint8_t, 25> window{};
    for (std::size_t x = 0; x < img.width; ++x) {
      for (std::size_t c = 0; c < img.channels; ++c) {
        std::size_t k = 0;
        for (index_t dy = -2; dy <= 2; ++dy) {
          const std::size_t sy = reflect101(yi + dy, img.height);
          for (index_t dx = -2; dx <= 2; ++dx) {
            window[k++] = img.at(reflect101(static_cast<index_t>(x) + dx, img.width), sy, c);
          }
        }
        std::nth_element(window.begin(), window.begin() + 12, window.end());
        out.at(x, static_cast<std::size_t>(yi), c) = window[12];
      }
    }
  }
  return out;
}

namespace {

struct Tap {
  std::size_t i0, i1;
  double f;
};

std::vector<Tap> bilinear_taps(std::size_t in, std::size_t out) {
  std::vector<Tap> taps(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t d = 0; d < out; ++d) {
    double src = (static_cast<double>(d) + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const auto i0 = static_cast<std::size_t>(std::floor(src));
    taps[d] = {i0, std::min(i0 + 1, in - 1), src - static_cast<double>(i0)};
  }
  return taps;
}

}  // namespace

Image resize_bilinear(const Image& img, std::size_t height, std::size_t width) {
  if (height < 1 || width < 1) throw std::invalid_argument("resize_bilinear: target must be at least 1x1");
  const auto tx = bilinear_taps(img.width, width);
  const auto ty = bilinear_taps(img.height, height);
  Image out(width, height, img.channels);
  const index_t rows = static_cast<index_t>(height);
#pragma omp parallel for schedule(static)
  for (index_t yi = 0; yi < rows; ++yi) {
    const Tap& v = ty[static_cast<std::size_t>(yi)];
    for (std::size_t x = 0; x < width; ++x) {
      const Tap& h = tx[x];
      for (std::size_t c = 0; c < img.channels; ++c) {
        const double top = (1 - h.f) * img.at(h.i0, v.i0, c) + h.f * img.at(h.i1, v.i0, c);
        const double bottom = (1 - h.f) * img.at(h.i0, v.i1, c) + h.f * img.at(h.i1, v.i1, c);
        out.at(x, static_cast<std::size_t>(yi), c) = to_byte((1 - v.f) * top + v.f * bottom);
      }
    }
  }
  return out;
}

std::vector<float> resize_bilinear(std::span<const float> plane, std::size_t in_h, std::size_t in_w,
                                   std::size_t height, std::size_t width) {
  if (height < 1 || width < 1) throw std::invalid_argument("resize_bilinear: target must be at least 1x1");
  const auto tx = bilinear_taps(in_w, width);
  const auto ty = bilinear_taps(in_h, height);
  std::vector<float> out(height * width);
  for (std::size_t y = 0; y < height; ++y) {
    const Tap& v = ty[y];
    for (std::size_t x = 0; x < width; ++x) {
      const Tap& h = tx[x];
      const double top = (1 - h.f) * plane[v.i0 * in_w + h.i0] + h.f * plane[v.i0 * in_w + h.i1];
      const double bottom = (1 - h.f) * plane[v.i1 * in_w + h.i0] + h.f * plane[v.i1 * in_w + h.i1];
      out[y * width + x] = static_cast<float>((1 - v.f) * top + v.f * bottom);
    }
  }
  return out;
}

Image resize_nearest(const Image& img, std::size_t height, std::size_t width) {
  if (height < 1 || width < 1) throw std::invalid_argument("resize_nearest: target must be at least 1x1");
  const auto source = [](std::size_t d, std::size_t in, std::size_t out) {
    const double src = (static_cast<double>(d) + 0.5) * static_cast<double>(in) / static_cast<double>(out);
    return std::min(in - 1, static_cast<std::size_t>(src));
  };
  Image out(width, height, img.channels);
  for (std::size_t y = 0; y < height; ++y) {
    const std::size_t sy = source(y, img.height, height);
    for (std::size_t x = 0; x < width; ++x) {
      const std::size_t sx = source(x, img.width, width);
      for (std::size_t c = 0; c < img.channels; ++c) out.at(x, y, c) = img.at(sx, sy, c);
    }
  }
  return out;
}

Tensor normalize01(const Image& img) {
  std::vector<float> out(img.pixels.size());
  const std::size_t plane = img.width * img.height;
  for (std::size_t i = 0; i < plane; ++i)
    for (std::size_t c = 0; c < img.channels; ++c)
      out[c * plane + i] = static_cast<float>(img.pixels[i * img.channels + c]) / 255.0f;
  return Tensor({img.channels, img.height, img.width}, std::move(out));
}

Image preprocess_pipeline(const Image& img, const PreprocessConfig& cfg) {
  return median_filter5(gamma_correct(clahe(img, cfg.clip_limit, cfg.tiles_x, cfg.tiles_y), cfg.gamma));
}

}  // namespace vessel
