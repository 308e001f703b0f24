#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "vessel/augment.hpp"
#include "vessel/image.hpp"
#include "vessel/random.hpp"
#include "vessel/tensor.hpp"

namespace vessel::testing {

template <typename T>
BasicTensor<T> random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0,
                             bool requires_grad = true) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<T> data(shape_numel(shape));
  for (auto& v : data) v = static_cast<T>(dist(rng));
  return BasicTensor<T>(std::move(shape), std::move(data), requires_grad);
}

inline Image random_image(std::size_t width, std::size_t height, std::size_t channels, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Image img(width, height, channels);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng() & 0xFF);
  return img;
}

inline Image random_mask(std::size_t width, std::size_t height, std::uint64_t seed, double density = 0.3) {
  Image m(width, height, 1);
  for (std::size_t i = 0; i < m.pixels.size(); ++i) m.pixels[i] = hash_uniform(seed, i) < density ? 1 : 0;
  return m;
}

// Fundus-like toy pair: reddish background with noise, a few dark smooth
// curves of 1.5-3 px half-width as vessels.
inline Sample synthetic_vessel_pair(std::size_t size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image mask(size, size, 1);
  const double s = static_cast<double>(size);
  for (int curve = 0; curve < 4; ++curve) {
    const double y0 = u(rng) * s, amp = (0.1 + 0.2 * u(rng)) * s, freq = 1.0 + 2.0 * u(rng), phase = 6.28 * u(rng);
    const double half_width = 1.5 + 1.5 * u(rng);
    const bool vertical = curve % 2 == 1;
    for (std::size_t y = 0; y < size; ++y) {
      for (std::size_t x = 0; x < size; ++x) {
        const double a = vertical ? static_cast<double>(y) : static_cast<double>(x);
        const double b = vertical ? static_cast<double>(x) : static_cast<double>(y);
        const double centre = y0 + amp * std::sin(freq * 6.28318 * a / s + phase);
        if (std::abs(b - centre) <= half_width) mask.at(x, y) = 1;
      }
    }
  }
  Image img(size, size, 3);
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const double noise = 20.0 * (u(rng) - 0.5);
      const double v = mask.at(x, y) ? 0.35 : 1.0;
      img.at(x, y, 0) = static_cast<std::uint8_t>(std::clamp(200.0 * v + noise, 0.0, 255.0));
      img.at(x, y, 1) = static_cast<std::uint8_t>(std::clamp(110.0 * v + noise, 0.0, 255.0));
      img.at(x, y, 2) = static_cast<std::uint8_t>(std::clamp(60.0 * v + noise, 0.0, 255.0));
    }
  }
  return {img, mask};
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("vessel_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace vessel::testing
