#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

namespace vessel {

class ImageIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// 8-bit raster, row-major with interleaved channels. RGB images have three
// channels; masks and grey images have one.
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 3;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(std::size_t width, std::size_t height, std::size_t channels, std::uint8_t fill = 0)
      : width(width), height(height), channels(channels), pixels(width * height * channels, fill) {}

  std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c = 0) { return pixels[(y * width + x) * channels + c]; }
  std::uint8_t at(std::size_t x, std::size_t y, std::size_t c = 0) const {
    return pixels[(y * width + x) * channels + c];
  }
  bool empty() const { return pixels.empty(); }
  bool operator==(const Image&) const = default;
};

using RgbImage = Image;

enum class PixelFormat { rgb, gray };

// PNG or JPEG, detected from the file signature.
Image read_image(const std::filesystem::path& path, PixelFormat format);
void write_png(const std::filesystem::path& path, const Image& image);

bool is_image_file(const std::filesystem::path& path);

}  // namespace vessel
