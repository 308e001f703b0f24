#include "vessel/augment.hpp"

#include <stdexcept>

#include <fmt/format.h>

#include "vessel/preprocess.hpp"

namespace vessel {

void Sample::validate() const {
  if (image.width != mask.width || image.height != mask.height) {
    throw std::invalid_argument(fmt::format("sample: image {}x{} and mask {}x{} differ", image.width, image.height,
                                            mask.width, mask.height));
  }
  if (mask.channels != 1) throw std::invalid_argument("sample: mask must have one channel");
  for (auto v : mask.pixels) {
    if (v > 1) throw std::invalid_argument("sample: mask values must be 0 or 1");
  }
}

Image rotate90(const Image& img, std::size_t quarter_turns) {
  quarter_turns %= 4;
  if (quarter_turns == 0) return img;
  const bool swap = quarter_turns % 2 == 1;
  Image out(swap ? img.height : img.width, swap ? img.width : img.height, img.channels);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      std::size_t nx = 0, ny = 0;
      switch (quarter_turns) {
        case 1:  // counter-clockwise
          nx = y;
          ny = img.width - 1 - x;
          break;
        case 2:
          nx = img.width - 1 - x;
          ny = img.height - 1 - y;
          break;
        default:
          nx = img.height - 1 - y;
          ny = x;
          break;
      }
      for (std::size_t c = 0; c < img.channels; ++c) out.at(nx, ny, c) = img.at(x, y, c);
    }
  }
  return out;
}

Image flip_horizontal(const Image& img) {
  Image out(img.width, img.height, img.channels);
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x)
      for (std::size_t c = 0; c < img.channels; ++c) out.at(img.width - 1 - x, y, c) = img.at(x, y, c);
  return out;
}

Image flip_vertical(const Image& img) {
  Image out(img.width, img.height, img.channels);
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x)
      for (std::size_t c = 0; c < img.channels; ++c) out.at(x, img.height - 1 - y, c) = img.at(x, y, c);
  return out;
}

Image crop(const Image& img, std::size_t x0, std::size_t y0, std::size_t width, std::size_t height) {
  if (x0 + width > img.width || y0 + height > img.height) {
    throw std::invalid_argument(fmt::format("crop: region {}x{}+{}+{} outside {}x{} image", width, height, x0, y0,
                                            img.width, img.height));
  }
  Image out(width, height, img.channels);
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x)
      for (std::size_t c = 0; c < img.channels; ++c) out.at(x, y, c) = img.at(x0 + x, y0 + y, c);
  return out;
}

std::vector<Sample> crop_set(const Sample& s) {
  s.validate();
  const std::size_t w = s.image.width, h = s.image.height;
  if (w < 2 || h < 2) throw std::invalid_argument(fmt::format("crop_set: image {}x{} too small to halve", w, h));
  const std::size_t half_w = w / 2, half_h = h / 2;
  const auto both = [&](std::size_t x0, std::size_t y0, std::size_t cw, std::size_t ch) {
    return Sample{crop(s.image, x0, y0, cw, ch), crop(s.mask, x0, y0, cw, ch)};
  };
  return {s, both(0, 0, half_w, h), both(half_w, 0, w - half_w, h), both(0, 0, w, half_h),
          both(0, half_h, w, h - half_h)};
}

std::vector<Sample> rotate_set(const Sample& s) {
  std::vector<Sample> out;
  for (std::size_t r = 0; r < kRotationCount; ++r) out.push_back({rotate90(s.image, r), rotate90(s.mask, r)});
  return out;
}

std::vector<Sample> flip_set(const Sample& s) {
  return {s, {flip_horizontal(s.image), flip_horizontal(s.mask)}, {flip_vertical(s.image), flip_vertical(s.mask)}};
}

std::vector<Sample> augment_sample(const Sample& s) {
  std::vector<Sample> out;
  out.reserve(kAugmentFactor);
  for (const auto& cropped : crop_set(s))
    for (const auto& rotated : rotate_set(cropped))
      for (auto& flipped : flip_set(rotated)) out.push_back(std::move(flipped));
  return out;
}

Sample augment_at(const Sample& s, std::size_t index) {
  if (index >= kAugmentFactor) throw std::out_of_range(fmt::format("augment_at: index {} >= {}", index, kAugmentFactor));
  const std::size_t c = index / (kRotationCount * kFlipCount);
  const std::size_t r = (index / kFlipCount) % kRotationCount;
  const std::size_t f = index % kFlipCount;
  Sample out = crop_set(s)[c];
  out = {rotate90(out.image, r), rotate90(out.mask, r)};
  if (f == 1) out = {flip_horizontal(out.image), flip_horizontal(out.mask)};
  if (f == 2) out = {flip_vertical(out.image), flip_vertical(out.mask)};
  return out;
}

std::vector<Sample> augment_all(const std::vector<Sample>& samples) {
  std::vector<Sample> out;
  out.reserve(samples.size() * kAugmentFactor);
  for (const auto& s : samples) {
    auto expanded = augment_sample(s);
    std::move(expanded.begin(), expanded.end(), std::back_inserter(out));
  }
  return out;
}

std::string augment_suffix(std::size_t index) {
  static constexpr char kFlips[] = {'n', 'h', 'v'};
  const std::size_t c = index / (kRotationCount * kFlipCount);
  const std::size_t r = (index / kFlipCount) % kRotationCount;
  const std::size_t f = index % kFlipCount;
  return fmt::format("_c{}_r{}_f{}", c, r * 90, kFlips[f]);
}

FinalizedSample finalize(const Sample& s, std::size_t height, std::size_t width) {
  s.validate();
  const Image img = (s.image.width == width && s.image.height == height) ? s.image
                                                                          : resize_bilinear(s.image, height, width);
  const Image mask =
      (s.mask.width == width && s.mask.height == height) ? s.mask : resize_nearest(s.mask, height, width);
  std::vector<float> m(mask.pixels.begin(), mask.pixels.end());
  return {normalize01(img), Tensor({1, height, width}, std::move(m))};
}

}  // namespace vessel
