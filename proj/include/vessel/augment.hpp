#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "vessel/image.hpp"
#include "vessel/tensor.hpp"

namespace vessel {

// An RGB image and its single-channel {0,1} vessel mask of the same size.
struct Sample {
  Image image;
  Image mask;

  void validate() const;
};

inline constexpr std::size_t kCropCount = 5;
inline constexpr std::size_t kRotationCount = 4;
inline constexpr std::size_t kFlipCount = 3;
inline constexpr std::size_t kAugmentFactor = kCropCount * kRotationCount * kFlipCount;

// Counter-clockwise quarter turns.
Image rotate90(const Image& img, std::size_t quarter_turns = 1);
Image flip_horizontal(const Image& img);
Image flip_vertical(const Image& img);
Image crop(const Image& img, std::size_t x0, std::size_t y0, std::size_t width, std::size_t height);

// [original, left, right, top, bottom]; odd extents give the floor to left/top.
std::vector<Sample> crop_set(const Sample& s);
// [identity, 90, 180, 270]
std::vector<Sample> rotate_set(const Sample& s);
// [identity, horizontal, vertical]
std::vector<Sample> flip_set(const Sample& s);

// crop x rotation x flip, crop-major: index = crop * 12 + rotation * 3 + flip.
std::vector<Sample> augment_sample(const Sample& s);
// The single augmentation with the given index, without building the rest.
Sample augment_at(const Sample& s, std::size_t index);
std::vector<Sample> augment_all(const std::vector<Sample>& samples);

// File-name suffix for augmentation index i, e.g. "_c3_r90_fh".
std::string augment_suffix(std::size_t index);

struct FinalizedSample {
  Tensor image;  // [3, H, W] in [0, 1]
  Tensor mask;   // [1, H, W] in {0, 1}
};

// Bilinear image resize + normalization; nearest-neighbour mask resize.
FinalizedSample finalize(const Sample& s, std::size_t height, std::size_t width);

}  // namespace vessel
