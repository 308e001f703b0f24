#include <doctest.h>

#include "../oracles.hpp"
#include "../support.hpp"
#include "vessel/preprocess.hpp"

using namespace vessel;
using testing::random_image;

TEST_CASE("median_filter5 equals the sort-based oracle") {
  for (std::uint64_t s = 0; s < 100; ++s) {
    const Image img = random_image(32, 32, s % 2 ? 3 : 1, s);
    REQUIRE(median_filter5(img) == testing::median5_oracle(img));
  }
  const Image tiny = random_image(3, 2, 1, 7);
  CHECK(median_filter5(tiny) == testing::median5_oracle(tiny));
}

TEST_CASE("median_filter5 removes isolated impulses") {
  Image img(9, 9, 1, 100);
  img.at(4, 4) = 255;
  img.at(0, 0) = 0;
  CHECK(median_filter5(img) == Image(9, 9, 1, 100));
}

TEST_CASE("gamma correction keeps endpoints and darkens mid-tones") {
  Image img(3, 1, 1);
  img.pixels = {0, 128, 255};
  const Image out = gamma_correct(img, 1.2);
  CHECK(out.pixels[0] == 0);
  CHECK(out.pixels[2] == 255);
  CHECK(out.pixels[1] == static_cast<std::uint8_t>(std::lround(255.0 * std::pow(128.0 / 255.0, 1.2))));
  CHECK(gamma_correct(img, 1.0) == img);
  CHECK_THROWS_AS(gamma_correct(img, 0.0), std::invalid_argument);
}

TEST_CASE("CLAHE with one tile and no clipping is global equalization") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    Image img = random_image(40, 30, 3, s);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(60 + p / 4);  // compressed range
    REQUIRE(clahe(img, 1000.0, 1, 1) == testing::global_equalization_oracle(img));
  }
}

TEST_CASE("CLAHE maps constant images to themselves") {
  const Image flat(64, 64, 3, 77);
  CHECK(clahe(flat, 2.0, 8, 8) == flat);
}

TEST_CASE("CLAHE clipping limits contrast amplification") {
  Image img = random_image(64, 64, 1, 3);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(120 + p % 8);
  const Image strong = clahe(img, 1000.0, 8, 8), mild = clahe(img, 1.0, 8, 8);
  const auto spread = [](const Image& i) {
    const auto [lo, hi] = std::minmax_element(i.pixels.begin(), i.pixels.end());
    return int(*hi) - int(*lo);
  };
  CHECK(spread(mild) < spread(strong));
  CHECK_THROWS_AS(clahe(img, 0.0, 8, 8), std::invalid_argument);
}

TEST_CASE("resizing") {
  const Image img = random_image(20, 10, 3, 5);
  CHECK(resize_bilinear(img, 10, 20) == img);
  CHECK(resize_nearest(img, 10, 20) == img);
  const Image up = resize_nearest(img, 20, 40);
  CHECK(up.at(1, 1, 2) == img.at(0, 0, 2));
  CHECK(up.at(39, 19, 0) == img.at(19, 9, 0));
  const Image flat(7, 5, 3, 42);
  CHECK(resize_bilinear(flat, 13, 11) == Image(11, 13, 3, 42));
}

TEST_CASE("normalize01 yields a [C,H,W] tensor in [0,1]") {
  Image img(2, 1, 3);
  img.pixels = {0, 51, 255, 255, 0, 102};
  const Tensor t = normalize01(img);
  CHECK(t.shape() == Shape{3, 1, 2});
  CHECK(t.data()[0] == 0.0f);
  CHECK(t.data()[1] == 1.0f);
  CHECK(t.data()[2] == doctest::Approx(0.2));
  CHECK(t.data()[5] == doctest::Approx(0.4));
}

TEST_CASE("pipeline keeps the native size") {
  const Image img = random_image(33, 27, 3, 8);
  const Image out = preprocess_pipeline(img, PreprocessConfig{});
  CHECK(out.width == 33);
  CHECK(out.height == 27);
}
