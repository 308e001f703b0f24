#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vessel/ops.hpp"
#include "vessel/tensor.hpp"

namespace vessel {

struct ModelConfig {
  std::size_t input_height = 224;
  std::size_t input_width = 224;
  std::size_t input_channels = 3;
  // Multiplies every channel count; 1 is full scale, 1/8 is the desk-scale setting.
  double width_factor = 1.0;
  std::size_t groups = 16;
  double dropout_rate = 0.3;
  std::size_t block_a_repeats = 3;
  std::size_t block_b_repeats = 5;
  std::size_t final_repeats = 2;
  // Ablation switch: false drops every encoder-to-decoder concatenation.
  bool use_skips = true;
  float norm_epsilon = 1e-5f;
  std::uint64_t seed = 0;

  void validate() const;
  // base * width_factor rounded up to a multiple of groups.
  std::size_t channels(std::size_t base) const;
};

struct NamedParameter {
  std::string name;
  Tensor tensor;
};

// Inception-style U-Net: a grouped-norm InceptionV3 encoder (stem, block-A
// group, reduction, block-B group, reduction, final group) and a decoder of
// upsample -> concat(skip) -> conv stages, ending in dropout, a 1x1 conv and a
// sigmoid. Every conv in the encoder and decoder is followed by group norm and
// ReLU.
//
// Skip taps, deepest first: end of block-B group (1/16), end of block-A group
// (1/8, the third inception unit), stem stage 2 (1/4), stem stage 1 (1/2).
// A fifth upsampling stage without a skip restores full resolution.
class Model {
 public:
  explicit Model(ModelConfig config);
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return config_; }

  // x: [N, input_channels, H, W] with H, W divisible by 32. Returns
  // [N, 1, H, W] probabilities. `training` gates dropout only.
  Tensor forward(const Tensor& x, bool training, std::uint64_t seed) const;

  std::vector<NamedParameter>& parameters() { return params_; }
  const std::vector<NamedParameter>& parameters() const { return params_; }
  std::size_t parameter_count() const;
  const Tensor* find_parameter(std::string_view name) const;

  void set_requires_grad(bool value);
  void zero_grad();

 private:
  struct ConvBlock {
    Conv2dParams<float> conv;
    GroupNormParams<float> norm;
  };
  struct InceptionUnit {
    ConvBlock branch1x1;
    ConvBlock branch3x3_reduce, branch3x3_a, branch3x3_b;
    ConvBlock branch3x3dbl_reduce, branch3x3dbl_mid, branch3x3dbl_a, branch3x3dbl_b;
    ConvBlock branch_pool;
  };
  struct ReductionA {
    ConvBlock branch3x3;
    ConvBlock dbl_reduce, dbl_mid, dbl_out;
  };
  struct ReductionB {
    ConvBlock branch3x3_reduce, branch3x3;
    ConvBlock branch7_reduce, branch7_1x7, branch7_7x1, branch7_out;
  };
  struct UnitWidths {
    std::size_t b1, b3_reduce, b3_out, dbl_reduce, dbl_mid, dbl_out, pool;
  };

  ConvBlock make_block(const std::string& name, std::size_t in, std::size_t out, std::size_t kh, std::size_t kw,
                       std::size_t stride = 1);
  InceptionUnit make_unit(const std::string& name, std::size_t in, const UnitWidths& w, std::size_t& out);
  Tensor run(const ConvBlock& b, const Tensor& x) const;
  Tensor run(const InceptionUnit& u, const Tensor& x) const;
  Tensor run(const ReductionA& r, const Tensor& x) const;
  Tensor run(const ReductionB& r, const Tensor& x) const;

  ModelConfig config_;
  std::vector<NamedParameter> params_;

  std::vector<ConvBlock> stem_stage1_;
  std::vector<ConvBlock> stem_stage2_;
  std::vector<InceptionUnit> block_a_;
  ReductionA reduction_a_;
  std::vector<InceptionUnit> block_b_;
  ReductionB reduction_b_;
  std::vector<InceptionUnit> final_group_;
  std::vector<ConvBlock> decoder_;
  Conv2dParams<float> head_;
};

Model build_model(const ModelConfig& config);

// Conv weights ~ N(0, 2 / fan_in), biases and GN shifts 0, GN scales 1.
void init_gaussian(Model& model, std::uint64_t seed);
void gaussian_fill(std::span<float> values, std::size_t fan_in, std::mt19937_64& rng);

}  // namespace vessel
