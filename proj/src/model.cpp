#include "vessel/model.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace vessel {

namespace {

constexpr std::size_t kEncoderStride = 32;

// Base (width_factor = 1) channel counts, InceptionV3 widths at each level.
constexpr std::size_t kStem[] = {32, 32, 64, 80, 192};
constexpr std::size_t kDecoder[] = {256, 128, 64, 32, 16};

}  // namespace

void ModelConfig::validate() const {
  if (!(width_factor > 0.0 && width_factor <= 1.0)) {
    throw std::invalid_argument(fmt::format("model: width_factor {} must be in (0, 1]", width_factor));
  }
  if (groups < 1) throw std::invalid_argument("model: groups must be >= 1");
  if (input_channels < 1) throw std::invalid_argument("model: input_channels must be >= 1");
  if (input_height % kEncoderStride != 0 || input_width % kEncoderStride != 0 || input_height == 0 ||
      input_width == 0) {
    throw std::invalid_argument(fmt::format("model: input size {}x{} must be a positive multiple of {}", input_height,
                                            input_width, kEncoderStride));
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw std::invalid_argument(fmt::format("model: dropout_rate {} must be in [0, 1)", dropout_rate));
  }
  if (block_a_repeats < 1 || block_b_repeats < 1 || final_repeats < 1) {
    throw std::invalid_argument("model: block repeat counts must be >= 1");
  }
  if (!(norm_epsilon > 0.0f)) throw std::invalid_argument("model: norm_epsilon must be positive");
}

std::size_t ModelConfig::channels(std::size_t base) const {
  const auto scaled = static_cast<std::size_t>(std::ceil(static_cast<double>(base) * width_factor - 1e-9));
  const std::size_t at_least_one = std::max<std::size_t>(scaled, 1);
  return (at_least_one + groups - 1) / groups * groups;
}

Model::ConvBlock Model::make_block(const std::string& name, std::size_t in, std::size_t out, std::size_t kh,
                                   std::size_t kw, std::size_t stride) {
  ConvBlock b;
  b.conv.weight = Tensor::zeros({out, in, kh, kw});
  b.conv.stride = stride;
  b.conv.pad_h = kh / 2;
  b.conv.pad_w = kw / 2;
  b.norm = GroupNormParams<float>::make(out, config_.groups, config_.norm_epsilon);
  params_.push_back({name + ".conv.weight", b.conv.weight});
  params_.push_back({name + ".norm.gamma", b.norm.gamma});
  params_.push_back({name + ".norm.beta", b.norm.beta});
  return b;
}

Model::InceptionUnit Model::make_unit(const std::string& name, std::size_t in, const UnitWidths& w,
                                      std::size_t& out) {
  const auto& c = config_;
  InceptionUnit u;
  u.branch1x1 = make_block(name + ".branch1x1", in, c.channels(w.b1), 1, 1);
  u.branch3x3_reduce = make_block(name + ".branch3x3_reduce", in, c.channels(w.b3_reduce), 1, 1);
  u.branch3x3_a = make_block(name + ".branch3x3_1x3", c.channels(w.b3_reduce), c.channels(w.b3_out), 1, 3);
  u.branch3x3_b = make_block(name + ".branch3x3_3x1", c.channels(w.b3_reduce), c.channels(w.b3_out), 3, 1);
  u.branch3x3dbl_reduce = make_block(name + ".branch3x3dbl_reduce", in, c.channels(w.dbl_reduce), 1, 1);
  u.branch3x3dbl_mid =
      make_block(name + ".branch3x3dbl_3x3", c.channels(w.dbl_reduce), c.channels(w.dbl_mid), 3, 3);
  u.branch3x3dbl_a = make_block(name + ".branch3x3dbl_1x3", c.channels(w.dbl_mid), c.channels(w.dbl_out), 1, 3);
  u.branch3x3dbl_b = make_block(name + ".branch3x3dbl_3x1", c.channels(w.dbl_mid), c.channels(w.dbl_out), 3, 1);
  u.branch_pool = make_block(name + ".branch_pool", in, c.channels(w.pool), 1, 1);
  out = c.channels(w.b1) + 2 * c.channels(w.b3_out) + 2 * c.channels(w.dbl_out) + c.channels(w.pool);
  return u;
}

Model::Model(ModelConfig config) : config_(config) {
  config_.validate();
  const auto& c = config_;
  const std::string enc = "encoder";

  stem_stage1_.push_back(make_block(enc + ".stem.conv1", c.input_channels, c.channels(kStem[0]), 3, 3, 2));
  stem_stage1_.push_back(make_block(enc + ".stem.conv2", c.channels(kStem[0]), c.channels(kStem[1]), 3, 3));
  stem_stage1_.push_back(make_block(enc + ".stem.conv3", c.channels(kStem[1]), c.channels(kStem[2]), 3, 3));
  stem_stage2_.push_back(make_block(enc + ".stem.conv4", c.channels(kStem[2]), c.channels(kStem[3]), 1, 1));
  stem_stage2_.push_back(make_block(enc + ".stem.conv5", c.channels(kStem[3]), c.channels(kStem[4]), 3, 3));
  const std::size_t tap_half = c.channels(kStem[2]);
  const std::size_t tap_quarter = c.channels(kStem[4]);

  std::size_t width = tap_quarter;
  const UnitWidths a_widths{64, 48, 48, 64, 96, 48, 32};
  for (std::size_t i = 0; i < c.block_a_repeats; ++i) {
    std::size_t out = 0;
    block_a_.push_back(make_unit(fmt::format("{}.blockA.{}", enc, i), width, a_widths, out));
    width = out;
  }
  const std::size_t tap_eighth = width;

  reduction_a_.branch3x3 = make_block(enc + ".reductionA.branch3x3", width, c.channels(384), 3, 3, 2);
  reduction_a_.dbl_reduce = make_block(enc + ".reductionA.branch3x3dbl_reduce", width, c.channels(64), 1, 1);
  reduction_a_.dbl_mid = make_block(enc + ".reductionA.branch3x3dbl_3x3a", c.channels(64), c.channels(96), 3, 3);
  reduction_a_.dbl_out =
      make_block(enc + ".reductionA.branch3x3dbl_3x3b", c.channels(96), c.channels(96), 3, 3, 2);
  width = c.channels(384) + c.channels(96) + width;

  const UnitWidths b_widths{192, 160, 96, 160, 160, 96, 192};
  for (std::size_t i = 0; i < c.block_b_repeats; ++i) {
    std::size_t out = 0;
    block_b_.push_back(make_unit(fmt::format("{}.blockB.{}", enc, i), width, b_widths, out));
    width = out;
  }
  const std::size_t tap_sixteenth = width;

  reduction_b_.branch3x3_reduce = make_block(enc + ".reductionB.branch3x3_reduce", width, c.channels(192), 1, 1);
  reduction_b_.branch3x3 = make_block(enc + ".reductionB.branch3x3", c.channels(192), c.channels(320), 3, 3, 2);
  reduction_b_.branch7_reduce = make_block(enc + ".reductionB.branch7x7_reduce", width, c.channels(192), 1, 1);
  reduction_b_.branch7_1x7 = make_block(enc + ".reductionB.branch7x7_1x7", c.channels(192), c.channels(192), 1, 7);
  reduction_b_.branch7_7x1 = make_block(enc + ".reductionB.branch7x7_7x1", c.channels(192), c.channels(192), 7, 1);
  reduction_b_.branch7_out =
      make_block(enc + ".reductionB.branch7x7_3x3", c.channels(192), c.channels(192), 3, 3, 2);
  width = c.channels(320) + c.channels(192) + width;

  const UnitWidths final_widths{320, 384, 384, 448, 384, 384, 192};
  for (std::size_t i = 0; i < c.final_repeats; ++i) {
    std::size_t out = 0;
    final_group_.push_back(make_unit(fmt::format("{}.final.{}", enc, i), width, final_widths, out));
    width = out;
  }

  const std::size_t skips[] = {tap_sixteenth, tap_eighth, tap_quarter, tap_half, 0};
  for (std::size_t s = 0; s < 5; ++s) {
    const std::size_t in = width + (c.use_skips ? skips[s] : 0);
    decoder_.push_back(make_block(fmt::format("decoder.stage{}", s + 1), in, c.channels(kDecoder[s]), 3, 3));
    width = c.channels(kDecoder[s]);
  }

  head_.weight = Tensor::zeros({1, width, 1, 1});
  head_.bias = Tensor::zeros({1});
  params_.push_back({"head.conv.weight", head_.weight});
  params_.push_back({"head.conv.bias", head_.bias});

  init_gaussian(*this, c.seed);
}

Tensor Model::run(const ConvBlock& b, const Tensor& x) const { return relu(group_norm(conv2d(x, b.conv), b.norm)); }

Tensor Model::run(const InceptionUnit& u, const Tensor& x) const {
  const auto b1 = run(u.branch1x1, x);
  const auto t = run(u.branch3x3_reduce, x);
  const auto d = run(u.branch3x3dbl_mid, run(u.branch3x3dbl_reduce, x));
  const auto pool = run(u.branch_pool, avg_pool2d(x, 3, 1, 1));
  return concat_channels<float>({b1, run(u.branch3x3_a, t), run(u.branch3x3_b, t), run(u.branch3x3dbl_a, d),
                                 run(u.branch3x3dbl_b, d), pool});
}

Tensor Model::run(const ReductionA& r, const Tensor& x) const {
  const auto b3 = run(r.branch3x3, x);
  const auto dbl = run(r.dbl_out, run(r.dbl_mid, run(r.dbl_reduce, x)));
  return concat_channels<float>({b3, dbl, max_pool2d(x, 3, 2, 1)});
}

Tensor Model::run(const ReductionB& r, const Tensor& x) const {
  const auto b3 = run(r.branch3x3, run(r.branch3x3_reduce, x));
  const auto b7 = run(r.branch7_out, run(r.branch7_7x1, run(r.branch7_1x7, run(r.branch7_reduce, x))));
  return concat_channels<float>({b3, b7, max_pool2d(x, 3, 2, 1)});
}

Tensor Model::forward(const Tensor& x, bool training, std::uint64_t seed) const {
  if (x.rank() != 4 || x.dim(1) != config_.input_channels || x.dim(2) % kEncoderStride != 0 ||
      x.dim(3) % kEncoderStride != 0) {
    throw ShapeError(fmt::format("model: input {} must be [N,{},H,W] with H, W multiples of {}", shape_str(x.shape()),
                                 config_.input_channels, kEncoderStride));
  }
  Tensor h = x;
  for (const auto& b : stem_stage1_) h = run(b, h);
  const Tensor tap_half = h;
  h = max_pool2d(h, 3, 2, 1);
  for (const auto& b : stem_stage2_) h = run(b, h);
  const Tensor tap_quarter = h;
  h = max_pool2d(h, 3, 2, 1);
  for (const auto& u : block_a_) h = run(u, h);
  const Tensor tap_eighth = h;
  h = run(reduction_a_, h);
  for (const auto& u : block_b_) h = run(u, h);
  const Tensor tap_sixteenth = h;
  h = run(reduction_b_, h);
  for (const auto& u : final_group_) h = run(u, h);

  const Tensor* skips[] = {&tap_sixteenth, &tap_eighth, &tap_quarter, &tap_half, nullptr};
  for (std::size_t s = 0; s < decoder_.size(); ++s) {
    h = upsample2x(h);
    if (config_.use_skips && skips[s] != nullptr) h = concat_channels<float>({h, *skips[s]});
    h = run(decoder_[s], h);
  }
  h = dropout(h, config_.dropout_rate, training, seed);
  return sigmoid(conv2d(h, head_));
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.numel();
  return n;
}

const Tensor* Model::find_parameter(std::string_view name) const {
  for (const auto& p : params_) {
    if (p.name == name) return &p.tensor;
  }
  return nullptr;
}

void Model::set_requires_grad(bool value) {
  for (auto& p : params_) p.tensor.set_requires_grad(value);
}

void Model::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

Model build_model(const ModelConfig& config) { return Model(config); }

void gaussian_fill(std::span<float> values, std::size_t fan_in, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  for (float& v : values) v = static_cast<float>(normal(rng));
}

namespace {

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

}  // namespace

void init_gaussian(Model& model, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& p : model.parameters()) {
    auto values = p.tensor.mutable_data();
    if (ends_with(p.name, ".weight") && p.tensor.rank() == 4) {
      const auto& s = p.tensor.shape();
      gaussian_fill(values, s[1] * s[2] * s[3], rng);
    } else if (ends_with(p.name, ".gamma")) {
      std::fill(values.begin(), values.end(), 1.0f);
    } else {
      std::fill(values.begin(), values.end(), 0.0f);
    }
  }
}

}  // namespace vessel
