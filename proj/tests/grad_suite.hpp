#pragma once

#include <numeric>
#include <string>
#include <vector>

#include "support.hpp"
#include "vessel/gradcheck.hpp"
#include "vessel/losses.hpp"
#include "vessel/ops.hpp"

namespace vessel::testing {

struct GradResult {
  std::string name;
  double error;
};

// Shuffled, evenly spaced values: no ties within a pooling window, so max is
// differentiable under small probes.
template <typename T>
BasicTensor<T> distinct_tensor(Shape shape, std::uint64_t seed) {
  const std::size_t n = shape_numel(shape);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  deterministic_shuffle(order, seed);
  std::vector<T> data(n);
  const double spacing = 2.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) data[i] = static_cast<T>(-1.0 + spacing * (static_cast<double>(order[i]) + 0.5));
  return BasicTensor<T>(std::move(shape), std::move(data), true);
}

template <typename T>
BasicTensor<T> binary_target(Shape shape, std::uint64_t seed) {
  std::vector<T> data(shape_numel(shape));
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = hash_uniform(seed, i) < 0.3 ? T(1) : T(0);
  return BasicTensor<T>(std::move(shape), std::move(data));
}

// Every differentiable op against central differences.
template <typename T>
std::vector<GradResult> gradient_suite() {
  constexpr bool single = sizeof(T) == 4;
  const double h = single ? 1e-2 : 1e-6;
  const double h_pool = single ? 2e-3 : 1e-6;
  std::vector<GradResult> out;
  const auto check = [&](std::string name, const TensorFn<T>& f, const BasicTensor<T>& x, double step) {
    out.push_back({std::move(name), finite_diff_check<T>(f, x, step)});
  };

  const auto x = random_tensor<T>({2, 3, 6, 5}, 1);
  const auto w = random_tensor<T>({4, 3, 3, 3}, 2, -0.5, 0.5);
  const auto b = random_tensor<T>({4}, 3);
  const auto conv_x = [&](std::size_t stride, std::size_t pad) {
    return [=](const BasicTensor<T>& v) { return conv2d<T>(v, {w, b, stride, pad, pad}); };
  };
  check("conv2d dx (3x3, pad 1)", conv_x(1, 1), x, h);
  check("conv2d dx (3x3, stride 2)", conv_x(2, 0), x, h);
  check("conv2d dw", [&](const BasicTensor<T>& v) { return conv2d<T>(x, {v, b, 1, 1, 1}); }, w, h);
  check("conv2d db", [&](const BasicTensor<T>& v) { return conv2d<T>(x, {w, v, 1, 1, 1}); }, b, h);
  const auto w_rect = random_tensor<T>({3, 3, 1, 3}, 4, -0.5, 0.5);
  check("conv2d dx (1x3, pad 0x1)", [&](const BasicTensor<T>& v) { return conv2d<T>(v, {w_rect, {}, 1, 0, 1}); }, x,
        h);

  const auto xp = distinct_tensor<T>({2, 2, 7, 6}, 5);
  check("max_pool2d 3/2/pad1", [](const BasicTensor<T>& v) { return max_pool2d<T>(v, 3, 2, 1); }, xp, h_pool);
  check("max_pool2d 2/2", [](const BasicTensor<T>& v) { return max_pool2d<T>(v, 2, 2, 0); }, xp, h_pool);
  check("avg_pool2d 3/1/pad1", [](const BasicTensor<T>& v) { return avg_pool2d<T>(v, 3, 1, 1); }, xp, h);
  check("avg_pool2d 2/2", [](const BasicTensor<T>& v) { return avg_pool2d<T>(v, 2, 2, 0); }, xp, h);
  check("upsample2x", [](const BasicTensor<T>& v) { return upsample2x<T>(v); }, x, h);

  const auto other = random_tensor<T>({2, 2, 6, 5}, 6);
  check("concat_channels (first)", [&](const BasicTensor<T>& v) { return concat_channels<T>({v, other}); }, x, h);
  check("concat_channels (second)", [&](const BasicTensor<T>& v) { return concat_channels<T>({x, v}); }, other, h);
  check("sigmoid", [](const BasicTensor<T>& v) { return sigmoid<T>(v); }, random_tensor<T>({3, 7}, 7, -4, 4), h);
  check("relu", [](const BasicTensor<T>& v) { return relu<T>(v); }, distinct_tensor<T>({2, 25}, 8), h_pool);
  check("dropout (training)", [](const BasicTensor<T>& v) { return dropout<T>(v, 0.3, true, 99); }, x, h);
  check("mul/div/add/log", [&](const BasicTensor<T>& v) {
    const auto pos = add_scalar<T>(mul<T>(v, v), T(1));
    return log<T>(div<T>(add<T>(pos, v), pos));
  }, random_tensor<T>({4, 4}, 9, -0.5, 0.5), h);

  const auto xg = random_tensor<T>({2, 32, 4, 4}, 10, -2, 2);
  auto gn = GroupNormParams<T>::make(32, 16);
  gn.gamma = random_tensor<T>({32}, 11, 0.5, 1.5);
  gn.beta = random_tensor<T>({32}, 12);
  check("group_norm dx", [&](const BasicTensor<T>& v) { return group_norm<T>(v, gn); }, xg, h);
  check("group_norm dgamma", [&](const BasicTensor<T>& v) {
    auto p = gn;
    p.gamma = v;
    return group_norm<T>(xg, p);
  }, gn.gamma, h);
  check("group_norm dbeta", [&](const BasicTensor<T>& v) {
    auto p = gn;
    p.beta = v;
    return group_norm<T>(xg, p);
  }, gn.beta, h);

  const auto pred = random_tensor<T>({2, 1, 5, 5}, 13, 0.05, 0.95);
  const auto target = binary_target<T>({2, 1, 5, 5}, 14);
  const double h_loss = single ? 1e-3 : 1e-7;
  check("bce", [&](const BasicTensor<T>& v) { return bce<T>({v, target}); }, pred, h_loss);
  check("jaccard_loss", [&](const BasicTensor<T>& v) { return jaccard_loss<T>({v, target}); }, pred, h_loss);
  check("jaccard_loss (no vessels)", [&](const BasicTensor<T>& v) {
    return jaccard_loss<T>({v, BasicTensor<T>::zeros({2, 1, 5, 5})});
  }, pred, h_loss);
  check("combined_loss", [&](const BasicTensor<T>& v) { return combined_loss<T>({v, target}); }, pred, h_loss);
  check("sigmoid -> combined_loss", [&](const BasicTensor<T>& v) {
    return combined_loss<T>({sigmoid<T>(v), target});
  }, random_tensor<T>({2, 1, 5, 5}, 15, -3, 3), h);
  return out;
}

}  // namespace vessel::testing
