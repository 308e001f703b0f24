#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vessel/tensor.hpp"

namespace vessel {

class Model;

struct NAdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Moments are allocated on the first step and indexed like the parameter list.
template <typename T>
struct NAdamState {
  NAdamConfig config;
  std::uint64_t t = 0;
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
};

// m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
// p -= lr (b1 m_hat + (1 - b1) g / (1 - b1^t)) / (sqrt(v_hat) + eps)
// Throws ShapeError when a gradient or stored moment does not match its
// parameter.
template <typename T>
void nadam_step(NAdamState<T>& state, std::span<BasicTensor<T>> params, std::span<const std::span<const T>> grads);

// Steps every model parameter with its accumulated gradient (zero if none).
void nadam_step(NAdamState<float>& state, Model& model);

}  // namespace vessel
