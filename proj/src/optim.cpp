#include "vessel/optim.hpp"

#include <cmath>

#include <fmt/format.h>

#include "vessel/model.hpp"

namespace vessel {

template <typename T>
void nadam_step(NAdamState<T>& state, std::span<BasicTensor<T>> params, std::span<const std::span<const T>> grads) {
  if (params.size() != grads.size()) {
    throw ShapeError(fmt::format("nadam_step: {} parameters but {} gradients", params.size(), grads.size()));
  }
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.numel(), T{0});
      state.v.emplace_back(p.numel(), T{0});
    }
  }
  if (state.m.size() != params.size()) {
    throw ShapeError(fmt::format("nadam_step: state holds {} moments but {} parameters given", state.m.size(),
                                 params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].size() != params[i].numel() || state.m[i].size() != params[i].numel()) {
      throw ShapeError(fmt::format("nadam_step: parameter {} has {} values, gradient {}, moment {}", i,
                                   params[i].numel(), grads[i].size(), state.m[i].size()));
    }
  }

  const NAdamConfig& c = state.config;
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double bias1 = 1.0 - std::pow(c.beta1, t);
  const double bias2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].mutable_data();
    auto& m = state.m[i];
    auto& v = state.v[i];
    const auto g = grads[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double gk = static_cast<double>(g[k]);
      const double mk = c.beta1 * static_cast<double>(m[k]) + (1.0 - c.beta1) * gk;
      const double vk = c.beta2 * static_cast<double>(v[k]) + (1.0 - c.beta2) * gk * gk;
      m[k] = static_cast<T>(mk);
      v[k] = static_cast<T>(vk);
      const double m_hat = mk / bias1;
      const double v_hat = vk / bias2;
      const double update = c.lr * (c.beta1 * m_hat + (1.0 - c.beta1) * gk / bias1) / (std::sqrt(v_hat) + c.epsilon);
      p[k] = static_cast<T>(static_cast<double>(p[k]) - update);
    }
  }
}

void nadam_step(NAdamState<float>& state, Model& model) {
  auto& named = model.parameters();
  std::vector<Tensor> params;
  std::vector<std::vector<float>> zeros;
  std::vector<std::span<const float>> grads;
  params.reserve(named.size());
  grads.reserve(named.size());
  zeros.reserve(named.size());
  for (auto& np : named) {
    params.push_back(np.tensor);
    if (np.tensor.has_grad()) {
      grads.push_back(np.tensor.grad());
    } else {
      zeros.emplace_back(np.tensor.numel(), 0.0f);
      grads.push_back(zeros.back());
    }
  }
  nadam_step<float>(state, params, grads);
}

template void nadam_step<float>(NAdamState<float>&, std::span<Tensor>, std::span<const std::span<const float>>);
template void nadam_step<double>(NAdamState<double>&, std::span<Tensor64>, std::span<const std::span<const double>>);

}  // namespace vessel
