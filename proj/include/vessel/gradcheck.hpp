#pragma once

#include <cstdint>
#include <functional>

#include "vessel/tensor.hpp"

namespace vessel {

template <typename T>
using TensorFn = std::function<BasicTensor<T>(const BasicTensor<T>&)>;

// Compares reverse-mode gradients of s(x) = sum_j w_j * f(x)_j against central
// differences, with fixed pseudo-random weights w_j in [0.5, 1.5]. Returns
// max_i |analytic_i - numeric_i| / max(1, |analytic_i|, |numeric_i|), or
// +infinity if any evaluation of f is non-finite.
//
// The numeric quotient divides by the step actually realized in T, and output
// differences are taken per element, so outputs untouched by x_i contribute
// exactly zero.
template <typename T>
double finite_diff_check(const TensorFn<T>& f, const BasicTensor<T>& x, double step,
                         std::uint64_t weight_seed = 0x9a11e7);

}  // namespace vessel
