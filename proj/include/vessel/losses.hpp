#pragma once

#include "vessel/tensor.hpp"

namespace vessel {

// Probabilities are clamped to [kProbabilityClamp, 1 - kProbabilityClamp]
// before taking logs.
inline constexpr double kProbabilityClamp = 1e-7;

inline constexpr double kDefaultBceWeight = 0.75;
inline constexpr double kDefaultJaccardWeight = 0.25;

// Per-pixel vessel probabilities and the binary ground truth (1 = vessel).
template <typename T>
struct LossInputs {
  BasicTensor<T> prediction;
  BasicTensor<T> target;

  // Throws ShapeError on shape mismatch, std::invalid_argument on values
  // outside [0,1] / {0,1}.
  void validate() const;
  std::size_t vessel_count() const;
};

// -(1/N) sum y log p + (1 - y) log(1 - p)
template <typename T>
BasicTensor<T> bce(const LossInputs<T>& in);

// 1 - sum_{vessel} p / (|vessel| + sum_{background} p).
// A target with no vessel pixels yields sum_bg p / (1 + sum_bg p).
template <typename T>
BasicTensor<T> jaccard_loss(const LossInputs<T>& in);

template <typename T>
BasicTensor<T> combined_loss(const LossInputs<T>& in, double bce_weight = kDefaultBceWeight,
                             double jaccard_weight = kDefaultJaccardWeight);

}  // namespace vessel
