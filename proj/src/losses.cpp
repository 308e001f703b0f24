#include "vessel/losses.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "vessel/ops.hpp"

namespace vessel {

template <typename T>
void LossInputs<T>::validate() const {
  if (!prediction.defined() || !target.defined()) throw ShapeError("loss: prediction and target must be set");
  if (prediction.shape() != target.shape()) {
    throw ShapeError(fmt::format("loss: prediction {} and target {} differ in shape", shape_str(prediction.shape()),
                                 shape_str(target.shape())));
  }
  for (T p : prediction.data()) {
    if (std::isnan(p)) throw NumericError("loss: prediction contains NaN");
    if (!(p >= T(0) && p <= T(1))) throw std::invalid_argument(fmt::format("loss: prediction value {} outside [0,1]", p));
  }
  for (T y : target.data()) {
    if (y != T(0) && y != T(1)) throw std::invalid_argument(fmt::format("loss: target value {} is not binary", y));
  }
}

template <typename T>
std::size_t LossInputs<T>::vessel_count() const {
  std::size_t n = 0;
  for (T y : target.data()) n += (y == T(1));
  return n;
}

namespace {

template <typename T>
BasicTensor<T> complement(const BasicTensor<T>& mask) {
  std::vector<T> out(mask.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = T(1) - mask.data()[i];
  return BasicTensor<T>(mask.shape(), std::move(out));
}

}  // namespace

template <typename T>
BasicTensor<T> bce(const LossInputs<T>& in) {
  in.validate();
  const T eps = static_cast<T>(kProbabilityClamp);
  const auto p = clamp(in.prediction, eps, T(1) - eps);
  const auto log_p = log(p);
  const auto log_q = log(add_scalar(scale(p, T(-1)), T(1)));
  const auto terms = add(mul(log_p, in.target), mul(log_q, complement(in.target)));
  return scale(mean(terms), T(-1));
}

template <typename T>
BasicTensor<T> jaccard_loss(const LossInputs<T>& in) {
  in.validate();
  const std::size_t vessels = in.vessel_count();
  const auto background_mass = sum(mul(in.prediction, complement(in.target)));
  if (vessels == 0) {
    spdlog::debug("jaccard_loss: target has no vessel pixels, using smoothed form");
    return div(background_mass, add_scalar(background_mass, T(1)));
  }
  const auto overlap = sum(mul(in.prediction, in.target));
  const auto denominator = add_scalar(background_mass, static_cast<T>(vessels));
  return add_scalar(scale(div(overlap, denominator), T(-1)), T(1));
}

template <typename T>
BasicTensor<T> combined_loss(const LossInputs<T>& in, double bce_weight, double jaccard_weight) {
  if (bce_weight < 0 || jaccard_weight < 0) {
    throw std::invalid_argument(fmt::format("combined_loss: weights must be >= 0, got {} and {}", bce_weight,
                                            jaccard_weight));
  }
  return add(scale(bce(in), static_cast<T>(bce_weight)), scale(jaccard_loss(in), static_cast<T>(jaccard_weight)));
}

template struct LossInputs<float>;
template struct LossInputs<double>;
template BasicTensor<float> bce<float>(const LossInputs<float>&);
template BasicTensor<double> bce<double>(const LossInputs<double>&);
template BasicTensor<float> jaccard_loss<float>(const LossInputs<float>&);
template BasicTensor<double> jaccard_loss<double>(const LossInputs<double>&);
template BasicTensor<float> combined_loss<float>(const LossInputs<float>&, double, double);
template BasicTensor<double> combined_loss<double>(const LossInputs<double>&, double, double);

}  // namespace vessel
