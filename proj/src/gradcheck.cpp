#include "vessel/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "vessel/ops.hpp"
#include "vessel/random.hpp"

namespace vessel {

template <typename T>
double finite_diff_check(const TensorFn<T>& f, const BasicTensor<T>& x, double step, std::uint64_t weight_seed) {
  constexpr double kFail = std::numeric_limits<double>::infinity();

  BasicTensor<T> probe = x.clone();
  probe.set_requires_grad(true);
  std::vector<double> analytic(x.numel(), 0.0);
  std::vector<T> weights;
  {
    Tape<T> tape;
    BasicTensor<T> out;
    BasicTensor<T> objective;
    {
      TapeScope<T> scope(tape);
      out = f(probe);
      weights.resize(out.numel());
      for (std::size_t j = 0; j < weights.size(); ++j) weights[j] = static_cast<T>(0.5 + hash_uniform(weight_seed, j));
      objective = sum(mul(out, BasicTensor<T>(out.shape(), weights)));
    }
    for (T v : out.data()) {
      if (!std::isfinite(v)) return kFail;
    }
    if (objective.requires_grad()) {
      tape.backward(objective);
      if (probe.has_grad()) std::copy(probe.grad().begin(), probe.grad().end(), analytic.begin());
    }
  }

  NoGradScope<T> no_grad;
  double worst = 0.0;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    BasicTensor<T> plus = x.clone();
    BasicTensor<T> minus = x.clone();
    const T base = x.data()[i];
    plus.mutable_data()[i] = static_cast<T>(base + step);
    minus.mutable_data()[i] = static_cast<T>(base - step);
    const double realized = static_cast<double>(plus.data()[i]) - static_cast<double>(minus.data()[i]);
    const auto out_plus = f(plus);
    const auto out_minus = f(minus);
    double diff = 0.0;
    for (std::size_t j = 0; j < weights.size(); ++j) {
      const double a = out_plus.data()[j], b = out_minus.data()[j];
      if (!std::isfinite(a) || !std::isfinite(b)) return kFail;
      diff += static_cast<double>(weights[j]) * (a - b);
    }
    const double numeric = diff / realized;
    const double err =
        std::abs(analytic[i] - numeric) / std::max({1.0, std::abs(analytic[i]), std::abs(numeric)});
    if (!std::isfinite(err)) return kFail;
    worst = std::max(worst, err);
  }
  return worst;
}

template double finite_diff_check<float>(const TensorFn<float>&, const BasicTensor<float>&, double, std::uint64_t);
template double finite_diff_check<double>(const TensorFn<double>&, const BasicTensor<double>&, double,
                                          std::uint64_t);

}  // namespace vessel
