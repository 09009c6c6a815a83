#ifndef SWEC_OPTIM_HPP
#define SWEC_OPTIM_HPP

// Shared machinery for the trainable models. A parameter pack is any struct exposing
// tensors() -> std::tuple of references to Eigen dense objects; gradients and
// velocities use the same struct.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace swec {

template <typename Params, typename Fn>
void for_each_tensor(Params& params, Fn&& fn) {
  std::apply([&](auto&... t) { (fn(t), ...); }, params.tensors());
}

template <typename Params, typename Fn>
void for_each_tensor_pair(Params& a, const Params& b, Fn&& fn) {
  auto ta = a.tensors();
  auto tb = b.tensors();
  [&]<std::size_t... I>(std::index_sequence<I...>) {
    (fn(std::get<I>(ta), std::get<I>(tb)), ...);
  }(std::make_index_sequence<std::tuple_size_v<decltype(ta)>>{});
}

template <typename Params>
std::size_t parameter_count(const Params& params) {
  std::size_t n = 0;
  for_each_tensor(params, [&](const auto& t) { n += static_cast<std::size_t>(t.size()); });
  return n;
}

template <typename Params>
bool all_finite(const Params& params) {
  bool ok = true;
  for_each_tensor(params, [&](const auto& t) { ok = ok && t.allFinite(); });
  return ok;
}

/// Velocity-form momentum: v <- momentum * v - lr * g; w <- w + v.
template <typename Params>
void sgdm_update(Params& weights, const Params& grads, Params& velocity, double learning_rate,
                 double momentum) {
  auto w = weights.tensors();
  auto g = grads.tensors();
  auto v = velocity.tensors();
  [&]<std::size_t... I>(std::index_sequence<I...>) {
    (((std::get<I>(v) = momentum * std::get<I>(v) - learning_rate * std::get<I>(g)),
      (std::get<I>(w) += std::get<I>(v))),
     ...);
  }(std::make_index_sequence<std::tuple_size_v<decltype(w)>>{});
}

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::vector<double> tensor_max_rel_error;  // one entry per parameter tensor
  std::size_t parameters_checked = 0;
};

/// Central-difference check of `analytic` against loss(params) for every parameter.
/// Relative error is |a - n| / max(1e-8, |a| + |n|).
template <typename Params, typename LossFn>
GradCheckReport check_gradients(Params params, const Params& analytic, LossFn&& loss, double h) {
  GradCheckReport report;
  auto tp = params.tensors();
  auto ta = analytic.tensors();
  auto check_one = [&](auto& tensor, const auto& grad) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < tensor.size(); ++i) {
      const auto saved = tensor.data()[i];
      tensor.data()[i] = saved + h;
      const double plus = static_cast<double>(loss(params));
      tensor.data()[i] = saved - h;
      const double minus = static_cast<double>(loss(params));
      tensor.data()[i] = saved;
      const double numeric = (plus - minus) / (2.0 * h);
      const double a = static_cast<double>(grad.data()[i]);
      const double rel = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      worst = std::max(worst, rel);
      ++report.parameters_checked;
    }
    report.tensor_max_rel_error.push_back(worst);
    report.max_rel_error = std::max(report.max_rel_error, worst);
  };
  [&]<std::size_t... I>(std::index_sequence<I...>) {
    (check_one(std::get<I>(tp), std::get<I>(ta)), ...);
  }(std::make_index_sequence<std::tuple_size_v<decltype(tp)>>{});
  return report;
}

}  // namespace swec

#endif  // SWEC_OPTIM_HPP
