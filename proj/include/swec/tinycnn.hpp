#ifndef SWEC_TINYCNN_HPP
#define SWEC_TINYCNN_HPP

// One convolutional layer (ten 2x20 filters, stride 1), ReLU, 1x2 max pooling, one
// fully connected layer and softmax, trained with mini-batch SGD with momentum on
// cross-entropy.

#include "swec/optim.hpp"
#include "swec/rng.hpp"
#include "swec/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <tuple>
#include <vector>

namespace swec {

struct CnnArch {
  int num_filters = 10;
  int filter_h = 2;
  int filter_w = 20;
  int stride_h = 1;
  int stride_w = 1;
  int pool_h = 1;
  int pool_w = 2;
  int input_h = 0;
  int input_w = 0;
  int num_classes = kNumClasses;

  /// Nominal 2x20 filters clamped to fit a B x L input. The width is clamped to
  /// L - 1 so at least two conv columns remain for the 1x2 pool.
  static CnnArch for_input(int height, int width) {
    if (height < 1 || width < 2) throw ParameterError("CNN input must be at least 1 x 2");
    CnnArch a;
    a.input_h = height;
    a.input_w = width;
    a.filter_h = std::min(a.filter_h, height);
    a.filter_w = std::min(a.filter_w, width - 1);
    return a;
  }

  int conv_h() const { return input_h - filter_h + 1; }
  int conv_w() const { return input_w - filter_w + 1; }
  int pooled_w() const { return conv_w() / pool_w; }
  int positions() const { return conv_h() * conv_w(); }
  int patch_size() const { return filter_h * filter_w; }
  int flat_size() const { return num_filters * conv_h() * pooled_w(); }

  void validate() const {
    if (num_filters < 1 || filter_h < 1 || filter_w < 1 || num_classes < 2)
      throw ParameterError("invalid CNN architecture");
    if (stride_h != 1 || stride_w != 1 || pool_h != 1 || pool_w != 2)
      throw ParameterError("only unit stride and 1x2 pooling are supported");
    if (conv_h() < 1 || pooled_w() < 1)
      throw ParameterError("filters do not fit the " + std::to_string(input_h) + "x" +
                           std::to_string(input_w) + " input");
  }

  friend bool operator==(const CnnArch&, const CnnArch&) = default;
};

template <typename Scalar>
struct CnnParams {
  /// Row f holds filter f, element (r, c) at column r * filter_w + c.
  MatrixX<Scalar> conv_w;
  VectorX<Scalar> conv_b;
  /// num_classes x flat_size; flat index = (f * conv_h + r) * pooled_w + c.
  MatrixX<Scalar> fc_w;
  VectorX<Scalar> fc_b;

  static CnnParams zeros(const CnnArch& a) {
    return {MatrixX<Scalar>::Zero(a.num_filters, a.patch_size()),
            VectorX<Scalar>::Zero(a.num_filters),
            MatrixX<Scalar>::Zero(a.num_classes, a.flat_size()),
            VectorX<Scalar>::Zero(a.num_classes)};
  }

  auto tensors() { return std::tie(conv_w, conv_b, fc_w, fc_b); }
  auto tensors() const { return std::tie(conv_w, conv_b, fc_w, fc_b); }
};

template <typename Scalar>
struct CnnModel {
  CnnArch arch;
  CnnParams<Scalar> params;
};

template <typename Scalar>
struct OptimizerState {
  CnnParams<Scalar> velocity;

  static OptimizerState zeros(const CnnArch& a) { return {CnnParams<Scalar>::zeros(a)}; }
};

struct TrainConfig {
  int epochs = 50;
  int batch_size = 8;
  double learning_rate = 3e-3;
  double momentum = 0.9;
  double init_std = 0.01;
  std::uint64_t seed = 1;

  void validate() const {
    if (epochs < 1 || batch_size < 1 || !(learning_rate > 0) || !(momentum > 0) ||
        !(init_std > 0))
      throw ParameterError("training hyperparameters must be strictly positive");
  }
};

template <typename Scalar>
struct Sample {
  MatrixX<Scalar> x;
  EventClass label;
};

/// Weights ~ Normal(0, init_std^2) drawn conv-first in storage order; biases zero.
template <typename Scalar>
CnnModel<Scalar> init_model(const CnnArch& arch, std::uint64_t seed, double init_std = 0.01) {
  arch.validate();
  CnnModel<Scalar> m{arch, CnnParams<Scalar>::zeros(arch)};
  Rng rng(derive_seed(seed, SeedStream::Init));
  for (Eigen::Index f = 0; f < m.params.conv_w.rows(); ++f)
    for (Eigen::Index j = 0; j < m.params.conv_w.cols(); ++j)
      m.params.conv_w(f, j) = Scalar(rng.normal(0.0, init_std));
  for (Eigen::Index c = 0; c < m.params.fc_w.rows(); ++c)
    for (Eigen::Index j = 0; j < m.params.fc_w.cols(); ++j)
      m.params.fc_w(c, j) = Scalar(rng.normal(0.0, init_std));
  return m;
}

/// Numerically stable softmax.
template <typename Derived>
VectorX<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  VectorX<Scalar> e = (logits.array() - logits.maxCoeff()).exp().matrix();
  return e / e.sum();
}

/// argmax with ties broken toward the lowest class code.
template <typename Derived>
EventClass argmax_class(const Eigen::MatrixBase<Derived>& scores) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < scores.size(); ++i)
    if (scores(i) > scores(best)) best = i;
  return class_from_index(static_cast<int>(best));
}

template <typename Scalar>
struct CnnCache {
  MatrixX<Scalar> patches;      // patch_size x positions
  MatrixX<Scalar> activation;   // num_filters x positions, after ReLU
  std::vector<Eigen::Index> pool_source;  // flat index -> activation column of the max
  VectorX<Scalar> flat;
  VectorX<Scalar> logits;
};

template <typename Scalar>
struct CnnForward {
  VectorX<Scalar> probabilities;
  CnnCache<Scalar> cache;
};

/// Valid-mode cross-correlation as an im2col product.
template <typename Scalar, typename Derived>
MatrixX<Scalar> im2col(const CnnArch& a, const Eigen::MatrixBase<Derived>& x) {
  MatrixX<Scalar> patches(a.patch_size(), a.positions());
  for (int i = 0; i < a.conv_h(); ++i)
    for (int j = 0; j < a.conv_w(); ++j) {
      const int pos = i * a.conv_w() + j;
      for (int r = 0; r < a.filter_h; ++r)
        for (int c = 0; c < a.filter_w; ++c)
          patches(r * a.filter_w + c, pos) = Scalar(x(i + r, j + c));
    }
  return patches;
}

template <typename Scalar, typename Derived>
CnnForward<Scalar> forward(const CnnModel<Scalar>& model, const Eigen::MatrixBase<Derived>& x) {
  const CnnArch& a = model.arch;
  if (x.rows() != a.input_h || x.cols() != a.input_w)
    throw ParameterError("input is " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) +
                         ", model expects " + std::to_string(a.input_h) + "x" +
                         std::to_string(a.input_w));
  CnnForward<Scalar> out;
  CnnCache<Scalar>& c = out.cache;
  c.patches = im2col<Scalar>(a, x);
  c.activation = (model.params.conv_w * c.patches).colwise() + model.params.conv_b;
  c.activation = c.activation.cwiseMax(Scalar(0));

  const int pw = a.pooled_w();
  c.flat.resize(a.flat_size());
  c.pool_source.resize(static_cast<std::size_t>(a.flat_size()));
  for (int f = 0; f < a.num_filters; ++f)
    for (int r = 0; r < a.conv_h(); ++r)
      for (int j = 0; j < pw; ++j) {
        const Eigen::Index left = r * a.conv_w() + 2 * j;
        const Eigen::Index src =
            c.activation(f, left + 1) > c.activation(f, left) ? left + 1 : left;
        const Eigen::Index k = (f * a.conv_h() + r) * pw + j;
        c.flat(k) = c.activation(f, src);
        c.pool_source[static_cast<std::size_t>(k)] = src;
      }
  c.logits = model.params.fc_w * c.flat + model.params.fc_b;
  out.probabilities = softmax(c.logits);
  return out;
}

/// Accumulates weight * d(-ln p[label]) / d(params) into grads.
template <typename Scalar>
void backward(const CnnModel<Scalar>& model, const CnnForward<Scalar>& fwd, EventClass label,
              Scalar weight, CnnParams<Scalar>& grads) {
  const CnnArch& a = model.arch;
  const CnnCache<Scalar>& c = fwd.cache;
  VectorX<Scalar> dlogits = fwd.probabilities;
  dlogits(class_index(label)) -= Scalar(1);
  dlogits *= weight;

  grads.fc_w.noalias() += dlogits * c.flat.transpose();
  grads.fc_b += dlogits;
  const VectorX<Scalar> dflat = model.params.fc_w.transpose() * dlogits;

  MatrixX<Scalar> dact = MatrixX<Scalar>::Zero(a.num_filters, a.positions());
  const int per_filter = a.conv_h() * a.pooled_w();
  for (Eigen::Index k = 0; k < dflat.size(); ++k) {
    const Eigen::Index f = k / per_filter;
    const Eigen::Index src = c.pool_source[static_cast<std::size_t>(k)];
    if (c.activation(f, src) > Scalar(0)) dact(f, src) += dflat(k);
  }
  grads.conv_w.noalias() += dact * c.patches.transpose();
  grads.conv_b += dact.rowwise().sum();
}

template <typename Scalar>
struct LossAndGrad {
  Scalar loss;
  CnnParams<Scalar> grads;
};

/// Mean cross-entropy over the batch and its exact gradient.
template <typename Scalar>
LossAndGrad<Scalar> loss_and_grad(const CnnModel<Scalar>& model,
                                  std::span<const Sample<Scalar>> batch) {
  if (batch.empty()) throw ParameterError("empty batch");
  LossAndGrad<Scalar> out{Scalar(0), CnnParams<Scalar>::zeros(model.arch)};
  const Scalar weight = Scalar(1) / Scalar(batch.size());
  for (const auto& s : batch) {
    const auto fwd = forward(model, s.x);
    out.loss -= std::log(fwd.probabilities(class_index(s.label)));
    backward(model, fwd, s.label, weight, out.grads);
  }
  out.loss *= weight;
  return out;
}

template <typename Scalar>
Scalar batch_loss(const CnnModel<Scalar>& model, std::span<const Sample<Scalar>> batch) {
  Scalar loss(0);
  for (const auto& s : batch)
    loss -= std::log(forward(model, s.x).probabilities(class_index(s.label)));
  return loss / Scalar(batch.size());
}

template <typename Scalar>
void sgdm_step(CnnModel<Scalar>& model, const CnnParams<Scalar>& grads,
               OptimizerState<Scalar>& state, const TrainConfig& cfg) {
  sgdm_update(model.params, grads, state.velocity, cfg.learning_rate, cfg.momentum);
}

template <typename Scalar>
struct TrainResult {
  CnnModel<Scalar> model;
  std::vector<double> epoch_loss;  // mean training loss seen during each epoch
};

/// Reshuffles every epoch with the seeded generator; the last batch may be short.
template <typename Scalar>
TrainResult<Scalar> train(CnnModel<Scalar> model, std::span<const Sample<Scalar>> data,
                          const TrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw TrainingError("empty training set");
  Rng rng(derive_seed(cfg.seed, SeedStream::Shuffle));
  auto state = OptimizerState<Scalar>::zeros(model.arch);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Sample<Scalar>> batch;
  TrainResult<Scalar> out;
  out.epoch_loss.reserve(static_cast<std::size_t>(cfg.epochs));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span(order));
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(data[order[i]]);
      const auto lg = loss_and_grad<Scalar>(model, batch);
      total += static_cast<double>(lg.loss) * static_cast<double>(end - start);
      sgdm_step(model, lg.grads, state, cfg);
    }
    out.epoch_loss.push_back(total / static_cast<double>(data.size()));
  }
  if (!all_finite(model.params)) throw TrainingError("training diverged to non-finite weights");
  out.model = std::move(model);
  return out;
}

template <typename Scalar, typename Derived>
EventClass predict(const CnnModel<Scalar>& model, const Eigen::MatrixBase<Derived>& x) {
  return argmax_class(forward(model, x).probabilities);
}

/// Finite-difference oracle over every parameter tensor of the model.
template <typename Scalar>
GradCheckReport grad_check(const CnnModel<Scalar>& model, std::span<const Sample<Scalar>> batch,
                           double h) {
  if (!(h > 0)) throw ParameterError("finite-difference step must be positive");
  const auto analytic = loss_and_grad(model, batch).grads;
  CnnModel<Scalar> probe = model;
  return check_gradients(
      model.params, analytic,
      [&](const CnnParams<Scalar>& p) {
        probe.params = p;
        return batch_loss(probe, batch);
      },
      h);
}

template <typename Scalar>
struct GradCheckCase {
  CnnModel<Scalar> model;
  std::vector<Sample<Scalar>> batch;
};

/// Seeded random instance for grad_check. Weights and biases are spread wide enough that
/// activations sit away from the ReLU and pooling kinks; inputs are uniform in [0, 1).
template <typename Scalar>
GradCheckCase<Scalar> make_grad_check_case(std::uint64_t seed, int height, int width,
                                           int batch_size = 2) {
  if (batch_size < 1) throw ParameterError("batch size must be positive");
  GradCheckCase<Scalar> c;
  const auto arch = CnnArch::for_input(height, width);
  c.model = init_model<Scalar>(arch, seed, 0.5);
  Rng rng(derive_seed(seed, SeedStream::Shuffle));
  for (Eigen::Index i = 0; i < c.model.params.fc_w.size(); ++i)
    c.model.params.fc_w.data()[i] *= Scalar(0.02);
  for (Eigen::Index i = 0; i < c.model.params.conv_b.size(); ++i)
    c.model.params.conv_b(i) = Scalar(rng.normal(0.0, 0.1));
  for (Eigen::Index i = 0; i < c.model.params.fc_b.size(); ++i)
    c.model.params.fc_b(i) = Scalar(rng.normal(0.0, 0.1));
  for (int b = 0; b < batch_size; ++b) {
    MatrixX<Scalar> x(height, width);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = Scalar(rng.uniform());
    c.batch.push_back({std::move(x), class_from_index(static_cast<int>(rng.below(kNumClasses)))});
  }
  return c;
}

}  // namespace swec

#endif  // SWEC_TINYCNN_HPP
