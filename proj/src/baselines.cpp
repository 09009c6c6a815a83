#include "swec/baselines.hpp"

#include "swec/rng.hpp"
#include "swec/tinycnn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace swec {
namespace {

void check_training_set(std::span<const VectorX<double>> xs, std::span<const EventClass> ys) {
  if (xs.empty()) throw TrainingError("empty training set");
  if (xs.size() != ys.size()) throw ParameterError("feature and label counts differ");
  for (const auto& x : xs)
    if (x.size() != xs.front().size()) throw ParameterError("feature vectors differ in length");
}

/// Seeded mini-batch SGD with momentum. loss_grad(indices, grads) returns the mean
/// batch loss and accumulates the mean gradient into grads (zeroed by the caller).
template <typename Params, typename LossGrad>
std::vector<double> minibatch_sgdm(Params& params, std::size_t n, int epochs, int batch_size,
                                   double lr, double momentum, std::uint64_t seed,
                                   LossGrad&& loss_grad) {
  if (epochs < 1 || batch_size < 1 || !(lr > 0) || !(momentum >= 0))
    throw ParameterError("invalid trainer hyperparameters");
  Rng rng(derive_seed(seed, SeedStream::Shuffle));
  Params velocity = params;
  for_each_tensor(velocity, [](auto& t) { t.setZero(); });
  Params grads = velocity;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> trace;
  for (int e = 0; e < epochs; ++e) {
    rng.shuffle(std::span(order));
    double total = 0.0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(batch_size)) {
      const std::size_t end = std::min(n, start + static_cast<std::size_t>(batch_size));
      for_each_tensor(grads, [](auto& t) { t.setZero(); });
      const double loss =
          loss_grad(std::span<const std::size_t>(order.data() + start, end - start), grads);
      total += loss * static_cast<double>(end - start);
      sgdm_update(params, grads, velocity, lr, momentum);
    }
    trace.push_back(total / static_cast<double>(n));
  }
  if (!all_finite(params)) throw TrainingError("training diverged to non-finite weights");
  return trace;
}

MatrixX<double> normal_matrix(Rng& rng, int rows, int cols, double stddev) {
  MatrixX<double> m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = rng.normal(0.0, stddev);
  return m;
}

}  // namespace

VectorX<double> energy_features(const FeatureMatrix& fm, int num_intervals) {
  const Eigen::Index width = fm.width();
  if (num_intervals < 1 || num_intervals > width)
    throw ParameterError("interval count must lie in [1, " + std::to_string(width) + "]");
  const Eigen::Index seg = width / num_intervals;
  VectorX<double> out(fm.height() * num_intervals * 4);
  Eigen::Index k = 0;
  for (Eigen::Index r = 0; r < fm.height(); ++r)
    for (int i = 0; i < num_intervals; ++i) {
      const Eigen::Index begin = i * seg;
      const Eigen::Index len = (i == num_intervals - 1) ? width - begin : seg;
      const auto part = fm.values.row(r).segment(begin, len);
      out(k++) = part.mean();
      out(k++) = part.sum();
      out(k++) = part.norm();
      out(k++) = part.cwiseAbs().maxCoeff();
    }
  return out;
}

VectorX<double> flatten_features(const FeatureMatrix& fm) {
  return fm.values.transpose().reshaped();
}

EventClass LinearOvrSvm::predict(const VectorX<double>& x) const {
  return argmax_class(decision(x));
}

LinearOvrSvm train_svm_ovr(std::span<const VectorX<double>> features,
                           std::span<const EventClass> labels, const SvmHyper& hyper) {
  check_training_set(features, labels);
  if (!(hyper.c > 0) || hyper.epochs < 1 || !(hyper.step > 0))
    throw ParameterError("invalid SVM hyperparameters");
  std::array<int, kNumClasses> seen{};
  for (EventClass y : labels) ++seen[class_index(y)];
  for (int c = 0; c < kNumClasses; ++c)
    if (seen[c] == 0) throw TrainingError("no training example for class " + std::to_string(c + 1));

  const auto n = features.size();
  const auto d = features.front().size();
  const double lambda = 1.0 / (hyper.c * static_cast<double>(n));
  LinearOvrSvm svm{MatrixX<double>::Zero(kNumClasses, d), VectorX<double>::Zero(kNumClasses),
                   hyper};
  std::vector<std::size_t> order(n);
  for (int c = 0; c < kNumClasses; ++c) {
    Rng rng(derive_seed(hyper.seed, SeedStream::Baseline, static_cast<std::uint64_t>(c)));
    std::iota(order.begin(), order.end(), std::size_t{0});
    VectorX<double> w = VectorX<double>::Zero(d);
    double b = 0.0;
    for (int e = 1; e <= hyper.epochs; ++e) {
      const double eta = hyper.step / e;
      rng.shuffle(std::span(order));
      for (std::size_t i : order) {
        const double y = class_index(labels[i]) == c ? 1.0 : -1.0;
        const double margin = y * (w.dot(features[i]) + b);
        w *= 1.0 - eta * lambda;
        if (margin < 1.0) {
          w += eta * y * features[i];
          b += eta * y;
        }
      }
    }
    svm.weights.row(c) = w.transpose();
    svm.bias(c) = b;
  }
  return svm;
}

VectorX<double> TaperedMlp::probabilities(const VectorX<double>& x) const {
  if (x.size() != widths[0]) throw ParameterError("t-MLP input width mismatch");
  const VectorX<double> h1 = (params.w1 * x + params.b1).cwiseMax(0.0);
  const VectorX<double> h2 = (params.w2 * h1 + params.b2).cwiseMax(0.0);
  return softmax(params.w3 * h2 + params.b3);
}

EventClass TaperedMlp::predict(const VectorX<double>& x) const {
  return argmax_class(probabilities(x));
}

std::array<int, 2> fit_tapered_widths(int input_width, const std::array<int, 2>& hidden) {
  const int h0 = std::min(hidden[0], input_width - 1);
  const int h1 = std::min(hidden[1], h0 - 1);
  if (h1 <= kNumClasses)
    throw ParameterError("input of width " + std::to_string(input_width) +
                         " is too narrow for a tapered MLP");
  return {h0, h1};
}

TaperedMlp init_tmlp(int input_width, const std::array<int, 2>& hidden, std::uint64_t seed) {
  TaperedMlp m;
  m.widths = {input_width, hidden[0], hidden[1], kNumClasses};
  for (std::size_t i = 1; i < m.widths.size(); ++i)
    if (m.widths[i] >= m.widths[i - 1] || m.widths[i] < 1)
      throw ParameterError("t-MLP widths must strictly decrease toward the output");
  Rng rng(derive_seed(seed, SeedStream::Init));
  auto he = [](int fan_in) { return std::sqrt(2.0 / fan_in); };
  m.params.w1 = normal_matrix(rng, m.widths[1], m.widths[0], he(m.widths[0]));
  m.params.b1 = VectorX<double>::Zero(m.widths[1]);
  m.params.w2 = normal_matrix(rng, m.widths[2], m.widths[1], he(m.widths[1]));
  m.params.b2 = VectorX<double>::Zero(m.widths[2]);
  m.params.w3 = normal_matrix(rng, m.widths[3], m.widths[2], he(m.widths[2]));
  m.params.b3 = VectorX<double>::Zero(m.widths[3]);
  return m;
}

double tmlp_loss_and_grad(const TaperedMlp& model, std::span<const VectorX<double>> xs,
                          std::span<const EventClass> ys, MlpParams* grads) {
  if (xs.empty() || xs.size() != ys.size()) throw ParameterError("empty or mismatched batch");
  const auto& p = model.params;
  const double weight = 1.0 / static_cast<double>(xs.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const VectorX<double>& x = xs[i];
    const VectorX<double> h1 = (p.w1 * x + p.b1).cwiseMax(0.0);
    const VectorX<double> h2 = (p.w2 * h1 + p.b2).cwiseMax(0.0);
    VectorX<double> dz3 = softmax(p.w3 * h2 + p.b3);
    loss -= std::log(dz3(class_index(ys[i])));
    if (!grads) continue;
    dz3(class_index(ys[i])) -= 1.0;
    dz3 *= weight;
    grads->w3.noalias() += dz3 * h2.transpose();
    grads->b3 += dz3;
    const VectorX<double> dz2 =
        (p.w3.transpose() * dz3).cwiseProduct((h2.array() > 0.0).cast<double>().matrix());
    grads->w2.noalias() += dz2 * h1.transpose();
    grads->b2 += dz2;
    const VectorX<double> dz1 =
        (p.w2.transpose() * dz2).cwiseProduct((h1.array() > 0.0).cast<double>().matrix());
    grads->w1.noalias() += dz1 * x.transpose();
    grads->b1 += dz1;
  }
  return loss * weight;
}

TaperedMlp train_tmlp(std::span<const VectorX<double>> features,
                      std::span<const EventClass> labels, const MlpHyper& hyper) {
  check_training_set(features, labels);
  TaperedMlp model =
      init_tmlp(static_cast<int>(features.front().size()), hyper.hidden, hyper.seed);
  std::vector<VectorX<double>> bx;
  std::vector<EventClass> by;
  minibatch_sgdm(model.params, features.size(), hyper.epochs, hyper.batch_size,
                 hyper.learning_rate, hyper.momentum, hyper.seed,
                 [&](std::span<const std::size_t> idx, MlpParams& grads) {
                   bx.clear();
                   by.clear();
                   for (std::size_t i : idx) {
                     bx.push_back(features[i]);
                     by.push_back(labels[i]);
                   }
                   return tmlp_loss_and_grad(model, bx, by, &grads);
                 });
  return model;
}

GradCheckReport tmlp_grad_check(const TaperedMlp& model, std::span<const VectorX<double>> xs,
                                std::span<const EventClass> ys, double h) {
  MlpParams analytic = model.params;
  for_each_tensor(analytic, [](auto& t) { t.setZero(); });
  tmlp_loss_and_grad(model, xs, ys, &analytic);
  TaperedMlp probe = model;
  return check_gradients(
      model.params, analytic,
      [&](const MlpParams& p) {
        probe.params = p;
        return tmlp_loss_and_grad(probe, xs, ys, nullptr);
      },
      h);
}

VectorX<double> AutoencoderClassifier::standardize(const VectorX<double>& x) const {
  if (x.size() != input_mean.size()) throw ParameterError("autoencoder input width mismatch");
  return (x - input_mean).cwiseQuotient(input_scale);
}

VectorX<double> AutoencoderClassifier::encode(const VectorX<double>& x) const {
  return (ae.enc_w * standardize(x) + ae.enc_b).array().tanh().matrix();
}

VectorX<double> AutoencoderClassifier::reconstruct(const VectorX<double>& x) const {
  return ae.dec_w * encode(x) + ae.dec_b;
}

EventClass AutoencoderClassifier::predict(const VectorX<double>& x) const {
  return argmax_class(softmax(head.w * encode(x) + head.b));
}

double reconstruction_mse(const AutoencoderClassifier& model,
                          std::span<const VectorX<double>> features) {
  double total = 0.0;
  for (const auto& x : features)
    total += (model.reconstruct(x) - model.standardize(x)).squaredNorm() /
             static_cast<double>(x.size());
  return total / static_cast<double>(features.size());
}

AutoencoderClassifier train_autoencoder_clf(std::span<const VectorX<double>> features,
                                            std::span<const EventClass> labels,
                                            const AutoencoderHyper& hyper) {
  check_training_set(features, labels);
  if (hyper.code_width < 1 || hyper.head_epochs < 1)
    throw ParameterError("invalid autoencoder hyperparameters");
  const auto n = features.size();
  const auto d = features.front().size();

  AutoencoderClassifier m;
  m.input_mean = VectorX<double>::Zero(d);
  for (const auto& x : features) m.input_mean += x;
  m.input_mean /= static_cast<double>(n);
  VectorX<double> var = VectorX<double>::Zero(d);
  for (const auto& x : features) var += (x - m.input_mean).cwiseAbs2();
  m.input_scale = (var / static_cast<double>(n)).cwiseSqrt();
  for (Eigen::Index i = 0; i < m.input_scale.size(); ++i)
    if (!(m.input_scale(i) > 1e-12)) m.input_scale(i) = 1.0;

  std::vector<VectorX<double>> z;
  z.reserve(n);
  for (const auto& x : features) z.push_back(m.standardize(x));

  const int code = hyper.code_width;
  const int width = static_cast<int>(d);
  Rng rng(derive_seed(hyper.seed, SeedStream::Init));
  m.ae.enc_w = normal_matrix(rng, code, width, std::sqrt(1.0 / width));
  m.ae.enc_b = VectorX<double>::Zero(code);
  m.ae.dec_w = normal_matrix(rng, width, code, std::sqrt(1.0 / code));
  m.ae.dec_b = VectorX<double>::Zero(width);
  m.head.w = normal_matrix(rng, kNumClasses, code, std::sqrt(1.0 / code));
  m.head.b = VectorX<double>::Zero(kNumClasses);
  m.initial_reconstruction_loss = reconstruction_mse(m, features);

  m.reconstruction_loss = minibatch_sgdm(
      m.ae, n, hyper.epochs, hyper.batch_size, hyper.learning_rate, hyper.momentum, hyper.seed,
      [&](std::span<const std::size_t> idx, AutoencoderParams& g) {
        const double weight = 1.0 / static_cast<double>(idx.size());
        const double per_elem = 1.0 / static_cast<double>(width);
        double loss = 0.0;
        for (std::size_t i : idx) {
          const VectorX<double> h = (m.ae.enc_w * z[i] + m.ae.enc_b).array().tanh().matrix();
          const VectorX<double> err = m.ae.dec_w * h + m.ae.dec_b - z[i];
          loss += err.squaredNorm() * per_elem;
          const VectorX<double> dout = (2.0 * per_elem * weight) * err;
          g.dec_w.noalias() += dout * h.transpose();
          g.dec_b += dout;
          const VectorX<double> dh = (m.ae.dec_w.transpose() * dout)
                                         .cwiseProduct((1.0 - h.array().square()).matrix());
          g.enc_w.noalias() += dh * z[i].transpose();
          g.enc_b += dh;
        }
        return loss * weight;
      });

  std::vector<VectorX<double>> codes;
  codes.reserve(n);
  for (const auto& x : z) codes.push_back((m.ae.enc_w * x + m.ae.enc_b).array().tanh().matrix());

  minibatch_sgdm(m.head, n, hyper.head_epochs, hyper.batch_size, hyper.learning_rate,
                 hyper.momentum, derive_seed(hyper.seed, SeedStream::Baseline),
                 [&](std::span<const std::size_t> idx, SoftmaxHead& g) {
                   const double weight = 1.0 / static_cast<double>(idx.size());
                   double loss = 0.0;
                   for (std::size_t i : idx) {
                     VectorX<double> dz = softmax(m.head.w * codes[i] + m.head.b);
                     loss -= std::log(dz(class_index(labels[i])));
                     dz(class_index(labels[i])) -= 1.0;
                     dz *= weight;
                     g.w.noalias() += dz * codes[i].transpose();
                     g.b += dz;
                   }
                   return loss * weight;
                 });
  return m;
}

}  // namespace swec
