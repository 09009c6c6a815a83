#ifndef SWEC_BASELINES_HPP
#define SWEC_BASELINES_HPP

// Comparison classifiers: a linear one-vs-rest SVM and an autoencoder classifier on
// interval energy statistics, and a tapered MLP on the flattened feature matrix.

#include "swec/featpipe.hpp"
#include "swec/optim.hpp"
#include "swec/types.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <tuple>
#include <vector>

namespace swec {

/// Per bus row and per contiguous interval (the last absorbs the remainder):
/// mean, sum, Euclidean norm, infinity norm. Bus-major, interval-minor.
VectorX<double> energy_features(const FeatureMatrix& fm, int num_intervals);

/// Row-major flattening of the feature matrix.
VectorX<double> flatten_features(const FeatureMatrix& fm);

struct SvmHyper {
  double c = 1.0;
  int epochs = 200;
  double step = 1e-3;  // decays as step / epoch
  std::uint64_t seed = 1;
};

struct LinearOvrSvm {
  MatrixX<double> weights;  // num_classes x d
  VectorX<double> bias;
  SvmHyper hyper;

  VectorX<double> decision(const VectorX<double>& x) const { return weights * x + bias; }
  EventClass predict(const VectorX<double>& x) const;
};

/// Subgradient descent on the L2-regularized hinge loss, one binary problem per class.
LinearOvrSvm train_svm_ovr(std::span<const VectorX<double>> features,
                           std::span<const EventClass> labels, const SvmHyper& hyper);

struct MlpHyper {
  std::array<int, 2> hidden{64, 16};
  int epochs = 50;
  int batch_size = 8;
  double learning_rate = 3e-3;
  double momentum = 0.9;
  std::uint64_t seed = 1;
};

struct MlpParams {
  MatrixX<double> w1;
  VectorX<double> b1;
  MatrixX<double> w2;
  VectorX<double> b2;
  MatrixX<double> w3;
  VectorX<double> b3;

  auto tensors() { return std::tie(w1, b1, w2, b2, w3, b3); }
  auto tensors() const { return std::tie(w1, b1, w2, b2, w3, b3); }
};

/// input -> hidden[0] -> hidden[1] -> num_classes, ReLU hidden units, softmax output.
struct TaperedMlp {
  std::array<int, 4> widths{};
  MlpParams params;

  VectorX<double> probabilities(const VectorX<double>& x) const;
  EventClass predict(const VectorX<double>& x) const;
};

/// Hidden widths shrunk so the layers still taper on narrow inputs (low rates, one bus):
/// each is capped at one less than the layer before it.
std::array<int, 2> fit_tapered_widths(int input_width, const std::array<int, 2>& hidden);

/// He-normal weights, zero biases. Widths must strictly decrease.
TaperedMlp init_tmlp(int input_width, const std::array<int, 2>& hidden, std::uint64_t seed);

/// Mean cross-entropy over the batch; accumulates the exact gradient into *grads.
double tmlp_loss_and_grad(const TaperedMlp& model, std::span<const VectorX<double>> xs,
                          std::span<const EventClass> ys, MlpParams* grads);

TaperedMlp train_tmlp(std::span<const VectorX<double>> features,
                      std::span<const EventClass> labels, const MlpHyper& hyper);

GradCheckReport tmlp_grad_check(const TaperedMlp& model, std::span<const VectorX<double>> xs,
                                std::span<const EventClass> ys, double h);

struct AutoencoderHyper {
  int code_width = 32;
  int epochs = 50;
  int head_epochs = 50;
  int batch_size = 8;
  double learning_rate = 1e-2;
  double momentum = 0.9;
  std::uint64_t seed = 1;
};

struct AutoencoderParams {
  MatrixX<double> enc_w;  // code x input
  VectorX<double> enc_b;
  MatrixX<double> dec_w;  // input x code
  VectorX<double> dec_b;

  auto tensors() { return std::tie(enc_w, enc_b, dec_w, dec_b); }
  auto tensors() const { return std::tie(enc_w, enc_b, dec_w, dec_b); }
};

struct SoftmaxHead {
  MatrixX<double> w;  // num_classes x code
  VectorX<double> b;

  auto tensors() { return std::tie(w, b); }
  auto tensors() const { return std::tie(w, b); }
};

/// tanh encoder, linear decoder, softmax head on the code. Inputs are standardized
/// with statistics of the training set.
struct AutoencoderClassifier {
  VectorX<double> input_mean;
  VectorX<double> input_scale;
  AutoencoderParams ae;
  SoftmaxHead head;
  std::vector<double> reconstruction_loss;  // per stage-1 epoch
  double initial_reconstruction_loss = 0.0;

  VectorX<double> standardize(const VectorX<double>& x) const;
  VectorX<double> encode(const VectorX<double>& x) const;
  VectorX<double> reconstruct(const VectorX<double>& x) const;
  EventClass predict(const VectorX<double>& x) const;
};

/// Stage 1 fits the autoencoder to mean squared reconstruction error; stage 2 trains
/// the head with cross-entropy on the frozen encoder's codes.
AutoencoderClassifier train_autoencoder_clf(std::span<const VectorX<double>> features,
                                            std::span<const EventClass> labels,
                                            const AutoencoderHyper& hyper);

/// Mean over samples of the per-element squared reconstruction error.
double reconstruction_mse(const AutoencoderClassifier& model,
                          std::span<const VectorX<double>> features);

}  // namespace swec

#endif  // SWEC_BASELINES_HPP
