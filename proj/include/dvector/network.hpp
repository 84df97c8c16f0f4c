#pragma once

// Speaker-classification network: sigmoid hidden layers, softmax output,
// cross-entropy training with a halve-on-plateau learning-rate schedule.
// Frame-level speaker features are read from the last hidden layer.

#include "dvector/types.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace dvector::nnet {

using ColMatrix = Eigen::MatrixXd;

struct NetworkSpec {
  int input_dim = 0;
  std::vector<int> hidden_dims = {200, 200, 200, 200};
  int output_dim = 80;
  /// Width of the appended phone-posterior block; 0 for the plain network.
  int posterior_dim = 0;
  std::uint64_t seed = 0;

  void validate() const;
  bool phone_dependent() const { return posterior_dim > 0; }
  int acoustic_dim() const { return input_dim - posterior_dim; }
};

struct Layer {
  ColMatrix weight;  // out x in
  Vector bias;       // out
};

struct Network {
  NetworkSpec spec;
  std::vector<Layer> layers;  // hidden layers then the output layer

  std::size_t num_parameters() const;
};

/// Glorot-uniform weights, zero biases, driven by spec.seed.
Network init_network(const NetworkSpec& spec);

/// [stacked || posteriors]. Posterior rows must be non-negative and sum to 1
/// within 1e-6.
Vector assemble_input(const NetworkSpec& spec, const Eigen::Ref<const Vector>& stacked,
                      const std::optional<Eigen::Ref<const Vector>>& posteriors);

/// Whole-sequence variant: T x (stacked_dim) plus optional T x P posteriors.
Matrix assemble_inputs(const NetworkSpec& spec, const Matrix& stacked,
                       const Matrix* posteriors);

/// Activations of every layer for a batch whose columns are examples.
/// Entry 0 is the input, entries 1..H are sigmoid hidden layers, the last is
/// the softmax output.
std::vector<ColMatrix> forward_batch(const Network& net, const Eigen::Ref<const ColMatrix>& inputs);
std::vector<Vector> forward(const Network& net, const Eigen::Ref<const Vector>& input);

struct Gradients {
  std::vector<ColMatrix> weight;
  std::vector<Vector> bias;

  static Gradients zeros_like(const Network& net);
};

struct LossAndGradient {
  double loss = 0.0;  // mean cross-entropy over the batch
  Gradients grads;    // gradient of the mean loss
};

/// Mean cross-entropy and its gradient. inputs are columns; labels index
/// the output classes.
LossAndGradient loss_and_gradient(const Network& net, const Eigen::Ref<const ColMatrix>& inputs,
                                  std::span<const int> labels);

/// Mean cross-entropy only (no gradient) and the number of correct argmax
/// predictions.
struct Evaluation {
  double loss = 0.0;
  std::size_t correct = 0;
  std::size_t count = 0;
  double accuracy() const { return count ? static_cast<double>(correct) / count : 0.0; }
};
Evaluation evaluate(const Network& net, const Eigen::Ref<const ColMatrix>& inputs,
                    std::span<const int> labels, int batch_size = 1024);

/// Velocity buffers for momentum; starts at zero.
struct SgdState {
  Gradients velocity;
  bool initialized = false;
};

/// velocity <- grad + momentum * velocity; theta <- theta - lr * velocity.
void sgd_step(Network& net, const Gradients& grads, double lr, double momentum, SgdState& state);

struct TrainConfig {
  double init_lr = 0.008;
  double lr_halving_threshold = 0.005;
  double stop_lr = 0.0001;
  double stop_improvement = 0.0005;
  int max_epochs = 50;
  int minibatch = 256;
  double momentum = 0.0;
  /// The learning rate multiplies the gradient summed over the minibatch
  /// (per-frame rate). When false it multiplies the mean gradient.
  bool lr_per_frame = true;
  std::uint64_t shuffle_seed = 0;

  void validate() const;
};

/// Frame-level training examples: inputs are columns of `inputs`.
struct Dataset {
  ColMatrix inputs;         // input_dim x N
  std::vector<int> labels;  // N
  std::size_t size() const { return labels.size(); }
};

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double cv_loss = 0.0;
  double cv_accuracy = 0.0;
};

struct TrainResult {
  Network net;  // parameters with the best CV loss
  std::vector<EpochLog> log;
  double initial_cv_loss = 0.0;
  double best_cv_loss = 0.0;
};

TrainResult train(Network net, const Dataset& train_set, const Dataset& cv_set,
                  const TrainConfig& cfg);

/// Writes "epoch,lr,train_loss,cv_loss" CSV.
void write_train_log(std::ostream& os, const std::vector<EpochLog>& log);

/// Last hidden layer activations: T x H_last, values in (0, 1).
Matrix extract_frame_features(const Network& net, const Matrix& inputs);

// "DVM1" model file: magic, u32 version, u8 phone-dependent flag,
// u32 posterior dim, u32 layer count, per-layer (rows, cols) u32 pairs, then
// float32 parameters layer by layer (weights row-major, then biases).
inline constexpr std::uint32_t kModelVersion = 1;
void save_model(std::ostream& os, const Network& net);
void save_model(const std::filesystem::path& path, const Network& net);
Network load_model(std::istream& is);
Network load_model(const std::filesystem::path& path);

}  // namespace dvector::nnet
