#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "advloss/losses.hpp"
#include "advloss/numerics.hpp"
#include "advloss/rng.hpp"

namespace advloss {

// Features in [0, 1]; labels in [0, num_classes).
struct Dataset {
  BatchMatrix features;  // (n_samples, input_dim)
  std::vector<std::uint32_t> labels;
  std::size_t num_classes = 0;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t input_dim() const noexcept { return features.cols(); }

  void validate() const;
  Dataset subset(std::span<const std::size_t> indices) const;
  Dataset head(std::size_t count) const;
};

// Binary layout: "ALDS", u32 n, u32 d, u32 c, n*d float32, n uint32 (all LE).
void save_dataset(const Dataset& data, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

struct DenseLayer {
  BatchMatrix weight;  // (out, in)
  std::vector<double> bias;
};

// Affine layers with ReLU between them and an identity output layer.
class MlpModel {
 public:
  MlpModel() = default;
  explicit MlpModel(std::vector<DenseLayer> layers);

  // He-normal weights, zero biases. dims = {input, hidden..., classes}.
  static MlpModel random(std::span<const std::size_t> dims, Rng& rng);

  std::size_t input_dim() const noexcept { return layers_.front().weight.cols(); }
  std::size_t num_classes() const noexcept { return layers_.back().weight.rows(); }
  std::vector<std::size_t> dims() const;

  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  std::vector<DenseLayer>& mutable_layers() noexcept { return layers_; }

  bool parameters_finite() const noexcept;

 private:
  std::vector<DenseLayer> layers_;
};

BatchMatrix forward(const MlpModel& model, const BatchMatrix& x);

// Gradient of the loss (batch mean by default) with respect to the inputs.
BatchMatrix input_grad(const MlpModel& model, const SurrogateLoss& loss, const BatchMatrix& x,
                       std::span<const std::uint32_t> labels,
                       Reduction reduction = Reduction::Mean);

struct InputGradient {
  double loss_value = 0.0;  // batch mean
  BatchMatrix grad;         // (N, input_dim)
};
InputGradient loss_and_input_grad(const MlpModel& model, const SurrogateLoss& loss,
                                  const BatchMatrix& x, std::span<const std::uint32_t> labels,
                                  Reduction reduction);

// Text header followed by the little-endian float64 parameter block.
void save_model(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_model(const std::filesystem::path& path);

enum class AdvTrainingMode { None, Fgsm };

struct TrainConfig {
  std::vector<std::size_t> hidden = {16, 16};
  std::size_t epochs = 30;
  double learning_rate = 0.1;
  std::size_t batch_size = 32;
  AdvTrainingMode at_mode = AdvTrainingMode::None;
  double at_epsilon = 0.0;
  std::uint64_t seed = 0;
};

struct EpochStats {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double train_accuracy = 0.0;  // on the (possibly perturbed) training batches
};

struct TrainResult {
  MlpModel model;
  std::vector<EpochStats> curve;
};

TrainResult train(const Dataset& data, const TrainConfig& config);

double clean_accuracy(const MlpModel& model, const Dataset& data);

}  // namespace advloss
