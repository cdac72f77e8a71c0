#pragma once

// Probe heads trained on frozen embeddings: zero to three rectified hidden
// layers followed by a single output neuron and a sigmoid, fitted with
// mini-batch SGD on binary cross-entropy. The output is the probability that
// a sample is an attack presentation.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "padeval/embedding_table.hpp"
#include "padeval/rng.hpp"
#include "padeval/score_metrics.hpp"

namespace pad {

inline constexpr std::size_t kMaxHiddenLayers = 3;
inline constexpr double kLossClamp = 1e-7;

/// Fully connected layer; weights are outputs x inputs, row-major.
struct DenseLayer {
  std::size_t inputs = 0;
  std::size_t outputs = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  double& weight(std::size_t out, std::size_t in) { return weights[out * inputs + in]; }
  double weight(std::size_t out, std::size_t in) const { return weights[out * inputs + in]; }
  bool operator==(const DenseLayer&) const = default;
};

/// Gradient of the mean loss, laid out exactly like the head's layers.
struct HeadGradient {
  std::vector<DenseLayer> layers;
  std::vector<double> flatten() const;
};

class HeadModel {
 public:
  HeadModel() = default;

  /// Throws pad::Error(shape_mismatch) unless the layers chain, the final
  /// layer has one output, and there are at most kMaxHiddenLayers hidden ones.
  explicit HeadModel(std::vector<DenseLayer> layers);

  static HeadModel zeros(std::size_t input_dim, std::size_t hidden_layers, std::size_t hidden_width);

  /// Weights and biases uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], drawn
  /// layer by layer, weights before biases.
  static HeadModel initialize(std::size_t input_dim, std::size_t hidden_layers,
                              std::size_t hidden_width, Rng& rng);

  std::size_t input_dim() const { return layers_.front().inputs; }
  std::size_t hidden_layers() const { return layers_.size() - 1; }
  std::size_t parameter_count() const;
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }

  double logit(std::span<const float> x) const;
  /// Sigmoid of the logit, unclamped.
  double predict(std::span<const float> x) const;

  /// Parameters in layer order, each layer's weights then its bias.
  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> values);

  void sgd_step(const HeadGradient& gradient, double learning_rate);

  bool operator==(const HeadModel&) const = default;

 private:
  std::vector<DenseLayer> layers_;
};

double sigmoid(double z);

/// Mean binary cross-entropy with predictions clamped to [1e-7, 1 - 1e-7].
double bce_loss(std::span<const std::uint8_t> y_true, std::span<const double> y_pred);

/// Row-major features (labels.size() x input_dim) with 0/1 labels.
struct LabeledBatch {
  std::span<const float> features;
  std::span<const std::uint8_t> labels;
};

/// Exact gradient of the mean (unclamped) cross-entropy over the batch.
HeadGradient bce_gradient(const HeadModel& head, const LabeledBatch& batch);

enum class Optimizer { sgd };

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  std::size_t epochs = 100;
  Optimizer optimizer = Optimizer::sgd;
  std::uint64_t seed = 0;
  std::size_t hidden_layers = 0;
  std::size_t hidden_width = 64;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

/// The head train_head starts from for this config.
HeadModel initial_head(std::size_t input_dim, const TrainConfig& config);

/// Trains on the table's train split.
HeadModel train_head(const EmbeddingTable& table, const TrainConfig& config);

/// Trains on the given rows. Each epoch visits the rows in an order shuffled
/// from the seeded generator. When epoch_losses is non-null it receives the
/// mean clamped loss of every epoch. Throws single_class when the rows lack a
/// class, divergence when an epoch loss is not finite.
HeadModel train_head(const EmbeddingTable& table, std::span<const std::size_t> rows,
                     const TrainConfig& config, std::vector<double>* epoch_losses = nullptr);

ScoreSet predict_scores(const HeadModel& head, const EmbeddingTable& table, Split split);
ScoreSet predict_scores(const HeadModel& head, const EmbeddingTable& table,
                        std::span<const std::size_t> rows);

struct GridPoint {
  double learning_rate;
  double validation_eer;
};

struct GridSearchResult {
  TrainConfig best;
  std::vector<GridPoint> points;  // in grid order
};

inline const std::vector<double> kDefaultLearningRates = {1e-3, 1e-4, 1e-5, 1e-6};

/// One head per learning rate on the train rows, scored by EER on the val
/// rows. The lowest EER wins; ties go to the larger learning rate.
GridSearchResult grid_search(const EmbeddingTable& table, std::span<const double> lr_grid,
                             const TrainConfig& base);
GridSearchResult grid_search(const EmbeddingTable& table, std::span<const std::size_t> train_rows,
                             std::span<const std::size_t> val_rows, std::span<const double> lr_grid,
                             const TrainConfig& base);

}  // namespace pad
