#include "padeval/head.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "padeval/error.hpp"

namespace pad {

std::vector<double> HeadGradient::flatten() const {
  std::vector<double> out;
  for (const auto& l : layers) {
    out.insert(out.end(), l.weights.begin(), l.weights.end());
    out.insert(out.end(), l.bias.begin(), l.bias.end());
  }
  return out;
}

HeadModel::HeadModel(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw Error(ErrorCode::shape_mismatch, "head has no layers");
  if (layers_.size() > kMaxHiddenLayers + 1) {
    throw Error(ErrorCode::shape_mismatch, "head has more than 3 hidden layers");
  }
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (l.inputs == 0 || l.outputs == 0 || l.weights.size() != l.inputs * l.outputs ||
        l.bias.size() != l.outputs) {
      throw Error(ErrorCode::shape_mismatch, "layer " + std::to_string(i) + " has inconsistent shape");
    }
    if (i > 0 && layers_[i - 1].outputs != l.inputs) {
      throw Error(ErrorCode::shape_mismatch, "layer " + std::to_string(i) + " does not chain");
    }
    for (double w : l.weights) {
      if (!std::isfinite(w)) throw Error(ErrorCode::invalid_input, "non-finite head weight");
    }
    for (double b : l.bias) {
      if (!std::isfinite(b)) throw Error(ErrorCode::invalid_input, "non-finite head bias");
    }
  }
  if (layers_.back().outputs != 1) {
    throw Error(ErrorCode::shape_mismatch, "final layer must have exactly one output");
  }
}

namespace {

std::vector<DenseLayer> zero_layers(std::size_t input_dim, std::size_t hidden_layers,
                                    std::size_t hidden_width) {
  if (input_dim == 0) throw Error(ErrorCode::shape_mismatch, "head input dim must be positive");
  if (hidden_layers > kMaxHiddenLayers) {
    throw Error(ErrorCode::invalid_input, "hidden_layers must be in 0..3");
  }
  if (hidden_layers > 0 && hidden_width == 0) {
    throw Error(ErrorCode::invalid_input, "hidden_width must be positive");
  }
  std::vector<DenseLayer> layers;
  std::size_t in = input_dim;
  for (std::size_t i = 0; i <= hidden_layers; ++i) {
    const std::size_t out = i == hidden_layers ? 1 : hidden_width;
    layers.push_back({in, out, std::vector<double>(in * out, 0.0), std::vector<double>(out, 0.0)});
    in = out;
  }
  return layers;
}

}  // namespace

HeadModel HeadModel::zeros(std::size_t input_dim, std::size_t hidden_layers, std::size_t hidden_width) {
  return HeadModel(zero_layers(input_dim, hidden_layers, hidden_width));
}

HeadModel HeadModel::initialize(std::size_t input_dim, std::size_t hidden_layers,
                                std::size_t hidden_width, Rng& rng) {
  auto layers = zero_layers(input_dim, hidden_layers, hidden_width);
  for (auto& l : layers) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(l.inputs));
    for (double& w : l.weights) w = rng.uniform(-bound, bound);
    for (double& b : l.bias) b = rng.uniform(-bound, bound);
  }
  return HeadModel(std::move(layers));
}

std::size_t HeadModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
  return n;
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace {

// Per-layer pre-activations for one sample; the last entry holds the logit.
void forward(const std::vector<DenseLayer>& layers, std::span<const float> x,
             std::vector<std::vector<double>>& pre, std::vector<std::vector<double>>& act) {
  pre.resize(layers.size());
  act.resize(layers.size() + 1);
  act[0].assign(x.begin(), x.end());
  for (std::size_t li = 0; li < layers.size(); ++li) {
    const auto& l = layers[li];
    const auto& in = act[li];
    auto& z = pre[li];
    z.assign(l.bias.begin(), l.bias.end());
    for (std::size_t o = 0; o < l.outputs; ++o) {
      const double* w = l.weights.data() + o * l.inputs;
      double sum = 0.0;
      for (std::size_t i = 0; i < l.inputs; ++i) sum += w[i] * in[i];
      z[o] += sum;
    }
    auto& a = act[li + 1];
    a = z;
    if (li + 1 < layers.size()) {
      for (double& v : a) v = std::max(v, 0.0);
    }
  }
}

void require_input(const HeadModel& head, std::size_t size) {
  if (size != head.input_dim()) {
    throw Error(ErrorCode::shape_mismatch, "input has " + std::to_string(size) +
                                               " features, head expects " +
                                               std::to_string(head.input_dim()));
  }
}

}  // namespace

double HeadModel::logit(std::span<const float> x) const {
  require_input(*this, x.size());
  std::vector<std::vector<double>> pre;
  std::vector<std::vector<double>> act;
  forward(layers_, x, pre, act);
  return pre.back()[0];
}

double HeadModel::predict(std::span<const float> x) const { return sigmoid(logit(x)); }

std::vector<double> HeadModel::parameters() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (const auto& l : layers_) {
    out.insert(out.end(), l.weights.begin(), l.weights.end());
    out.insert(out.end(), l.bias.begin(), l.bias.end());
  }
  return out;
}

void HeadModel::set_parameters(std::span<const double> values) {
  if (values.size() != parameter_count()) {
    throw Error(ErrorCode::shape_mismatch, "parameter vector has wrong length");
  }
  std::size_t k = 0;
  for (auto& l : layers_) {
    for (double& w : l.weights) w = values[k++];
    for (double& b : l.bias) b = values[k++];
  }
}

void HeadModel::sgd_step(const HeadGradient& gradient, double learning_rate) {
  if (gradient.layers.size() != layers_.size()) {
    throw Error(ErrorCode::shape_mismatch, "gradient does not match head");
  }
  for (std::size_t li = 0; li < layers_.size(); ++li) {
    auto& l = layers_[li];
    const auto& g = gradient.layers[li];
    if (g.weights.size() != l.weights.size() || g.bias.size() != l.bias.size()) {
      throw Error(ErrorCode::shape_mismatch, "gradient does not match head");
    }
    for (std::size_t i = 0; i < l.weights.size(); ++i) l.weights[i] -= learning_rate * g.weights[i];
    for (std::size_t i = 0; i < l.bias.size(); ++i) l.bias[i] -= learning_rate * g.bias[i];
  }
}

double bce_loss(std::span<const std::uint8_t> y_true, std::span<const double> y_pred) {
  if (y_true.size() != y_pred.size() || y_true.empty()) {
    throw Error(ErrorCode::length_mismatch, "bce_loss: " + std::to_string(y_true.size()) +
                                                " labels vs " + std::to_string(y_pred.size()) +
                                                " predictions");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] > 1) throw Error(ErrorCode::invalid_input, "bce_loss: labels must be 0 or 1");
    const double p = std::clamp(y_pred[i], kLossClamp, 1.0 - kLossClamp);
    total -= y_true[i] == 1 ? std::log(p) : std::log1p(-p);
  }
  return total / static_cast<double>(y_true.size());
}

namespace {

HeadGradient zero_gradient(const HeadModel& head) {
  HeadGradient g;
  for (const auto& l : head.layers()) {
    g.layers.push_back({l.inputs, l.outputs, std::vector<double>(l.weights.size(), 0.0),
                        std::vector<double>(l.bias.size(), 0.0)});
  }
  return g;
}

// Accumulates the batch gradient into `grad` and returns the clamped loss sum.
double accumulate_gradient(const HeadModel& head, const LabeledBatch& batch, HeadGradient& grad) {
  const std::size_t dim = head.input_dim();
  const std::size_t n = batch.labels.size();
  if (n == 0) throw Error(ErrorCode::shape_mismatch, "bce_gradient: empty batch");
  if (batch.features.size() != n * dim) {
    throw Error(ErrorCode::shape_mismatch, "bce_gradient: batch holds " +
                                               std::to_string(batch.features.size()) +
                                               " values, expected " + std::to_string(n) + " x " +
                                               std::to_string(dim));
  }
  const auto& layers = head.layers();
  const double scale = 1.0 / static_cast<double>(n);
  std::vector<std::vector<double>> pre;
  std::vector<std::vector<double>> act;
  std::vector<double> delta;
  std::vector<double> next_delta;
  double loss_sum = 0.0;

  for (std::size_t s = 0; s < n; ++s) {
    const std::uint8_t y = batch.labels[s];
    if (y > 1) throw Error(ErrorCode::invalid_input, "bce_gradient: labels must be 0 or 1");
    forward(layers, batch.features.subspan(s * dim, dim), pre, act);
    const double p = sigmoid(pre.back()[0]);
    const double pc = std::clamp(p, kLossClamp, 1.0 - kLossClamp);
    loss_sum -= y == 1 ? std::log(pc) : std::log1p(-pc);

    delta.assign(1, (p - static_cast<double>(y)) * scale);
    for (std::size_t li = layers.size(); li-- > 0;) {
      const auto& l = layers[li];
      auto& g = grad.layers[li];
      const auto& in = act[li];
      for (std::size_t o = 0; o < l.outputs; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        double* gw = g.weights.data() + o * l.inputs;
        for (std::size_t i = 0; i < l.inputs; ++i) gw[i] += d * in[i];
        g.bias[o] += d;
      }
      if (li == 0) break;
      next_delta.assign(l.inputs, 0.0);
      for (std::size_t o = 0; o < l.outputs; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        const double* w = l.weights.data() + o * l.inputs;
        for (std::size_t i = 0; i < l.inputs; ++i) next_delta[i] += w[i] * d;
      }
      const auto& z_prev = pre[li - 1];
      for (std::size_t i = 0; i < l.inputs; ++i) {
        if (z_prev[i] <= 0.0) next_delta[i] = 0.0;
      }
      delta.swap(next_delta);
    }
  }
  return loss_sum;
}

}  // namespace

HeadGradient bce_gradient(const HeadModel& head, const LabeledBatch& batch) {
  HeadGradient grad = zero_gradient(head);
  accumulate_gradient(head, batch, grad);
  return grad;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw Error(ErrorCode::invalid_input, "learning_rate must be positive and finite");
  }
  if (batch_size == 0) throw Error(ErrorCode::invalid_input, "batch_size must be positive");
  if (hidden_layers > kMaxHiddenLayers) throw Error(ErrorCode::invalid_input, "hidden_layers must be in 0..3");
  if (hidden_layers > 0 && hidden_width == 0) {
    throw Error(ErrorCode::invalid_input, "hidden_width must be positive");
  }
}

HeadModel initial_head(std::size_t input_dim, const TrainConfig& config) {
  config.validate();
  Rng rng(config.seed);
  return HeadModel::initialize(input_dim, config.hidden_layers, config.hidden_width, rng);
}

HeadModel train_head(const EmbeddingTable& table, const TrainConfig& config) {
  const auto rows = table.rows_in(Split::train);
  return train_head(table, rows, config);
}

HeadModel train_head(const EmbeddingTable& table, std::span<const std::size_t> rows,
                     const TrainConfig& config, std::vector<double>* epoch_losses) {
  config.validate();
  bool has_bona = false;
  bool has_attack = false;
  for (std::size_t r : rows) {
    if (r >= table.rows()) throw Error(ErrorCode::shape_mismatch, "training row index out of range");
    (table.label(r).label == 0 ? has_bona : has_attack) = true;
  }
  if (!has_bona || !has_attack) {
    throw Error(ErrorCode::single_class, "training data must contain both bona fide and attack rows");
  }

  const std::size_t dim = table.dim();
  Rng rng(config.seed);
  HeadModel head = HeadModel::initialize(dim, config.hidden_layers, config.hidden_width, rng);
  std::vector<std::size_t> order(rows.begin(), rows.end());
  std::vector<float> features;
  std::vector<std::uint8_t> labels;
  HeadGradient grad = zero_gradient(head);
  if (epoch_losses) epoch_losses->clear();

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      features.clear();
      labels.clear();
      for (std::size_t k = start; k < end; ++k) {
        const auto row = table.row(order[k]);
        features.insert(features.end(), row.begin(), row.end());
        labels.push_back(table.label(order[k]).label);
      }
      for (auto& l : grad.layers) {
        std::fill(l.weights.begin(), l.weights.end(), 0.0);
        std::fill(l.bias.begin(), l.bias.end(), 0.0);
      }
      loss_sum += accumulate_gradient(head, {features, labels}, grad);
      head.sgd_step(grad, config.learning_rate);
    }
    const double mean_loss = loss_sum / static_cast<double>(order.size());
    const auto params = head.parameters();
    const bool finite_params = std::all_of(params.begin(), params.end(), [](double v) { return std::isfinite(v); });
    if (!std::isfinite(mean_loss) || !finite_params) {
      throw Error(ErrorCode::divergence, std::string("training diverged: non-finite ") +
                                             (finite_params ? "loss" : "weights") + " in epoch " +
                                             std::to_string(epoch + 1));
    }
    if (epoch_losses) epoch_losses->push_back(mean_loss);
  }
  return head;
}

ScoreSet predict_scores(const HeadModel& head, const EmbeddingTable& table, Split split) {
  const auto rows = table.rows_in(split);
  if (rows.empty()) {
    throw Error(ErrorCode::empty_split, std::string("no rows in split '") + to_string(split) + "'");
  }
  return predict_scores(head, table, rows);
}

ScoreSet predict_scores(const HeadModel& head, const EmbeddingTable& table,
                        std::span<const std::size_t> rows) {
  require_input(head, table.dim());
  ScoreSet out;
  for (std::size_t r : rows) {
    if (r >= table.rows()) throw Error(ErrorCode::shape_mismatch, "row index out of range");
    const double score = head.predict(table.row(r));
    const auto& label = table.label(r);
    auto& group = label.label == 0 ? out.bona_fide : out.attacks[label.species];
    group.push_back(std::to_string(r), score);
  }
  return out;
}

GridSearchResult grid_search(const EmbeddingTable& table, std::span<const double> lr_grid,
                             const TrainConfig& base) {
  const auto train = table.rows_in(Split::train);
  const auto val = table.rows_in(Split::val);
  return grid_search(table, train, val, lr_grid, base);
}

GridSearchResult grid_search(const EmbeddingTable& table, std::span<const std::size_t> train_rows,
                             std::span<const std::size_t> val_rows, std::span<const double> lr_grid,
                             const TrainConfig& base) {
  if (lr_grid.empty()) throw Error(ErrorCode::invalid_input, "grid_search: empty learning-rate grid");
  GridSearchResult result;
  bool have_best = false;
  double best_eer = 0.0;
  for (double lr : lr_grid) {
    TrainConfig config = base;
    config.learning_rate = lr;
    const HeadModel head = train_head(table, train_rows, config);
    const ScoreSet scores = predict_scores(head, table, val_rows);
    if (scores.bona_fide.empty() || scores.attacks.empty()) {
      throw Error(ErrorCode::single_class, "grid_search: validation rows must contain both classes");
    }
    const double e = eer(scores.bona_fide.scores, scores.pooled_attacks()).eer;
    result.points.push_back({lr, e});
    if (!have_best || e < best_eer || (e == best_eer && lr > result.best.learning_rate)) {
      have_best = true;
      best_eer = e;
      result.best = config;
    }
  }
  return result;
}

}  // namespace pad
