#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cartal/pool.hpp"

namespace cartal {

enum class Activation { Relu, Tanh };

Activation parse_activation(const std::string& name);
std::string to_string(Activation a);

struct ClassifierConfig {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden_dims{32, 32};
  int num_classes = 2;
  double dropout_rate = 0.3;
  Activation activation = Activation::Relu;

  void validate() const;
};

struct TrainConfig {
  double learning_rate = 0.05;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 30;
  // Epochs without validation improvement before stopping.
  std::size_t patience = 5;
  // Fraction of an epoch between training-dynamics snapshots.
  double eval_interval = 0.5;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

/// One row per example, one column per class; rows are probability vectors.
using ProbMatrix = Eigen::MatrixXd;

/// Row-major view of a set of examples as a dense n x d matrix.
Eigen::MatrixXd feature_matrix(const Dataset& ds);
Eigen::MatrixXd feature_matrix(const Dataset& ds, std::span<const ExampleId> ids);
std::vector<int> label_vector(const Dataset& ds);
std::vector<int> label_vector(const Dataset& ds, std::span<const ExampleId> ids);

struct DynamicsSnapshot {
  std::size_t step = 0;             // snapshot index, 0-based
  std::vector<double> gold_prob;    // per probe example
  std::vector<int> predicted;       // argmax per probe example
};

using DynamicsSink = std::function<void(const DynamicsSnapshot&)>;

/// Examples to evaluate at every eval_interval during fit.
struct DynamicsProbe {
  Eigen::MatrixXd features;
  std::vector<int> labels;
  DynamicsSink sink;
};

struct LabelledData {
  Eigen::MatrixXd features;
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
  static LabelledData from(const Dataset& ds);
  static LabelledData from(const Dataset& ds, std::span<const ExampleId> ids);
};

/// Feed-forward network: [Linear -> activation -> dropout] x hidden, Linear -> softmax.
class Classifier {
 public:
  struct Layer {
    Eigen::MatrixXd weight;  // out x in
    Eigen::VectorXd bias;
  };

  /// All weights and biases zero.
  static Classifier zeros(const ClassifierConfig& config);
  /// Uniform He-style initialization, biases zero.
  static Classifier initialized(const ClassifierConfig& config, std::uint64_t seed);

  const ClassifierConfig& config() const noexcept { return config_; }
  const std::vector<Layer>& layers() const noexcept { return layers_; }

  /// Deterministic inference with dropout disabled.
  ProbMatrix predict_proba(const Eigen::MatrixXd& xs) const;
  Eigen::MatrixXd logits(const Eigen::MatrixXd& xs) const;

  /// T stochastic passes with dropout active; independent masks per pass.
  std::vector<ProbMatrix> mc_predict_proba(const Eigen::MatrixXd& xs, std::size_t samples,
                                           std::uint64_t rng_seed) const;
  std::vector<Eigen::MatrixXd> mc_logits(const Eigen::MatrixXd& xs, std::size_t samples,
                                         std::uint64_t rng_seed) const;

  /// Penultimate activations (last hidden layer), dropout off.
  Eigen::MatrixXd embed(const Eigen::MatrixXd& xs) const;

  std::vector<int> predict(const Eigen::MatrixXd& xs) const;
  double accuracy(const LabelledData& data) const;

  std::size_t parameter_count() const;
  /// Flattened parameters: for each layer, row-major weight then bias.
  std::vector<double> parameters() const;
  void set_parameters(std::span<const double> flat);

  /// Mean cross-entropy and its gradient in parameters() order. `masks`, when
  /// given, holds one pre-scaled dropout mask per hidden layer (n x width).
  double loss_and_gradient(const Eigen::MatrixXd& xs, std::span<const int> labels,
                           std::vector<double>* gradient,
                           const std::vector<Eigen::MatrixXd>* masks = nullptr) const;

  void save(const std::filesystem::path& path) const;
  static Classifier load(const std::filesystem::path& path);

  bool operator==(const Classifier& other) const;

 private:
  explicit Classifier(ClassifierConfig config);

  void check_input(const Eigen::MatrixXd& xs) const;
  Eigen::MatrixXd activate(const Eigen::MatrixXd& pre) const;

  ClassifierConfig config_;
  std::vector<Layer> layers_;
};

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits);

/// Mini-batch SGD on cross-entropy with early stopping on validation
/// accuracy; the best validation checkpoint is restored at the end.
Classifier fit(const ClassifierConfig& config, const LabelledData& train, const LabelledData& val,
               const TrainConfig& tcfg, const DynamicsProbe* probe = nullptr);

}  // namespace cartal
