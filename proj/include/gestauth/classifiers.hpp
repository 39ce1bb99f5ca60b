#pragma once

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "gestauth/dataset.hpp"
#include "gestauth/nn.hpp"

namespace gestauth::classifiers {

enum class Arch { mlp, convnet, gru, simplemix, complexmix };

constexpr std::array<Arch, 5> kAllArchs{Arch::mlp, Arch::convnet, Arch::gru, Arch::simplemix, Arch::complexmix};
constexpr std::size_t kBudgetMin = 60000;
constexpr std::size_t kBudgetMax = 80000;

std::string to_string(Arch a);
Arch arch_from_string(const std::string& s);

/// Binary gesture classifier: [B, 200, 6] -> [B, 1] probabilities.
class Classifier : public nn::Module {
 public:
  Classifier(Arch arch, std::uint64_t seed) : nn::Module(seed), arch_(arch) {}
  [[nodiscard]] Arch arch() const noexcept { return arch_; }
  virtual nn::Id forward(nn::Graph& g, nn::Id x) = 0;
  /// Timesteps left after the convolutional stage for an input of `t` steps
  /// (equal to `t` when the model has none).
  [[nodiscard]] virtual std::size_t reduced_steps(std::size_t t) const { return t; }

 private:
  Arch arch_;
};

/// Four inception blocks (parallel k3/k5/k7 convolutions, concatenation,
/// 1x1 mixing to 32 channels, pooling) followed by three stacked GRUs of 48
/// units. Output: last hidden state [B, 48]. Shared with the autoencoder.
struct ComplexMixBackbone {
  static constexpr std::size_t kBlocks = 4;
  static constexpr std::size_t kBranchChannels = 16;
  static constexpr std::size_t kMixChannels = 32;
  static constexpr std::size_t kGruHidden = 48;

  std::vector<std::array<nn::ConvLayer, 3>> branches;
  std::vector<nn::ConvLayer> mix;
  std::vector<nn::GruLayer> grus;

  static ComplexMixBackbone build(nn::Module& owner, const std::string& prefix, std::size_t in_channels);
  nn::Id convolutions(nn::Graph& g, nn::Id x) const;
  nn::Id operator()(nn::Graph& g, nn::Id x) const;
};

/// Builds an architecture and checks its parameter budget.
std::unique_ptr<Classifier> build_architecture(Arch arch, std::uint64_t seed);

/// Stacks series (all the same shape) into a [B, T, C] tensor.
nn::Tensor to_batch(const std::vector<const Series*>& xs);

struct TrainConfig {
  double learning_rate = 1e-4;
  double pos_weight = 4.0;
  std::size_t patience = 150;
  std::size_t max_epochs = 2000;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  double limited_fraction = 1.0;
};

void validate(const TrainConfig& cfg);

struct LabeledSet {
  std::vector<Series> x;
  std::vector<int> y;
  [[nodiscard]] std::size_t positives() const;
};

struct AuthTask {
  std::string target;
  dataset::NormStats norm;
  LabeledSet train;
  LabeledSet validation;
  LabeledSet test;
};

/// Positive class = the target user's gestures, negative = every other
/// user's gestures. Normalisation is fitted on the train part only. With
/// limited_fraction < 1 only the earliest ceil(f * n) target gestures of the
/// train and validation parts are kept.
AuthTask prepare_auth_task(const std::vector<dataset::Gesture>& corpus, const dataset::SplitSpec& split,
                           const std::string& target, double limited_fraction = 1.0);

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  bool stopped_early = false;
};

using EpochCallback = std::function<void(std::size_t epoch, double train_loss, double val_loss)>;

/// Mini-batch Adam on weighted binary cross-entropy with early stopping on
/// validation loss; the best epoch's parameters are restored at the end.
TrainHistory train_classifier(Classifier& model, const LabeledSet& train, const LabeledSet& validation,
                              const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// Scores each series independently, so results do not depend on batch order.
std::vector<double> predict_proba(Classifier& model, const std::vector<Series>& xs);

// ---------------------------------------------------------------------------
// Random forest

struct ForestSpec {
  std::size_t n_trees = 100;
  std::size_t min_samples_leaf = 1;
  std::uint64_t seed = 0;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;  // value <= threshold
  int right = -1;
  bool positive = false;
};

struct Tree {
  std::vector<TreeNode> nodes;
  [[nodiscard]] bool vote(const std::vector<double>& x) const;
};

struct Forest {
  ForestSpec spec;
  std::size_t n_features = 0;
  std::vector<Tree> trees;
};

/// Bootstrap-resampled Gini trees with floor(sqrt(n_features)) candidate
/// features per split. Ties between splits go to the lowest feature index,
/// then the lowest threshold.
Forest train_random_forest(const ForestSpec& spec, const std::vector<std::vector<double>>& features,
                           const std::vector<int>& labels);
/// Fraction of trees voting positive, a multiple of 1/n_trees.
double rf_score(const Forest& forest, const std::vector<double>& x);
std::vector<double> rf_predict(const Forest& forest, const std::vector<std::vector<double>>& features);

std::string forest_to_json(const Forest& forest);
Forest forest_from_json(const std::string& text);

}  // namespace gestauth::classifiers
