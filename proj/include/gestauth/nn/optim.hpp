#pragma once

#include <vector>

#include "gestauth/nn/graph.hpp"

namespace gestauth::nn {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam. Moment buffers are created on the first step and
/// shaped like the parameters they track.
class Adam {
 public:
  explicit Adam(std::vector<Parameter*> params, AdamConfig cfg = {});

  /// Applies one update from the gradients currently held by the parameters.
  void step();
  [[nodiscard]] std::size_t steps() const noexcept { return t_; }
  [[nodiscard]] const AdamConfig& config() const noexcept { return cfg_; }
  void set_learning_rate(double lr) { cfg_.learning_rate = lr; }

 private:
  std::vector<Parameter*> params_;
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::size_t t_ = 0;
};

struct BceResult {
  double value = 0.0;
  std::vector<double> grad;  // d loss / d score
};

constexpr double kScoreClamp = 1e-7;

/// Sum of -[w*y*log s + (1-y)*log(1-s)] divided by the summed sample weights
/// (w for positives, 1 for negatives). Scores are clamped to [1e-7, 1-1e-7].
BceResult weighted_bce(const std::vector<double>& scores, const std::vector<int>& labels, double pos_weight);

/// Graph form: `scores` is any tensor with one score per label.
Id weighted_bce(Graph& g, Id scores, const std::vector<int>& labels, double pos_weight);

/// Mean over all elements of a tensor, as a scalar node.
Id mean_all(Graph& g, Id x);

}  // namespace gestauth::nn
