#pragma once

#include <cstdint>
#include <deque>
#include <random>
#include <string>
#include <vector>

#include "gestauth/nn/ops.hpp"

namespace gestauth::nn {

using Rng = std::mt19937_64;

enum class LayerKind { dense, conv1d, maxpool1d, upsample1d, gru, relu, sigmoid, tanh, concat, flatten };

std::string to_string(LayerKind k);
LayerKind layer_kind_from_string(const std::string& s);

/// Hyperparameters of one layer. `in`/`out` are feature or channel counts
/// (hidden size for gru); `kernel` is the conv kernel, pooling window or
/// upsampling factor.
struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  std::string name;
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t kernel = 0;
  std::size_t stride = 0;
  Padding padding = Padding::same;
  bool return_sequences = false;
};

void validate(const LayerSpec& spec);
/// Closed-form number of trainable values of a layer.
std::size_t param_count(const LayerSpec& spec);

struct DenseLayer {
  Parameter* W = nullptr;
  Parameter* b = nullptr;
  Id operator()(Graph& g, Id x) const;
};

struct ConvLayer {
  Parameter* W = nullptr;
  Parameter* b = nullptr;
  Padding padding = Padding::same;
  Id operator()(Graph& g, Id x) const;
};

struct GruLayer {
  Parameter* Wx = nullptr;
  Parameter* Wh = nullptr;
  Parameter* bx = nullptr;
  Parameter* bh = nullptr;
  bool return_sequences = false;
  Id operator()(Graph& g, Id x) const;
};

/// Owner of a model's parameters and its layer list. Parameters live in a
/// deque so layer handles stay valid as more are added.
class Module {
 public:
  explicit Module(std::uint64_t seed) : seed_(seed), rng_(seed) {}
  Module(const Module&) = delete;
  Module& operator=(const Module&) = delete;
  virtual ~Module() = default;

  [[nodiscard]] std::vector<Parameter*> parameters();
  [[nodiscard]] const std::vector<LayerSpec>& specs() const noexcept { return specs_; }
  [[nodiscard]] std::size_t parameter_count() const;
  [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
  void zero_grad();

  /// Copies of all parameter values, in registration order.
  [[nodiscard]] std::vector<Tensor> snapshot() const;
  void restore(const std::vector<Tensor>& values);

  DenseLayer add_dense(const std::string& name, std::size_t in, std::size_t out);
  ConvLayer add_conv(const std::string& name, std::size_t kernel, std::size_t in, std::size_t out,
                     Padding padding = Padding::same);
  GruLayer add_gru(const std::string& name, std::size_t in, std::size_t hidden, bool return_sequences);
  /// Records a parameter-free layer in the spec list.
  void add_spec(LayerSpec spec);

 private:
  Parameter& make_param(const std::string& name, Shape shape, double limit);

  std::uint64_t seed_;
  Rng rng_;
  std::deque<Parameter> params_;
  std::vector<LayerSpec> specs_;
};

}  // namespace gestauth::nn
