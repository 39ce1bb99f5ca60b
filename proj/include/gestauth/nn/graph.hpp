#pragma once

#include <functional>
#include <vector>

#include "gestauth/nn/tensor.hpp"

namespace gestauth::nn {

/// Reverse-mode tape. Nodes are appended in evaluation order, so walking the
/// tape backwards visits every node after all of its consumers.
class Graph {
 public:
  using Id = std::size_t;
  using BackwardFn = std::function<void(Graph&, Id)>;

  /// Leaf holding data. Gradients are only tracked when `requires_grad`.
  Id constant(Tensor value, bool requires_grad = false);
  /// Leaf bound to a parameter; its gradient accumulates into `p.grad`.
  Id parameter(Parameter& p);
  /// Records an op result. `backward` reads grad(self) and accumulates into
  /// the parents' gradients.
  Id record(Tensor value, std::vector<Id> parents, BackwardFn backward);

  [[nodiscard]] const Tensor& value(Id id) const { return nodes_[id].value; }
  [[nodiscard]] const Shape& shape(Id id) const { return nodes_[id].value.shape; }
  [[nodiscard]] bool requires_grad(Id id) const { return nodes_[id].requires_grad; }
  /// Gradient buffer of a node, zero-initialised on first access.
  Tensor& grad(Id id);
  [[nodiscard]] bool has_grad(Id id) const;
  [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }

  /// Runs the tape in reverse. Seed gradients must already be set via grad().
  void backward();
  /// Seeds a scalar output with 1 and runs backward().
  void backward(Id scalar_output);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    Parameter* param = nullptr;
    bool requires_grad = false;
    bool grad_ready = false;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

using Id = Graph::Id;

}  // namespace gestauth::nn
