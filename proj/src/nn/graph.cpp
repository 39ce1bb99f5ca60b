#include "gestauth/nn/graph.hpp"

#include "gestauth/error.hpp"

namespace gestauth::nn {

Graph::Id Graph::constant(Tensor value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

Graph::Id Graph::parameter(Parameter& p) {
  Node n;
  n.value = p.value;
  n.param = &p;
  n.requires_grad = true;
  if (p.grad.shape != p.value.shape) p.grad = Tensor(p.value.shape);
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

Graph::Id Graph::record(Tensor value, std::vector<Id> parents, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  for (auto p : parents) n.requires_grad = n.requires_grad || nodes_.at(p).requires_grad;
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

Tensor& Graph::grad(Id id) {
  auto& n = nodes_.at(id);
  if (n.param) return n.param->grad;
  if (!n.grad_ready) {
    n.grad = Tensor(n.value.shape);
    n.grad_ready = true;
  }
  return n.grad;
}

bool Graph::has_grad(Id id) const {
  const auto& n = nodes_.at(id);
  return n.param != nullptr || n.grad_ready;
}

void Graph::backward() {
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    auto& n = nodes_[i];
    if (n.backward && n.grad_ready) n.backward(*this, i);
  }
}

void Graph::backward(Id scalar_output) {
  if (value(scalar_output).numel() != 1) throw InputError("backward(id) needs a scalar output");
  grad(scalar_output).data[0] += 1.0;
  backward();
}

}  // namespace gestauth::nn
