#include "gestauth/nn/optim.hpp"

#include <algorithm>
#include <cmath>

#include "gestauth/error.hpp"

namespace gestauth::nn {

Adam::Adam(std::vector<Parameter*> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  for (auto* p : params_) {
    m_.emplace_back(p->value.numel(), 0.0);
    v_.emplace_back(p->value.numel(), 0.0);
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& p = *params_[k];
    if (p.grad.numel() != p.value.numel()) throw InputError("adam: gradient shape mismatch for " + p.name);
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double g = p.grad[i];
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
      p.value[i] -= cfg_.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.epsilon);
    }
  }
}

BceResult weighted_bce(const std::vector<double>& scores, const std::vector<int>& labels, double pos_weight) {
  if (scores.size() != labels.size() || scores.empty()) throw InputError("weighted_bce: size mismatch");
  BceResult r;
  r.grad.assign(scores.size(), 0.0);
  double total_weight = 0.0;
  for (int y : labels) total_weight += y ? pos_weight : 1.0;
  if (!(total_weight > 0.0)) throw InputError("weighted_bce: zero total weight");
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double raw = scores[i];
    const double s = std::clamp(raw, kScoreClamp, 1.0 - kScoreClamp);
    const bool clamped = s != raw;
    if (labels[i]) {
      r.value -= pos_weight * std::log(s);
      if (!clamped) r.grad[i] = -pos_weight / s / total_weight;
    } else {
      r.value -= std::log(1.0 - s);
      if (!clamped) r.grad[i] = 1.0 / (1.0 - s) / total_weight;
    }
  }
  r.value /= total_weight;
  return r;
}

Id weighted_bce(Graph& g, Id scores, const std::vector<int>& labels, double pos_weight) {
  const auto r = weighted_bce(g.value(scores).data, labels, pos_weight);
  return g.record(Tensor({1}, {r.value}), {scores}, [scores, grad = r.grad](Graph& gr, Id self) {
    const double up = gr.grad(self)[0];
    Tensor& gs = gr.grad(scores);
    for (std::size_t i = 0; i < grad.size(); ++i) gs[i] += up * grad[i];
  });
}

Id mean_all(Graph& g, Id x) {
  const Tensor& v = g.value(x);
  double s = 0.0;
  for (double e : v.data) s += e;
  const auto n = static_cast<double>(v.numel());
  return g.record(Tensor({1}, {s / n}), {x}, [x, n](Graph& gr, Id self) {
    const double up = gr.grad(self)[0] / n;
    for (auto& e : gr.grad(x).data) e += up;
  });
}

}  // namespace gestauth::nn
