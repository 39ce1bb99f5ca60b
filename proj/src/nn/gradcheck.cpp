#include "gestauth/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace gestauth::nn {

namespace {

struct Evaluator {
  const ForwardFn& forward;
  std::vector<Tensor> inputs;
  std::vector<double> projection;

  double loss() {
    Graph g;
    std::vector<Id> ids;
    for (const auto& t : inputs) ids.push_back(g.constant(t));
    const Tensor& out = g.value(forward(g, ids));
    double s = 0.0;
    for (std::size_t i = 0; i < out.numel(); ++i) s += projection[i] * out[i];
    return s;
  }
};

std::vector<std::size_t> pick(std::size_t n, std::size_t k, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (k == 0 || k >= n) return idx;
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

double rel_error(double a, double n) { return std::abs(a - n) / std::max(1e-6, std::abs(a) + std::abs(n)); }

}  // namespace

GradCheckReport grad_check(const ForwardFn& forward, const std::vector<Tensor>& inputs,
                           const std::vector<Parameter*>& params, const GradCheckOptions& opts) {
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto* p : params) p->zero_grad();

  // Analytic pass.
  Graph g;
  std::vector<Id> ids;
  for (const auto& t : inputs) ids.push_back(g.constant(t, opts.check_inputs));
  const Id out = forward(g, ids);
  std::vector<double> projection(g.value(out).numel());
  for (auto& r : projection) r = normal(rng);
  Tensor& seed = g.grad(out);
  for (std::size_t i = 0; i < projection.size(); ++i) seed[i] = projection[i];
  g.backward();

  Evaluator eval{forward, inputs, projection};
  GradCheckReport report;
  auto check_block = [&](const std::string& name, std::vector<double>& values, const std::vector<double>& analytic) {
    BlockError be{name, 0.0, 0};
    for (auto i : pick(values.size(), opts.max_coords_per_block, rng)) {
      const double orig = values[i];
      values[i] = orig + opts.step;
      const double fp = eval.loss();
      values[i] = orig - opts.step;
      const double fm = eval.loss();
      values[i] = orig;
      const double numeric = (fp - fm) / (2.0 * opts.step);
      be.max_rel_error = std::max(be.max_rel_error, rel_error(analytic[i], numeric));
      ++be.checked;
    }
    report.max_rel_error = std::max(report.max_rel_error, be.max_rel_error);
    report.blocks.push_back(be);
  };

  if (opts.check_inputs) {
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      const auto analytic = g.has_grad(ids[k]) ? g.grad(ids[k]).data : std::vector<double>(inputs[k].numel(), 0.0);
      check_block("input" + std::to_string(k), eval.inputs[k].data, analytic);
    }
  }
  for (auto* p : params) {
    const auto analytic = p->grad.data;
    check_block(p->name, p->value.data, analytic);
  }
  return report;
}

}  // namespace gestauth::nn
