#include "gestauth/nn/layers.hpp"

#include <array>
#include <cmath>

#include "gestauth/error.hpp"

namespace gestauth::nn {

namespace {

constexpr std::array<std::pair<LayerKind, const char*>, 10> kKindNames{{
    {LayerKind::dense, "dense"},
    {LayerKind::conv1d, "conv1d"},
    {LayerKind::maxpool1d, "maxpool1d"},
    {LayerKind::upsample1d, "upsample1d"},
    {LayerKind::gru, "gru"},
    {LayerKind::relu, "relu"},
    {LayerKind::sigmoid, "sigmoid"},
    {LayerKind::tanh, "tanh"},
    {LayerKind::concat, "concat"},
    {LayerKind::flatten, "flatten"},
}};

}  // namespace

std::string to_string(LayerKind k) {
  for (auto [kind, name] : kKindNames)
    if (kind == k) return name;
  return "unknown";
}

LayerKind layer_kind_from_string(const std::string& s) {
  for (auto [kind, name] : kKindNames)
    if (s == name) return kind;
  throw InputError("unknown layer kind '" + s + "'");
}

void validate(const LayerSpec& spec) {
  auto fail = [&](const std::string& what) { throw InputError("layer " + spec.name + ": " + what); };
  switch (spec.kind) {
    case LayerKind::dense:
    case LayerKind::gru:
      if (spec.in == 0 || spec.out == 0) fail("sizes must be positive");
      break;
    case LayerKind::conv1d:
      if (spec.in == 0 || spec.out == 0 || spec.kernel == 0) fail("sizes must be positive");
      break;
    case LayerKind::maxpool1d:
      if (spec.kernel == 0 || spec.stride == 0) fail("window and stride must be positive");
      break;
    case LayerKind::upsample1d:
      if (spec.kernel == 0) fail("factor must be positive");
      break;
    default:
      break;
  }
}

std::size_t param_count(const LayerSpec& spec) {
  switch (spec.kind) {
    case LayerKind::dense:
      return (spec.in + 1) * spec.out;
    case LayerKind::conv1d:
      return (spec.kernel * spec.in + 1) * spec.out;
    case LayerKind::gru:
      return 3 * (spec.in * spec.out + spec.out * spec.out + 2 * spec.out);
    default:
      return 0;
  }
}

Id DenseLayer::operator()(Graph& g, Id x) const { return dense(g, x, g.parameter(*W), g.parameter(*b)); }

Id ConvLayer::operator()(Graph& g, Id x) const { return conv1d(g, x, g.parameter(*W), g.parameter(*b), padding); }

Id GruLayer::operator()(Graph& g, Id x) const {
  return gru(g, x, g.parameter(*Wx), g.parameter(*Wh), g.parameter(*bx), g.parameter(*bh), return_sequences);
}

std::vector<Parameter*> Module::parameters() {
  std::vector<Parameter*> out;
  for (auto& p : params_) out.push_back(&p);
  return out;
}

std::size_t Module::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.numel();
  return n;
}

void Module::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

std::vector<Tensor> Module::snapshot() const {
  std::vector<Tensor> out;
  for (const auto& p : params_) out.push_back(p.value);
  return out;
}

void Module::restore(const std::vector<Tensor>& values) {
  if (values.size() != params_.size()) throw InputError("restore: parameter count mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i].shape != params_[i].value.shape) throw InputError("restore: shape mismatch for " + params_[i].name);
    params_[i].value = values[i];
  }
}

Parameter& Module::make_param(const std::string& name, Shape shape, double limit) {
  Tensor t(std::move(shape));
  if (limit > 0.0) {
    std::uniform_real_distribution<double> u(-limit, limit);
    for (auto& v : t.data) v = u(rng_);
  }
  params_.emplace_back(name, std::move(t));
  return params_.back();
}

DenseLayer Module::add_dense(const std::string& name, std::size_t in, std::size_t out) {
  LayerSpec spec{LayerKind::dense, name, in, out};
  validate(spec);
  specs_.push_back(spec);
  const double limit = std::sqrt(6.0 / static_cast<double>(in));
  DenseLayer l;
  l.W = &make_param(name + ".W", {in, out}, limit);
  l.b = &make_param(name + ".b", {out}, 0.0);
  return l;
}

ConvLayer Module::add_conv(const std::string& name, std::size_t kernel, std::size_t in, std::size_t out,
                           Padding padding) {
  LayerSpec spec{LayerKind::conv1d, name, in, out, kernel, 1, padding};
  validate(spec);
  specs_.push_back(spec);
  const double limit = std::sqrt(6.0 / static_cast<double>(kernel * in));
  ConvLayer l;
  l.W = &make_param(name + ".W", {kernel, in, out}, limit);
  l.b = &make_param(name + ".b", {out}, 0.0);
  l.padding = padding;
  return l;
}

GruLayer Module::add_gru(const std::string& name, std::size_t in, std::size_t hidden, bool return_sequences) {
  LayerSpec spec{LayerKind::gru, name, in, hidden};
  spec.return_sequences = return_sequences;
  validate(spec);
  specs_.push_back(spec);
  const double limit = 1.0 / std::sqrt(static_cast<double>(hidden));
  GruLayer l;
  l.Wx = &make_param(name + ".Wx", {in, 3 * hidden}, limit);
  l.Wh = &make_param(name + ".Wh", {hidden, 3 * hidden}, limit);
  l.bx = &make_param(name + ".bx", {3 * hidden}, 0.0);
  l.bh = &make_param(name + ".bh", {3 * hidden}, 0.0);
  l.return_sequences = return_sequences;
  return l;
}

void Module::add_spec(LayerSpec spec) {
  validate(spec);
  specs_.push_back(std::move(spec));
}

}  // namespace gestauth::nn
