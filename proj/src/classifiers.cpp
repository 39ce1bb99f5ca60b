#include "gestauth/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "gestauth/error.hpp"

namespace gestauth::classifiers {

using nn::Graph;
using nn::Id;
using nn::LayerKind;
using nn::LayerSpec;

namespace {

constexpr std::array<std::pair<Arch, const char*>, 5> kArchNames{{
    {Arch::mlp, "mlp"},
    {Arch::convnet, "convnet"},
    {Arch::gru, "gru"},
    {Arch::simplemix, "simplemix"},
    {Arch::complexmix, "complexmix"},
}};

std::size_t pooled(std::size_t t) { return t <= 2 ? 1 : (t - 1) / 2 + 1; }

/// dense 32 -> dense 16 -> single sigmoid unit.
struct Head {
  nn::DenseLayer d1, d2, out;

  static Head build(nn::Module& m, std::size_t in) {
    Head h;
    h.d1 = m.add_dense("head.dense1", in, 32);
    m.add_spec({LayerKind::relu, "head.relu1"});
    h.d2 = m.add_dense("head.dense2", 32, 16);
    m.add_spec({LayerKind::relu, "head.relu2"});
    h.out = m.add_dense("head.out", 16, 1);
    m.add_spec({LayerKind::sigmoid, "head.sigmoid"});
    return h;
  }
  Id operator()(Graph& g, Id x) const {
    x = nn::relu(g, d1(g, x));
    x = nn::relu(g, d2(g, x));
    return nn::sigmoid(g, out(g, x));
  }
};

void add_pool_spec(nn::Module& m, const std::string& name) {
  LayerSpec s{LayerKind::maxpool1d, name};
  s.kernel = 2;
  s.stride = 2;
  m.add_spec(s);
}

class Mlp final : public Classifier {
 public:
  explicit Mlp(std::uint64_t seed) : Classifier(Arch::mlp, seed) {
    add_spec({LayerKind::flatten, "flatten"});
    const std::array<std::size_t, 4> sizes{kTimesteps * kChannels, 54, 32, 16};
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
      hidden_.push_back(add_dense("dense" + std::to_string(i + 1), sizes[i], sizes[i + 1]));
      add_spec({LayerKind::relu, "relu" + std::to_string(i + 1)});
    }
    out_ = add_dense("out", 16, 1);
    add_spec({LayerKind::sigmoid, "sigmoid"});
  }
  Id forward(Graph& g, Id x) override {
    x = nn::flatten(g, x);
    for (const auto& d : hidden_) x = nn::relu(g, d(g, x));
    return nn::sigmoid(g, out_(g, x));
  }

 private:
  std::vector<nn::DenseLayer> hidden_;
  nn::DenseLayer out_;
};

/// Conv + ReLU + pool stages with the given kernels and channel counts.
struct ConvStack {
  std::vector<nn::ConvLayer> convs;

  static ConvStack build(nn::Module& m, std::size_t in, const std::vector<std::size_t>& kernels,
                         const std::vector<std::size_t>& channels) {
    ConvStack s;
    for (std::size_t i = 0; i < kernels.size(); ++i) {
      const auto n = std::to_string(i + 1);
      s.convs.push_back(m.add_conv("conv" + n, kernels[i], in, channels[i]));
      m.add_spec({LayerKind::relu, "relu" + n});
      add_pool_spec(m, "pool" + n);
      in = channels[i];
    }
    return s;
  }
  Id operator()(Graph& g, Id x) const {
    for (const auto& c : convs) x = nn::maxpool1d(g, nn::relu(g, c(g, x)));
    return x;
  }
};

/// Stacked GRUs; all but the last return sequences.
std::vector<nn::GruLayer> build_grus(nn::Module& m, const std::string& prefix, std::size_t in, std::size_t hidden,
                                     std::size_t layers) {
  std::vector<nn::GruLayer> out;
  for (std::size_t i = 0; i < layers; ++i) {
    out.push_back(m.add_gru(prefix + std::to_string(i + 1), i == 0 ? in : hidden, hidden, i + 1 < layers));
  }
  return out;
}

Id run_grus(Graph& g, const std::vector<nn::GruLayer>& grus, Id x) {
  for (const auto& l : grus) x = l(g, x);
  return x;
}

class ConvNet final : public Classifier {
 public:
  static constexpr std::size_t kDenseWidth = 112;

  explicit ConvNet(std::uint64_t seed) : Classifier(Arch::convnet, seed) {
    convs_ = ConvStack::build(*this, kChannels, {5, 5, 3, 3, 3}, {16, 24, 32, 48, 64});
    add_spec({LayerKind::flatten, "flatten"});
    dense_ = add_dense("dense", reduced_steps(kTimesteps) * 64, kDenseWidth);
    add_spec({LayerKind::relu, "relu_dense"});
    out_ = add_dense("out", kDenseWidth, 1);
    add_spec({LayerKind::sigmoid, "sigmoid"});
  }
  Id forward(Graph& g, Id x) override {
    x = nn::flatten(g, convs_(g, x));
    return nn::sigmoid(g, out_(g, nn::relu(g, dense_(g, x))));
  }
  [[nodiscard]] std::size_t reduced_steps(std::size_t t) const override {
    for (int i = 0; i < 5; ++i) t = pooled(t);
    return t;
  }

 private:
  ConvStack convs_;
  nn::DenseLayer dense_, out_;
};

class GruNet final : public Classifier {
 public:
  explicit GruNet(std::uint64_t seed) : Classifier(Arch::gru, seed) {
    grus_ = build_grus(*this, "gru", kChannels, 64, 3);
    head_ = Head::build(*this, 64);
  }
  Id forward(Graph& g, Id x) override { return head_(g, run_grus(g, grus_, x)); }

 private:
  std::vector<nn::GruLayer> grus_;
  Head head_;
};

class SimpleMix final : public Classifier {
 public:
  explicit SimpleMix(std::uint64_t seed) : Classifier(Arch::simplemix, seed) {
    convs_ = ConvStack::build(*this, kChannels, {3, 3, 3, 3, 3}, {16, 24, 32, 48, 64});
    grus_ = build_grus(*this, "gru", 64, 48, 3);
    head_ = Head::build(*this, 48);
  }
  Id forward(Graph& g, Id x) override { return head_(g, run_grus(g, grus_, convs_(g, x))); }
  [[nodiscard]] std::size_t reduced_steps(std::size_t t) const override {
    for (int i = 0; i < 5; ++i) t = pooled(t);
    return t;
  }

 private:
  ConvStack convs_;
  std::vector<nn::GruLayer> grus_;
  Head head_;
};

class ComplexMix final : public Classifier {
 public:
  explicit ComplexMix(std::uint64_t seed) : Classifier(Arch::complexmix, seed) {
    backbone_ = ComplexMixBackbone::build(*this, "", kChannels);
    head_ = Head::build(*this, ComplexMixBackbone::kGruHidden);
  }
  Id forward(Graph& g, Id x) override { return head_(g, backbone_(g, x)); }
  [[nodiscard]] std::size_t reduced_steps(std::size_t t) const override {
    for (std::size_t i = 0; i < ComplexMixBackbone::kBlocks; ++i) t = pooled(t);
    return t;
  }

 private:
  ComplexMixBackbone backbone_;
  Head head_;
};

}  // namespace

std::string to_string(Arch a) {
  for (auto [arch, name] : kArchNames)
    if (arch == a) return name;
  return "unknown";
}

Arch arch_from_string(const std::string& s) {
  std::string lower = s;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  for (auto [arch, name] : kArchNames)
    if (lower == name) return arch;
  throw InputError("unknown architecture '" + s + "'");
}

ComplexMixBackbone ComplexMixBackbone::build(nn::Module& owner, const std::string& prefix, std::size_t in_channels) {
  ComplexMixBackbone b;
  std::size_t in = in_channels;
  for (std::size_t i = 0; i < kBlocks; ++i) {
    const auto p = prefix + "block" + std::to_string(i + 1);
    std::array<nn::ConvLayer, 3> br;
    const std::array<std::size_t, 3> kernels{3, 5, 7};
    for (std::size_t j = 0; j < 3; ++j) {
      br[j] = owner.add_conv(p + ".k" + std::to_string(kernels[j]), kernels[j], in, kBranchChannels);
      owner.add_spec({LayerKind::relu, p + ".relu_k" + std::to_string(kernels[j])});
    }
    owner.add_spec({LayerKind::concat, p + ".concat"});
    b.branches.push_back(br);
    b.mix.push_back(owner.add_conv(p + ".mix", 1, 3 * kBranchChannels, kMixChannels));
    owner.add_spec({LayerKind::relu, p + ".relu_mix"});
    add_pool_spec(owner, p + ".pool");
    in = kMixChannels;
  }
  b.grus = build_grus(owner, prefix + "gru", kMixChannels, kGruHidden, 3);
  return b;
}

Id ComplexMixBackbone::convolutions(Graph& g, Id x) const {
  for (std::size_t i = 0; i < branches.size(); ++i) {
    std::vector<Id> parts;
    for (const auto& c : branches[i]) parts.push_back(nn::relu(g, c(g, x)));
    x = nn::maxpool1d(g, nn::relu(g, mix[i](g, nn::concat(g, parts))));
  }
  return x;
}

Id ComplexMixBackbone::operator()(Graph& g, Id x) const { return run_grus(g, grus, convolutions(g, x)); }

std::unique_ptr<Classifier> build_architecture(Arch arch, std::uint64_t seed) {
  std::unique_ptr<Classifier> m;
  switch (arch) {
    case Arch::mlp:
      m = std::make_unique<Mlp>(seed);
      break;
    case Arch::convnet:
      m = std::make_unique<ConvNet>(seed);
      break;
    case Arch::gru:
      m = std::make_unique<GruNet>(seed);
      break;
    case Arch::simplemix:
      m = std::make_unique<SimpleMix>(seed);
      break;
    case Arch::complexmix:
      m = std::make_unique<ComplexMix>(seed);
      break;
  }
  const auto n = m->parameter_count();
  if (n < kBudgetMin || n > kBudgetMax) {
    throw InputError(to_string(arch) + " has " + std::to_string(n) + " parameters, outside the budget");
  }
  return m;
}

nn::Tensor to_batch(const std::vector<const Series*>& xs) {
  if (xs.empty()) throw InputError("empty batch");
  const std::size_t T = xs[0]->rows(), C = xs[0]->cols();
  nn::Tensor t({xs.size(), T, C});
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xs[i]->rows() != T || xs[i]->cols() != C) throw InputError("batch series shapes differ");
    std::copy(xs[i]->flat().begin(), xs[i]->flat().end(), t.data.begin() + static_cast<std::ptrdiff_t>(i * T * C));
  }
  return t;
}

void validate(const TrainConfig& cfg) {
  if (cfg.patience < 1) throw InputError("patience must be >= 1");
  if (!(cfg.limited_fraction > 0.0 && cfg.limited_fraction <= 1.0)) {
    throw InputError("limited_fraction must be in (0, 1]");
  }
  if (cfg.batch_size < 1 || cfg.max_epochs < 1) throw InputError("batch_size and max_epochs must be >= 1");
  if (!(cfg.learning_rate > 0.0) || !(cfg.pos_weight > 0.0)) throw InputError("learning rate and pos_weight must be > 0");
}

std::size_t LabeledSet::positives() const { return static_cast<std::size_t>(std::count(y.begin(), y.end(), 1)); }

AuthTask prepare_auth_task(const std::vector<dataset::Gesture>& corpus, const dataset::SplitSpec& split,
                           const std::string& target, double limited_fraction) {
  if (!(limited_fraction > 0.0 && limited_fraction <= 1.0)) throw InputError("limited_fraction must be in (0, 1]");
  const dataset::SplitIndex index(split);
  std::vector<dataset::Gesture> gestures;
  for (const auto& g : corpus)
    if (g.is_gesture && !g.synthetic) gestures.push_back(g);
  const auto users = dataset::user_ids(gestures);
  if (std::find(users.begin(), users.end(), target) == users.end()) {
    throw InputError("target user '" + target + "' not in corpus");
  }

  AuthTask task;
  task.target = target;
  task.norm = dataset::fit_norm_stats(index.select(gestures, dataset::Part::train));

  auto fill = [&](dataset::Part part, LabeledSet& out, bool limit) {
    auto selected = index.select(gestures, part);
    std::vector<const dataset::Gesture*> pos, neg;
    for (const auto& g : selected) (g.user_id == target ? pos : neg).push_back(&g);
    std::stable_sort(pos.begin(), pos.end(),
                     [](const auto* a, const auto* b) { return a->timestamp_ms < b->timestamp_ms; });
    if (limit && limited_fraction < 1.0 && !pos.empty()) {
      const auto keep = static_cast<std::size_t>(std::ceil(limited_fraction * static_cast<double>(pos.size()) - 1e-9));
      pos.resize(std::max<std::size_t>(1, keep));
    }
    for (const auto* g : pos) {
      out.x.push_back(dataset::apply_norm(g->series, task.norm));
      out.y.push_back(1);
    }
    for (const auto* g : neg) {
      out.x.push_back(dataset::apply_norm(g->series, task.norm));
      out.y.push_back(0);
    }
  };
  fill(dataset::Part::train, task.train, true);
  fill(dataset::Part::validation, task.validation, true);
  fill(dataset::Part::test, task.test, false);
  if (task.train.positives() == 0) throw InputError("no positive samples for " + target + " in train split");
  return task;
}

namespace {

double batch_loss(Classifier& model, const LabeledSet& set, const std::vector<std::size_t>& idx, double pos_weight,
                  bool update) {
  std::vector<const Series*> xs;
  std::vector<int> ys;
  for (auto i : idx) {
    xs.push_back(&set.x[i]);
    ys.push_back(set.y[i]);
  }
  Graph g;
  const Id out = model.forward(g, g.constant(to_batch(xs)));
  const Id loss = nn::weighted_bce(g, out, ys, pos_weight);
  if (update) g.backward(loss);
  return g.value(loss)[0];
}

double evaluate_loss(Classifier& model, const LabeledSet& set, double pos_weight) {
  if (set.x.empty()) return 0.0;
  const auto r = nn::weighted_bce(predict_proba(model, set.x), set.y, pos_weight);
  return r.value;
}

}  // namespace

TrainHistory train_classifier(Classifier& model, const LabeledSet& train, const LabeledSet& validation,
                              const TrainConfig& cfg, const EpochCallback& on_epoch) {
  validate(cfg);
  if (train.x.size() != train.y.size() || train.x.empty()) throw InputError("empty or inconsistent training set");
  if (train.positives() == 0) throw InputError("no positive samples in train");

  std::mt19937_64 rng(cfg.seed);
  nn::Adam opt(model.parameters(), {cfg.learning_rate});
  std::vector<std::size_t> order(train.x.size());
  std::iota(order.begin(), order.end(), 0);

  TrainHistory h;
  h.best_val_loss = std::numeric_limits<double>::infinity();
  auto best = model.snapshot();
  const bool has_val = !validation.x.empty();
  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const auto end = std::min(order.size(), start + cfg.batch_size);
      std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                   order.begin() + static_cast<std::ptrdiff_t>(end));
      model.zero_grad();
      total += batch_loss(model, train, idx, cfg.pos_weight, true) * static_cast<double>(idx.size());
      opt.step();
    }
    const double train_loss = total / static_cast<double>(order.size());
    if (!std::isfinite(train_loss)) throw NumericalError("training loss diverged at epoch " + std::to_string(epoch));
    const double val_loss = has_val ? evaluate_loss(model, validation, cfg.pos_weight) : train_loss;
    h.train_loss.push_back(train_loss);
    h.val_loss.push_back(val_loss);
    if (on_epoch) on_epoch(epoch, train_loss, val_loss);
    if (val_loss < h.best_val_loss) {
      h.best_val_loss = val_loss;
      h.best_epoch = epoch;
      best = model.snapshot();
    } else if (epoch - h.best_epoch >= cfg.patience) {
      h.stopped_early = true;
      break;
    }
  }
  model.restore(best);
  return h;
}

std::vector<double> predict_proba(Classifier& model, const std::vector<Series>& xs) {
  std::vector<double> out;
  out.reserve(xs.size());
  for (const auto& x : xs) {
    if (x.rows() != kTimesteps || x.cols() != kChannels) {
      throw InputError("predict_proba expects 200x6 series, got " + std::to_string(x.rows()) + "x" +
                       std::to_string(x.cols()));
    }
    Graph g;
    const Id y = model.forward(g, g.constant(to_batch({&x})));
    out.push_back(g.value(y)[0]);
  }
  return out;
}

}  // namespace gestauth::classifiers
