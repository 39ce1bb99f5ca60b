#include "gestauth/generative.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <json.hpp>

#include "gestauth/error.hpp"

namespace gestauth::generative {

using nn::Graph;
using nn::Id;
using nn::LayerKind;
using nn::Tensor;

namespace {

std::array<std::pair<SampleKind, const char*>, 4> kSampleNames{{
    {SampleKind::neighbourhood, "neighbourhood"},
    {SampleKind::self_mixed, "self_mixed"},
    {SampleKind::adversarial, "adversarial"},
    {SampleKind::same_user, "same_user"},
}};

Tensor batch_of(const std::vector<const Series*>& xs) { return classifiers::to_batch(xs); }

Tensor latent_batch(const std::vector<Latent>& zs) {
  Tensor t({zs.size(), kLatentDim});
  for (std::size_t i = 0; i < zs.size(); ++i) std::copy(zs[i].begin(), zs[i].end(), t.data.begin() + i * kLatentDim);
  return t;
}

double distance(const double* a, const double* b, std::size_t d, WaeDistance kind) {
  double s = 0.0;
  for (std::size_t k = 0; k < d; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return kind == WaeDistance::squared ? s : std::sqrt(s);
}

// d/da of d(a, b), accumulated with weight w into out.
void distance_grad(const double* a, const double* b, std::size_t d, WaeDistance kind, double w, double* out) {
  if (kind == WaeDistance::squared) {
    for (std::size_t k = 0; k < d; ++k) out[k] += w * 2.0 * (a[k] - b[k]);
    return;
  }
  const double norm = distance(a, b, d, WaeDistance::euclidean);
  if (norm == 0.0) return;
  for (std::size_t k = 0; k < d; ++k) out[k] += w * (a[k] - b[k]) / norm;
}

/// Energy statistic between rows of e [n x d] and p [n x d]; optional
/// gradient with respect to e.
double energy(const std::vector<double>& e, const std::vector<double>& p, std::size_t n, std::size_t d,
              WaeDistance kind, std::vector<double>* grad) {
  if (n < 2) throw InputError("wae_reg_loss needs at least 2 embeddings");
  const double nn_ = static_cast<double>(n);
  const double cross_w = 2.0 / (nn_ * nn_);
  const double self_w = 1.0 / (nn_ * (nn_ - 1.0));
  double cross = 0.0, self_e = 0.0, self_p = 0.0;
  if (grad) grad->assign(n * d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      cross += distance(&e[i * d], &p[j * d], d, kind);
      if (grad) distance_grad(&e[i * d], &p[j * d], d, kind, cross_w, &(*grad)[i * d]);
      if (i == j) continue;
      self_e += distance(&e[i * d], &e[j * d], d, kind);
      self_p += distance(&p[i * d], &p[j * d], d, kind);
      // The (i, j) and (j, i) terms each depend on e_i.
      if (grad) distance_grad(&e[i * d], &e[j * d], d, kind, -2.0 * self_w, &(*grad)[i * d]);
    }
  }
  return cross_w * cross - self_w * self_e - self_w * self_p;
}

struct MrrTerms {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d scores
};

MrrTerms mrr_terms(const double* s, std::size_t u, std::size_t t, double temperature) {
  MrrTerms r;
  r.grad.assign(u, 0.0);
  double a = 1.0;
  std::vector<double> sig(u, 0.0);
  for (std::size_t j = 0; j < u; ++j) {
    if (j == t) continue;
    sig[j] = nn::sigmoid((s[j] - s[t]) / temperature);
    a += sig[j];
  }
  r.loss = -1.0 / a;
  const double dl_da = 1.0 / (a * a);
  for (std::size_t j = 0; j < u; ++j) {
    if (j == t) continue;
    const double da = sig[j] * (1.0 - sig[j]) / temperature;
    r.grad[j] += dl_da * da;
    r.grad[t] -= dl_da * da;
  }
  return r;
}

std::size_t label_of(const std::vector<std::string>& users, const std::string& u) {
  const auto it = std::find(users.begin(), users.end(), u);
  return it == users.end() ? users.size() : static_cast<std::size_t>(it - users.begin());
}

}  // namespace

std::string to_string(RegKind k) {
  switch (k) {
    case RegKind::vae: return "vae";
    case RegKind::wae: return "wae";
    case RegKind::none: return "none";
  }
  return "unknown";
}

RegKind reg_kind_from_string(const std::string& s) {
  if (s == "vae") return RegKind::vae;
  if (s == "wae") return RegKind::wae;
  if (s == "none") return RegKind::none;
  throw InputError("unknown regulariser '" + s + "'");
}

VaeConfig VaeConfig::defaults(RegKind reg) {
  VaeConfig c;
  c.reg = reg;
  c.beta = reg == RegKind::vae ? 1e-4 : reg == RegKind::wae ? 1e-3 : 0.0;
  return c;
}

void validate(const VaeConfig& cfg) {
  if (!(cfg.beta >= 0.0) || !(cfg.alpha >= 0.0)) throw InputError("beta and alpha must be >= 0");
  if (!(cfg.mrr_temperature > 0.0)) throw InputError("MRR temperature must be > 0");
  if (!(cfg.learning_rate > 0.0)) throw InputError("learning rate must be > 0");
  if (cfg.batch_size < 1 || cfg.max_epochs < 1 || cfg.patience < 1) {
    throw InputError("batch_size, max_epochs and patience must be >= 1");
  }
  distances::validate(cfg.loss);
}

VaeModel::VaeModel(std::size_t n_users, std::uint64_t seed) : nn::Module(seed), n_users_(n_users) {
  if (n_users < 1) throw InputError("VaeModel needs at least one user for the scoring head");
  backbone_ = classifiers::ComplexMixBackbone::build(*this, "enc.", kChannels);
  enc_dense_ = add_dense("enc.dense", classifiers::ComplexMixBackbone::kGruHidden, 32);
  add_spec({LayerKind::relu, "enc.relu"});
  enc_mu_ = add_dense("enc.mu", 32, kLatentDim);
  enc_logvar_ = add_dense("enc.logvar", 32, kLatentDim);

  dec_gru1_ = add_gru("dec.gru1", kLatentDim, 32, true);
  dec_gru2_ = add_gru("dec.gru2", 32, 32, true);
  std::size_t in = 32;
  int i = 0;
  for (std::size_t out : {32u, 24u, 16u}) {
    const auto n = std::to_string(++i);
    nn::LayerSpec up{LayerKind::upsample1d, "dec.up" + n};
    up.kernel = 2;
    add_spec(up);
    dec_convs_.push_back(add_conv("dec.conv" + n, 5, in, out));
    add_spec({LayerKind::relu, "dec.relu" + n});
    in = out;
  }
  dec_out_ = add_conv("dec.out", 3, in, kChannels);

  auth_hidden_ = add_dense("auth.hidden", kAuthDims, 16);
  add_spec({LayerKind::relu, "auth.relu"});
  auth_out_ = add_dense("auth.out", 16, n_users);
}

VaeModel::Encoded VaeModel::encode(Graph& g, Id x) const {
  const Id h = nn::relu(g, enc_dense_(g, backbone_(g, x)));
  return {enc_mu_(g, h), enc_logvar_(g, h)};
}

Id VaeModel::decode(Graph& g, Id z) const {
  Id r = nn::repeat_steps(g, z, kDecoderSteps);
  r = dec_gru2_(g, dec_gru1_(g, r));
  for (const auto& c : dec_convs_) r = nn::relu(g, c(g, nn::upsample1d(g, r, 2)));
  return dec_out_(g, r);
}

Id VaeModel::auth_scores(Graph& g, Id z5) const { return auth_out_(g, nn::relu(g, auth_hidden_(g, z5))); }

void save_vae(const std::filesystem::path& stem, VaeModel& model, const VaeConfig& cfg) {
  nlohmann::json extra;
  extra["users"] = model.users;
  extra["n_users"] = model.n_users();
  extra["norm"] = nlohmann::json::parse(dataset::norm_stats_to_json(model.norm));
  extra["reg"] = to_string(cfg.reg);
  extra["beta"] = cfg.beta;
  extra["alpha"] = cfg.alpha;
  extra["loss"] = distances::to_string(cfg.loss.kind);
  nn::save_checkpoint(stem, model, "vae", extra.dump());
}

std::unique_ptr<VaeModel> load_vae(const std::filesystem::path& stem) {
  const auto extra = nlohmann::json::parse(nn::checkpoint_extra(stem));
  try {
    auto model = std::make_unique<VaeModel>(extra.at("n_users").get<std::size_t>(), 0);
    model->users = extra.at("users").get<std::vector<std::string>>();
    model->norm = dataset::norm_stats_from_json(extra.at("norm").dump());
    nn::load_checkpoint(stem, *model, "vae");
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("bad VAE checkpoint metadata: " + std::string(e.what()));
  }
}

LatentEmbedding encode(VaeModel& model, const Series& x) {
  Graph g;
  const auto enc = model.encode(g, g.constant(batch_of({&x})));
  LatentEmbedding e;
  std::copy_n(g.value(enc.mu).data.begin(), kLatentDim, e.mu.begin());
  std::copy_n(g.value(enc.log_var).data.begin(), kLatentDim, e.log_var.begin());
  return e;
}

std::vector<LatentEmbedding> encode_all(VaeModel& model, const std::vector<Series>& xs) {
  std::vector<LatentEmbedding> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(encode(model, x));
  return out;
}

Latent reparam_sample(const LatentEmbedding& emb, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Latent z{};
  for (std::size_t k = 0; k < kLatentDim; ++k) z[k] = emb.mu[k] + std::exp(0.5 * emb.log_var[k]) * normal(rng);
  return z;
}

Series decode(VaeModel& model, const Latent& z) {
  Graph g;
  const Id out = model.decode(g, g.constant(latent_batch({z})));
  return Series(kTimesteps, kChannels, g.value(out).data);
}

std::vector<Series> reconstruct(VaeModel& model, const std::vector<Series>& xs) {
  std::vector<Series> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(decode(model, encode(model, x).mu));
  return out;
}

double kl_loss(const LatentEmbedding& emb) {
  double s = 0.0;
  for (std::size_t k = 0; k < kLatentDim; ++k) {
    s += -0.5 * (1.0 + emb.log_var[k] - emb.mu[k] * emb.mu[k] - std::exp(emb.log_var[k]));
  }
  return s;
}

double wae_reg_loss(const std::vector<Latent>& embeddings, std::uint64_t seed, WaeDistance d) {
  const std::size_t n = embeddings.size();
  if (n < 2) throw InputError("wae_reg_loss needs at least 2 embeddings");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> e(n * kLatentDim), p(n * kLatentDim);
  for (std::size_t i = 0; i < n; ++i) std::copy(embeddings[i].begin(), embeddings[i].end(), e.begin() + i * kLatentDim);
  for (auto& v : p) v = normal(rng);
  return energy(e, p, n, kLatentDim, d, nullptr);
}

double approx_mrr_loss(const std::vector<double>& scores, std::size_t true_index, double temperature) {
  if (true_index >= scores.size()) throw InputError("approx_mrr_loss: label out of range");
  if (!(temperature > 0.0)) throw InputError("approx_mrr_loss: temperature must be > 0");
  return mrr_terms(scores.data(), scores.size(), true_index, temperature).loss;
}

double approx_mrr_loss(const std::vector<std::vector<double>>& scores, const std::vector<std::size_t>& labels,
                       double temperature) {
  if (scores.empty() || scores.size() != labels.size()) throw InputError("approx_mrr_loss: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) s += approx_mrr_loss(scores[i], labels[i], temperature);
  return s / static_cast<double>(scores.size());
}

Id kl_loss(Graph& g, Id mu, Id log_var) {
  const Tensor& m = g.value(mu);
  const Tensor& lv = g.value(log_var);
  if (m.shape != lv.shape || m.rank() != 2) throw InputError("kl_loss: mu and log_var shapes differ");
  const auto B = static_cast<double>(m.dim(0));
  double s = 0.0;
  for (std::size_t i = 0; i < m.numel(); ++i) s += -0.5 * (1.0 + lv[i] - m[i] * m[i] - std::exp(lv[i]));
  return g.record(Tensor({1}, {s / B}), {mu, log_var}, [mu, log_var, B](Graph& gr, Id self) {
    const double up = gr.grad(self)[0] / B;
    if (gr.requires_grad(mu)) {
      const Tensor& m = gr.value(mu);
      Tensor& gm = gr.grad(mu);
      for (std::size_t i = 0; i < m.numel(); ++i) gm[i] += up * m[i];
    }
    if (gr.requires_grad(log_var)) {
      const Tensor& lv = gr.value(log_var);
      Tensor& gl = gr.grad(log_var);
      for (std::size_t i = 0; i < lv.numel(); ++i) gl[i] += up * -0.5 * (1.0 - std::exp(lv[i]));
    }
  });
}

Id wae_reg_loss(Graph& g, Id z, const Tensor& prior, WaeDistance d) {
  const Tensor& zv = g.value(z);
  if (zv.rank() != 2 || prior.shape != zv.shape) throw InputError("wae_reg_loss: prior shape differs from batch");
  const std::size_t n = zv.dim(0), dim = zv.dim(1);
  std::vector<double> grad;
  const double value = energy(zv.data, prior.data, n, dim, d, &grad);
  return g.record(Tensor({1}, {value}), {z}, [z, grad = std::move(grad)](Graph& gr, Id self) {
    const double up = gr.grad(self)[0];
    Tensor& gz = gr.grad(z);
    for (std::size_t i = 0; i < grad.size(); ++i) gz[i] += up * grad[i];
  });
}

Id approx_mrr_loss(Graph& g, Id scores, const std::vector<std::size_t>& labels, double temperature) {
  const Tensor& s = g.value(scores);
  if (s.rank() != 2 || s.dim(0) != labels.size()) throw InputError("approx_mrr_loss: scores/labels mismatch");
  const std::size_t B = s.dim(0), U = s.dim(1);
  std::vector<double> grad(B * U, 0.0);
  double total = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    if (labels[b] >= U) throw InputError("approx_mrr_loss: label out of range");
    auto t = mrr_terms(&s.data[b * U], U, labels[b], temperature);
    total += t.loss;
    for (std::size_t j = 0; j < U; ++j) grad[b * U + j] = t.grad[j] / static_cast<double>(B);
  }
  return g.record(Tensor({1}, {total / static_cast<double>(B)}), {scores},
                  [scores, grad = std::move(grad)](Graph& gr, Id self) {
                    const double up = gr.grad(self)[0];
                    Tensor& gs = gr.grad(scores);
                    for (std::size_t i = 0; i < grad.size(); ++i) gs[i] += up * grad[i];
                  });
}

Id reparameterize(Graph& g, Id mu, Id log_var, const Tensor& eps) {
  const Tensor& m = g.value(mu);
  const Tensor& lv = g.value(log_var);
  if (m.shape != lv.shape || eps.shape != m.shape) throw InputError("reparameterize: shape mismatch");
  Tensor z(m.shape);
  for (std::size_t i = 0; i < z.numel(); ++i) z[i] = m[i] + std::exp(0.5 * lv[i]) * eps[i];
  return g.record(std::move(z), {mu, log_var}, [mu, log_var, eps](Graph& gr, Id self) {
    const Tensor& gz = gr.grad(self);
    if (gr.requires_grad(mu)) {
      Tensor& gm = gr.grad(mu);
      for (std::size_t i = 0; i < gz.numel(); ++i) gm[i] += gz[i];
    }
    if (gr.requires_grad(log_var)) {
      const Tensor& lv = gr.value(log_var);
      Tensor& gl = gr.grad(log_var);
      for (std::size_t i = 0; i < gz.numel(); ++i) gl[i] += gz[i] * 0.5 * std::exp(0.5 * lv[i]) * eps[i];
    }
  });
}

double reconstruction_weight_sum(const distances::LossSpec& spec) {
  if (spec.kind != distances::LossKind::klb_mod && spec.kind != distances::LossKind::klb_mod_feature) return 1.0;
  double w = 0.0;
  for (double v : distances::kKlbModWeights) w += v;
  return w;
}

Id reconstruction_loss(Graph& g, Id recon, const std::vector<const Series*>& targets, const distances::LossSpec& spec) {
  const Tensor& r = g.value(recon);
  if (r.rank() != 3 || r.dim(0) != targets.size()) throw InputError("reconstruction_loss: batch mismatch");
  const std::size_t B = r.dim(0), T = r.dim(1), C = r.dim(2);
  const double scale = 1.0 / (static_cast<double>(B) * static_cast<double>(T * C) * reconstruction_weight_sum(spec));
  std::vector<double> grad(r.numel());
  double total = 0.0;
  for (std::size_t b = 0; b < B; ++b) {
    Series rb(T, C, std::vector<double>(r.data.begin() + b * T * C, r.data.begin() + (b + 1) * T * C));
    const auto lr = distances::combined_loss(spec, *targets[b], rb);
    total += lr.value;
    const auto gflat = lr.grad.flat();
    for (std::size_t i = 0; i < T * C; ++i) grad[b * T * C + i] = gflat[i] * scale;
  }
  return g.record(Tensor({1}, {total * scale}), {recon}, [recon, grad = std::move(grad)](Graph& gr, Id self) {
    const double up = gr.grad(self)[0];
    Tensor& gr_ = gr.grad(recon);
    for (std::size_t i = 0; i < grad.size(); ++i) gr_[i] += up * grad[i];
  });
}

Id scale_grad(Graph& g, Id x, double factor) {
  return g.record(g.value(x), {x}, [x, factor](Graph& gr, Id self) {
    if (!gr.requires_grad(x)) return;
    const Tensor& gy = gr.grad(self);
    Tensor& gx = gr.grad(x);
    for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] += factor * gy[i];
  });
}

Id weighted_sum(Graph& g, const std::vector<std::pair<Id, double>>& terms) {
  double s = 0.0;
  std::vector<Id> parents;
  for (auto [id, w] : terms) {
    s += w * g.value(id)[0];
    parents.push_back(id);
  }
  return g.record(Tensor({1}, {s}), parents, [terms](Graph& gr, Id self) {
    const double up = gr.grad(self)[0];
    for (auto [id, w] : terms)
      if (gr.requires_grad(id)) gr.grad(id)[0] += up * w;
  });
}

VaeData prepare_vae_data(const std::vector<dataset::Gesture>& corpus, const VaeConfig& cfg,
                         double validation_fraction, std::uint64_t seed, dataset::NormStats& norm) {
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw InputError("validation fraction must be in [0, 1)");
  }
  auto excluded = [&](const std::string& u) {
    return std::find(cfg.exclude_users.begin(), cfg.exclude_users.end(), u) != cfg.exclude_users.end();
  };
  std::vector<const dataset::Gesture*> gestures, nongestures;
  for (const auto& g : corpus) {
    if (g.synthetic || excluded(g.user_id)) continue;
    (g.is_gesture ? gestures : nongestures).push_back(&g);
  }
  if (gestures.empty()) throw InputError("no gestures left to train the autoencoder");
  std::vector<std::size_t> order(gestures.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = static_cast<std::size_t>(std::floor(validation_fraction * static_cast<double>(order.size())));
  std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(val_idx.begin(), val_idx.end());
  std::sort(train_idx.begin(), train_idx.end());
  if (train_idx.empty()) throw InputError("autoencoder training split is empty");

  std::vector<dataset::Gesture> train_raw;
  for (auto i : train_idx) train_raw.push_back(*gestures[i]);
  norm = dataset::fit_norm_stats(train_raw);

  VaeData d;
  for (auto i : train_idx) {
    d.train.push_back(dataset::apply_norm(gestures[i]->series, norm));
    d.train_users.push_back(gestures[i]->user_id);
  }
  for (auto i : val_idx) {
    d.validation.push_back(dataset::apply_norm(gestures[i]->series, norm));
    d.validation_users.push_back(gestures[i]->user_id);
  }
  for (const auto* g : nongestures) d.nongestures.push_back(dataset::apply_norm(g->series, norm));
  return d;
}

namespace {

struct StepResult {
  double recon = 0.0;
  double reg = 0.0;
  double auth = 0.0;
  double mrr = 0.0;  // sum of 1 / approxrank over samples with a known user
  std::size_t mrr_count = 0;
};

/// One forward (and optionally backward) pass over a batch.
StepResult run_batch(VaeModel& model, const std::vector<const Series*>& xs, const std::vector<std::size_t>& labels,
                     const VaeConfig& cfg, double beta, bool train, bool recon_only, std::mt19937_64& rng) {
  Graph g;
  const Id x = g.constant(batch_of(xs));
  const auto enc = model.encode(g, x);
  const std::size_t B = xs.size();
  Id z = enc.mu;
  if (train && cfg.reg == RegKind::vae) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Tensor eps({B, kLatentDim});
    for (auto& v : eps.data) v = normal(rng);
    z = reparameterize(g, enc.mu, enc.log_var, eps);
  }
  StepResult r;
  const Id rec = reconstruction_loss(g, model.decode(g, z), xs, cfg.loss);
  r.recon = g.value(rec)[0];
  std::vector<std::pair<Id, double>> terms{{rec, 1.0}};

  if (!recon_only && cfg.reg != RegKind::none && (beta > 0.0 || !train)) {
    Id reg;
    if (cfg.reg == RegKind::vae) {
      reg = kl_loss(g, enc.mu, enc.log_var);
    } else {
      std::normal_distribution<double> normal(0.0, 1.0);
      Tensor prior({B, kLatentDim});
      for (auto& v : prior.data) v = normal(rng);
      reg = B >= 2 ? wae_reg_loss(g, enc.mu, prior, cfg.wae_distance) : g.constant(Tensor({1}));
    }
    r.reg = g.value(reg)[0];
    if (beta > 0.0) terms.emplace_back(reg, beta);
  }

  // Scoring head on the first latent dims, only for samples of known users.
  std::vector<std::size_t> rows, row_labels;
  for (std::size_t i = 0; i < B; ++i) {
    if (labels[i] < model.n_users()) {
      rows.push_back(i);
      row_labels.push_back(labels[i]);
    }
  }
  if (!recon_only && model.n_users() >= 2 && !rows.empty()) {
    Id z5 = nn::slice_last(g, enc.mu, 0, kAuthDims);
    if (rows.size() != B) {
      const Tensor& zv = g.value(z5);
      Tensor picked({rows.size(), kAuthDims});
      for (std::size_t k = 0; k < rows.size(); ++k)
        std::copy_n(zv.data.begin() + rows[k] * kAuthDims, kAuthDims, picked.data.begin() + k * kAuthDims);
      const Id src = z5;
      z5 = g.record(std::move(picked), {src}, [src, rows](Graph& gr, Id self) {
        const Tensor& gy = gr.grad(self);
        Tensor& gx = gr.grad(src);
        for (std::size_t k = 0; k < rows.size(); ++k)
          for (std::size_t j = 0; j < kAuthDims; ++j) gx[rows[k] * kAuthDims + j] += gy[k * kAuthDims + j];
      });
    }
    const Id scores = model.auth_scores(g, scale_grad(g, z5, cfg.alpha));
    const Id auth = approx_mrr_loss(g, scores, row_labels, cfg.mrr_temperature);
    r.auth = g.value(auth)[0];
    r.mrr = -r.auth * static_cast<double>(rows.size());
    r.mrr_count = rows.size();
    terms.emplace_back(auth, 1.0);
  }
  if (train) {
    const Id total = weighted_sum(g, terms);
    if (!std::isfinite(g.value(total)[0])) throw NumericalError("autoencoder loss is not finite");
    g.backward(total);
  }
  return r;
}

struct EpochTotals {
  double loss = 0.0;
  double recon = 0.0;
  double mrr = 0.0;
};

EpochTotals evaluate(VaeModel& model, const std::vector<Series>& xs, const std::vector<std::size_t>& labels,
                     const VaeConfig& cfg, std::mt19937_64& rng) {
  EpochTotals t;
  std::size_t mrr_count = 0;
  for (std::size_t start = 0; start < xs.size(); start += cfg.batch_size) {
    const auto end = std::min(xs.size(), start + cfg.batch_size);
    std::vector<const Series*> b;
    std::vector<std::size_t> l;
    for (std::size_t i = start; i < end; ++i) {
      b.push_back(&xs[i]);
      l.push_back(labels[i]);
    }
    const auto r = run_batch(model, b, l, cfg, cfg.beta, false, false, rng);
    const auto w = static_cast<double>(end - start);
    t.recon += r.recon * w;
    t.loss += (r.recon + cfg.beta * r.reg + cfg.alpha * r.auth) * w;
    t.mrr += r.mrr;
    mrr_count += r.mrr_count;
  }
  const auto n = static_cast<double>(xs.size());
  t.loss /= n;
  t.recon /= n;
  t.mrr = mrr_count ? t.mrr / static_cast<double>(mrr_count) : 0.0;
  return t;
}

}  // namespace

VaeHistory train_vae(VaeModel& model, const VaeData& data, const VaeConfig& cfg, std::uint64_t seed,
                     const VaeEpochCallback& on_epoch) {
  validate(cfg);
  if (data.train.empty() || data.train.size() != data.train_users.size()) {
    throw InputError("empty or inconsistent autoencoder training data");
  }
  if (model.users.empty()) {
    for (const auto& u : data.train_users)
      if (label_of(model.users, u) == model.users.size()) model.users.push_back(u);
  }
  if (model.users.size() != model.n_users()) {
    throw InputError("autoencoder head has " + std::to_string(model.n_users()) + " outputs for " +
                     std::to_string(model.users.size()) + " users");
  }
  std::vector<std::size_t> train_labels, val_labels;
  for (const auto& u : data.train_users) train_labels.push_back(label_of(model.users, u));
  for (const auto& u : data.validation_users) val_labels.push_back(label_of(model.users, u));

  std::mt19937_64 rng(seed);
  nn::Adam opt(model.parameters(), {cfg.learning_rate});

  auto run_epoch = [&](const std::vector<Series>& xs, const std::vector<std::size_t>& labels, double beta,
                       bool recon_only) {
    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const auto end = std::min(order.size(), start + cfg.batch_size);
      std::vector<const Series*> b;
      std::vector<std::size_t> l;
      for (std::size_t i = start; i < end; ++i) {
        b.push_back(&xs[order[i]]);
        l.push_back(labels.empty() ? model.n_users() : labels[order[i]]);
      }
      model.zero_grad();
      const auto r = run_batch(model, b, l, cfg, beta, true, recon_only, rng);
      opt.step();
      total += (r.recon + beta * r.reg + cfg.alpha * r.auth) * static_cast<double>(end - start);
    }
    return total / static_cast<double>(order.size());
  };

  for (std::size_t e = 0; e < cfg.nongesture_pretrain_epochs && !data.nongestures.empty(); ++e) {
    run_epoch(data.nongestures, {}, 0.0, true);
  }

  VaeHistory h;
  double best = std::numeric_limits<double>::infinity();
  auto best_params = model.snapshot();
  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    double beta = cfg.beta;
    if (cfg.beta_warmup_epochs > 0) {
      beta *= std::min(1.0, static_cast<double>(epoch + 1) / static_cast<double>(cfg.beta_warmup_epochs));
    }
    const double train_loss = run_epoch(data.train, train_labels, beta, false);
    if (!std::isfinite(train_loss)) throw NumericalError("autoencoder training diverged");
    EpochTotals val;
    if (!data.validation.empty()) {
      val = evaluate(model, data.validation, val_labels, cfg, rng);
    } else {
      val.loss = train_loss;
    }
    h.train_loss.push_back(train_loss);
    h.val_loss.push_back(val.loss);
    h.val_recon.push_back(val.recon);
    h.val_mrr.push_back(val.mrr);
    if (on_epoch) on_epoch(epoch, train_loss, val.loss);
    if (val.loss < best) {
      best = val.loss;
      h.best_epoch = epoch;
      best_params = model.snapshot();
    } else if (epoch - h.best_epoch >= cfg.patience) {
      h.stopped_early = true;
      break;
    }
  }
  model.restore(best_params);
  return h;
}

double validation_mrr(VaeModel& model, const std::vector<Series>& xs, const std::vector<std::string>& users,
                      double temperature) {
  if (xs.size() != users.size()) throw InputError("validation_mrr: size mismatch");
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const auto label = label_of(model.users, users[i]);
    if (label >= model.n_users()) continue;
    Graph g;
    const auto enc = model.encode(g, g.constant(batch_of({&xs[i]})));
    const Id scores = model.auth_scores(g, nn::slice_last(g, enc.mu, 0, kAuthDims));
    total -= approx_mrr_loss(g.value(scores).data, label, temperature);
    ++n;
  }
  return n ? total / static_cast<double>(n) : 0.0;
}

std::string to_string(SampleKind k) {
  for (auto [kind, name] : kSampleNames)
    if (kind == k) return name;
  return "unknown";
}

SampleKind sample_kind_from_string(const std::string& s) {
  for (auto [kind, name] : kSampleNames)
    if (s == name) return kind;
  if (s == "self-mixed") return SampleKind::self_mixed;
  if (s == "same-user") return SampleKind::same_user;
  throw InputError("unknown sampling strategy '" + s + "'");
}

void validate(const SampleStrategy& s) {
  if (!(s.mix_weight > 0.5 && s.mix_weight < 1.0)) throw InputError("mix_weight must be in (0.5, 1)");
  if (s.mix_components < 1) throw InputError("mix_components must be >= 1");
}

std::vector<Latent> sample_latent(const SampleStrategy& strategy, const std::vector<LatentEmbedding>& targets,
                                  const std::vector<LatentEmbedding>& others, std::size_t n, std::uint64_t seed) {
  validate(strategy);
  if (targets.empty()) throw InputError("sample_latent needs at least one target embedding");
  const bool needs_others = strategy.kind == SampleKind::adversarial || strategy.kind == SampleKind::same_user;
  if (needs_others && others.empty()) {
    throw InputError(to_string(strategy.kind) + " sampling needs other users' embeddings");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::exponential_distribution<double> expo(1.0);
  std::uniform_int_distribution<std::size_t> pick_t(0, targets.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_o(0, others.empty() ? 0 : others.size() - 1);

  std::vector<Latent> out;
  out.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    Latent z{};
    switch (strategy.kind) {
      case SampleKind::neighbourhood: {
        const auto& e = targets[pick_t(rng)];
        for (std::size_t k = 0; k < kLatentDim; ++k) z[k] = e.mu[k] + std::exp(0.5 * e.log_var[k]) * normal(rng);
        break;
      }
      case SampleKind::self_mixed: {
        std::vector<std::size_t> idx;
        if (targets.size() >= strategy.mix_components) {
          std::vector<std::size_t> all(targets.size());
          std::iota(all.begin(), all.end(), 0);
          std::shuffle(all.begin(), all.end(), rng);
          idx.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(strategy.mix_components));
        } else {
          for (std::size_t c = 0; c < strategy.mix_components; ++c) idx.push_back(pick_t(rng));
        }
        // Dirichlet(1, ..., 1) weights as normalised unit exponentials.
        std::vector<double> w(idx.size());
        double sum = 0.0;
        for (auto& v : w) sum += (v = expo(rng));
        for (std::size_t c = 0; c < idx.size(); ++c)
          for (std::size_t k = 0; k < kLatentDim; ++k) z[k] += w[c] / sum * targets[idx[c]].mu[k];
        break;
      }
      case SampleKind::adversarial: {
        const auto& t = targets[pick_t(rng)];
        const auto& o = others[pick_o(rng)];
        for (std::size_t k = 0; k < kLatentDim; ++k)
          z[k] = strategy.mix_weight * t.mu[k] + (1.0 - strategy.mix_weight) * o.mu[k];
        break;
      }
      case SampleKind::same_user: {
        const auto& t = targets[pick_t(rng)];
        const auto& o = others[pick_o(rng)];
        for (std::size_t k = 0; k < kLatentDim; ++k) z[k] = k < kAuthDims ? t.mu[k] : o.mu[k];
        break;
      }
    }
    out.push_back(z);
  }
  return out;
}

std::vector<dataset::Gesture> generate_synthetic(VaeModel& model, const SampleStrategy& strategy,
                                                 const std::vector<Series>& targets,
                                                 const std::vector<LatentEmbedding>& others, std::size_t n,
                                                 std::uint64_t seed, const std::string& target_user) {
  std::vector<dataset::Gesture> out;
  if (n == 0) return out;
  const auto latents = sample_latent(strategy, encode_all(model, targets), others, n, seed);
  out.reserve(n);
  for (std::size_t i = 0; i < latents.size(); ++i) {
    dataset::Gesture g;
    g.user_id = target_user;
    g.gesture_id = "syn" + std::to_string(i);
    g.is_gesture = true;
    g.synthetic = true;
    g.strategy = to_string(strategy.kind);
    g.timestamp_ms = static_cast<std::int64_t>(i);
    g.series = decode(model, latents[i]);
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace gestauth::generative
