#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "gestauth/classifiers.hpp"
#include "gestauth/dataset.hpp"
#include "gestauth/distances.hpp"
#include "gestauth/nn.hpp"

namespace gestauth::generative {

constexpr std::size_t kLatentDim = 10;
constexpr std::size_t kAuthDims = 5;
constexpr std::size_t kDecoderSteps = 25;

using Latent = std::array<double, kLatentDim>;

struct LatentEmbedding {
  Latent mu{};
  Latent log_var{};
};

enum class RegKind { vae, wae, none };
enum class WaeDistance { euclidean, squared };

std::string to_string(RegKind k);
RegKind reg_kind_from_string(const std::string& s);

struct VaeConfig {
  RegKind reg = RegKind::vae;
  double beta = 1e-4;
  double alpha = 1e-2;
  distances::LossSpec loss = distances::LossSpec::defaults(distances::LossKind::klb_mod_feature);
  WaeDistance wae_distance = WaeDistance::euclidean;
  double mrr_temperature = 1.0;
  double learning_rate = 1e-4;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 2000;
  std::size_t patience = 150;
  /// Linear beta warm-up over this many epochs; 0 disables it.
  std::size_t beta_warmup_epochs = 0;
  /// Reconstruction-only epochs on non-gesture windows before the main run.
  std::size_t nongesture_pretrain_epochs = 0;
  /// Users left out of training entirely.
  std::vector<std::string> exclude_users;

  /// Defaults for a regulariser: beta 1e-4 for vae, 1e-3 for wae, 0 for none.
  static VaeConfig defaults(RegKind reg);
};

void validate(const VaeConfig& cfg);

/// ComplexMix encoder to (mu, log_var), GRU + upsampling-conv decoder, and a
/// small user-scoring head on the first five latent dimensions.
class VaeModel : public nn::Module {
 public:
  VaeModel(std::size_t n_users, std::uint64_t seed);

  struct Encoded {
    nn::Id mu;
    nn::Id log_var;
  };
  /// x [B, 200, 6] -> mu, log_var [B, 10].
  Encoded encode(nn::Graph& g, nn::Id x) const;
  /// z [B, 10] -> [B, 200, 6], linear output.
  nn::Id decode(nn::Graph& g, nn::Id z) const;
  /// z5 [B, 5] -> per-user scores [B, n_users].
  nn::Id auth_scores(nn::Graph& g, nn::Id z5) const;

  [[nodiscard]] std::size_t n_users() const noexcept { return n_users_; }

  /// Training users (index = MRR label) and the normalisation the model was
  /// trained under; stored alongside checkpoints.
  std::vector<std::string> users;
  dataset::NormStats norm;

 private:
  std::size_t n_users_;
  classifiers::ComplexMixBackbone backbone_;
  nn::DenseLayer enc_dense_, enc_mu_, enc_logvar_;
  nn::GruLayer dec_gru1_, dec_gru2_;
  std::vector<nn::ConvLayer> dec_convs_;
  nn::ConvLayer dec_out_;
  nn::DenseLayer auth_hidden_, auth_out_;
};

void save_vae(const std::filesystem::path& stem, VaeModel& model, const VaeConfig& cfg);
std::unique_ptr<VaeModel> load_vae(const std::filesystem::path& stem);

/// Encodes one normalised series.
LatentEmbedding encode(VaeModel& model, const Series& x);
std::vector<LatentEmbedding> encode_all(VaeModel& model, const std::vector<Series>& xs);
/// z = mu + exp(0.5 log_var) * eps, eps ~ N(0, I) drawn from `seed`.
Latent reparam_sample(const LatentEmbedding& emb, std::uint64_t seed);
/// Decodes one latent vector to a normalised 200 x 6 series.
Series decode(VaeModel& model, const Latent& z);
/// decode(mu) for each series.
std::vector<Series> reconstruct(VaeModel& model, const std::vector<Series>& xs);

/// Sum over dimensions of -0.5 (1 + log_var - mu^2 - exp(log_var)).
double kl_loss(const LatentEmbedding& emb);

/// Energy-distance estimate between the embeddings and as many standard
/// normal draws: 2/n^2 sum d(e_i, z_j) - 1/(n(n-1)) sum_{i!=j} d(e_i, e_j)
/// - 1/(n(n-1)) sum_{i!=j} d(z_i, z_j).
double wae_reg_loss(const std::vector<Latent>& embeddings, std::uint64_t seed,
                    WaeDistance d = WaeDistance::euclidean);

/// -1 / approxrank of the true user, approxrank = 1 + sum_{j != true}
/// sigmoid((s_j - s_true) / temperature).
double approx_mrr_loss(const std::vector<double>& scores, std::size_t true_index, double temperature = 1.0);
/// Batch mean of the per-sample loss.
double approx_mrr_loss(const std::vector<std::vector<double>>& scores, const std::vector<std::size_t>& labels,
                       double temperature = 1.0);

// Graph forms used in training; each returns a scalar node (batch mean).
nn::Id kl_loss(nn::Graph& g, nn::Id mu, nn::Id log_var);
nn::Id wae_reg_loss(nn::Graph& g, nn::Id z, const nn::Tensor& prior, WaeDistance d);
nn::Id approx_mrr_loss(nn::Graph& g, nn::Id scores, const std::vector<std::size_t>& labels, double temperature);
/// z = mu + exp(0.5 log_var) * eps.
nn::Id reparameterize(nn::Graph& g, nn::Id mu, nn::Id log_var, const nn::Tensor& eps);
/// Sum of the KLB-mod bandwidth weights (15) for the KLB-mod kinds, 1 otherwise,
/// so that KLB-mod acts as a weighted average over bandwidths.
double reconstruction_weight_sum(const distances::LossSpec& spec);
/// Mean over the batch of spec(target_b, recon_b) / (200 * 6 * reconstruction_weight_sum(spec)).
nn::Id reconstruction_loss(nn::Graph& g, nn::Id recon, const std::vector<const Series*>& targets,
                           const distances::LossSpec& spec);
/// Identity forward; scales the gradient flowing back by `factor`.
nn::Id scale_grad(nn::Graph& g, nn::Id x, double factor);
/// Weighted sum of scalar nodes.
nn::Id weighted_sum(nn::Graph& g, const std::vector<std::pair<nn::Id, double>>& terms);

struct VaeHistory {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::vector<double> val_recon;
  std::vector<double> val_mrr;  // mean 1 / approxrank of the true user
  std::size_t best_epoch = 0;
  bool stopped_early = false;
};

struct VaeData {
  std::vector<Series> train;
  std::vector<std::string> train_users;
  std::vector<Series> validation;
  std::vector<std::string> validation_users;
  std::vector<Series> nongestures;
};

/// Random validation_fraction hold-out of gestures (non-gestures kept apart
/// for optional pre-training), excluding cfg.exclude_users. Series are
/// normalised with statistics fitted on the training part, returned in `norm`.
VaeData prepare_vae_data(const std::vector<dataset::Gesture>& corpus, const VaeConfig& cfg,
                         double validation_fraction, std::uint64_t seed, dataset::NormStats& norm);

using VaeEpochCallback = std::function<void(std::size_t epoch, double train_loss, double val_loss)>;

/// Minimises reconstruction + beta * regulariser + alpha * approximate-MRR
/// loss with Adam and early stopping on validation loss. The scoring head
/// always receives the full MRR gradient; the encoder receives alpha times it.
VaeHistory train_vae(VaeModel& model, const VaeData& data, const VaeConfig& cfg, std::uint64_t seed,
                     const VaeEpochCallback& on_epoch = {});

/// Mean validation 1 / approxrank under the scoring head (mu inputs).
double validation_mrr(VaeModel& model, const std::vector<Series>& xs, const std::vector<std::string>& users,
                      double temperature = 1.0);

// ---------------------------------------------------------------------------
// Latent sampling

enum class SampleKind { neighbourhood, self_mixed, adversarial, same_user };

std::string to_string(SampleKind k);
SampleKind sample_kind_from_string(const std::string& s);

struct SampleStrategy {
  SampleKind kind = SampleKind::neighbourhood;
  double mix_weight = 0.85;
  std::size_t mix_components = 3;
};

void validate(const SampleStrategy& s);

std::vector<Latent> sample_latent(const SampleStrategy& strategy, const std::vector<LatentEmbedding>& targets,
                                  const std::vector<LatentEmbedding>& others, std::size_t n, std::uint64_t seed);

/// Encodes the target series, samples latents and decodes them. Returned
/// gestures are in the model's normalised space, flagged synthetic and tagged
/// with the strategy.
std::vector<dataset::Gesture> generate_synthetic(VaeModel& model, const SampleStrategy& strategy,
                                                 const std::vector<Series>& targets,
                                                 const std::vector<LatentEmbedding>& others, std::size_t n,
                                                 std::uint64_t seed, const std::string& target_user = "");

}  // namespace gestauth::generative
