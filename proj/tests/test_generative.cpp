#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "gestauth/error.hpp"
#include "gestauth/generative.hpp"

using namespace gestauth;
using namespace gestauth::generative;

namespace {

LatentEmbedding emb(double mu, double log_var) {
  LatentEmbedding e;
  e.mu.fill(mu);
  e.log_var.fill(log_var);
  return e;
}

LatentEmbedding random_emb(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  LatentEmbedding e;
  for (auto& v : e.mu) v = n(rng);
  for (auto& v : e.log_var) v = 0.3 * n(rng);
  return e;
}

std::vector<dataset::Gesture> small_corpus() {
  dataset::ProfileOptions opts;
  opts.user_spread = 0.35;
  opts.noise_sigma = 0.05;
  return dataset::simulate_corpus(dataset::random_profiles(3, 21, opts), 8, 0, 22);
}

VaeConfig quick_config(RegKind reg) {
  auto cfg = VaeConfig::defaults(reg);
  cfg.max_epochs = 2;
  cfg.learning_rate = 1e-3;
  cfg.batch_size = 8;
  return cfg;
}

}  // namespace

TEST_CASE("kl_loss closed forms") {
  CHECK(kl_loss(emb(0, 0)) == doctest::Approx(0.0));
  CHECK(kl_loss(emb(1, 0)) == doctest::Approx(5.0));
  CHECK(kl_loss(emb(0, std::log(2.0))) == doctest::Approx(10 * 0.5 * (1.0 - std::log(2.0))));
  std::mt19937_64 rng(1);
  for (int i = 0; i < 20; ++i) CHECK(kl_loss(random_emb(rng)) >= 0.0);

  nn::Graph g;
  nn::Tensor mu({2, kLatentDim}, 1.0);
  nn::Tensor lv({2, kLatentDim}, 0.0);
  const auto k = kl_loss(g, g.constant(mu), g.constant(lv));
  CHECK(g.value(k)[0] == doctest::Approx(5.0));
}

TEST_CASE("reparameterisation") {
  const auto e = emb(0.5, std::log(4.0));
  nn::Graph g;
  nn::Tensor mu({1, kLatentDim}, 0.5);
  nn::Tensor lv({1, kLatentDim}, std::log(4.0));
  nn::Tensor eps({1, kLatentDim}, 1.0);
  const auto z = reparameterize(g, g.constant(mu), g.constant(lv), eps);
  for (double v : g.value(z).data) CHECK(v == doctest::Approx(2.5));
  CHECK(reparam_sample(e, 3) == reparam_sample(e, 3));
  const auto fixed = reparam_sample(emb(0.7, -300.0), 4);
  for (double v : fixed) CHECK(v == doctest::Approx(0.7));
}

TEST_CASE("wae regulariser: near zero on the prior, large when shifted") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  std::vector<Latent> prior(200), shifted(200);
  for (std::size_t i = 0; i < prior.size(); ++i) {
    for (std::size_t k = 0; k < kLatentDim; ++k) {
      prior[i][k] = n(rng);
      shifted[i][k] = n(rng) + 3.0;
    }
  }
  const double on_prior = wae_reg_loss(prior, 6);
  CHECK(on_prior > -0.05);
  CHECK(on_prior < 0.1);
  CHECK(wae_reg_loss(shifted, 6) > 1.0);
  CHECK(wae_reg_loss(shifted, 6, WaeDistance::squared) > wae_reg_loss(shifted, 6));
}

TEST_CASE("approximate MRR: ties, dominance, batch form") {
  CHECK(approx_mrr_loss({0.0, 0.0, 0.0}, 1) == doctest::Approx(-0.5));
  CHECK(approx_mrr_loss({100.0, -100.0, -100.0}, 0) == doctest::Approx(-1.0));
  CHECK(approx_mrr_loss({-100.0, 100.0, 100.0}, 0) == doctest::Approx(-1.0 / 3.0));
  // Higher temperature flattens the ranking towards the tie value.
  CHECK(approx_mrr_loss({2.0, 0.0}, 0, 100.0) > approx_mrr_loss({2.0, 0.0}, 0, 1.0));

  const std::vector<std::vector<double>> batch{{1.0, 0.2, -0.5}, {0.1, 0.4, 0.3}};
  const std::vector<std::size_t> labels{0, 2};
  const double scalar = approx_mrr_loss(batch, labels, 0.7);
  CHECK(scalar == doctest::Approx(0.5 * (approx_mrr_loss(batch[0], 0, 0.7) + approx_mrr_loss(batch[1], 2, 0.7))));
  nn::Graph g;
  nn::Tensor s({2, 3}, {1.0, 0.2, -0.5, 0.1, 0.4, 0.3});
  CHECK(g.value(approx_mrr_loss(g, g.constant(s), labels, 0.7))[0] == doctest::Approx(scalar));
}

TEST_CASE("scale_grad is an identity with scaled backward") {
  nn::Graph g;
  const auto x = g.constant(nn::Tensor({3}, {1.0, -2.0, 4.0}), true);
  const auto y = scale_grad(g, x, 0.25);
  CHECK(g.value(y).data == g.value(x).data);
  const auto loss = weighted_sum(g, {{y, 1.0}});
  (void)loss;
  g.grad(y) = nn::Tensor({3}, {1.0, 2.0, 3.0});
  g.backward();
  CHECK(g.grad(x).data == std::vector<double>{0.25, 0.5, 0.75});
}

TEST_CASE("latent sampling strategies") {
  std::mt19937_64 rng(7);
  std::vector<LatentEmbedding> targets, others;
  for (int i = 0; i < 4; ++i) targets.push_back(random_emb(rng));
  for (int i = 0; i < 6; ++i) others.push_back(random_emb(rng));

  SUBCASE("neighbourhood with zero variance returns a target mean") {
    std::vector<LatentEmbedding> tight{emb(0.3, -300.0)};
    for (const auto& z : sample_latent({SampleKind::neighbourhood}, tight, {}, 5, 1))
      for (double v : z) CHECK(v == doctest::Approx(0.3));
  }
  SUBCASE("self-mixing stays inside the per-dimension hull") {
    for (const auto& z : sample_latent({SampleKind::self_mixed, 0.85, 3}, targets, {}, 50, 2)) {
      for (std::size_t k = 0; k < kLatentDim; ++k) {
        double lo = 1e300, hi = -1e300;
        for (const auto& t : targets) {
          lo = std::min(lo, t.mu[k]);
          hi = std::max(hi, t.mu[k]);
        }
        CHECK(z[k] >= lo - 1e-12);
        CHECK(z[k] <= hi + 1e-12);
      }
    }
  }
  SUBCASE("adversarial mixing is 0.85 target + 0.15 other") {
    const std::vector<LatentEmbedding> t{emb(1.0, 0.0)};
    const std::vector<LatentEmbedding> o{emb(-1.0, 0.0)};
    for (const auto& z : sample_latent({SampleKind::adversarial, 0.85, 3}, t, o, 4, 3))
      for (double v : z) CHECK(v == doctest::Approx(0.7));
  }
  SUBCASE("same-user keeps the authentication dimensions") {
    const std::vector<LatentEmbedding> t{emb(1.0, 0.0)};
    const std::vector<LatentEmbedding> o{emb(-2.0, 0.0)};
    for (const auto& z : sample_latent({SampleKind::same_user}, t, o, 3, 4)) {
      for (std::size_t k = 0; k < kLatentDim; ++k) CHECK(z[k] == (k < kAuthDims ? 1.0 : -2.0));
    }
  }
  SUBCASE("determinism and errors") {
    const SampleStrategy s{SampleKind::adversarial, 0.85, 3};
    CHECK(sample_latent(s, targets, others, 10, 9) == sample_latent(s, targets, others, 10, 9));
    CHECK(sample_latent(s, targets, others, 10, 9) != sample_latent(s, targets, others, 10, 8));
    CHECK_THROWS_AS(sample_latent(s, targets, {}, 1, 0), InputError);
    CHECK_THROWS_AS(sample_latent({SampleKind::neighbourhood}, {}, others, 1, 0), InputError);
    CHECK_THROWS_AS(validate(SampleStrategy{SampleKind::adversarial, 1.5, 3}), InputError);
    CHECK(sample_kind_from_string(to_string(SampleKind::same_user)) == SampleKind::same_user);
  }
}

TEST_CASE("model shapes, checkpoint round trip, synthetic flags") {
  VaeModel model(3, 11);
  model.users = {"u0", "u1", "u2"};
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n;
  Series x(kTimesteps, kChannels);
  for (auto& v : x.flat()) v = n(rng);

  const auto e = encode(model, x);
  const auto y = decode(model, e.mu);
  CHECK(y.rows() == kTimesteps);
  CHECK(y.cols() == kChannels);
  nn::Graph g;
  nn::Tensor z5({2, kAuthDims}, 0.1);
  CHECK(g.value(model.auth_scores(g, g.constant(z5))).shape == nn::Shape{2, 3});

  const auto dir = std::filesystem::temp_directory_path() / "gestauth_vae_ckpt";
  std::filesystem::create_directories(dir);
  save_vae(dir / "vae", model, VaeConfig::defaults(RegKind::vae));
  const auto back = load_vae(dir / "vae");
  CHECK(back->users == model.users);
  const auto e2 = encode(*back, x);
  CHECK(e2.mu == e.mu);
  CHECK(e2.log_var == e.log_var);
  std::filesystem::remove_all(dir);

  const auto synth = generate_synthetic(model, {SampleKind::neighbourhood}, {x}, {}, 3, 1, "u0");
  REQUIRE(synth.size() == 3);
  for (const auto& s : synth) {
    CHECK(s.synthetic);
    CHECK(s.user_id == "u0");
    CHECK(s.strategy == "neighbourhood");
    CHECK(s.series.rows() == kTimesteps);
  }
  CHECK(generate_synthetic(model, {SampleKind::neighbourhood}, {x}, {}, 0, 1).empty());
}

TEST_CASE("config validation") {
  CHECK(VaeConfig::defaults(RegKind::vae).beta == 1e-4);
  CHECK(VaeConfig::defaults(RegKind::wae).beta == 1e-3);
  CHECK(VaeConfig::defaults(RegKind::none).beta == 0.0);
  auto bad = VaeConfig::defaults(RegKind::vae);
  bad.beta = -1;
  CHECK_THROWS_AS(validate(bad), InputError);
  bad = VaeConfig::defaults(RegKind::vae);
  bad.learning_rate = 0;
  CHECK_THROWS_AS(validate(bad), InputError);
  CHECK(reg_kind_from_string("wae") == RegKind::wae);
  CHECK_THROWS_AS(reg_kind_from_string("gan"), InputError);
}

TEST_CASE("vae data preparation excludes users and normalises on train") {
  const auto corpus = small_corpus();
  auto cfg = quick_config(RegKind::vae);
  cfg.exclude_users = {"u2"};
  dataset::NormStats norm;
  const auto data = prepare_vae_data(corpus, cfg, 0.25, 1, norm);
  CHECK(data.train.size() + data.validation.size() == 16);
  for (const auto& u : data.train_users) CHECK(u != "u2");
  for (const auto& u : data.validation_users) CHECK(u != "u2");
  double mean0 = 0;
  for (const auto& s : data.train)
    for (std::size_t t = 0; t < kTimesteps; ++t) mean0 += s(t, 0);
  CHECK(std::abs(mean0 / static_cast<double>(data.train.size() * kTimesteps)) < 1e-9);
}

TEST_CASE("zero weights decouple the encoder from the scoring head") {
  const auto corpus = small_corpus();
  auto run = [&](RegKind reg, double beta, double alpha, double temperature, WaeDistance d) {
    auto cfg = quick_config(reg);
    cfg.beta = beta;
    cfg.alpha = alpha;
    cfg.mrr_temperature = temperature;
    cfg.wae_distance = d;
    dataset::NormStats norm;
    const auto data = prepare_vae_data(corpus, cfg, 0.25, 2, norm);
    VaeModel m(3, 13);
    m.users = {"u0", "u1", "u2"};
    const auto h = train_vae(m, data, cfg, 14);
    CHECK(h.train_loss.size() == cfg.max_epochs);
    for (double v : h.train_loss) CHECK(std::isfinite(v));
    return reconstruct(m, {data.validation.front()}).front();
  };
  SUBCASE("alpha = 0: temperature does not reach the encoder or decoder") {
    const auto a = run(RegKind::vae, 1e-4, 0.0, 1.0, WaeDistance::euclidean);
    const auto b = run(RegKind::vae, 1e-4, 0.0, 5.0, WaeDistance::euclidean);
    CHECK(std::equal(a.flat().begin(), a.flat().end(), b.flat().begin()));
  }
  SUBCASE("beta = 0: the regulariser's distance has no effect") {
    const auto a = run(RegKind::wae, 0.0, 0.01, 1.0, WaeDistance::euclidean);
    const auto b = run(RegKind::wae, 0.0, 0.01, 1.0, WaeDistance::squared);
    CHECK(std::equal(a.flat().begin(), a.flat().end(), b.flat().begin()));
  }
}

TEST_CASE("reconstruction loss is a per-element, per-unit-weight batch mean") {
  std::mt19937_64 rng(15);
  std::normal_distribution<double> n;
  Series a(kTimesteps, kChannels), b(kTimesteps, kChannels);
  for (auto& v : a.flat()) v = n(rng);
  for (auto& v : b.flat()) v = n(rng);
  nn::Tensor recon({2, kTimesteps, kChannels});
  std::copy(b.flat().begin(), b.flat().end(), recon.data.begin());
  std::copy(a.flat().begin(), a.flat().end(), recon.data.begin() + static_cast<std::ptrdiff_t>(b.size()));
  for (auto kind : {distances::LossKind::mse, distances::LossKind::klb_mod}) {
    const auto spec = distances::LossSpec::defaults(kind);
    nn::Graph g;
    const auto l = reconstruction_loss(g, g.constant(recon), {&a, &a}, spec);
    const double w = kind == distances::LossKind::mse ? 1.0 : 15.0;
    CHECK(reconstruction_weight_sum(spec) == w);
    const double expect = distances::combined_loss(spec, a, b).value / (2.0 * 1200.0 * w);
    CHECK(g.value(l)[0] == doctest::Approx(expect).epsilon(1e-12));
  }
}
