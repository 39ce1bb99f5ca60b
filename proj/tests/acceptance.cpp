// Acceptance suite: one line per criterion, exit status 0 when none fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gestauth/classifiers.hpp"
#include "gestauth/dataset.hpp"
#include "gestauth/distances.hpp"
#include "gestauth/eval.hpp"
#include "gestauth/experiments.hpp"
#include "gestauth/features.hpp"
#include "gestauth/generative.hpp"
#include "gestauth/nn.hpp"

using namespace gestauth;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets.
constexpr double kLbSlack = 1e-9;
constexpr double kSoftDtwGap = 1e-2;
constexpr double kSoftDtwGradRel = 1e-4;
constexpr double kGradCheckRel = 1e-4;
constexpr double kBceTol = 1e-9;
constexpr double kAurocTol = 1e-9;
constexpr double kSimAuroc = 0.9;
constexpr double kAurocDrop = 0.05;
constexpr double kCollapseMean = 0.1;
constexpr double kCollapseStdLo = 0.8;
constexpr double kCollapseStdHi = 1.2;
constexpr double kCollapseRatio = 0.1;
constexpr double kRealAurocTarget = 0.951;
constexpr double kRealEerTarget = 0.097;
constexpr double kRealTol = 0.03;
constexpr double kDtwSeconds = 60;
constexpr double kGradSeconds = 300;
constexpr double kSimSeconds = 1800;

enum class Verdict { pass, fail, skip };

struct Outcome {
  Verdict verdict = Verdict::fail;
  std::string detail;
};

Outcome judge(bool ok, std::string detail) { return {ok ? Verdict::pass : Verdict::fail, std::move(detail)}; }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// 1-3: distances

double enumerate_paths(const std::vector<double>& x, const std::vector<double>& y) {
  double best = std::numeric_limits<double>::infinity();
  std::function<void(std::size_t, std::size_t, double)> walk = [&](std::size_t i, std::size_t j, double acc) {
    acc += (x[i] - y[j]) * (x[i] - y[j]);
    if (i + 1 == x.size() && j + 1 == y.size()) {
      best = std::min(best, acc);
      return;
    }
    if (i + 1 < x.size()) walk(i + 1, j, acc);
    if (j + 1 < y.size()) walk(i, j + 1, acc);
    if (i + 1 < x.size() && j + 1 < y.size()) walk(i + 1, j + 1, acc);
  };
  walk(0, 0, 0.0);
  return best;
}

Outcome dtw_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::vector<double>> all;
  for (std::size_t len = 1; len <= 5; ++len) {
    std::size_t count = 1;
    for (std::size_t k = 0; k < len; ++k) count *= 3;
    for (std::size_t code = 0; code < count; ++code) {
      std::vector<double> s(len);
      std::size_t c = code;
      for (auto& v : s) {
        v = static_cast<double>(c % 3);
        c /= 3;
      }
      all.push_back(s);
    }
  }
  std::size_t pairs = 0, mismatches = 0;
  for (const auto& x : all) {
    for (const auto& y : all) {
      ++pairs;
      if (distances::dtw(x, y) != enumerate_paths(x, y)) ++mismatches;
    }
  }
  const double secs = seconds_since(t0);
  return judge(mismatches == 0 && secs < kDtwSeconds,
               fmt("%zu pairs, %zu mismatches, %.1f s (limit %.0f s)", pairs, mismatches, secs, kDtwSeconds));
}

Outcome lower_bound_soundness() {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n;
  std::size_t violations = 0, checks = 0;
  for (int p = 0; p < 1000; ++p) {
    std::vector<double> x(50), y(50);
    for (auto& v : x) v = n(rng);
    for (auto& v : y) v = n(rng);
    for (std::size_t w : {2u, 4u, 8u, 16u, 32u}) {
      const double lb = distances::lb_keogh(x, y, w);
      const double d = distances::dtw(x, y, w);
      ++checks;
      if (lb < 0.0 || lb > d + kLbSlack * std::max(1.0, d)) ++violations;
    }
  }
  return judge(violations == 0, fmt("%zu checks, %zu violations", checks, violations));
}

Outcome soft_dtw_consistency() {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> digit(0, 4);
  double worst_gap = 0.0;
  for (int p = 0; p < 100; ++p) {
    Series x(5, 1), y(5, 1);
    for (auto& v : x.flat()) v = digit(rng);
    for (auto& v : y.flat()) v = digit(rng);
    const double s = distances::soft_dtw(x, y, 1e-4).value;
    const double d = distances::dtw(x.column(0), y.column(0));
    worst_gap = std::max(worst_gap, std::abs(s - d));
  }
  std::normal_distribution<double> n;
  double worst_rel = 0.0;
  const double h = 1e-6;
  for (int p = 0; p < 50; ++p) {
    Series x(10, 2), y(10, 2);
    for (auto& v : x.flat()) v = n(rng);
    for (auto& v : y.flat()) v = n(rng);
    const auto r = distances::soft_dtw(x, y, 0.1);
    for (std::size_t i = 0; i < y.size(); ++i) {
      Series yp = y, ym = y;
      yp.flat()[i] += h;
      ym.flat()[i] -= h;
      const double fd = (distances::soft_dtw(x, yp, 0.1).value - distances::soft_dtw(x, ym, 0.1).value) / (2 * h);
      const double a = r.grad.flat()[i];
      worst_rel = std::max(worst_rel, std::abs(a - fd) / std::max(1e-6, std::abs(a) + std::abs(fd)));
    }
  }
  return judge(worst_gap <= kSoftDtwGap && worst_rel <= kSoftDtwGradRel,
               fmt("max |softdtw - dtw| %.2e (limit %.0e), max grad rel err %.2e (limit %.0e)", worst_gap,
                   kSoftDtwGap, worst_rel, kSoftDtwGradRel));
}

// ---------------------------------------------------------------------------
// 4: gradient suite

nn::Tensor random_tensor(nn::Shape s, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  nn::Tensor t(std::move(s));
  for (auto& v : t.data) v = n(rng);
  return t;
}

nn::Parameter random_param(const std::string& name, nn::Shape s, std::uint64_t seed) {
  return nn::Parameter(name, random_tensor(std::move(s), seed, 0.5));
}

Outcome gradient_suite() {
  using nn::Graph;
  using nn::Id;
  const auto t0 = std::chrono::steady_clock::now();
  nn::GradCheckOptions opts;
  opts.seed = 4;
  std::vector<std::pair<std::string, double>> errors;
  auto record = [&](const std::string& name, const nn::GradCheckReport& r) { errors.emplace_back(name, r.max_rel_error); };

  auto W = random_param("W", {4, 3}, 1);
  auto b = random_param("b", {3}, 2);
  record("dense", nn::grad_check([&](Graph& g, const std::vector<Id>& in) { return nn::dense(g, in[0], g.parameter(W), g.parameter(b)); },
                                 {random_tensor({2, 5, 4}, 3)}, {&W, &b}, opts));
  for (auto pad : {nn::Padding::same, nn::Padding::valid}) {
    auto K = random_param("K", {3, 3, 2}, 5);
    auto kb = random_param("kb", {2}, 6);
    record(pad == nn::Padding::same ? "conv1d same" : "conv1d valid",
           nn::grad_check([&](Graph& g, const std::vector<Id>& in) {
             return nn::conv1d(g, in[0], g.parameter(K), g.parameter(kb), pad);
           }, {random_tensor({2, 7, 3}, 7)}, {&K, &kb}, opts));
  }
  record("maxpool1d", nn::grad_check([](Graph& g, const std::vector<Id>& in) { return nn::maxpool1d(g, in[0]); },
                                     {random_tensor({2, 7, 3}, 8)}, {}, opts));
  record("upsample1d", nn::grad_check([](Graph& g, const std::vector<Id>& in) { return nn::upsample1d(g, in[0], 2); },
                                      {random_tensor({2, 4, 3}, 9)}, {}, opts));
  auto Wx = random_param("Wx", {3, 12}, 10);
  auto Wh = random_param("Wh", {4, 12}, 11);
  auto bx = random_param("bx", {12}, 12);
  auto bh = random_param("bh", {12}, 13);
  record("gru", nn::grad_check([&](Graph& g, const std::vector<Id>& in) {
    return nn::gru(g, in[0], g.parameter(Wx), g.parameter(Wh), g.parameter(bx), g.parameter(bh), true);
  }, {random_tensor({2, 5, 3}, 14)}, {&Wx, &Wh, &bx, &bh}, opts));
  record("relu", nn::grad_check([](Graph& g, const std::vector<Id>& in) { return nn::relu(g, in[0]); },
                                {random_tensor({3, 4}, 15)}, {}, opts));
  record("sigmoid", nn::grad_check([](Graph& g, const std::vector<Id>& in) { return nn::sigmoid(g, in[0]); },
                                   {random_tensor({3, 4}, 16)}, {}, opts));
  record("tanh", nn::grad_check([](Graph& g, const std::vector<Id>& in) { return nn::tanh(g, in[0]); },
                                {random_tensor({3, 4}, 17)}, {}, opts));
  record("flatten/concat", nn::grad_check([](Graph& g, const std::vector<Id>& in) {
    return nn::concat(g, {nn::flatten(g, in[0]), nn::flatten(g, in[0])});
  }, {random_tensor({2, 3, 2}, 18)}, {}, opts));

  nn::GradCheckOptions sparse = opts;
  sparse.max_coords_per_block = 24;
  const auto input = random_tensor({1, kTimesteps, kChannels}, 19);
  for (auto arch : {classifiers::Arch::mlp, classifiers::Arch::complexmix}) {
    auto m = classifiers::build_architecture(arch, 20);
    record(classifiers::to_string(arch),
           nn::grad_check([&](Graph& g, const std::vector<Id>& in) { return m->forward(g, in[0]); }, {input},
                          m->parameters(), sparse));
  }
  generative::VaeModel vae(4, 21);
  record("decoder", nn::grad_check([&](Graph& g, const std::vector<Id>& in) { return vae.decode(g, in[0]); },
                                   {random_tensor({1, generative::kLatentDim}, 22)}, vae.parameters(), sparse));

  const double secs = seconds_since(t0);
  double worst = 0.0;
  std::string worst_name;
  for (const auto& [name, e] : errors) {
    if (e >= worst) {
      worst = e;
      worst_name = name;
    }
  }
  return judge(worst <= kGradCheckRel && secs < kGradSeconds,
               fmt("%zu checks, max rel err %.2e in %s (limit %.0e), %.1f s (limit %.0f s)", errors.size(), worst,
                   worst_name.c_str(), kGradCheckRel, secs, kGradSeconds));
}

// ---------------------------------------------------------------------------
// 5-7

Outcome closed_form_losses() {
  generative::LatentEmbedding zero, one;
  one.mu.fill(1.0);
  const double k0 = generative::kl_loss(zero);
  const double k1 = generative::kl_loss(one);
  const double bce = nn::weighted_bce({0.5, 0.5}, {1, 0}, 1.0).value;
  const bool ok = k0 == 0.0 && k1 == 0.5 * generative::kLatentDim && std::abs(bce - std::log(2.0)) <= kBceTol;
  return judge(ok, fmt("kl(0,0) %.17g, kl(1,0) %.17g per dim, bce %.17g vs ln2", k0, k1 / generative::kLatentDim, bce));
}

eval::ScoreSet score_set(const std::vector<double>& genuine, const std::vector<double>& impostor) {
  eval::ScoreSet s;
  for (double g : genuine) {
    s.scores.push_back(g);
    s.labels.push_back(true);
  }
  for (double i : impostor) {
    s.scores.push_back(i);
    s.labels.push_back(false);
  }
  return s;
}

Outcome metric_fixtures() {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n;
  std::uniform_int_distribution<int> coarse(0, 5);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    std::vector<double> g(5 + k % 7), im(4 + k % 11);
    for (auto& v : g) v = k % 2 ? coarse(rng) + 1.0 : n(rng) + 0.5;
    for (auto& v : im) v = k % 2 ? coarse(rng) : n(rng);
    double wins = 0;
    for (double a : g)
      for (double c : im) wins += a > c ? 1.0 : a == c ? 0.5 : 0.0;
    const double u = wins / static_cast<double>(g.size() * im.size());
    worst = std::max(worst, std::abs(eval::auroc(score_set(g, im)) - u));
  }
  struct Fixture {
    eval::ScoreSet s;
    double eer_lo, eer_hi, far0;
  };
  const std::vector<Fixture> fixtures{
      {score_set({0.9, 0.8}, {0.7, 0.85}), 0.5, 0.5, 0.5},
      {score_set({0.6, 0.4}, {0.5, 0.3}), 0.5, 0.5, 0.5},
      {score_set({0.5, 0.5, 0.9}, {0.5, 0.1, 0.2}), 0.0, 1.0 / 3.0, 1.0 / 3.0},
      {score_set({0.95, 0.9, 0.6}, {0.99, 0.8, 0.7, 0.5, 0.4, 0.3, 0.2, 0.1, 0.05, 0.0}), 0.0, 0.3, 0.3},
      {score_set({0.4, 0.4}, {0.4, 0.4, 0.4}), 0.0, 1.0, 1.0},
  };
  std::size_t bad = 0;
  for (const auto& f : fixtures) {
    const auto e = eval::eer_interval(f.s);
    if (std::abs(e.lower - f.eer_lo) > 1e-12 || std::abs(e.upper - f.eer_hi) > 1e-12 ||
        std::abs(eval::far_at_zero(f.s) - f.far0) > 1e-12)
      ++bad;
  }
  return judge(worst <= kAurocTol && bad == 0,
               fmt("max |auroc - U| %.1e over 100 sets, %zu of %zu fixtures wrong, all-ties FAR@0 %.2f", worst, bad,
                   fixtures.size(), eval::far_at_zero(fixtures.back().s)));
}

Outcome architecture_budgets() {
  std::string counts;
  bool ok = true;
  for (auto a : classifiers::kAllArchs) {
    const auto m = classifiers::build_architecture(a, 0);
    const auto p = m->parameter_count();
    ok = ok && p >= classifiers::kBudgetMin && p <= classifiers::kBudgetMax;
    counts += classifiers::to_string(a) + " " + std::to_string(p) + ", ";
  }
  const auto cm = classifiers::build_architecture(classifiers::Arch::complexmix, 0)->reduced_steps(kTimesteps);
  const auto sm = classifiers::build_architecture(classifiers::Arch::simplemix, 0)->reduced_steps(kTimesteps);
  ok = ok && cm == 13 && sm == 7;
  return judge(ok, counts + fmt("steps complexmix %zu, simplemix %zu", cm, sm));
}

// ---------------------------------------------------------------------------
// 8-10: simulator experiments

struct SimWorld {
  std::vector<dataset::Gesture> corpus;
  dataset::SplitSpec split;
};

// Eight users at the default difficulty, low-pass filtered like ingested data.
SimWorld sim_world() {
  const std::uint64_t seed = 1;
  SimWorld w;
  w.corpus = dataset::simulate_corpus(dataset::random_profiles(8, seed), 60, 160, seed);
  for (auto& g : w.corpus) g = dataset::lowpass_filter(g, 10.0, 2);
  w.split = dataset::temporal_split(w.corpus, {2.0 / 3.0, 0.2, seed});
  return w;
}

std::vector<std::vector<double>> feature_rows(const std::vector<Series>& xs) {
  std::vector<std::vector<double>> out;
  out.reserve(xs.size());
  for (const auto& x : xs) {
    const auto f = features::extract_features(x);
    out.emplace_back(f.values.begin(), f.values.end());
  }
  return out;
}

double test_auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
  eval::ScoreSet s;
  s.scores = scores;
  for (int y : labels) s.labels.push_back(y == 1);
  return eval::auroc(s);
}

Outcome simulator_end_to_end(const SimWorld& w) {
  const auto t0 = std::chrono::steady_clock::now();
  classifiers::TrainConfig tc;
  tc.learning_rate = 1e-3;
  tc.max_epochs = 40;
  tc.patience = 10;
  double rf_sum = 0, cm_sum = 0;
  const auto users = dataset::user_ids(w.corpus);
  for (const auto& u : users) {
    const auto task = classifiers::prepare_auth_task(w.corpus, w.split, u);
    auto x = feature_rows(task.train.x);
    auto vx = feature_rows(task.validation.x);
    x.insert(x.end(), vx.begin(), vx.end());
    auto y = task.train.y;
    y.insert(y.end(), task.validation.y.begin(), task.validation.y.end());
    const auto forest = classifiers::train_random_forest({100, 1, 0}, x, y);
    rf_sum += test_auroc(classifiers::rf_predict(forest, feature_rows(task.test.x)), task.test.y);

    auto model = classifiers::build_architecture(classifiers::Arch::complexmix, 0);
    classifiers::train_classifier(*model, task.train, task.validation, tc);
    cm_sum += test_auroc(classifiers::predict_proba(*model, task.test.x), task.test.y);
  }
  const double rf = rf_sum / static_cast<double>(users.size());
  const double cm = cm_sum / static_cast<double>(users.size());
  const double secs = seconds_since(t0);
  return judge(rf > kSimAuroc && cm > kSimAuroc && secs < kSimSeconds,
               fmt("mean test AUROC over %zu users: rf100 %.3f, complexmix %.3f (need > %.1f), %.0f s (limit %.0f s)",
                   users.size(), rf, cm, kSimAuroc, secs, kSimSeconds));
}

std::unique_ptr<generative::VaeModel> train_sim_vae(const SimWorld& w, generative::VaeConfig cfg,
                                                    generative::VaeData* data_out = nullptr) {
  const dataset::SplitIndex index(w.split);
  std::vector<dataset::Gesture> pool;
  for (const auto& g : w.corpus)
    if (index.part_of(g) == dataset::Part::train || index.part_of(g) == dataset::Part::validation) pool.push_back(g);
  dataset::NormStats norm;
  auto data = generative::prepare_vae_data(pool, cfg, 0.2, 0, norm);
  const std::set<std::string> distinct(data.train_users.begin(), data.train_users.end());
  auto model = std::make_unique<generative::VaeModel>(distinct.size(), 0);
  model->norm = norm;
  generative::train_vae(*model, data, cfg, 0);
  if (data_out) *data_out = std::move(data);
  return model;
}

generative::VaeConfig quick_vae(double beta) {
  auto cfg = generative::VaeConfig::defaults(generative::RegKind::vae);
  cfg.beta = beta;
  cfg.learning_rate = 1e-3;
  cfg.max_epochs = 80;
  cfg.patience = 20;
  return cfg;
}

struct Medians {
  double auroc, far0;
};

Medians run_seeds(generative::VaeModel& vae, const eval::AuthContext& ctx, const eval::AuthTstrConfig& cfg) {
  std::vector<double> a, f;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto r = eval::tstr_auth(vae, ctx, cfg, seed);
    a.push_back(r.auroc);
    f.push_back(r.far_at_zero);
  }
  return {eval::median(a), eval::median(f)};
}

Outcome synthetic_enrolment(const SimWorld& w, std::string& note) {
  auto cfg = quick_vae(1e-4);
  cfg.exclude_users = {"u3"};
  auto vae = train_sim_vae(w, cfg);
  const auto ctx = eval::prepare_auth_context(*vae, w.corpus, w.split, "u3");

  eval::AuthTstrConfig adv;
  adv.strategy = {generative::SampleKind::adversarial, 0.85, 3};
  adv.n_synthetic = 500;
  adv.real_negatives = true;
  auto base = adv;
  base.use_synthetic = false;
  const auto ma = run_seeds(*vae, ctx, adv);
  const auto mb = run_seeds(*vae, ctx, base);

  auto adv_recon = adv;
  adv_recon.real_negatives = false;
  auto base_recon = base;
  base_recon.real_negatives = false;
  const auto ra = run_seeds(*vae, ctx, adv_recon);
  const auto rb = run_seeds(*vae, ctx, base_recon);
  note = fmt("reconstruction-only negatives: adversarial AUROC %.3f FAR@0 %.3f, baseline AUROC %.3f FAR@0 %.3f",
             ra.auroc, ra.far0, rb.auroc, rb.far0);

  return judge(ma.far0 <= mb.far0 && ma.auroc > mb.auroc - kAurocDrop,
               fmt("held-out u3, medians over 5 seeds: adversarial AUROC %.3f FAR@0 %.3f, 14-real baseline AUROC "
                   "%.3f FAR@0 %.3f (AUROC drop limit %.2f)",
                   ma.auroc, ma.far0, mb.auroc, mb.far0, kAurocDrop));
}

double mean_pairwise_distance(const std::vector<Series>& xs) {
  double total = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t j = i + 1; j < xs.size(); ++j) {
      double d = 0;
      for (std::size_t k = 0; k < xs[i].size(); ++k) {
        const double diff = xs[i].flat()[k] - xs[j].flat()[k];
        d += diff * diff;
      }
      total += std::sqrt(d);
      ++n;
    }
  }
  return n ? total / static_cast<double>(n) : 0.0;
}

Outcome over_regularisation(const SimWorld& w) {
  generative::VaeData data;
  auto vae = train_sim_vae(w, quick_vae(1.0), &data);
  const auto& xs = data.validation;
  constexpr int kDraws = 20;
  std::array<double, generative::kLatentDim> sum{}, sum_sq{};
  std::size_t n = 0;
  const auto embeddings = generative::encode_all(*vae, xs);
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    for (int d = 0; d < kDraws; ++d) {
      const auto z = generative::reparam_sample(embeddings[i], i * kDraws + static_cast<std::size_t>(d));
      for (std::size_t k = 0; k < z.size(); ++k) {
        sum[k] += z[k];
        sum_sq[k] += z[k] * z[k];
      }
      ++n;
    }
  }
  double worst_mean = 0, lo_std = 1e300, hi_std = 0;
  for (std::size_t k = 0; k < generative::kLatentDim; ++k) {
    const double m = sum[k] / static_cast<double>(n);
    const double sd = std::sqrt(std::max(0.0, sum_sq[k] / static_cast<double>(n) - m * m));
    worst_mean = std::max(worst_mean, std::abs(m));
    lo_std = std::min(lo_std, sd);
    hi_std = std::max(hi_std, sd);
  }
  const double ratio = mean_pairwise_distance(generative::reconstruct(*vae, xs)) / mean_pairwise_distance(xs);
  const bool ok = worst_mean < kCollapseMean && lo_std >= kCollapseStdLo && hi_std <= kCollapseStdHi &&
                  ratio < kCollapseRatio;
  return judge(ok, fmt("%zu validation gestures: max |mean| %.3f (< %.1f), std in [%.3f, %.3f] (within [%.1f, %.1f]), "
                       "reconstruction/data pairwise distance %.3f (< %.1f)",
                       xs.size(), worst_mean, kCollapseMean, lo_std, hi_std, kCollapseStdLo, kCollapseStdHi, ratio,
                       kCollapseRatio));
}

// ---------------------------------------------------------------------------
// 11: optional real corpus

Outcome real_corpus() {
  const char* dir = std::getenv("GESTAUTH_REAL_CORPUS");
  if (!dir || !*dir) return {Verdict::skip, "set GESTAUTH_REAL_CORPUS to a raw <user>.csv/<user>.json directory"};
  if (!fs::is_directory(dir)) return {Verdict::fail, std::string("not a directory: ") + dir};
  std::vector<dataset::Gesture> corpus;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".csv") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    const auto manifest = dataset::read_manifest(f.parent_path() / (f.stem().string() + ".json"));
    for (auto& g : dataset::assemble_user(dataset::parse_user_file(f, manifest.user_id), manifest))
      corpus.push_back(dataset::lowpass_filter(g, 10.0, 2));
  }
  const auto users = dataset::user_ids(corpus);
  double auroc_sum = 0, eer_sum = 0;
  std::size_t runs = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto split = dataset::temporal_split(corpus, {2.0 / 3.0, 0.2, seed});
    for (const auto& u : users) {
      const auto task = classifiers::prepare_auth_task(corpus, split, u);
      auto x = feature_rows(task.train.x);
      auto vx = feature_rows(task.validation.x);
      x.insert(x.end(), vx.begin(), vx.end());
      auto y = task.train.y;
      y.insert(y.end(), task.validation.y.begin(), task.validation.y.end());
      const auto forest = classifiers::train_random_forest({100, 1, seed}, x, y);
      eval::ScoreSet s;
      s.scores = classifiers::rf_predict(forest, feature_rows(task.test.x));
      for (int v : task.test.y) s.labels.push_back(v == 1);
      const auto m = eval::compute_metrics(s);
      auroc_sum += m.auroc;
      eer_sum += m.eer.upper;
      ++runs;
    }
  }
  const double auroc = auroc_sum / static_cast<double>(runs);
  const double eer = eer_sum / static_cast<double>(runs);
  return judge(std::abs(auroc - kRealAurocTarget) <= kRealTol && std::abs(eer - kRealEerTarget) <= kRealTol,
               fmt("%zu users x 5 seeds: AUROC %.3f (target %.3f +- %.2f), EER %.3f (target %.3f +- %.2f)",
                   users.size(), auroc, kRealAurocTarget, kRealTol, eer, kRealEerTarget, kRealTol));
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  std::unique_ptr<SimWorld> world;
  auto sim = [&]() -> const SimWorld& {
    if (!world) world = std::make_unique<SimWorld>(sim_world());
    return *world;
  };
  std::string note9;
  const std::vector<Criterion> criteria{
      {1, "DTW equals exhaustive path enumeration", dtw_oracle},
      {2, "LB_Keogh lower-bounds banded DTW", lower_bound_soundness},
      {3, "Soft-DTW limit and gradient", soft_dtw_consistency},
      {4, "layer and model gradients", gradient_suite},
      {5, "closed-form losses", closed_form_losses},
      {6, "metric fixtures", metric_fixtures},
      {7, "architecture budgets", architecture_budgets},
      {8, "simulator authentication end to end", [&] { return simulator_end_to_end(sim()); }},
      {9, "synthetic enrolment on the simulator", [&] { return synthetic_enrolment(sim(), note9); }},
      {10, "over-regularised autoencoder collapses", [&] { return over_regularisation(sim()); }},
      {11, "real corpus random forest", real_corpus},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {Verdict::fail, std::string("error: ") + e.what()};
    }
    const char* tag = o.verdict == Verdict::pass ? "PASS" : o.verdict == Verdict::fail ? "FAIL" : "SKIP";
    if (o.verdict == Verdict::fail) ++failures;
    std::printf("[%s] criterion %2d: %s | %s | %.1f s\n", tag, c.id, c.name, o.detail.c_str(), seconds_since(t0));
    if (c.id == 9 && !note9.empty()) std::printf("       note: %s\n", note9.c_str());
    std::fflush(stdout);
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
