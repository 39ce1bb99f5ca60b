#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "gestauth/classifiers.hpp"
#include "gestauth/error.hpp"
#include "gestauth/eval.hpp"
#include "gestauth/features.hpp"
#include "gestauth/nn/optim.hpp"

using namespace gestauth;
using namespace gestauth::classifiers;

namespace {

std::vector<dataset::Gesture> toy_corpus(std::size_t users, std::size_t per_user, std::uint64_t seed,
                                         double spread = 0.35, double noise = 0.05) {
  dataset::ProfileOptions opts;
  opts.user_spread = spread;
  opts.noise_sigma = noise;
  return dataset::simulate_corpus(dataset::random_profiles(users, seed, opts), per_user, 0, seed + 1);
}

AuthTask toy_task(double limited = 1.0) {
  const auto corpus = toy_corpus(3, 30, 11);
  const auto split = dataset::temporal_split(corpus, {});
  return prepare_auth_task(corpus, split, "u0", limited);
}

double auroc_of(const std::vector<double>& scores, const std::vector<int>& y) {
  eval::ScoreSet s;
  s.scores = scores;
  for (int v : y) s.labels.push_back(v == 1);
  return eval::auroc(s);
}

}  // namespace

TEST_CASE("every architecture fits the parameter budget") {
  for (Arch a : kAllArchs) {
    const auto m = build_architecture(a, 0);
    CHECK(m->parameter_count() >= kBudgetMin);
    CHECK(m->parameter_count() <= kBudgetMax);
    CHECK(arch_from_string(to_string(a)) == a);
  }
  // 1200*54+54 + 54*32+32 + 32*16+16 + 16+1
  CHECK(build_architecture(Arch::mlp, 0)->parameter_count() == 67159);
  CHECK(build_architecture(Arch::complexmix, 0)->reduced_steps(200) == 13);
  CHECK(build_architecture(Arch::simplemix, 0)->reduced_steps(200) == 7);
  CHECK_THROWS_AS(arch_from_string("transformer"), InputError);
}

TEST_CASE("forward maps [B,200,6] to [B,1] probabilities") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  std::vector<Series> xs(3, Series(kTimesteps, kChannels));
  for (auto& s : xs)
    for (auto& v : s.flat()) v = n(rng);
  std::vector<const Series*> ptrs;
  for (const auto& s : xs) ptrs.push_back(&s);
  for (Arch a : kAllArchs) {
    const auto m = build_architecture(a, 2);
    nn::Graph g;
    const auto y = m->forward(g, g.constant(to_batch(ptrs)));
    const auto& v = g.value(y);
    REQUIRE(v.rank() == 2);
    CHECK(v.dim(0) == 3);
    CHECK(v.dim(1) == 1);
    for (double p : v.data) {
      CHECK(p > 0.0);
      CHECK(p < 1.0);
    }
  }
}

TEST_CASE("prepare_auth_task: labels, limited fraction, absent target") {
  const auto full = toy_task();
  CHECK(full.train.positives() > 0);
  CHECK(full.test.positives() > 0);
  CHECK(full.train.positives() < full.train.x.size());

  const auto lim = toy_task(0.1);
  const auto expect = static_cast<std::size_t>(std::ceil(0.1 * static_cast<double>(full.train.positives())));
  CHECK(lim.train.positives() == expect);
  CHECK(lim.train.x.size() - lim.train.positives() == full.train.x.size() - full.train.positives());
  CHECK(lim.test.x.size() == full.test.x.size());

  const auto corpus = toy_corpus(3, 30, 11);
  const auto split = dataset::temporal_split(corpus, {});
  CHECK_THROWS_AS(prepare_auth_task(corpus, split, "nobody"), InputError);
}

TEST_CASE("limited fraction keeps the earliest target gestures") {
  auto corpus = toy_corpus(2, 30, 12);
  const auto split = dataset::temporal_split(corpus, {});
  const dataset::SplitIndex idx(split);
  std::vector<std::int64_t> train_times;
  for (const auto& g : corpus)
    if (g.user_id == "u0" && idx.part_of(g) == dataset::Part::train) train_times.push_back(g.timestamp_ms);
  std::sort(train_times.begin(), train_times.end());
  const auto task = prepare_auth_task(corpus, split, "u0", 0.25);
  const auto keep = static_cast<std::size_t>(std::ceil(0.25 * static_cast<double>(train_times.size())));
  REQUIRE(task.train.positives() == keep);
  // Mark the target series so positives can be traced back to their timestamps.
  std::vector<std::pair<double, std::int64_t>> marks;
  for (const auto& g : corpus)
    if (g.user_id == "u0" && idx.part_of(g) == dataset::Part::train)
      marks.emplace_back(dataset::apply_norm(g.series, task.norm)(0, 0), g.timestamp_ms);
  std::int64_t latest = 0;
  for (std::size_t i = 0; i < task.train.x.size(); ++i) {
    if (task.train.y[i] != 1) continue;
    for (const auto& [v, t] : marks)
      if (v == task.train.x[i](0, 0)) latest = std::max(latest, t);
  }
  CHECK(latest <= train_times[keep - 1]);
}

TEST_CASE("training separates a toy problem and restores the best epoch") {
  const auto task = toy_task();
  auto m = build_architecture(Arch::mlp, 3);
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.max_epochs = 50;
  cfg.patience = 10;
  cfg.seed = 4;
  const auto h = train_classifier(*m, task.train, task.validation, cfg);
  CHECK(h.train_loss.size() == h.val_loss.size());
  CHECK(h.val_loss.size() <= h.best_epoch + cfg.patience + 1);
  if (h.val_loss.size() < cfg.max_epochs) CHECK(h.stopped_early);
  const auto restored = nn::weighted_bce(predict_proba(*m, task.validation.x), task.validation.y, cfg.pos_weight);
  CHECK(restored.value == doctest::Approx(h.best_val_loss).epsilon(1e-9));
  CHECK(h.best_val_loss == *std::min_element(h.val_loss.begin(), h.val_loss.end()));
  CHECK(auroc_of(predict_proba(*m, task.test.x), task.test.y) == doctest::Approx(1.0));
}

TEST_CASE("training is deterministic under seed and validates config") {
  const auto task = toy_task(0.5);
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.max_epochs = 3;
  cfg.seed = 9;
  auto a = build_architecture(Arch::mlp, 5);
  auto b = build_architecture(Arch::mlp, 5);
  const auto ha = train_classifier(*a, task.train, task.validation, cfg);
  const auto hb = train_classifier(*b, task.train, task.validation, cfg);
  CHECK(ha.train_loss == hb.train_loss);
  CHECK(predict_proba(*a, task.test.x) == predict_proba(*b, task.test.x));

  TrainConfig bad = cfg;
  bad.learning_rate = 0;
  CHECK_THROWS_AS(validate(bad), InputError);
  bad = cfg;
  bad.batch_size = 0;
  CHECK_THROWS_AS(validate(bad), InputError);
  LabeledSet negatives_only;
  negatives_only.x = {task.train.x[0]};
  negatives_only.y = {0};
  CHECK_THROWS_AS(train_classifier(*a, negatives_only, {}, cfg), InputError);
}

TEST_CASE("predict_proba is per-sample and order independent") {
  const auto task = toy_task();
  auto m = build_architecture(Arch::gru, 6);
  std::vector<Series> xs{task.test.x[0], task.test.x[1], task.test.x[0]};
  const auto p = predict_proba(*m, xs);
  CHECK(p[0] == p[2]);
  for (double v : p) {
    CHECK(v > 0);
    CHECK(v < 1);
  }
  std::vector<Series> rev{xs[2], xs[1], xs[0]};
  const auto q = predict_proba(*m, rev);
  CHECK(q[0] == p[2]);
  CHECK(q[1] == p[1]);
  CHECK_THROWS_AS(predict_proba(*m, {Series(10, kChannels)}), InputError);
}

TEST_CASE("random forest: tiny cases, score lattice, errors") {
  const std::vector<std::vector<double>> two{{0.0}, {1.0}};
  const auto f = train_random_forest({25, 1, 1}, two, {0, 1});
  CHECK(f.trees.size() == 25);
  for (double s : rf_predict(f, two)) {
    const double scaled = s * 25;
    CHECK(std::abs(scaled - std::round(scaled)) < 1e-9);
  }
  CHECK_THROWS_AS(train_random_forest({10, 1, 0}, two, {1, 1}), InputError);
  CHECK_THROWS_AS(train_random_forest({0, 1, 0}, two, {0, 1}), InputError);

  std::mt19937_64 rng(7);
  std::normal_distribution<double> n;
  std::vector<std::vector<double>> xs;
  std::vector<int> ys;
  for (int i = 0; i < 100; ++i) {
    const int y = i % 2;
    xs.push_back({n(rng) + 3.0 * y, n(rng), n(rng)});
    ys.push_back(y);
  }
  const auto forest = train_random_forest({100, 1, 3}, xs, ys);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double s = rf_score(forest, xs[i]);
    CHECK(std::abs(s * 100 - std::round(s * 100)) < 1e-9);
    correct += (s >= 0.5) == (ys[i] == 1);
  }
  CHECK(correct >= 95);
  CHECK(rf_predict(train_random_forest({100, 1, 3}, xs, ys), xs) == rf_predict(forest, xs));
  const auto back = forest_from_json(forest_to_json(forest));
  CHECK(rf_predict(back, xs) == rf_predict(forest, xs));
  CHECK(back.n_features == 3);
}

TEST_CASE("random forest on simulated features separates users") {
  const auto task = toy_task();
  auto feats = [](const LabeledSet& s) {
    std::vector<std::vector<double>> out;
    for (const auto& x : s.x) {
      const auto f = features::extract_features(x);
      out.emplace_back(f.values.begin(), f.values.end());
    }
    return out;
  };
  const auto forest = train_random_forest({100, 1, 0}, feats(task.train), task.train.y);
  CHECK(auroc_of(rf_predict(forest, feats(task.test)), task.test.y) > 0.9);
}
