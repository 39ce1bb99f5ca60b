#include "gestauth/experiments.hpp"

#include <algorithm>
#include <map>
#include <ostream>
#include <random>

#include "gestauth/classifiers.hpp"
#include "gestauth/error.hpp"
#include "gestauth/features.hpp"

namespace gestauth::eval {

namespace {

std::vector<double> feature_row(const Series& s) {
  const auto fv = features::extract_features(s);
  return {fv.values.begin(), fv.values.end()};
}

MetricsReport fit_and_score(std::vector<std::vector<double>> x, std::vector<int> y, std::size_t n_trees,
                            std::uint64_t seed, const std::vector<std::vector<double>>& test_x,
                            const std::vector<bool>& test_y) {
  classifiers::ForestSpec spec;
  spec.n_trees = n_trees;
  spec.seed = seed;
  const auto forest = classifiers::train_random_forest(spec, x, y);
  ScoreSet s{classifiers::rf_predict(forest, test_x), test_y};
  return compute_metrics(s);
}

}  // namespace

double median(std::vector<double> v) {
  if (v.empty()) throw InputError("median of empty list");
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

MetricsReport tstr_intent(generative::VaeModel* vae, const IntentData& data, const IntentConfig& cfg,
                          std::uint64_t seed) {
  if (data.train_gestures.empty() || data.train_nongestures.empty()) {
    throw InputError("intent TSTR needs training gestures and non-gestures");
  }
  if (data.test_gestures.empty() || data.test_nongestures.empty()) {
    throw InputError("intent TSTR needs test gestures and non-gestures");
  }
  if (cfg.use_reconstruction && vae == nullptr) throw InputError("intent TSTR with reconstruction needs a model");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, data.train_gestures.size() - 1);
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  for (std::size_t i = 0; i < cfg.n_synthetic; ++i) {
    const auto& g = data.train_gestures[pick(rng)];
    x.push_back(feature_row(cfg.use_reconstruction ? generative::decode(*vae, generative::encode(*vae, g).mu) : g));
    y.push_back(1);
  }
  for (const auto& n : data.train_nongestures) {
    x.push_back(feature_row(n));
    y.push_back(0);
  }
  std::vector<std::vector<double>> tx;
  std::vector<bool> ty;
  for (const auto& g : data.test_gestures) {
    tx.push_back(feature_row(g));
    ty.push_back(true);
  }
  for (const auto& n : data.test_nongestures) {
    tx.push_back(feature_row(n));
    ty.push_back(false);
  }
  return fit_and_score(std::move(x), std::move(y), cfg.n_trees, seed, tx, ty);
}

AuthContext prepare_auth_context(generative::VaeModel& vae, const std::vector<dataset::Gesture>& corpus,
                                 const dataset::SplitSpec& split, const std::string& user) {
  const dataset::SplitIndex index(split);
  AuthContext ctx;
  ctx.user = user;
  std::vector<const dataset::Gesture*> target;
  bool present = false;
  for (const auto& g : corpus) {
    if (!g.is_gesture || g.synthetic) continue;
    const auto part = index.part_of(g);
    const bool mine = g.user_id == user;
    present = present || mine;
    const Series s = dataset::apply_norm(g.series, vae.norm);
    if (part == dataset::Part::test) {
      ctx.test_features.push_back(feature_row(s));
      ctx.test_labels.push_back(mine);
    } else if (part == dataset::Part::train) {
      if (mine) {
        target.push_back(&g);
      } else {
        ctx.other_embeddings.push_back(generative::encode(vae, s));
        ctx.negative_reconstructions.push_back(generative::decode(vae, ctx.other_embeddings.back().mu));
        ctx.negative_real.push_back(s);
      }
    }
  }
  if (!present) throw InputError("held-out user '" + user + "' not in corpus");
  if (target.empty()) throw InputError("held-out user '" + user + "' has no training gestures");
  std::stable_sort(target.begin(), target.end(),
                   [](const auto* a, const auto* b) { return a->timestamp_ms < b->timestamp_ms; });
  for (const auto* g : target) {
    ctx.target_train.push_back(dataset::apply_norm(g->series, vae.norm));
    ctx.target_terminals.push_back(g->terminal);
  }
  return ctx;
}

std::vector<Series> enrolment_gestures(const AuthContext& ctx, std::size_t per_terminal, std::size_t terminals) {
  const std::size_t want = per_terminal * terminals;
  std::vector<bool> used(ctx.target_train.size(), false);
  std::map<int, std::size_t> taken;
  std::vector<Series> out;
  for (std::size_t i = 0; i < ctx.target_train.size() && out.size() < want; ++i) {
    const auto t = ctx.target_terminals[i];
    if (!t || *t < 1 || static_cast<std::size_t>(*t) > terminals || taken[*t] >= per_terminal) continue;
    ++taken[*t];
    used[i] = true;
    out.push_back(ctx.target_train[i]);
  }
  for (std::size_t i = 0; i < ctx.target_train.size() && out.size() < want; ++i) {
    if (used[i]) continue;
    used[i] = true;
    out.push_back(ctx.target_train[i]);
  }
  return out;
}

MetricsReport tstr_auth(generative::VaeModel& vae, const AuthContext& ctx, const AuthTstrConfig& cfg,
                        std::uint64_t seed) {
  const auto enrol = enrolment_gestures(ctx, cfg.per_terminal, cfg.terminals);
  if (enrol.empty()) throw InputError("no enrolment gestures for " + ctx.user);
  if (ctx.negative_reconstructions.empty()) throw InputError("no other users to act as impostors");
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  for (const auto& s : enrol) {
    x.push_back(feature_row(s));
    y.push_back(1);
  }
  if (cfg.use_synthetic && cfg.n_synthetic > 0) {
    const auto synth =
        generative::generate_synthetic(vae, cfg.strategy, enrol, ctx.other_embeddings, cfg.n_synthetic, seed, ctx.user);
    for (const auto& g : synth) {
      x.push_back(feature_row(g.series));
      y.push_back(1);
    }
  }
  for (const auto& s : ctx.negative_reconstructions) {
    x.push_back(feature_row(s));
    y.push_back(0);
  }
  if (cfg.real_negatives) {
    for (const auto& s : ctx.negative_real) {
      x.push_back(feature_row(s));
      y.push_back(0);
    }
  }
  return fit_and_score(std::move(x), std::move(y), cfg.n_trees, seed, ctx.test_features, ctx.test_labels);
}

std::vector<SweepRow> enrolment_sweep(generative::VaeModel& vae, const AuthContext& ctx,
                                      const std::vector<std::size_t>& per_terminal_counts, const AuthTstrConfig& cfg,
                                      const std::vector<std::uint64_t>& seeds) {
  std::vector<SweepRow> rows;
  for (auto count : per_terminal_counts) {
    for (bool synthetic : {false, true}) {
      for (auto seed : seeds) {
        auto c = cfg;
        c.per_terminal = count;
        c.use_synthetic = synthetic;
        const auto r = tstr_auth(vae, ctx, c, seed);
        rows.push_back({count, synthetic, seed, r.auroc, r.eer.upper, r.far_at_zero});
      }
    }
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "per_terminal,synthetic,seed,auroc,eer_upper,far_at_zero\n";
  const auto old = out.precision(17);
  for (const auto& r : rows) {
    out << r.per_terminal << ',' << (r.synthetic ? 1 : 0) << ',' << r.seed << ',' << r.auroc << ',' << r.eer_upper
        << ',' << r.far_at_zero << '\n';
  }
  out.precision(old);
}

}  // namespace gestauth::eval
