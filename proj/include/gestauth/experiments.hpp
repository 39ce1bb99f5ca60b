#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gestauth/eval.hpp"
#include "gestauth/generative.hpp"

namespace gestauth::eval {

// ---------------------------------------------------------------------------
// Intent detection: gesture vs non-gesture

struct IntentData {
  std::vector<Series> train_gestures;
  std::vector<Series> train_nongestures;
  std::vector<Series> test_gestures;
  std::vector<Series> test_nongestures;
};

struct IntentConfig {
  std::size_t n_synthetic = 240;
  std::size_t n_trees = 100;
  /// false runs the real-data control: positives are drawn real gestures.
  bool use_reconstruction = true;
};

/// Positives are reconstructions of randomly drawn training gestures,
/// negatives the training non-gestures; a random forest on feature vectors
/// is scored on the real test gestures and non-gestures.
MetricsReport tstr_intent(generative::VaeModel* vae, const IntentData& data, const IntentConfig& cfg,
                          std::uint64_t seed);

// ---------------------------------------------------------------------------
// Authentication with synthetic enrolment data

/// Everything about one held-out user that does not depend on the seed,
/// computed once with a leave-one-user-out autoencoder. Series are in the
/// autoencoder's normalised space.
struct AuthContext {
  std::string user;
  std::vector<Series> target_train;  // time-ordered
  std::vector<std::optional<int>> target_terminals;
  std::vector<generative::LatentEmbedding> other_embeddings;
  std::vector<Series> negative_reconstructions;
  std::vector<Series> negative_real;
  std::vector<std::vector<double>> test_features;
  std::vector<bool> test_labels;
};

/// Uses the train split of every user for enrolment and the test split for
/// scoring. Throws InputError if the user is absent.
AuthContext prepare_auth_context(generative::VaeModel& vae, const std::vector<dataset::Gesture>& corpus,
                                 const dataset::SplitSpec& split, const std::string& user);

struct AuthTstrConfig {
  generative::SampleStrategy strategy;
  bool use_synthetic = true;
  std::size_t n_synthetic = 500;
  std::size_t per_terminal = 2;
  std::size_t terminals = 7;
  std::size_t n_trees = 100;
  bool real_negatives = false;
};

/// Real enrolment gestures: the earliest `per_terminal` of each terminal
/// (topped up with the earliest remaining ones if a terminal is short).
std::vector<Series> enrolment_gestures(const AuthContext& ctx, std::size_t per_terminal, std::size_t terminals);

/// Positives: enrolment gestures plus optional synthetic ones; negatives:
/// reconstructions of other users' gestures (plus their real gestures when
/// configured). Random forest on feature vectors, scored on real test data.
MetricsReport tstr_auth(generative::VaeModel& vae, const AuthContext& ctx, const AuthTstrConfig& cfg,
                        std::uint64_t seed);

struct SweepRow {
  std::size_t per_terminal = 0;
  bool synthetic = false;
  std::uint64_t seed = 0;
  double auroc = 0.0;
  double eer_upper = 0.0;
  double far_at_zero = 1.0;
};

/// tstr_auth for each count, with and without synthetic data, per seed.
std::vector<SweepRow> enrolment_sweep(generative::VaeModel& vae, const AuthContext& ctx,
                                      const std::vector<std::size_t>& per_terminal_counts, const AuthTstrConfig& cfg,
                                      const std::vector<std::uint64_t>& seeds);

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

double median(std::vector<double> v);

}  // namespace gestauth::eval
