#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gestauth/series.hpp"

namespace gestauth::dataset {

enum class Sensor { accelerometer, gyroscope };

/// One row of a per-user sensor file.
struct RawRecord {
  std::string user_id;
  std::string gesture_id;
  Sensor sensor = Sensor::accelerometer;
  std::int64_t t_ms = 0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

/// A 4 s window of aligned accelerometer + gyroscope data, 200 x 6, ordered
/// (acc_x, acc_y, acc_z, gyr_x, gyr_y, gyr_z).
struct Gesture {
  std::string user_id;
  std::string gesture_id;
  std::optional<int> terminal;
  bool is_gesture = true;
  Series series{kTimesteps, kChannels};
  std::optional<std::int64_t> nfc_t_ms;
  /// Temporal ordering key: NFC time for gestures, window end for non-gestures.
  std::int64_t timestamp_ms = 0;
  bool synthetic = false;
  std::string strategy;  // sampling strategy tag for synthetic samples
};

/// "user/gesture" — gesture ids are only unique within one user's file.
std::string gesture_key(const Gesture& g);

/// Throws InputError unless the series is 200 x 6 and finite.
void validate_gesture(const Gesture& g);

// ---------------------------------------------------------------------------
// Raw ingestion

/// Parses `gesture_id,sensor,t_ms,x,y,z` rows. Row order is preserved.
std::vector<RawRecord> parse_user_csv(std::istream& in, const std::string& user_id);
std::vector<RawRecord> parse_user_file(const std::filesystem::path& path,
                                       const std::string& user_id);

struct ManifestEntry {
  std::string gesture_id;
  std::optional<std::int64_t> nfc_t_ms;
  std::optional<int> terminal;
  bool is_gesture = true;
};

struct Manifest {
  std::string user_id;
  std::vector<ManifestEntry> gestures;
};

Manifest parse_manifest(std::istream& in);
Manifest read_manifest(const std::filesystem::path& path);

struct WindowOptions {
  std::size_t timesteps = kTimesteps;
  std::int64_t period_ms = kSamplePeriodMs;
  std::int64_t max_gap_ms = 200;
};

/// Resamples each sensor onto the 50 Hz grid of `timesteps` samples whose last
/// point is `nfc_t_ms`, by linear interpolation between neighbouring raw
/// samples. `records` must belong to a single gesture.
Gesture align_and_window(const std::vector<RawRecord>& records, std::int64_t nfc_t_ms,
                         const WindowOptions& opts = {});

/// Splits a non-gesture recording into consecutive non-overlapping windows.
std::vector<Gesture> window_nongesture(const std::vector<RawRecord>& records,
                                       const WindowOptions& opts = {});

/// Groups records by gesture id and windows each according to the manifest.
std::vector<Gesture> assemble_user(const std::vector<RawRecord>& records,
                                   const Manifest& manifest, const WindowOptions& opts = {});

// ---------------------------------------------------------------------------
// Filtering

struct FilterConfig {
  double cutoff_hz = 10.0;
  int order = 2;
  double sample_rate_hz = kSampleRateHz;
};

/// Zero-phase Butterworth low-pass, applied per channel.
Series lowpass_filter(const Series& s, const FilterConfig& cfg = {});
Gesture lowpass_filter(const Gesture& g, double cutoff_hz, int order);

// ---------------------------------------------------------------------------
// Normalisation

struct NormStats {
  std::array<double, kChannels> mean{};
  std::array<double, kChannels> std{};
};

NormStats fit_norm_stats(const std::vector<Gesture>& train);
Series apply_norm(const Series& s, const NormStats& stats);
Gesture apply_norm(const Gesture& g, const NormStats& stats);
Series invert_norm(const Series& s, const NormStats& stats);

// ---------------------------------------------------------------------------
// Splitting

struct SplitSpec {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;
  std::uint64_t seed = 0;
};

struct SplitOptions {
  double trainval_fraction = 2.0 / 3.0;
  double val_fraction = 0.2;
  std::uint64_t seed = 0;
};

/// Per (user, gesture flag) group: the earliest fraction goes to train+val,
/// the rest to test. Validation takes floor(val_fraction * n) of each group's
/// train+val part (at least 1 when n >= 2), chosen at random under the seed.
SplitSpec temporal_split(const std::vector<Gesture>& corpus, const SplitOptions& opts);

enum class Part { train, validation, test, none };

/// Lookup helper over a SplitSpec.
class SplitIndex {
 public:
  explicit SplitIndex(const SplitSpec& spec);
  [[nodiscard]] Part part_of(const Gesture& g) const;
  [[nodiscard]] std::vector<Gesture> select(const std::vector<Gesture>& corpus, Part p) const;

 private:
  std::vector<std::pair<std::string, Part>> sorted_;
};

// ---------------------------------------------------------------------------
// Simulator

/// Per-user shape parameters. Each channel is a baseline plus a logistic
/// ramp (the wrist extension) plus two Gaussian bumps.
struct SimUserProfile {
  std::string user_id;
  std::array<double, kChannels> baseline{};
  std::array<double, kChannels> ramp_amplitude{};
  double ramp_center_s = 2.5;
  double ramp_rate_s = 0.25;  // logistic scale
  std::array<std::array<double, 2>, kChannels> bump_amplitude{};
  std::array<std::array<double, 2>, kChannels> bump_center_s{};
  std::array<std::array<double, 2>, kChannels> bump_width_s{};
  double noise_sigma = 0.05;
};

void validate_profile(const SimUserProfile& p);

struct ProfileOptions {
  /// Spread of user-specific deviations around the shared population template.
  double user_spread = 0.15;
  double noise_sigma = 0.3;
};

/// Draws `n_users` profiles (ids u0, u1, ...) around a common template.
std::vector<SimUserProfile> random_profiles(std::size_t n_users, std::uint64_t seed,
                                            const ProfileOptions& opts = {});

/// Noise-free gesture of a profile, optionally time-shifted and scaled.
Series profile_curve(const SimUserProfile& p, double time_shift_s = 0.0,
                     double amplitude_scale = 1.0);

/// Gestures per user follow the profile with per-gesture jitter (time shift
/// and amplitude, both proportional to noise_sigma) plus white noise.
/// Non-gestures are band-limited random oscillations, assigned round-robin
/// to users. Deterministic under seed.
std::vector<Gesture> simulate_corpus(const std::vector<SimUserProfile>& profiles,
                                     std::size_t n_gestures_per_user,
                                     std::size_t n_nongestures, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Serialisation (JSON lines for corpora; JSON for stats and splits)

void write_corpus_jsonl(std::ostream& out, const std::vector<Gesture>& corpus);
std::vector<Gesture> read_corpus_jsonl(std::istream& in);
void save_corpus(const std::filesystem::path& path, const std::vector<Gesture>& corpus);
std::vector<Gesture> load_corpus(const std::filesystem::path& path);

std::string norm_stats_to_json(const NormStats& s);
NormStats norm_stats_from_json(const std::string& text);
std::string split_to_json(const SplitSpec& s);
SplitSpec split_from_json(const std::string& text);

/// Distinct user ids in first-appearance order.
std::vector<std::string> user_ids(const std::vector<Gesture>& corpus);

}  // namespace gestauth::dataset
