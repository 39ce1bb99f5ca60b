#include <cmath>
#include <numbers>
#include <random>

#include "gestauth/dataset.hpp"
#include "gestauth/error.hpp"

namespace gestauth::dataset {

namespace {

// Accelerometer channels (m/s^2) swing roughly twice as far as gyroscope
// channels (rad/s); deviations and noise are scaled per channel accordingly.
constexpr std::array<double, kChannels> kChannelScale{2.0, 2.0, 2.0, 1.0, 1.0, 1.0};

SimUserProfile population_template() {
  SimUserProfile p;
  p.baseline = {0.0, 2.0, 9.6, 0.0, 0.0, 0.0};
  p.ramp_amplitude = {-6.0, 1.5, -4.0, 0.5, -0.8, 1.2};
  p.ramp_center_s = 2.6;
  p.ramp_rate_s = 0.25;
  for (std::size_t c = 0; c < kChannels; ++c) {
    p.bump_amplitude[c] = {1.0 * kChannelScale[c], -0.75 * kChannelScale[c]};
    p.bump_center_s[c] = {1.8, 3.2};
    p.bump_width_s[c] = {0.3, 0.25};
  }
  return p;
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

void validate_profile(const SimUserProfile& p) {
  if (!(p.ramp_rate_s > 0.0)) throw InputError("profile " + p.user_id + ": ramp rate must be positive");
  if (!(p.noise_sigma >= 0.0)) throw InputError("profile " + p.user_id + ": noise sigma must be >= 0");
  for (const auto& w : p.bump_width_s) {
    for (double v : w) {
      if (!(v > 0.0)) throw InputError("profile " + p.user_id + ": bump widths must be positive");
    }
  }
}

std::vector<SimUserProfile> random_profiles(std::size_t n_users, std::uint64_t seed, const ProfileOptions& opts) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double s = opts.user_spread;
  std::vector<SimUserProfile> out;
  for (std::size_t u = 0; u < n_users; ++u) {
    SimUserProfile p = population_template();
    p.user_id = "u" + std::to_string(u);
    p.noise_sigma = opts.noise_sigma;
    p.ramp_center_s += 0.3 * s * normal(rng);
    p.ramp_rate_s *= std::exp(0.3 * s * normal(rng));
    for (std::size_t c = 0; c < kChannels; ++c) {
      const double scale = kChannelScale[c];
      p.baseline[c] += s * scale * normal(rng);
      p.ramp_amplitude[c] += s * scale * normal(rng);
      for (std::size_t b = 0; b < 2; ++b) {
        p.bump_amplitude[c][b] += s * scale * normal(rng);
        p.bump_center_s[c][b] += 0.4 * s * normal(rng);
        p.bump_width_s[c][b] *= std::exp(0.3 * s * normal(rng));
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

Series profile_curve(const SimUserProfile& p, double time_shift_s, double amplitude_scale) {
  Series out(kTimesteps, kChannels);
  for (std::size_t k = 0; k < kTimesteps; ++k) {
    const double t = static_cast<double>(k) / kSampleRateHz - time_shift_s;
    for (std::size_t c = 0; c < kChannels; ++c) {
      double v = p.ramp_amplitude[c] * logistic((t - p.ramp_center_s) / p.ramp_rate_s);
      for (std::size_t b = 0; b < 2; ++b) {
        const double d = (t - p.bump_center_s[c][b]) / p.bump_width_s[c][b];
        v += p.bump_amplitude[c][b] * std::exp(-0.5 * d * d);
      }
      out(k, c) = p.baseline[c] + amplitude_scale * v;
    }
  }
  return out;
}

std::vector<Gesture> simulate_corpus(const std::vector<SimUserProfile>& profiles, std::size_t n_gestures_per_user,
                                     std::size_t n_nongestures, std::uint64_t seed) {
  if (profiles.empty()) throw InputError("simulate_corpus needs at least one profile");
  if (n_gestures_per_user < 1) throw InputError("simulate_corpus needs n >= 1");
  for (const auto& p : profiles) validate_profile(p);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Gesture> out;

  for (const auto& p : profiles) {
    const double sigma = p.noise_sigma;
    for (std::size_t i = 0; i < n_gestures_per_user; ++i) {
      // Gesture-to-gesture variability scales with the noise level, so a
      // noiseless profile always produces the same curve.
      const double shift = 2.0 * sigma * normal(rng);
      const double amp = 1.0 + 2.0 * sigma * normal(rng);
      Gesture g;
      g.user_id = p.user_id;
      g.gesture_id = "g" + std::to_string(i);
      g.terminal = static_cast<int>(i % 7) + 1;
      g.is_gesture = true;
      g.nfc_t_ms = static_cast<std::int64_t>(i + 1) * 60000;
      g.timestamp_ms = *g.nfc_t_ms;
      g.series = profile_curve(p, shift, amp);
      for (std::size_t k = 0; k < kTimesteps; ++k)
        for (std::size_t c = 0; c < kChannels; ++c) g.series(k, c) += sigma * kChannelScale[c] * normal(rng);
      out.push_back(std::move(g));
    }
  }

  for (std::size_t j = 0; j < n_nongestures; ++j) {
    const auto& p = profiles[j % profiles.size()];
    const std::size_t nth = j / profiles.size();
    Gesture g;
    g.user_id = p.user_id;
    g.gesture_id = "n" + std::to_string(nth);
    g.is_gesture = false;
    g.timestamp_ms = static_cast<std::int64_t>(nth + 1) * 60000 + 30000;
    for (std::size_t c = 0; c < kChannels; ++c) {
      std::array<double, 3> freq{}, phase{}, amp{};
      for (std::size_t m = 0; m < 3; ++m) {
        freq[m] = 0.2 + 2.8 * unif(rng);
        phase[m] = 2.0 * std::numbers::pi * unif(rng);
        amp[m] = (0.2 + 0.8 * unif(rng)) * kChannelScale[c];
      }
      for (std::size_t k = 0; k < kTimesteps; ++k) {
        const double t = static_cast<double>(k) / kSampleRateHz;
        double v = p.baseline[c];
        for (std::size_t m = 0; m < 3; ++m) v += amp[m] * std::sin(2.0 * std::numbers::pi * freq[m] * t + phase[m]);
        g.series(k, c) = v + p.noise_sigma * kChannelScale[c] * normal(rng);
      }
    }
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace gestauth::dataset
