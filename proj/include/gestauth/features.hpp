#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <vector>

#include "gestauth/dataset.hpp"
#include "gestauth/series.hpp"

namespace gestauth::features {

inline constexpr std::size_t kExtendedChannels = 8;
inline constexpr std::size_t kStatsPerChannel = 9;
inline constexpr std::size_t kFeatureCount = kExtendedChannels * kStatsPerChannel;

/// Statistic order inside each channel's block of the feature vector.
enum class Stat : std::size_t { max, min, mean, std_dev, variance, skew, kurtosis, median, iqr };

using ChannelStats = std::array<double, kStatsPerChannel>;

/// 72 values: channel-major, `index = channel * 9 + stat`, over the six raw
/// channels followed by accelerometer norm and gyroscope norm.
struct FeatureVector {
  std::array<double, kFeatureCount> values{};

  [[nodiscard]] double at(std::size_t channel, Stat s) const {
    return values[channel * kStatsPerChannel + static_cast<std::size_t>(s)];
  }
};

/// Appends |acc| and |gyr| to the six raw channels: [T x 6] -> [T x 8].
Series channels_extended(const Series& s);

/// Population moments; excess kurtosis; quantiles by linear interpolation
/// between order statistics. Zero-variance input has skew = kurtosis = 0.
ChannelStats channel_stats(std::span<const double> v);

/// Vector-Jacobian product of channel_stats: returns d<upstream, stats>/dv.
/// max/min route to the first extremal index.
std::vector<double> channel_stats_vjp(std::span<const double> v, const ChannelStats& upstream);

/// Linear-interpolation quantile (numpy's default rule).
double quantile(std::span<const double> v, double q);

FeatureVector extract_features(const Series& s);
FeatureVector extract_features(const dataset::Gesture& g);

/// Gradient of <upstream, extract_features(s)> with respect to the [T x 6] series.
Series features_vjp(const Series& s, const std::array<double, kFeatureCount>& upstream);

struct PeakConfig {
  double threshold_std = 0.5;
  std::size_t min_separation = 5;
};

/// Strict local maxima above mean + threshold_std * std, keeping the tallest
/// peaks first and discarding any within `min_separation` samples of a kept one.
std::size_t peak_count(std::span<const double> series, const PeakConfig& cfg = {});

/// The 72 features plus one peak count per extended channel (80 values).
std::vector<double> full_features(const Series& s, const PeakConfig& cfg = {});

/// Header `user_id,gesture_id,f0..f71`, one row per gesture.
void write_feature_csv(std::ostream& out, const std::vector<dataset::Gesture>& gestures);

}  // namespace gestauth::features
