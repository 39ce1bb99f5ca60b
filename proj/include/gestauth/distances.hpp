#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gestauth/series.hpp"

namespace gestauth::distances {

enum class PointDistance { squared, absolute };

inline double point_distance(double a, double b, PointDistance d) {
  const double diff = a - b;
  return d == PointDistance::squared ? diff * diff : (diff < 0 ? -diff : diff);
}

/// Classic DTW over 1-D series. With `band`, matches are restricted to
/// |i - j| <= band (Sakoe-Chiba), which requires |len(x) - len(y)| <= band.
double dtw(std::span<const double> x, std::span<const double> y, std::optional<std::size_t> band = std::nullopt,
           PointDistance pd = PointDistance::squared);

/// Running max/min of `x` over the window [i - w, i + w].
struct Envelope {
  std::vector<double> upper;
  std::vector<double> lower;
  std::size_t band = 1;
};

Envelope envelopes(std::span<const double> x, std::size_t w);

/// Keogh's bound: distance from y to the envelope of x, summed over the
/// points where y leaves the envelope.
double lb_keogh(std::span<const double> x, std::span<const double> y, std::size_t w,
                PointDistance pd = PointDistance::squared);
double lb_keogh(const Envelope& env_x, std::span<const double> y, PointDistance pd = PointDistance::squared);

inline constexpr std::array<std::size_t, 5> kKlbModBandwidths{2, 4, 8, 16, 32};
inline constexpr std::array<double, 5> kKlbModWeights{5.0, 4.0, 3.0, 2.0, 1.0};

/// A loss value together with its gradient with respect to the second
/// argument (the reconstruction).
struct LossResult {
  double value = 0.0;
  Series grad;
};

/// Sum over channels of sum_k (6-k) * lb_keogh(x_c, y_c, 2^k), k = 1..5, with
/// squared point distance. The gradient treats x's envelopes as constants.
double klb_mod(const Series& x, const Series& y);
LossResult klb_mod_with_grad(const Series& x, const Series& y);

/// Soft-DTW (squared point cost) of one channel pair.
double soft_dtw_1d(std::span<const double> x, std::span<const double> y, double gamma);

/// Per-channel Soft-DTW summed over channels, and its gradient w.r.t. y by
/// reverse accumulation through the dynamic-programming table.
LossResult soft_dtw(const Series& x, const Series& y, double gamma = 0.1);

/// Sum (not mean) of squared differences.
LossResult mse_loss(const Series& x, const Series& y);

/// Squared Euclidean distance between the 72-value feature vectors.
LossResult feature_loss(const Series& x, const Series& y);

enum class LossKind { mse, soft_dtw, klb_mod, mse_feature, klb_mod_feature };

std::string to_string(LossKind k);
LossKind loss_kind_from_string(const std::string& s);

struct LossSpec {
  LossKind kind = LossKind::klb_mod_feature;
  double base_weight = 1.0;
  double feature_weight = 0.01;
  double gamma = 0.1;

  /// Weights used for each kind when not overridden: feature variants use
  /// 0 : 0.1 (MSE + Feature) and 1 : 0.01 (KLB-mod + Feature).
  static LossSpec defaults(LossKind kind);
};

void validate(const LossSpec& spec);

/// base_weight * base(x, y) + feature_weight * feature_loss(x, y).
LossResult combined_loss(const LossSpec& spec, const Series& x, const Series& y);

}  // namespace gestauth::distances
