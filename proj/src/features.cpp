#include "gestauth/features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "gestauth/error.hpp"

namespace gestauth::features {

namespace {

struct Moments {
  double mean = 0.0;
  double m2 = 0.0;
  double m3 = 0.0;
  double m4 = 0.0;
  bool degenerate = true;
};

Moments moments(std::span<const double> v) {
  Moments m;
  const auto n = static_cast<double>(v.size());
  m.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  for (double x : v) {
    const double d = x - m.mean;
    const double d2 = d * d;
    m.m2 += d2;
    m.m3 += d2 * d;
    m.m4 += d2 * d2;
  }
  m.m2 /= n;
  m.m3 /= n;
  m.m4 /= n;
  m.degenerate = !(m.m2 > 1e-20 * (1.0 + m.mean * m.mean));
  return m;
}

std::vector<std::size_t> sorted_order(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  return idx;
}

// Position of quantile q as (lower order-statistic rank, interpolation weight).
std::pair<std::size_t, double> quantile_position(std::size_t n, double q) {
  const double pos = q * static_cast<double>(n - 1);
  auto lo = static_cast<std::size_t>(std::floor(pos));
  if (lo >= n - 1) return {n - 1, 0.0};
  return {lo, pos - static_cast<double>(lo)};
}

double quantile_sorted(const std::vector<std::size_t>& order, std::span<const double> v, double q) {
  auto [lo, frac] = quantile_position(v.size(), q);
  if (frac == 0.0) return v[order[lo]];
  return v[order[lo]] + frac * (v[order[lo + 1]] - v[order[lo]]);
}

void quantile_vjp(const std::vector<std::size_t>& order, std::size_t n, double q, double g, std::vector<double>& out) {
  auto [lo, frac] = quantile_position(n, q);
  out[order[lo]] += (1.0 - frac) * g;
  if (frac != 0.0) out[order[lo + 1]] += frac * g;
}

}  // namespace

double quantile(std::span<const double> v, double q) {
  if (v.empty()) throw InputError("quantile of empty series");
  return quantile_sorted(sorted_order(v), v, q);
}

ChannelStats channel_stats(std::span<const double> v) {
  if (v.empty()) throw InputError("statistics of empty channel");
  ChannelStats s{};
  const auto m = moments(v);
  const auto order = sorted_order(v);
  s[static_cast<std::size_t>(Stat::max)] = v[order.back()];
  s[static_cast<std::size_t>(Stat::min)] = v[order.front()];
  s[static_cast<std::size_t>(Stat::mean)] = m.mean;
  s[static_cast<std::size_t>(Stat::variance)] = m.degenerate ? 0.0 : m.m2;
  s[static_cast<std::size_t>(Stat::std_dev)] = m.degenerate ? 0.0 : std::sqrt(m.m2);
  s[static_cast<std::size_t>(Stat::skew)] = m.degenerate ? 0.0 : m.m3 / std::pow(m.m2, 1.5);
  s[static_cast<std::size_t>(Stat::kurtosis)] = m.degenerate ? 0.0 : m.m4 / (m.m2 * m.m2) - 3.0;
  s[static_cast<std::size_t>(Stat::median)] = quantile_sorted(order, v, 0.5);
  s[static_cast<std::size_t>(Stat::iqr)] = quantile_sorted(order, v, 0.75) - quantile_sorted(order, v, 0.25);
  return s;
}

std::vector<double> channel_stats_vjp(std::span<const double> v, const ChannelStats& g) {
  const std::size_t n = v.size();
  const auto nd = static_cast<double>(n);
  std::vector<double> out(n, 0.0);
  const auto m = moments(v);
  const auto order = sorted_order(v);
  auto G = [&](Stat s) { return g[static_cast<std::size_t>(s)]; };

  // First index attaining the extremum.
  std::size_t imax = 0, imin = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (v[i] > v[imax]) imax = i;
    if (v[i] < v[imin]) imin = i;
  }
  out[imax] += G(Stat::max);
  out[imin] += G(Stat::min);
  for (auto& o : out) o += G(Stat::mean) / nd;

  if (!m.degenerate) {
    const double sd = std::sqrt(m.m2);
    const double d_m2 = G(Stat::variance) + G(Stat::std_dev) / (2.0 * sd) -
                        1.5 * G(Stat::skew) * m.m3 / std::pow(m.m2, 2.5) -
                        2.0 * G(Stat::kurtosis) * m.m4 / (m.m2 * m.m2 * m.m2);
    const double d_m3 = G(Stat::skew) / std::pow(m.m2, 1.5);
    const double d_m4 = G(Stat::kurtosis) / (m.m2 * m.m2);
    for (std::size_t i = 0; i < n; ++i) {
      const double d = v[i] - m.mean;
      out[i] += d_m2 * 2.0 * d / nd + d_m3 * 3.0 * (d * d - m.m2) / nd + d_m4 * 4.0 * (d * d * d - m.m3) / nd;
    }
  }
  quantile_vjp(order, n, 0.5, G(Stat::median), out);
  quantile_vjp(order, n, 0.75, G(Stat::iqr), out);
  quantile_vjp(order, n, 0.25, -G(Stat::iqr), out);
  return out;
}

Series channels_extended(const Series& s) {
  if (s.cols() != kChannels) throw InputError("channels_extended expects 6 channels");
  Series out(s.rows(), kExtendedChannels);
  for (std::size_t t = 0; t < s.rows(); ++t) {
    for (std::size_t c = 0; c < kChannels; ++c) out(t, c) = s(t, c);
    out(t, 6) = std::sqrt(s(t, 0) * s(t, 0) + s(t, 1) * s(t, 1) + s(t, 2) * s(t, 2));
    out(t, 7) = std::sqrt(s(t, 3) * s(t, 3) + s(t, 4) * s(t, 4) + s(t, 5) * s(t, 5));
  }
  return out;
}

FeatureVector extract_features(const Series& s) {
  const auto ext = channels_extended(s);
  FeatureVector fv;
  for (std::size_t c = 0; c < kExtendedChannels; ++c) {
    const auto stats = channel_stats(ext.column(c));
    std::copy(stats.begin(), stats.end(), fv.values.begin() + static_cast<std::ptrdiff_t>(c * kStatsPerChannel));
  }
  return fv;
}

FeatureVector extract_features(const dataset::Gesture& g) { return extract_features(g.series); }

Series features_vjp(const Series& s, const std::array<double, kFeatureCount>& upstream) {
  const auto ext = channels_extended(s);
  Series grad(s.rows(), kChannels);
  for (std::size_t c = 0; c < kExtendedChannels; ++c) {
    ChannelStats g{};
    std::copy_n(upstream.begin() + static_cast<std::ptrdiff_t>(c * kStatsPerChannel), kStatsPerChannel, g.begin());
    if (std::all_of(g.begin(), g.end(), [](double x) { return x == 0.0; })) continue;
    const auto dcol = channel_stats_vjp(ext.column(c), g);
    for (std::size_t t = 0; t < s.rows(); ++t) {
      if (c < kChannels) {
        grad(t, c) += dcol[t];
      } else {
        const std::size_t base = c == 6 ? 0 : 3;
        const double norm = ext(t, c);
        if (norm > 0.0) {
          for (std::size_t k = 0; k < 3; ++k) grad(t, base + k) += dcol[t] * s(t, base + k) / norm;
        }
      }
    }
  }
  return grad;
}

std::size_t peak_count(std::span<const double> x, const PeakConfig& cfg) {
  if (x.size() < 3) return 0;
  const auto m = moments(x);
  const double threshold = m.mean + cfg.threshold_std * (m.degenerate ? 0.0 : std::sqrt(m.m2));
  std::vector<std::size_t> candidates;
  for (std::size_t i = 1; i + 1 < x.size(); ++i) {
    if (x[i] > x[i - 1] && x[i] > x[i + 1] && x[i] > threshold) candidates.push_back(i);
  }
  std::stable_sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) { return x[a] > x[b]; });
  std::vector<std::size_t> kept;
  for (auto i : candidates) {
    const bool clear = std::none_of(kept.begin(), kept.end(), [&](std::size_t k) {
      return (i > k ? i - k : k - i) < cfg.min_separation;
    });
    if (clear) kept.push_back(i);
  }
  return kept.size();
}

std::vector<double> full_features(const Series& s, const PeakConfig& cfg) {
  const auto fv = extract_features(s);
  std::vector<double> out(fv.values.begin(), fv.values.end());
  const auto ext = channels_extended(s);
  for (std::size_t c = 0; c < kExtendedChannels; ++c) {
    out.push_back(static_cast<double>(peak_count(ext.column(c), cfg)));
  }
  return out;
}

void write_feature_csv(std::ostream& out, const std::vector<dataset::Gesture>& gestures) {
  out << "user_id,gesture_id";
  for (std::size_t i = 0; i < kFeatureCount; ++i) out << ",f" << i;
  out << '\n';
  const auto old_precision = out.precision(17);
  for (const auto& g : gestures) {
    const auto fv = extract_features(g);
    out << g.user_id << ',' << g.gesture_id;
    for (double v : fv.values) out << ',' << v;
    out << '\n';
  }
  out.precision(old_precision);
}

}  // namespace gestauth::features
