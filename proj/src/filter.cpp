#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "gestauth/dataset.hpp"
#include "gestauth/error.hpp"

namespace gestauth::dataset {

namespace {

// Direct-form II transposed second-order section, a0 = 1. First-order
// sections use b2 = a2 = 0.
struct Biquad {
  double b0, b1, b2, a1, a2;
};

// Digital Butterworth low-pass by bilinear transform with pre-warping. Each
// section is normalised to unit DC gain.
std::vector<Biquad> butterworth_sections(int order, double cutoff_hz, double fs) {
  const double warped = 2.0 * fs * std::tan(std::numbers::pi * cutoff_hz / fs);
  std::vector<Biquad> out;
  auto to_z = [&](std::complex<double> s) {
    const auto k = s * warped / (2.0 * fs);
    return (1.0 + k) / (1.0 - k);
  };
  for (int k = 0; k < order / 2; ++k) {
    const double theta = std::numbers::pi * (2.0 * k + order + 1) / (2.0 * order);
    const auto z = to_z(std::polar(1.0, theta));
    const double a1 = -2.0 * z.real();
    const double a2 = std::norm(z);
    const double g = (1.0 + a1 + a2) / 4.0;
    out.push_back({g, 2.0 * g, g, a1, a2});
  }
  if (order % 2 == 1) {
    const double zr = to_z({-1.0, 0.0}).real();
    const double g = (1.0 - zr) / 2.0;
    out.push_back({g, g, 0.0, -zr, 0.0});
  }
  return out;
}

// Filters in place; state starts at the steady state for a constant input
// equal to x[0] (unit DC gain sections).
void run_sections(const std::vector<Biquad>& sections, std::vector<double>& x) {
  if (x.empty()) return;
  for (const auto& s : sections) {
    const double x0 = x.front();
    double z2 = (s.b2 - s.a2) * x0;
    double z1 = (s.b1 - s.a1) * x0 + z2;
    for (double& v : x) {
      const double in = v;
      const double y = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * y + z2;
      z2 = s.b2 * in - s.a2 * y;
      v = y;
    }
  }
}

std::vector<double> filtfilt(const std::vector<Biquad>& sections, int order, std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 2) return {x.begin(), x.end()};
  const std::size_t pad = std::min<std::size_t>(3 * static_cast<std::size_t>(order + 1), n - 1);
  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  // Odd extension at both ends.
  for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

  run_sections(sections, ext);
  std::reverse(ext.begin(), ext.end());
  run_sections(sections, ext);
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + static_cast<std::ptrdiff_t>(pad), ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

}  // namespace

Series lowpass_filter(const Series& s, const FilterConfig& cfg) {
  const double nyquist = cfg.sample_rate_hz / 2.0;
  if (!(cfg.cutoff_hz > 0.0) || cfg.cutoff_hz >= nyquist) {
    throw InputError("filter cutoff must lie in (0, " + std::to_string(nyquist) + ") Hz");
  }
  if (cfg.order < 1) throw InputError("filter order must be positive");
  const auto sections = butterworth_sections(cfg.order, cfg.cutoff_hz, cfg.sample_rate_hz);
  Series out = s;
  for (std::size_t c = 0; c < s.cols(); ++c) {
    const auto col = s.column(c);
    out.set_column(c, filtfilt(sections, cfg.order, col));
  }
  return out;
}

Gesture lowpass_filter(const Gesture& g, double cutoff_hz, int order) {
  Gesture out = g;
  out.series = lowpass_filter(g.series, FilterConfig{cutoff_hz, order, kSampleRateHz});
  return out;
}

}  // namespace gestauth::dataset
