#include "gestauth/distances.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "gestauth/error.hpp"
#include "gestauth/features.hpp"

namespace gestauth::distances {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_same_shape(const Series& x, const Series& y, const char* what) {
  if (!x.same_shape(y)) {
    throw InputError(std::string(what) + ": shape mismatch (" + std::to_string(x.rows()) + "x" +
                     std::to_string(x.cols()) + " vs " + std::to_string(y.rows()) + "x" + std::to_string(y.cols()) +
                     ")");
  }
}

// Soft minimum of three values with a max-shift so exp() never overflows.
double softmin3(double a, double b, double c, double gamma) {
  const double m = std::min({a, b, c});
  if (m == kInf) return kInf;
  const double s = std::exp(-(a - m) / gamma) + std::exp(-(b - m) / gamma) + std::exp(-(c - m) / gamma);
  return m - gamma * std::log(s);
}

}  // namespace

double dtw(std::span<const double> x, std::span<const double> y, std::optional<std::size_t> band, PointDistance pd) {
  const std::size_t n = x.size();
  const std::size_t m = y.size();
  if (n == 0 || m == 0) throw InputError("dtw: empty series");
  if (band) {
    const std::size_t diff = n > m ? n - m : m - n;
    if (diff > *band) throw InputError("dtw: length difference exceeds band");
  }
  const std::size_t w = band.value_or(std::max(n, m));
  std::vector<double> prev(m + 1, kInf), cur(m + 1, kInf);
  prev[0] = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    std::fill(cur.begin(), cur.end(), kInf);
    const std::size_t jlo = i > w ? i - w : 1;
    const std::size_t jhi = std::min(m, i + w);
    for (std::size_t j = jlo; j <= jhi; ++j) {
      const double best = std::min({prev[j], cur[j - 1], prev[j - 1]});
      cur[j] = point_distance(x[i - 1], y[j - 1], pd) + best;
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

Envelope envelopes(std::span<const double> x, std::size_t w) {
  if (w < 1) throw InputError("envelopes: bandwidth must be >= 1");
  const std::size_t n = x.size();
  Envelope env;
  env.band = w;
  env.upper.resize(n);
  env.lower.resize(n);
  // Monotone deques over the sliding window [i - w, i + w].
  std::deque<std::size_t> maxq, minq;
  std::size_t next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t hi = std::min(n - 1, i + w);
    for (; next <= hi; ++next) {
      while (!maxq.empty() && x[maxq.back()] <= x[next]) maxq.pop_back();
      maxq.push_back(next);
      while (!minq.empty() && x[minq.back()] >= x[next]) minq.pop_back();
      minq.push_back(next);
    }
    const std::size_t lo = i > w ? i - w : 0;
    while (maxq.front() < lo) maxq.pop_front();
    while (minq.front() < lo) minq.pop_front();
    env.upper[i] = x[maxq.front()];
    env.lower[i] = x[minq.front()];
  }
  return env;
}

double lb_keogh(const Envelope& env, std::span<const double> y, PointDistance pd) {
  if (env.upper.size() != y.size()) throw InputError("lb_keogh: length mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] > env.upper[i]) {
      sum += point_distance(y[i], env.upper[i], pd);
    } else if (y[i] < env.lower[i]) {
      sum += point_distance(y[i], env.lower[i], pd);
    }
  }
  return sum;
}

double lb_keogh(std::span<const double> x, std::span<const double> y, std::size_t w, PointDistance pd) {
  if (x.size() != y.size()) throw InputError("lb_keogh: length mismatch");
  return lb_keogh(envelopes(x, w), y, pd);
}

LossResult klb_mod_with_grad(const Series& x, const Series& y) {
  require_same_shape(x, y, "klb_mod");
  LossResult r{0.0, Series(y.rows(), y.cols())};
  for (std::size_t c = 0; c < x.cols(); ++c) {
    const auto xc = x.column(c);
    for (std::size_t k = 0; k < kKlbModBandwidths.size(); ++k) {
      const auto env = envelopes(xc, kKlbModBandwidths[k]);
      const double weight = kKlbModWeights[k];
      for (std::size_t t = 0; t < y.rows(); ++t) {
        const double v = y(t, c);
        double d = 0.0;
        if (v > env.upper[t]) {
          d = v - env.upper[t];
        } else if (v < env.lower[t]) {
          d = v - env.lower[t];
        }
        r.value += weight * d * d;
        r.grad(t, c) += weight * 2.0 * d;
      }
    }
  }
  return r;
}

double klb_mod(const Series& x, const Series& y) { return klb_mod_with_grad(x, y).value; }

namespace {

// Forward table R (1-based, padded to (n+2) x (m+2)) and the cost matrix.
struct SoftDtwTable {
  std::size_t n, m;
  std::vector<double> R;
  std::vector<double> D;
  double& r(std::size_t i, std::size_t j) { return R[i * (m + 2) + j]; }
  double& d(std::size_t i, std::size_t j) { return D[i * (m + 2) + j]; }
};

SoftDtwTable soft_dtw_forward(std::span<const double> x, std::span<const double> y, double gamma) {
  SoftDtwTable tb{x.size(), y.size(), {}, {}};
  const std::size_t stride = tb.m + 2;
  tb.R.assign((tb.n + 2) * stride, kInf);
  tb.D.assign((tb.n + 2) * stride, 0.0);
  tb.r(0, 0) = 0.0;
  for (std::size_t i = 1; i <= tb.n; ++i) {
    for (std::size_t j = 1; j <= tb.m; ++j) {
      const double diff = x[i - 1] - y[j - 1];
      tb.d(i, j) = diff * diff;
      tb.r(i, j) = tb.d(i, j) + softmin3(tb.r(i - 1, j - 1), tb.r(i - 1, j), tb.r(i, j - 1), gamma);
    }
  }
  return tb;
}

void check_soft_dtw_inputs(std::span<const double> x, std::span<const double> y, double gamma) {
  if (!(gamma > 0.0)) throw InputError("soft_dtw: gamma must be positive");
  if (x.empty() || y.empty()) throw InputError("soft_dtw: empty series");
  auto finite = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double a) { return std::isfinite(a); });
  };
  if (!finite(x) || !finite(y)) throw InputError("soft_dtw: non-finite input");
}

}  // namespace

double soft_dtw_1d(std::span<const double> x, std::span<const double> y, double gamma) {
  check_soft_dtw_inputs(x, y, gamma);
  auto tb = soft_dtw_forward(x, y, gamma);
  return tb.r(tb.n, tb.m);
}

LossResult soft_dtw(const Series& x, const Series& y, double gamma) {
  if (x.cols() != y.cols()) throw InputError("soft_dtw: channel count mismatch");
  LossResult res{0.0, Series(y.rows(), y.cols())};
  for (std::size_t c = 0; c < x.cols(); ++c) {
    const auto xc = x.column(c);
    const auto yc = y.column(c);
    check_soft_dtw_inputs(xc, yc, gamma);
    auto tb = soft_dtw_forward(xc, yc, gamma);
    const std::size_t n = tb.n, m = tb.m, stride = m + 2;
    res.value += tb.r(n, m);

    // Backward pass (Cuturi & Blondel): E[i][j] = dR[n][m] / dR[i][j].
    for (std::size_t i = 1; i <= n; ++i) tb.r(i, m + 1) = -kInf;
    for (std::size_t j = 1; j <= m; ++j) tb.r(n + 1, j) = -kInf;
    tb.r(n + 1, m + 1) = tb.r(n, m);
    std::vector<double> E((n + 2) * stride, 0.0);
    auto e = [&](std::size_t i, std::size_t j) -> double& { return E[i * stride + j]; };
    e(n + 1, m + 1) = 1.0;
    for (std::size_t j = m; j >= 1; --j) {
      for (std::size_t i = n; i >= 1; --i) {
        const double rij = tb.r(i, j);
        const double a = std::exp((tb.r(i + 1, j) - rij - tb.d(i + 1, j)) / gamma);
        const double b = std::exp((tb.r(i, j + 1) - rij - tb.d(i, j + 1)) / gamma);
        const double cc = std::exp((tb.r(i + 1, j + 1) - rij - tb.d(i + 1, j + 1)) / gamma);
        e(i, j) = e(i + 1, j) * a + e(i, j + 1) * b + e(i + 1, j + 1) * cc;
      }
    }
    for (std::size_t j = 1; j <= m; ++j) {
      double g = 0.0;
      for (std::size_t i = 1; i <= n; ++i) g += e(i, j) * 2.0 * (yc[j - 1] - xc[i - 1]);
      res.grad(j - 1, c) = g;
    }
  }
  return res;
}

LossResult mse_loss(const Series& x, const Series& y) {
  require_same_shape(x, y, "mse_loss");
  LossResult r{0.0, Series(y.rows(), y.cols())};
  auto xf = x.flat();
  auto yf = y.flat();
  auto gf = r.grad.flat();
  for (std::size_t i = 0; i < xf.size(); ++i) {
    const double d = yf[i] - xf[i];
    r.value += d * d;
    gf[i] = 2.0 * d;
  }
  return r;
}

LossResult feature_loss(const Series& x, const Series& y) {
  require_same_shape(x, y, "feature_loss");
  const auto fx = features::extract_features(x);
  const auto fy = features::extract_features(y);
  std::array<double, features::kFeatureCount> upstream{};
  double value = 0.0;
  for (std::size_t i = 0; i < features::kFeatureCount; ++i) {
    const double d = fy.values[i] - fx.values[i];
    value += d * d;
    upstream[i] = 2.0 * d;
  }
  return {value, features::features_vjp(y, upstream)};
}

std::string to_string(LossKind k) {
  switch (k) {
    case LossKind::mse: return "mse";
    case LossKind::soft_dtw: return "soft_dtw";
    case LossKind::klb_mod: return "klb_mod";
    case LossKind::mse_feature: return "mse_feature";
    case LossKind::klb_mod_feature: return "klb_mod_feature";
  }
  return "?";
}

LossKind loss_kind_from_string(const std::string& s) {
  for (auto k : {LossKind::mse, LossKind::soft_dtw, LossKind::klb_mod, LossKind::mse_feature,
                 LossKind::klb_mod_feature}) {
    if (to_string(k) == s) return k;
  }
  throw InputError("unknown loss kind '" + s + "'");
}

LossSpec LossSpec::defaults(LossKind kind) {
  switch (kind) {
    case LossKind::mse_feature: return {kind, 0.0, 0.1, 0.1};
    case LossKind::klb_mod_feature: return {kind, 1.0, 0.01, 0.1};
    default: return {kind, 1.0, 0.0, 0.1};
  }
}

void validate(const LossSpec& spec) {
  if (!(spec.base_weight >= 0.0) || !(spec.feature_weight >= 0.0)) {
    throw InputError("loss weights must be non-negative");
  }
  if (spec.kind == LossKind::soft_dtw && !(spec.gamma > 0.0)) {
    throw InputError("soft-DTW gamma must be positive");
  }
}

LossResult combined_loss(const LossSpec& spec, const Series& x, const Series& y) {
  validate(spec);
  require_same_shape(x, y, "combined_loss");
  LossResult total{0.0, Series(y.rows(), y.cols())};
  auto accumulate = [&](const LossResult& part, double w) {
    total.value += w * part.value;
    auto g = total.grad.flat();
    auto p = part.grad.flat();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += w * p[i];
  };
  if (spec.base_weight > 0.0) {
    switch (spec.kind) {
      case LossKind::mse:
      case LossKind::mse_feature: accumulate(mse_loss(x, y), spec.base_weight); break;
      case LossKind::klb_mod:
      case LossKind::klb_mod_feature: accumulate(klb_mod_with_grad(x, y), spec.base_weight); break;
      case LossKind::soft_dtw: accumulate(soft_dtw(x, y, spec.gamma), spec.base_weight); break;
    }
  }
  if (spec.feature_weight > 0.0) accumulate(feature_loss(x, y), spec.feature_weight);
  return total;
}

}  // namespace gestauth::distances
