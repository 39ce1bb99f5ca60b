#include <doctest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <random>

#include "gestauth/distances.hpp"
#include "gestauth/error.hpp"
#include "gestauth/features.hpp"

using namespace gestauth;
using namespace gestauth::distances;

namespace {

// Minimum cost over every monotone warping path, by brute-force recursion.
double dtw_paths(const std::vector<double>& x, const std::vector<double>& y, PointDistance pd) {
  double best = std::numeric_limits<double>::infinity();
  std::function<void(std::size_t, std::size_t, double)> walk = [&](std::size_t i, std::size_t j, double acc) {
    acc += point_distance(x[i], y[j], pd);
    if (i + 1 == x.size() && j + 1 == y.size()) {
      best = std::min(best, acc);
      return;
    }
    if (i + 1 < x.size()) walk(i + 1, j, acc);
    if (j + 1 < y.size()) walk(i, j + 1, acc);
    if (i + 1 < x.size() && j + 1 < y.size()) walk(i + 1, j + 1, acc);
  };
  walk(0, 0, 0.0);
  return best;
}

std::vector<std::vector<double>> all_series(std::size_t max_len, int alphabet) {
  std::vector<std::vector<double>> out;
  for (std::size_t len = 1; len <= max_len; ++len) {
    std::size_t total = 1;
    for (std::size_t k = 0; k < len; ++k) total *= static_cast<std::size_t>(alphabet);
    for (std::size_t code = 0; code < total; ++code) {
      std::vector<double> s(len);
      auto c = code;
      for (auto& v : s) {
        v = static_cast<double>(c % alphabet);
        c /= alphabet;
      }
      out.push_back(s);
    }
  }
  return out;
}

Series random_series(std::size_t t, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Series s(t, c);
  for (auto& v : s.flat()) v = n(rng);
  return s;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1e-6, std::abs(a) + std::abs(b)); }

template <class F>
double max_fd_error(F loss, const Series& x, Series y, const Series& grad, double h = 1e-5) {
  double worst = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double keep = y.flat()[i];
    y.flat()[i] = keep + h;
    const double up = loss(x, y);
    y.flat()[i] = keep - h;
    const double down = loss(x, y);
    y.flat()[i] = keep;
    worst = std::max(worst, rel_err((up - down) / (2 * h), grad.flat()[i]));
  }
  return worst;
}

}  // namespace

TEST_CASE("dtw: identity, duplicate absorption, errors") {
  const std::vector<double> a{1, 2, 3}, b{1, 2, 2, 3};
  CHECK(dtw(a, a) == 0.0);
  CHECK(dtw(a, b, std::nullopt, PointDistance::absolute) == 0.0);
  CHECK_THROWS_AS(dtw(std::vector<double>{}, a), InputError);
  CHECK_THROWS_AS(dtw(a, std::vector<double>(6, 0.0), 1), InputError);
}

TEST_CASE("dtw equals exhaustive path enumeration for short binary series") {
  const auto series = all_series(4, 2);
  for (const auto& x : series) {
    for (const auto& y : series) {
      REQUIRE(dtw(x, y) == dtw_paths(x, y, PointDistance::squared));
      REQUIRE(dtw(x, y, std::nullopt, PointDistance::absolute) == dtw_paths(x, y, PointDistance::absolute));
    }
  }
}

TEST_CASE("dtw: symmetry and wide band equals unbanded") {
  std::mt19937_64 rng(1);
  for (int k = 0; k < 50; ++k) {
    const auto x = random_series(20, 1, rng), y = random_series(20, 1, rng);
    const auto xs = x.column(0), ys = y.column(0);
    CHECK(dtw(xs, ys) == doctest::Approx(dtw(ys, xs)).epsilon(1e-12));
    CHECK(dtw(xs, ys, 100) == dtw(xs, ys));
  }
}

TEST_CASE("envelopes: hand cases") {
  const std::vector<double> x{0, 1, 0};
  const auto e = envelopes(x, 1);
  CHECK(e.upper == std::vector<double>{1, 1, 1});
  CHECK(e.lower == std::vector<double>{0, 0, 0});
  const std::vector<double> c(5, 2.5);
  const auto ec = envelopes(c, 2);
  CHECK(ec.upper == c);
  CHECK(ec.lower == c);
  const std::vector<double> r{3, -1, 4, 1, 5};
  const auto full = envelopes(r, 10);
  for (std::size_t i = 0; i < r.size(); ++i) {
    CHECK(full.upper[i] == 5);
    CHECK(full.lower[i] == -1);
  }
}

TEST_CASE("lb_keogh: hand case, inside envelope, bound on banded dtw") {
  CHECK(lb_keogh(std::vector<double>{0, 0, 0}, std::vector<double>{0, 0, 2}, 1) == 4.0);
  CHECK(lb_keogh(std::vector<double>{0, 1, 0}, std::vector<double>{0.5, 0.5, 0.5}, 1) == 0.0);
  CHECK_THROWS_AS(lb_keogh(std::vector<double>{0, 1}, std::vector<double>{0, 1, 2}, 1), InputError);
  std::mt19937_64 rng(2);
  for (int k = 0; k < 100; ++k) {
    const auto x = random_series(50, 1, rng).column(0), y = random_series(50, 1, rng).column(0);
    for (std::size_t w : {2, 4, 8, 16, 32}) {
      const double lb = lb_keogh(x, y, w);
      CHECK(lb >= 0.0);
      CHECK(lb <= dtw(x, y, w) + 1e-12);
    }
  }
}

TEST_CASE("klb_mod: identity, term-wise oracle, clipping monotonicity") {
  std::mt19937_64 rng(3);
  const auto x = random_series(200, 1, rng), y = random_series(200, 1, rng);
  CHECK(klb_mod(x, x) == 0.0);
  double expect = 0.0;
  for (std::size_t k = 0; k < 5; ++k) expect += (5.0 - k) * lb_keogh(x.column(0), y.column(0), std::size_t{2} << k);
  CHECK(klb_mod(x, y) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(klb_mod(y, x) >= 0.0);

  const auto x6 = random_series(200, 6, rng), y6 = random_series(200, 6, rng, 2.0);
  const double before = klb_mod(x6, y6);
  Series clipped = y6;
  for (std::size_t c = 0; c < 6; ++c) {
    const auto env = envelopes(x6.column(c), 32);
    for (std::size_t t = 0; t < 200; ++t) {
      auto& v = clipped(t, c);
      v = std::clamp(v, env.lower[t] - 0.5 * (env.lower[t] - v > 0 ? env.lower[t] - v : 0),
                     env.upper[t] + 0.5 * (v - env.upper[t] > 0 ? v - env.upper[t] : 0));
    }
  }
  CHECK(klb_mod(x6, clipped) <= before);
  CHECK_THROWS_AS(klb_mod(x6, random_series(200, 5, rng)), InputError);
}

TEST_CASE("soft_dtw: small-gamma limit, upper bound by dtw, self bound") {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> digit(0, 3);
  for (int k = 0; k < 30; ++k) {
    std::vector<double> x(5), y(5);
    for (auto& v : x) v = digit(rng);
    for (auto& v : y) v = digit(rng);
    CHECK(std::abs(soft_dtw_1d(x, y, 1e-4) - dtw(x, y)) <= 1e-2);
    CHECK(soft_dtw_1d(x, y, 0.5) <= dtw(x, y) + 1e-12);
    const double self = soft_dtw_1d(x, x, 0.1);
    CHECK(self <= 0.1 * 5 * std::log(3.0));
  }
  Series bad(3, 1, 0.0);
  bad(1, 0) = std::nan("");
  CHECK_THROWS_AS(soft_dtw(bad, Series(3, 1, 0.0)), InputError);
}

TEST_CASE("soft_dtw gradient matches central differences") {
  std::mt19937_64 rng(5);
  for (int k = 0; k < 10; ++k) {
    const auto x = random_series(10, 2, rng), y = random_series(10, 2, rng);
    const auto r = soft_dtw(x, y, 0.1);
    const auto loss = [](const Series& a, const Series& b) { return soft_dtw(a, b, 0.1).value; };
    CHECK(max_fd_error(loss, x, y, r.grad) < 1e-4);
  }
}

TEST_CASE("mse_loss: zero, all-ones difference, loop oracle, gradient") {
  std::mt19937_64 rng(6);
  const auto x = random_series(200, 6, rng), y = random_series(200, 6, rng);
  CHECK(mse_loss(x, x).value == 0.0);
  Series shifted = x;
  for (auto& v : shifted.flat()) v += 1.0;
  CHECK(mse_loss(x, shifted).value == doctest::Approx(1200.0).epsilon(1e-12));
  double naive = 0.0;
  for (std::size_t t = 0; t < 200; ++t)
    for (std::size_t c = 0; c < 6; ++c) naive += (x(t, c) - y(t, c)) * (x(t, c) - y(t, c));
  const auto r = mse_loss(x, y);
  CHECK(r.value == doctest::Approx(naive).epsilon(1e-12));
  CHECK(r.grad(7, 2) == doctest::Approx(2.0 * (y(7, 2) - x(7, 2))));
  CHECK_THROWS_AS(mse_loss(x, random_series(199, 6, rng)), InputError);
}

TEST_CASE("feature_loss: zero, constant shift, compositional oracle") {
  std::mt19937_64 rng(7);
  const auto x = random_series(200, 6, rng), y = random_series(200, 6, rng);
  CHECK(feature_loss(x, x).value == 0.0);

  const auto fx = features::extract_features(x), fy = features::extract_features(y);
  double expect = 0.0;
  for (std::size_t i = 0; i < features::kFeatureCount; ++i) expect += std::pow(fx.values[i] - fy.values[i], 2);
  CHECK(feature_loss(x, y).value == doctest::Approx(expect).epsilon(1e-12));

  // Shift acc_x by k: channel-0 location stats move by k, spread stats stay.
  const double k = 0.75;
  Series s = x;
  for (std::size_t t = 0; t < 200; ++t) s(t, 0) += k;
  const auto fs = features::extract_features(s);
  using features::Stat;
  for (auto st : {Stat::max, Stat::min, Stat::mean, Stat::median}) CHECK(fs.at(0, st) - fx.at(0, st) == doctest::Approx(k));
  for (auto st : {Stat::std_dev, Stat::variance, Stat::skew, Stat::kurtosis, Stat::iqr}) {
    CHECK(std::abs(fs.at(0, st) - fx.at(0, st)) < 1e-9);
  }
  double location = 0.0;
  for (auto st : {Stat::max, Stat::min, Stat::mean, Stat::median}) location += std::pow(fs.at(0, st) - fx.at(0, st), 2);
  CHECK(location == doctest::Approx(4 * k * k));
  CHECK(feature_loss(x, s).value >= location - 1e-9);
}

TEST_CASE("combined_loss: weight reductions, defaults, gradient") {
  std::mt19937_64 rng(8);
  const auto x = random_series(200, 6, rng), y = random_series(200, 6, rng);
  LossSpec base_only{LossKind::klb_mod_feature, 1.0, 0.0, 0.1};
  CHECK(combined_loss(base_only, x, y).value == doctest::Approx(klb_mod(x, y)).epsilon(1e-12));
  for (auto kind : {LossKind::mse_feature, LossKind::klb_mod_feature}) {
    LossSpec feat{kind, 0.0, 0.1, 0.1};
    CHECK(combined_loss(feat, x, y).value == doctest::Approx(0.1 * feature_loss(x, y).value).epsilon(1e-12));
  }
  const auto d1 = LossSpec::defaults(LossKind::mse_feature);
  CHECK(d1.base_weight == 0.0);
  CHECK(d1.feature_weight == 0.1);
  const auto d2 = LossSpec::defaults(LossKind::klb_mod_feature);
  CHECK(d2.base_weight == 1.0);
  CHECK(d2.feature_weight == 0.01);
  CHECK_THROWS_AS(validate(LossSpec{LossKind::mse, -1.0, 0.0, 0.1}), InputError);
  CHECK_THROWS_AS(validate(LossSpec{LossKind::soft_dtw, 1.0, 0.0, 0.0}), InputError);

  // Finite differences of KLB-mod + Feature on a short series, skipping
  // coordinates that sit within the step of an envelope kink.
  const auto xs = random_series(200, 6, rng), ys = random_series(200, 6, rng, 1.5);
  const auto r = combined_loss(d2, xs, ys);
  Series probe = ys;
  const double h = 1e-5;
  std::size_t checked = 0;
  std::uniform_int_distribution<std::size_t> pick(0, ys.size() - 1);
  for (int n = 0; n < 200; ++n) {
    const auto i = pick(rng);
    const auto t = i / 6, c = i % 6;
    bool near_kink = false;
    for (auto w : kKlbModBandwidths) {
      const auto env = envelopes(xs.column(c), w);
      near_kink |= std::abs(ys(t, c) - env.upper[t]) < 10 * h || std::abs(ys(t, c) - env.lower[t]) < 10 * h;
    }
    if (near_kink) continue;
    const double keep = probe.flat()[i];
    probe.flat()[i] = keep + h;
    const double up = combined_loss(d2, xs, probe).value;
    probe.flat()[i] = keep - h;
    const double down = combined_loss(d2, xs, probe).value;
    probe.flat()[i] = keep;
    const double fd = (up - down) / (2 * h);
    // max/min/median/iqr are piecewise; only compare where the fd is stable.
    probe.flat()[i] = keep + 2 * h;
    const double up2 = combined_loss(d2, xs, probe).value;
    probe.flat()[i] = keep;
    if (std::abs((up2 - up) / h - fd) > 1e-2 * std::max(1.0, std::abs(fd))) continue;
    // Below this size the difference quotient is dominated by round-off of the O(1e3) loss.
    if (std::abs(r.grad.flat()[i]) < 1e-3) continue;
    CHECK(rel_err(fd, r.grad.flat()[i]) < 1e-3);
    ++checked;
  }
  CHECK(checked > 30);
}
