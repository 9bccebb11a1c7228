#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "tbent/fit.hpp"

using namespace tbent;

namespace {

constexpr double kPi = std::numbers::pi;

FringeScan model_scan(int n, double amplitude, double v, double phi0, double t = 1.0) {
  FringeScan s;
  for (int k = 0; k < n; ++k) {
    const double ph = 2.0 * kPi * k / n;
    s.points.push_back({ph, t * amplitude * (1.0 - v * std::cos(ph + phi0)), t});
  }
  return s;
}

double phase_distance(double a, double b) { return std::remainder(a - b, 2.0 * kPi); }

RateReport rates_for(double power, double eta_s, double eta_i, double duration) {
  // Pairs 1e6/s/W, no noise: Klyshko equals the configured efficiency.
  const double pairs = 1e6 * power;
  RateReport r;
  r.duration_s = duration;
  r.trigger_rate = 76.2e6;
  r.trigger_counts = static_cast<std::uint64_t>(76.2e6 * duration);
  r.singles_signal = {pairs * eta_s, 0.0};
  r.singles_idler = {pairs * eta_i, 0.0};
  r.coincidence = {pairs * eta_s * eta_i, 0.0};
  return r;
}

}  // namespace

TEST_CASE("linear fit") {
  const std::vector<double> x{1, 2, 3, 4, 5};
  std::vector<double> y;
  for (double v : x) y.push_back(750.0 * v);
  auto f = linear_fit(x, y);
  CHECK(f.slope == doctest::Approx(750.0));
  CHECK(std::abs(f.intercept) < 1e-9);
  CHECK(f.slope_error < 1e-9);

  // Known weighted case: slope error sqrt(S/det).
  const std::vector<double> sig{1, 1, 2, 2, 1};
  std::vector<double> noisy{2.1, 3.9, 6.2, 7.8, 10.1};
  f = linear_fit(x, noisy, sig);
  double s = 0, sx = 0, sxx = 0;
  for (std::size_t k = 0; k < 5; ++k) {
    const double w = 1 / (sig[k] * sig[k]);
    s += w;
    sx += w * x[k];
    sxx += w * x[k] * x[k];
  }
  CHECK(f.slope_error == doctest::Approx(std::sqrt(s / (s * sxx - sx * sx))));
  CHECK(f.intercept_error == doctest::Approx(std::sqrt(sxx / (s * sxx - sx * sx))));

  const std::vector<double> same{2, 2, 2};
  CHECK_THROWS_AS(linear_fit(same, same), std::invalid_argument);
}

TEST_CASE("power series fit on exact data") {
  std::vector<PowerSeriesPoint> pts;
  for (double p : {1e-3, 2e-3, 4e-3, 8e-3}) pts.push_back({p, rates_for(p, 0.0412, 0.0377, 10.0)});
  const auto f = power_series_fit(pts);
  CHECK(f.brightness.slope == doctest::Approx(1e6 * 0.0412 * 0.0377));
  CHECK(f.klyshko_signal.intercept == doctest::Approx(0.0412));
  CHECK(f.klyshko_idler.intercept == doctest::Approx(0.0377));
  // Noise-free pairs: CAR = R_t / pairs, log-log slope exactly -1.
  CHECK(f.log_car.slope == doctest::Approx(-1.0));

  PowerSeriesOptions opts;
  opts.klyshko_min_power_w = 2e-3;
  CHECK(power_series_fit(pts, opts).klyshko_points == 3);
  pts.pop_back();
  pts.pop_back();
  CHECK_THROWS_AS(power_series_fit(pts), std::invalid_argument);
}

TEST_CASE("fringe fit recovers the model exactly") {
  for (auto w : {FitWeighting::Unweighted, FitWeighting::Poisson}) {
    const auto f = fit_fringe(model_scan(12, 500.0, 0.902, 0.4), w);
    CHECK(f.visibility.value == doctest::Approx(0.902).epsilon(1e-9));
    CHECK(f.phase_offset.value == doctest::Approx(0.4).epsilon(1e-9));
    CHECK(f.amplitude.value == doctest::Approx(500.0).epsilon(1e-9));
    CHECK_FALSE(f.visibility_clamped);
  }
  // Counts are converted to rates before fitting.
  const auto slow = fit_fringe(model_scan(12, 500.0, 0.5, -2.0, 4.0));
  CHECK(slow.amplitude.value == doctest::Approx(500.0));
  CHECK(slow.phase_offset.value == doctest::Approx(-2.0));
}

TEST_CASE("flat scan gives zero visibility") {
  const auto f = fit_fringe(model_scan(8, 300.0, 0.0, 0.0));
  CHECK(f.visibility.value < 1e-12);
}

TEST_CASE("visibility is held at one when data overshoot") {
  FringeScan s = model_scan(12, 100.0, 1.0, 0.0);
  for (auto& p : s.points) p.counts = std::max(0.0, p.counts - 5.0);
  const auto f = fit_fringe(s);
  CHECK(f.visibility_clamped);
  CHECK(f.visibility.value == 1.0);
  CHECK(std::abs(f.phase_offset.value) < 1e-6);
  for (const auto& p : s.points) CHECK(f.model(p.phase_rad) >= 0.0);
}

TEST_CASE("scan preconditions") {
  CHECK_THROWS_AS(fit_fringe(model_scan(3, 100.0, 0.5, 0.0)), std::invalid_argument);
  FringeScan half;
  for (int k = 0; k < 8; ++k) half.points.push_back({kPi * k / 8, 100.0, 1.0});
  CHECK_THROWS_AS(fit_fringe(half), std::invalid_argument);
  FringeScan repeated;
  for (int k = 0; k < 8; ++k) repeated.points.push_back({k % 2 * kPi, 100.0, 1.0});
  CHECK_THROWS_AS(fit_fringe(repeated), std::invalid_argument);
  // Six equally spaced phases over [0, 5pi/3] cover the period.
  CHECK_NOTHROW(model_scan(6, 100.0, 0.5, 0.0).validate());
}

TEST_CASE("fitted errors cover the truth") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int v_ok = 0, phase_ok = 0, amp_ok = 0, all_ok = 0;
  const int trials = 1000;
  for (int t = 0; t < trials; ++t) {
    const double v = 0.2 + 0.7 * u(rng), phi = (2.0 * u(rng) - 1.0) * 3.0, a = 200.0 + 800.0 * u(rng);
    FringeScan s = model_scan(12, a, v, phi);
    for (auto& p : s.points) p.counts = static_cast<double>(std::poisson_distribution<long>(p.counts)(rng));
    const auto f = fit_fringe(s, FitWeighting::Poisson);
    const bool ok_v = std::abs(f.visibility.value - v) <= 3 * f.visibility.error;
    const bool ok_p = std::abs(phase_distance(f.phase_offset.value, phi)) <= 3 * f.phase_offset.error;
    const bool ok_a = std::abs(f.amplitude.value - a) <= 3 * f.amplitude.error;
    v_ok += ok_v;
    phase_ok += ok_p;
    amp_ok += ok_a;
    all_ok += ok_v && ok_p && ok_a;
  }
  CHECK(v_ok >= 990);
  CHECK(phase_ok >= 990);
  CHECK(amp_ok >= 990);
  CHECK(all_ok >= 990);
}

TEST_CASE("fringe fit JSON") {
  const auto j = to_json(fit_fringe(model_scan(12, 500.0, 0.902, 0.4)));
  CHECK(j.at("visibility").at("value").get<double>() == doctest::Approx(0.902));
  CHECK(j.at("points").get<int>() == 12);
}
