#include "tbent/fit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>

#include <Eigen/Dense>

namespace tbent {

LinearFit linear_fit(std::span<const double> x, std::span<const double> y, std::span<const double> sigma) {
  if (x.size() != y.size()) throw std::invalid_argument("linear_fit: x and y differ in length");
  if (!sigma.empty() && sigma.size() != x.size()) throw std::invalid_argument("linear_fit: sigma length mismatch");
  const std::set<double> distinct(x.begin(), x.end());
  if (distinct.size() < 2) throw std::invalid_argument("linear_fit: need at least two distinct abscissae");

  const bool weighted = !sigma.empty();
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    double w = 1.0;
    if (weighted) {
      if (!(sigma[k] > 0.0)) throw std::invalid_argument("linear_fit: sigma must be positive");
      w = 1.0 / (sigma[k] * sigma[k]);
    }
    sw += w;
    sx += w * x[k];
    sy += w * y[k];
    sxx += w * x[k] * x[k];
    sxy += w * x[k] * y[k];
  }
  const double det = sw * sxx - sx * sx;
  if (!(det > 0.0)) throw std::invalid_argument("linear_fit: degenerate abscissae");

  LinearFit f;
  f.points = x.size();
  f.slope = (sw * sxy - sx * sy) / det;
  f.intercept = (sxx * sy - sx * sxy) / det;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double r = y[k] - (f.slope * x[k] + f.intercept);
    f.rss += weighted ? r * r / (sigma[k] * sigma[k]) : r * r;
  }
  double scale = 1.0;
  if (!weighted) scale = x.size() > 2 ? f.rss / static_cast<double>(x.size() - 2) : 0.0;
  f.slope_error = std::sqrt(scale * sw / det);
  f.intercept_error = std::sqrt(scale * sxx / det);
  f.covariance = -scale * sx / det;
  return f;
}

PowerSeriesFit power_series_fit(std::span<const PowerSeriesPoint> points, const PowerSeriesOptions& opts) {
  std::set<double> powers;
  for (const auto& p : points) powers.insert(p.power_w);
  if (powers.size() < 3) throw std::invalid_argument("power_series_fit: need at least three distinct powers");

  PowerSeriesFit out;
  std::vector<double> p, rc, rc_err, logp, logcar, logcar_err;
  std::vector<double> kp, ks, ks_err, ki, ki_err;
  for (const auto& pt : points) {
    if (!(pt.power_w > 0.0)) throw std::invalid_argument("power_series_fit: powers must be positive");
    p.push_back(pt.power_w);
    rc.push_back(pt.rates.coincidence.value);
    rc_err.push_back(std::max(pt.rates.coincidence.error, 1e-300));
    const Measured c = car(pt.rates);
    logp.push_back(std::log(pt.power_w));
    logcar.push_back(std::log(c.value));
    logcar_err.push_back(std::max(c.error / c.value, 1e-300));
    if (pt.power_w >= opts.klyshko_min_power_w) {
      const KlyshkoEfficiencies k = klyshko(pt.rates);
      kp.push_back(pt.power_w);
      ks.push_back(k.signal.value);
      ks_err.push_back(std::max(k.signal.error, 1e-300));
      ki.push_back(k.idler.value);
      ki_err.push_back(std::max(k.idler.error, 1e-300));
    }
  }
  auto sig = [&](const std::vector<double>& e) { return opts.weighted ? std::span<const double>(e) : std::span<const double>(); };
  out.brightness = linear_fit(p, rc, sig(rc_err));
  out.log_car = linear_fit(logp, logcar, sig(logcar_err));
  out.klyshko_signal = linear_fit(kp, ks, sig(ks_err));
  out.klyshko_idler = linear_fit(kp, ki, sig(ki_err));
  out.klyshko_points = kp.size();
  return out;
}

nlohmann::json to_json(const LinearFit& f) {
  return {{"slope", f.slope},         {"slope_error", f.slope_error}, {"intercept", f.intercept},
          {"intercept_error", f.intercept_error}, {"covariance", f.covariance}, {"rss", f.rss},
          {"points", f.points}};
}

nlohmann::json to_json(const PowerSeriesFit& f) {
  return {{"brightness_hz_per_w", to_json(f.brightness)},
          {"klyshko_signal_vs_power", to_json(f.klyshko_signal)},
          {"klyshko_idler_vs_power", to_json(f.klyshko_idler)},
          {"log_car_vs_log_power", to_json(f.log_car)},
          {"klyshko_points", f.klyshko_points}};
}

void FringeScan::validate() const {
  std::set<double> phases;
  for (const auto& p : points) {
    if (!std::isfinite(p.phase_rad) || !std::isfinite(p.counts) || p.counts < 0.0)
      throw std::invalid_argument("fringe scan: phases and counts must be finite, counts non-negative");
    if (!(p.integration_s > 0.0)) throw std::invalid_argument("fringe scan: integration time must be positive");
    phases.insert(p.phase_rad);
  }
  if (phases.size() < 5) throw std::invalid_argument("fringe scan: need at least 5 distinct phases");
  const double n = static_cast<double>(phases.size());
  const double range = *phases.rbegin() - *phases.begin();
  if (range * n / (n - 1.0) < 2.0 * std::numbers::pi * (1.0 - 1e-9))
    throw std::invalid_argument("fringe scan: phases do not cover a full period");
}

double FringeFit::model(double phase) const {
  return amplitude.value * (1.0 - visibility.value * std::cos(phase + phase_offset.value));
}

namespace {

using Eigen::Matrix3d;
using Eigen::Vector3d;

struct HarmonicSolution {
  Vector3d coef;  // a + b cos + c sin
  Matrix3d normal_inverse;
  double rss = 0.0;
};

HarmonicSolution solve_harmonic(const std::vector<double>& phase, const std::vector<double>& y,
                                const std::vector<double>& w) {
  Matrix3d ata = Matrix3d::Zero();
  Vector3d aty = Vector3d::Zero();
  for (std::size_t k = 0; k < phase.size(); ++k) {
    const Vector3d row(1.0, std::cos(phase[k]), std::sin(phase[k]));
    ata += w[k] * row * row.transpose();
    aty += w[k] * row * y[k];
  }
  HarmonicSolution s;
  s.normal_inverse = ata.inverse();
  s.coef = s.normal_inverse * aty;
  for (std::size_t k = 0; k < phase.size(); ++k) {
    const double r = y[k] - (s.coef(0) + s.coef(1) * std::cos(phase[k]) + s.coef(2) * std::sin(phase[k]));
    s.rss += w[k] * r * r;
  }
  return s;
}

// Best A for a fixed phi0 at V = 1, and its weighted residual.
std::pair<double, double> unit_visibility_fit(double phi0, const std::vector<double>& phase,
                                              const std::vector<double>& y, const std::vector<double>& w) {
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < phase.size(); ++k) {
    const double g = 1.0 - std::cos(phase[k] + phi0);
    num += w[k] * g * y[k];
    den += w[k] * g * g;
  }
  const double a = den > 0.0 ? num / den : 0.0;
  double rss = 0.0;
  for (std::size_t k = 0; k < phase.size(); ++k) {
    const double r = y[k] - a * (1.0 - std::cos(phase[k] + phi0));
    rss += w[k] * r * r;
  }
  return {a, rss};
}

double wrap_phase(double x) {
  const double two_pi = 2.0 * std::numbers::pi;
  x = std::fmod(x, two_pi);
  if (x <= -std::numbers::pi) x += two_pi;
  if (x > std::numbers::pi) x -= two_pi;
  return x;
}

}  // namespace

FringeFit fit_fringe(const FringeScan& scan, FitWeighting weighting) {
  scan.validate();
  const std::size_t n = scan.points.size();
  std::vector<double> phase(n), y(n), t(n), w(n, 1.0);
  for (std::size_t k = 0; k < n; ++k) {
    phase[k] = scan.points[k].phase_rad;
    t[k] = scan.points[k].integration_s;
    y[k] = scan.points[k].counts / t[k];
  }

  HarmonicSolution sol = solve_harmonic(phase, y, w);
  if (weighting == FitWeighting::Poisson) {
    // Iteratively reweighted: var(rate) = model / t.
    double floor_rate = 0.0;
    for (std::size_t k = 0; k < n; ++k) floor_rate = std::max(floor_rate, y[k]);
    floor_rate = std::max(floor_rate * 1e-6, 1e-12);
    for (int iter = 0; iter < 8; ++iter) {
      for (std::size_t k = 0; k < n; ++k) {
        const double m = sol.coef(0) + sol.coef(1) * std::cos(phase[k]) + sol.coef(2) * std::sin(phase[k]);
        w[k] = t[k] / std::max(m, floor_rate);
      }
      sol = solve_harmonic(phase, y, w);
    }
  }

  const double a = sol.coef(0);
  const double b = sol.coef(1);
  const double c = sol.coef(2);
  if (!(a > 0.0)) throw std::invalid_argument("fringe fit: mean rate must be positive");
  const double r = std::hypot(b, c);

  Matrix3d cov = sol.normal_inverse;
  if (weighting == FitWeighting::Unweighted)
    cov *= n > 3 ? sol.rss / static_cast<double>(n - 3) : 0.0;

  FringeFit f;
  f.points = n;
  f.rss = sol.rss;
  f.amplitude = {a, std::sqrt(std::max(0.0, cov(0, 0)))};
  if (r > 0.0) {
    const Vector3d dv(-r / (a * a), b / (r * a), c / (r * a));
    const Vector3d dphi(0.0, c / (r * r), -b / (r * r));
    f.visibility = {r / a, std::sqrt(std::max(0.0, dv.dot(cov * dv)))};
    f.phase_offset = {std::atan2(c, -b), std::sqrt(std::max(0.0, dphi.dot(cov * dphi)))};
  } else {
    f.visibility = {0.0, std::sqrt(std::max(0.0, cov(1, 1) + cov(2, 2))) / a};
    f.phase_offset = {0.0, std::numbers::pi};
  }

  if (f.visibility.value > 1.0) {
    // Constrained optimum sits on V = 1: golden-section search on phi0.
    auto objective = [&](double phi0) { return unit_visibility_fit(phi0, phase, y, w).second; };
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double lo = f.phase_offset.value - std::numbers::pi / 2;
    double hi = f.phase_offset.value + std::numbers::pi / 2;
    double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
    double f1 = objective(x1), f2 = objective(x2);
    for (int iter = 0; iter < 200 && hi - lo > 1e-12; ++iter) {
      if (f1 < f2) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - g * (hi - lo);
        f1 = objective(x1);
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + g * (hi - lo);
        f2 = objective(x2);
      }
    }
    const double phi0 = 0.5 * (lo + hi);
    const auto [amp, rss] = unit_visibility_fit(phi0, phase, y, w);
    f.visibility.value = 1.0;
    f.phase_offset.value = phi0;
    f.amplitude.value = amp;
    f.rss = rss;
    f.visibility_clamped = true;
  }
  f.phase_offset.value = wrap_phase(f.phase_offset.value);
  return f;
}

nlohmann::json to_json(const FringeFit& f) {
  auto m = [](const Measured& x) { return nlohmann::json{{"value", x.value}, {"error", x.error}}; };
  return {{"visibility", m(f.visibility)}, {"phase_offset_rad", m(f.phase_offset)},
          {"amplitude_hz", m(f.amplitude)}, {"rss", f.rss},
          {"visibility_clamped", f.visibility_clamped}, {"points", f.points}};
}

}  // namespace tbent
