#pragma once

// Least-squares fits on analyzed runs: straight lines for power series and
// the sinusoidal two-photon fringe A * (1 - V cos(phase + offset)).

#include <span>
#include <vector>

#include <json.hpp>

#include "tbent/coincidence.hpp"

namespace tbent {

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_error = 0.0;
  double intercept_error = 0.0;
  double covariance = 0.0;  // cov(slope, intercept)
  double rss = 0.0;
  std::size_t points = 0;
};

/// y = slope * x + intercept. With `sigma` (per-point standard errors) the
/// fit is weighted and errors come from the known variances; otherwise they
/// are scaled by the residual variance. Throws std::invalid_argument for
/// fewer than two distinct abscissae.
LinearFit linear_fit(std::span<const double> x, std::span<const double> y, std::span<const double> sigma = {});

struct PowerSeriesPoint {
  double power_w = 0.0;
  RateReport rates;
};

struct PowerSeriesOptions {
  /// Points below this power are left out of the Klyshko intercept fits
  /// (background-dominated regime).
  double klyshko_min_power_w = 0.0;
  bool weighted = false;
};

struct PowerSeriesFit {
  LinearFit brightness;        // coincidence rate [1/s] vs pump power [W]
  LinearFit klyshko_signal;    // vs pump power; intercept is the collection efficiency
  LinearFit klyshko_idler;
  LinearFit log_car;           // ln CAR vs ln power
  std::size_t klyshko_points = 0;
};

/// Needs at least three distinct powers.
PowerSeriesFit power_series_fit(std::span<const PowerSeriesPoint> points, const PowerSeriesOptions& opts = {});

nlohmann::json to_json(const LinearFit& f);
nlohmann::json to_json(const PowerSeriesFit& f);

struct FringePoint {
  double phase_rad = 0.0;
  double counts = 0.0;
  double integration_s = 1.0;
};

struct FringeScan {
  std::vector<FringePoint> points;

  /// At least five distinct phases whose sampling covers a full period:
  /// range * n / (n - 1) >= 2 pi. Throws std::invalid_argument otherwise.
  void validate() const;
};

enum class FitWeighting { Unweighted, Poisson };

struct FringeFit {
  Measured visibility;
  Measured phase_offset;  // radians, in (-pi, pi]
  Measured amplitude;     // counts per second
  double rss = 0.0;
  bool visibility_clamped = false;
  std::size_t points = 0;

  /// Model rate at a phase.
  double model(double phase_rad) const;
};

/// Fits rate(phase) = A * (1 - V cos(phase + phi0)) with V restricted to [0, 1].
FringeFit fit_fringe(const FringeScan& scan, FitWeighting weighting = FitWeighting::Unweighted);

nlohmann::json to_json(const FringeFit& f);

}  // namespace tbent
