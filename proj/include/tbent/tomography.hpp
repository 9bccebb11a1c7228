#pragma once

// Two-qubit time-bin state tomography: mapping of five-peak coincidence data
// onto 16 projective counts, linear inversion, maximum-likelihood
// reconstruction and Poisson-resampling error bars.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tbent/coincidence.hpp"
#include "tbent/quantum.hpp"

namespace tbent {

struct MeasurementEntry {
  Basis signal = Basis::Z0;
  Basis idler = Basis::Z0;
  std::uint64_t count = 0;
  double integration_s = 0.0;
};

/// Counts for the 16 (signal, idler) basis combinations.
struct MeasurementRecord {
  std::vector<MeasurementEntry> entries;
  std::string provenance;
  /// Per phase setting: total coincidences outside the central-central cell.
  std::vector<double> setting_normalizations;

  /// Throws std::invalid_argument unless every combination appears exactly once.
  void validate() const;
  std::uint64_t count(Basis signal, Basis idler) const;
  std::uint64_t total() const;
  /// Exchanges the roles of signal and idler.
  MeasurementRecord swapped() const;
};

nlohmann::json to_json(const MeasurementRecord& r);
MeasurementRecord record_from_json(const nlohmann::json& j);

/// Counts that a state would produce on average: round(scale * tr(rho M_k)).
MeasurementRecord expected_record(const DensityMatrix2Q& rho, double scale);

/// Coincidence matrix (signal gate x idler gate, 3x3) recorded at one pair
/// of analysis phases. Phases are the calibrated tomography labels: 0 -> |+X>,
/// pi/2 -> |+Y>.
struct PhaseSettingCounts {
  double theta_signal = 0.0;
  double theta_idler = 0.0;
  SlotMatrix joint;
  double integration_s = 0.0;
};

/// Interferometer phases that realize tomography labels (theta_s, theta_i).
/// The signal phase carries a pi offset so that (0, 0) sits on the fringe
/// maximum of a |Phi+>-like state.
std::pair<double, double> interferometer_phases(double theta_signal, double theta_idler);

/// Slot 0 projects onto |0>, slot 2 onto |1>, the central slot onto
/// (|0> + e^{i theta}|1>)/sqrt(2). Each basis pair is accumulated over every
/// setting that realizes it; with the per-photon slot weights 1/4, 1/2, 1/4
/// this gives all 16 entries the same effective normalization. Needs the
/// four settings (0,0), (0,pi/2), (pi/2,0), (pi/2,pi/2) exactly once each.
MeasurementRecord counts_from_phase_settings(std::span<const PhaseSettingCounts> settings);

/// Unconstrained solution of tr(rho M_k) = n_k / N with unit trace; falls
/// back to I/4 when the system cannot be solved.
Matrix4c linear_inversion(const MeasurementRecord& record);

/// Nearest physical state by clamping negative eigenvalues and renormalizing.
DensityMatrix2Q project_to_physical(const Matrix4c& m);

struct MleOptions {
  int max_iterations = 5000;
  double loglik_tolerance = 1e-9;   // per-count log-likelihood change per iteration
  double gradient_tolerance = 1e-6;  // norm of the per-count gradient
  /// Normalization group per record entry (record order); empty shares one N.
  std::vector<int> normalization_groups;
  bool keep_trajectory = false;
};

struct MleDiagnostics {
  int iterations = 0;
  bool converged = false;
  double gradient_norm = 0.0;
  /// Per-count log-likelihood after each accepted iteration (when requested).
  std::vector<double> trajectory;
};

struct Stat {
  double mean = 0.0;
  double stddev = 0.0;
};

struct BootstrapSummary {
  Stat concurrence;
  Stat fidelity;
  Stat chsh_lower;
  Stat chsh_upper;
  int requested = 0;
  int used = 0;
  int dropped = 0;
  bool too_many_dropped = false;  // more than 10% of replicas failed to converge
  bool low_precision = false;     // fewer than 10 usable replicas
};

struct TomographyResult {
  DensityMatrix2Q rho = DensityMatrix2Q::maximally_mixed();
  double log_likelihood = 0.0;  // Poisson, with the profiled normalization
  double concurrence = 0.0;
  double fidelity = 0.0;  // to |Phi+>
  ChshBounds chsh;
  MleDiagnostics diagnostics;
  bool has_errors = false;
  BootstrapSummary errors;
};

/// Maximizes sum_k n_k log(N p_k) - N p_k over rho = T^dag T / tr(T^dag T)
/// with T lower triangular. Non-convergence is reported in diagnostics.
TomographyResult mle_reconstruct(const MeasurementRecord& record, const MleOptions& opts = {});

struct BootstrapOptions {
  int replicas = 200;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  MleOptions mle;
};

/// Resamples every count as Poisson(n_k) and reconstructs each replica.
BootstrapSummary bootstrap_errors(const MeasurementRecord& record, const BootstrapOptions& opts = {});

/// mle_reconstruct followed by bootstrap_errors.
TomographyResult reconstruct_with_errors(const MeasurementRecord& record, const BootstrapOptions& opts = {});

/// Total Poisson log-likelihood with one shared, profiled normalization.
double mle_log_likelihood(const MeasurementRecord& record, const DensityMatrix2Q& rho);

nlohmann::json to_json(const TomographyResult& r);

namespace detail {
/// The optimizer's objective, -log L / total counts, over the 16 parameters of
/// the lower-triangular T (diagonal first, then re/im of the strict lower
/// triangle row by row), with its analytic gradient when requested.
double mle_objective(const MeasurementRecord& record, const std::array<double, 16>& params,
                     std::array<double, 16>* gradient);
}  // namespace detail

}  // namespace tbent
