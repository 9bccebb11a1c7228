#pragma once

// Monte-Carlo forward model of a pulsed photon-pair source, optionally with a
// pump interferometer and two analysis interferometers (time-bin mode).

#include <array>
#include <cstdint>
#include <vector>

#include <json.hpp>

#include "tbent/timetag.hpp"

namespace tbent {

enum class SourceMode { SingleBin, TimeBin };

std::string_view mode_name(SourceMode m);
/// Accepts "single-bin" and "time-bin"; throws ConfigError otherwise.
SourceMode parse_mode(std::string_view s);

/// Source, interferometer, detector and noise parameters of one run (SI units).
struct ExperimentConfig {
  SourceMode mode = SourceMode::TimeBin;
  double rep_rate_hz = 76.2e6;
  double bin_delay_s = 3e-9;
  double mean_pairs_per_pulse = 0.0;
  double pump_power_w = 0.0;
  double eta_signal = 1.0;
  double eta_idler = 1.0;
  double dark_rate_signal_hz = 0.0;
  double dark_rate_idler_hz = 0.0;
  double phi_p = 0.0;
  double phi_s = 0.0;
  double phi_i = 0.0;
  double visibility = 1.0;
  double duration_s = 0.0;
  std::uint64_t rng_seed = 0;
  double jitter_sigma_s = 50e-12;
  // Arrival of the earliest slot after the trigger.
  double signal_offset_s = 2e-9;
  double idler_offset_s = 2e-9;
  double gate_width_s = 0.5e-9;

  double period_s() const { return 1.0 / rep_rate_hz; }
  std::uint64_t pulse_count() const;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& c);
/// Reads the echo written by to_json(); missing keys keep their defaults.
ExperimentConfig config_from_json(const nlohmann::json& j);

/// Probabilities of a pair's (signal slot, idler slot) outcome, slots
/// {0: early/short, 1: central, 2: late/long}. The joint table only covers
/// both photons leaving through the monitored ports, so its mass is below 1.
struct JointSlotDistribution {
  std::array<std::array<double, 3>, 3> joint{};
  /// Per-photon probability of each monitored slot (no single-photon interference).
  std::array<double, 3> marginal{};

  double joint_mass() const;
};

JointSlotDistribution joint_slot_distribution(double phi_p, double phi_s, double phi_i, double v0);

struct SimulationOptions {
  /// Pulses per RNG partition. Output depends on this, never on `threads`.
  std::uint64_t block_pulses = 1u << 18;
  unsigned threads = 1;
};

/// Time-bin run: pump interferometer plus analysis interferometers.
void simulate(const ExperimentConfig& config, const TagSink& sink, const SimulationOptions& opts = {});

/// Single-bin run: one pair slot per pulse, no interferometers.
void simulate_no_pump_interferometer(const ExperimentConfig& config, const TagSink& sink,
                                     const SimulationOptions& opts = {});

/// Dispatches on config.mode.
void simulate_run(const ExperimentConfig& config, const TagSink& sink, const SimulationOptions& opts = {});

std::vector<TimeTag> simulate_to_vector(const ExperimentConfig& config, const SimulationOptions& opts = {});

}  // namespace tbent
