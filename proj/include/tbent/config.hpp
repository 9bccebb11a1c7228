#pragma once

// Run configuration files: one `key = value` per line, `#` starts a comment,
// units are spelled out in the key (rep_rate_hz, duration_s, ...).

#include <iosfwd>
#include <map>
#include <string>

#include "tbent/simulator.hpp"

namespace tbent {

using KeyValues = std::map<std::string, std::string>;

/// Throws ConfigError (with line number) on malformed lines or repeated keys.
KeyValues parse_key_values(std::istream& in, const std::string& source = "config");

/// Builds and validates an ExperimentConfig. Required: rep_rate_hz,
/// duration_s, eta_signal, eta_idler and either mean_pairs_per_pulse or
/// pairs_per_pulse_per_watt together with pump_power_w.
ExperimentConfig experiment_config_from(const KeyValues& kv);

ExperimentConfig load_experiment_config(const std::string& path);

/// Shortest round-trip decimal form, independent of the C locale.
std::string format_double(double v);

}  // namespace tbent
