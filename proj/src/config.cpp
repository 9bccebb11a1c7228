#include "tbent/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>

#include "tbent/errors.hpp"

namespace tbent {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v))
    throw ConfigError(key + ": expected a finite number, got '" + text + "'");
  return v;
}

std::uint64_t to_u64(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError(key + ": expected a non-negative integer, got '" + text + "'");
  return v;
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "mode",           "rep_rate_hz",        "bin_delay_s",        "mean_pairs_per_pulse",
      "pairs_per_pulse_per_watt", "pump_power_w", "eta_signal",     "eta_idler",
      "dark_rate_signal_hz", "dark_rate_idler_hz", "phi_p_rad",      "phi_s_rad",
      "phi_i_rad",      "visibility",         "duration_s",         "rng_seed",
      "jitter_sigma_s", "signal_offset_s",    "idler_offset_s",     "gate_width_s"};
  return keys;
}

}  // namespace

KeyValues parse_key_values(std::istream& in, const std::string& source) {
  KeyValues kv;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source + ":" + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError(source + ":" + std::to_string(line_no) + ": expected 'key = value'");
    if (!kv.emplace(key, value).second)
      throw ConfigError(key + ": given twice (" + source + ":" + std::to_string(line_no) + ")");
  }
  return kv;
}

ExperimentConfig experiment_config_from(const KeyValues& kv) {
  for (const auto& [key, value] : kv)
    if (!known_keys().count(key)) throw ConfigError(key + ": unknown configuration key");

  auto require = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw ConfigError(std::string(key) + ": missing required field");
    return it->second;
  };
  auto optional = [&](const char* key, double& dst) {
    if (auto it = kv.find(key); it != kv.end()) dst = to_double(key, it->second);
  };

  ExperimentConfig c;
  if (auto it = kv.find("mode"); it != kv.end()) c.mode = parse_mode(it->second);
  c.rep_rate_hz = to_double("rep_rate_hz", require("rep_rate_hz"));
  c.duration_s = to_double("duration_s", require("duration_s"));
  c.eta_signal = to_double("eta_signal", require("eta_signal"));
  c.eta_idler = to_double("eta_idler", require("eta_idler"));
  optional("pump_power_w", c.pump_power_w);
  if (kv.count("mean_pairs_per_pulse")) {
    c.mean_pairs_per_pulse = to_double("mean_pairs_per_pulse", kv.at("mean_pairs_per_pulse"));
  } else if (kv.count("pairs_per_pulse_per_watt")) {
    const double k = to_double("pairs_per_pulse_per_watt", kv.at("pairs_per_pulse_per_watt"));
    c.pump_power_w = to_double("pump_power_w", require("pump_power_w"));
    c.mean_pairs_per_pulse = k * c.pump_power_w;
  } else {
    throw ConfigError("mean_pairs_per_pulse: missing required field (or give pairs_per_pulse_per_watt and pump_power_w)");
  }
  optional("bin_delay_s", c.bin_delay_s);
  optional("dark_rate_signal_hz", c.dark_rate_signal_hz);
  optional("dark_rate_idler_hz", c.dark_rate_idler_hz);
  optional("phi_p_rad", c.phi_p);
  optional("phi_s_rad", c.phi_s);
  optional("phi_i_rad", c.phi_i);
  optional("visibility", c.visibility);
  optional("jitter_sigma_s", c.jitter_sigma_s);
  optional("signal_offset_s", c.signal_offset_s);
  optional("idler_offset_s", c.idler_offset_s);
  optional("gate_width_s", c.gate_width_s);
  if (auto it = kv.find("rng_seed"); it != kv.end()) c.rng_seed = to_u64("rng_seed", it->second);
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return experiment_config_from(parse_key_values(in, path));
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

}  // namespace tbent
