#include "tbent/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <random>
#include <string>

#include "tbent/errors.hpp"

namespace tbent {

std::string_view channel_name(Channel c) {
  switch (c) {
    case Channel::Trigger: return "trigger";
    case Channel::Signal: return "signal";
    case Channel::Idler: return "idler";
  }
  return "?";
}

std::string_view mode_name(SourceMode m) { return m == SourceMode::SingleBin ? "single-bin" : "time-bin"; }

SourceMode parse_mode(std::string_view s) {
  if (s == "single-bin") return SourceMode::SingleBin;
  if (s == "time-bin") return SourceMode::TimeBin;
  throw ConfigError("mode: expected 'single-bin' or 'time-bin', got '" + std::string(s) + "'");
}

std::uint64_t ExperimentConfig::pulse_count() const {
  return static_cast<std::uint64_t>(std::llround(duration_s * rep_rate_hz));
}

namespace {

void require(bool ok, const char* field, const std::string& what) {
  if (!ok) throw ConfigError(std::string(field) + ": " + what);
}

void require_finite_nonneg(double v, const char* field) {
  require(std::isfinite(v), field, "must be finite");
  require(v >= 0.0, field, "must be non-negative");
}

void require_unit(double v, const char* field) {
  require_finite_nonneg(v, field);
  require(v <= 1.0, field, "must not exceed 1");
}

}  // namespace

void ExperimentConfig::validate() const {
  require(std::isfinite(rep_rate_hz) && rep_rate_hz > 0.0, "rep_rate_hz", "must be positive");
  require_finite_nonneg(bin_delay_s, "bin_delay_s");
  require(mode == SourceMode::SingleBin || bin_delay_s > 0.0, "bin_delay_s", "must be positive in time-bin mode");
  require_finite_nonneg(mean_pairs_per_pulse, "mean_pairs_per_pulse");
  require_finite_nonneg(pump_power_w, "pump_power_w");
  require_unit(eta_signal, "eta_signal");
  require_unit(eta_idler, "eta_idler");
  require_finite_nonneg(dark_rate_signal_hz, "dark_rate_signal_hz");
  require_finite_nonneg(dark_rate_idler_hz, "dark_rate_idler_hz");
  require(std::isfinite(phi_p), "phi_p_rad", "must be finite");
  require(std::isfinite(phi_s), "phi_s_rad", "must be finite");
  require(std::isfinite(phi_i), "phi_i_rad", "must be finite");
  require_unit(visibility, "visibility");
  require_finite_nonneg(duration_s, "duration_s");
  require_finite_nonneg(jitter_sigma_s, "jitter_sigma_s");
  require(std::isfinite(gate_width_s) && gate_width_s > 0.0, "gate_width_s", "must be positive");
  require_finite_nonneg(signal_offset_s, "signal_offset_s");
  require_finite_nonneg(idler_offset_s, "idler_offset_s");
  require(signal_offset_s >= 0.5 * gate_width_s, "signal_offset_s", "must leave room for half a gate after the trigger");
  require(idler_offset_s >= 0.5 * gate_width_s, "idler_offset_s", "must leave room for half a gate after the trigger");

  const double period = period_s();
  require(2.0 * bin_delay_s + gate_width_s < period, "bin_delay_s",
          "2*bin_delay + gate width must be shorter than the pulse period");
  const double span = std::max(signal_offset_s, idler_offset_s) + 2.0 * bin_delay_s + 0.5 * gate_width_s;
  require(span < period, "signal_offset_s", "latest slot gate extends past the next pulse");
  if (mode == SourceMode::TimeBin)
    require(bin_delay_s > gate_width_s, "bin_delay_s", "slots must be separated by more than the gate width");
}

nlohmann::json to_json(const ExperimentConfig& c) {
  return {
      {"mode", mode_name(c.mode)},
      {"rep_rate_hz", c.rep_rate_hz},
      {"bin_delay_s", c.bin_delay_s},
      {"mean_pairs_per_pulse", c.mean_pairs_per_pulse},
      {"pump_power_w", c.pump_power_w},
      {"eta_signal", c.eta_signal},
      {"eta_idler", c.eta_idler},
      {"dark_rate_signal_hz", c.dark_rate_signal_hz},
      {"dark_rate_idler_hz", c.dark_rate_idler_hz},
      {"phi_p_rad", c.phi_p},
      {"phi_s_rad", c.phi_s},
      {"phi_i_rad", c.phi_i},
      {"visibility", c.visibility},
      {"duration_s", c.duration_s},
      {"rng_seed", c.rng_seed},
      {"jitter_sigma_s", c.jitter_sigma_s},
      {"signal_offset_s", c.signal_offset_s},
      {"idler_offset_s", c.idler_offset_s},
      {"gate_width_s", c.gate_width_s},
  };
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  if (!j.is_object()) throw ConfigError("config echo must be a JSON object");
  auto num = [&](const char* key, double& dst) {
    if (j.contains(key)) dst = j.at(key).get<double>();
  };
  if (j.contains("mode")) c.mode = parse_mode(j.at("mode").get<std::string>());
  num("rep_rate_hz", c.rep_rate_hz);
  num("bin_delay_s", c.bin_delay_s);
  num("mean_pairs_per_pulse", c.mean_pairs_per_pulse);
  num("pump_power_w", c.pump_power_w);
  num("eta_signal", c.eta_signal);
  num("eta_idler", c.eta_idler);
  num("dark_rate_signal_hz", c.dark_rate_signal_hz);
  num("dark_rate_idler_hz", c.dark_rate_idler_hz);
  num("phi_p_rad", c.phi_p);
  num("phi_s_rad", c.phi_s);
  num("phi_i_rad", c.phi_i);
  num("visibility", c.visibility);
  num("duration_s", c.duration_s);
  if (j.contains("rng_seed")) c.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  num("jitter_sigma_s", c.jitter_sigma_s);
  num("signal_offset_s", c.signal_offset_s);
  num("idler_offset_s", c.idler_offset_s);
  num("gate_width_s", c.gate_width_s);
  return c;
}

double JointSlotDistribution::joint_mass() const {
  double m = 0.0;
  for (const auto& row : joint)
    for (double x : row) m += x;
  return m;
}

JointSlotDistribution joint_slot_distribution(double phi_p, double phi_s, double phi_i, double v0) {
  // Early pump feeds slots {0,1}, late pump {1,2}; each path combination
  // carries 1/2 (pump bin) * 1/4 (analysis paths) * 1/4 (monitored ports).
  // Central-central adds the two indistinguishable amplitudes coherently.
  JointSlotDistribution d;
  const double satellite = 1.0 / 32.0;
  d.joint = {{{satellite, satellite, 0.0}, {satellite, 0.0, satellite}, {0.0, satellite, satellite}}};
  d.joint[1][1] = (1.0 - v0 * std::cos(phi_s + phi_i - phi_p)) / 16.0;
  d.marginal = {1.0 / 8.0, 1.0 / 4.0, 1.0 / 8.0};
  return d;
}

namespace {

constexpr double kPsPerSecond = 1e12;
constexpr int kLostPort = 3;

struct Plan {
  SourceMode mode;
  std::uint64_t pulses;
  std::uint64_t block_pulses;
  double period_ps;
  double mu;
  double eta_s;
  double eta_i;
  double dark_s_per_ps;
  double dark_i_per_ps;
  double offset_s_ps;
  double offset_i_ps;
  double bin_delay_ps;
  double jitter_ps;
  std::uint64_t seed;
  // Cumulative probabilities over the 4x4 (signal, idler) outcomes where
  // index 3 means the photon left through an unmonitored port.
  std::array<double, 16> outcome_cdf{};
};

Plan make_plan(const ExperimentConfig& c, SourceMode mode, const SimulationOptions& opts) {
  c.validate();
  if (opts.block_pulses == 0) throw ConfigError("block_pulses: must be positive");
  Plan p{};
  p.mode = mode;
  p.pulses = c.pulse_count();
  p.block_pulses = opts.block_pulses;
  p.period_ps = kPsPerSecond / c.rep_rate_hz;
  p.mu = c.mean_pairs_per_pulse;
  p.eta_s = c.eta_signal;
  p.eta_i = c.eta_idler;
  p.dark_s_per_ps = c.dark_rate_signal_hz / kPsPerSecond;
  p.dark_i_per_ps = c.dark_rate_idler_hz / kPsPerSecond;
  p.offset_s_ps = c.signal_offset_s * kPsPerSecond;
  p.offset_i_ps = c.idler_offset_s * kPsPerSecond;
  p.bin_delay_ps = c.bin_delay_s * kPsPerSecond;
  p.jitter_ps = c.jitter_sigma_s * kPsPerSecond;
  p.seed = c.rng_seed;

  const JointSlotDistribution d = joint_slot_distribution(c.phi_p, c.phi_s, c.phi_i, c.visibility);
  std::array<std::array<double, 4>, 4> cell{};
  for (int s = 0; s < 3; ++s)
    for (int i = 0; i < 3; ++i) cell[s][i] = d.joint[s][i];
  // One photon monitored, partner lost: marginal minus the jointly monitored part.
  for (int s = 0; s < 3; ++s) {
    cell[s][kLostPort] = std::max(0.0, d.marginal[s] - (d.joint[s][0] + d.joint[s][1] + d.joint[s][2]));
    cell[kLostPort][s] = std::max(0.0, d.marginal[s] - (d.joint[0][s] + d.joint[1][s] + d.joint[2][s]));
  }
  double used = 0.0;
  for (int s = 0; s < 4; ++s)
    for (int i = 0; i < 4; ++i)
      if (s != kLostPort || i != kLostPort) used += cell[s][i];
  cell[kLostPort][kLostPort] = std::max(0.0, 1.0 - used);
  double acc = 0.0;
  for (int k = 0; k < 16; ++k) {
    acc += cell[k / 4][k % 4];
    p.outcome_cdf[k] = acc;
  }
  for (double& x : p.outcome_cdf) x /= acc;
  return p;
}

class BlockGenerator {
public:
  BlockGenerator(const Plan& plan, std::uint64_t block)
      : plan_(plan),
        first_(block * plan.block_pulses),
        last_(std::min(plan.pulses, first_ + plan.block_pulses)) {
    std::seed_seq seq{static_cast<std::uint32_t>(plan.seed), static_cast<std::uint32_t>(plan.seed >> 32),
                      static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32)};
    rng_.seed(seq);
  }

  void run(std::vector<TimeTag>& out) {
    out.clear();
    out.reserve(static_cast<std::size_t>(last_ - first_) + 64);
    if (first_ >= last_) return;

    next_pair_ = plan_.mu > 0.0 ? first_ + skip_to_nonzero_pulse() : last_;
    const double start = pulse_time(first_);
    next_dark_s_ = start + exponential(plan_.dark_s_per_ps);
    next_dark_i_ = start + exponential(plan_.dark_i_per_ps);

    for (std::uint64_t k = first_; k < last_; ++k) {
      const std::uint64_t tk = pulse_time(k);
      const std::uint64_t tnext = pulse_time(k + 1);
      out.push_back({Channel::Trigger, tk});
      local_.clear();
      if (k == next_pair_) {
        emit_pairs(tk, tnext);
        next_pair_ = k + 1 + skip_to_nonzero_pulse();
      }
      drain_darks(Channel::Signal, next_dark_s_, plan_.dark_s_per_ps, tnext);
      drain_darks(Channel::Idler, next_dark_i_, plan_.dark_i_per_ps, tnext);
      if (!local_.empty()) {
        std::sort(local_.begin(), local_.end(), [](const TimeTag& a, const TimeTag& b) {
          return a.timestamp_ps != b.timestamp_ps ? a.timestamp_ps < b.timestamp_ps : a.channel < b.channel;
        });
        out.insert(out.end(), local_.begin(), local_.end());
      }
    }
  }

private:
  std::uint64_t pulse_time(std::uint64_t k) const {
    return static_cast<std::uint64_t>(std::llround(static_cast<double>(k) * plan_.period_ps));
  }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }

  double exponential(double rate) {
    if (rate <= 0.0) return std::numeric_limits<double>::infinity();
    return -std::log1p(-uniform()) / rate;
  }

  // Pulses without pairs before the next one that has at least one.
  std::uint64_t skip_to_nonzero_pulse() {
    const double gap = std::floor(-std::log1p(-uniform()) / plan_.mu);
    if (gap >= static_cast<double>(plan_.pulses)) return plan_.pulses;
    return static_cast<std::uint64_t>(gap);
  }

  // Poisson(mu) conditioned on at least one pair.
  int pairs_in_nonzero_pulse() {
    const double mu = plan_.mu;
    const double u = uniform() * -std::expm1(-mu);
    double term = std::exp(-mu) * mu;
    double acc = term;
    int n = 1;
    while (acc < u && n < 1000) {
      ++n;
      term *= mu / n;
      acc += term;
    }
    return n;
  }

  int sample_outcome() {
    const double u = uniform();
    for (int k = 0; k < 15; ++k)
      if (u < plan_.outcome_cdf[k]) return k;
    return 15;
  }

  void emit_photon(Channel ch, double offset_ps, int slot, std::uint64_t tk, std::uint64_t tnext) {
    double t = static_cast<double>(tk) + offset_ps + slot * plan_.bin_delay_ps;
    if (plan_.jitter_ps > 0.0) t += jitter_(rng_) * plan_.jitter_ps;
    const double lo = static_cast<double>(tk);
    const double hi = static_cast<double>(tnext - 1);
    local_.push_back({ch, static_cast<std::uint64_t>(std::llround(std::clamp(t, lo, hi)))});
  }

  void emit_pairs(std::uint64_t tk, std::uint64_t tnext) {
    const int n = pairs_in_nonzero_pulse();
    for (int p = 0; p < n; ++p) {
      int slot_s = 0;
      int slot_i = 0;
      if (plan_.mode == SourceMode::TimeBin) {
        const int outcome = sample_outcome();
        slot_s = outcome / 4;
        slot_i = outcome % 4;
      }
      const bool s_ok = slot_s != kLostPort && uniform() < plan_.eta_s;
      const bool i_ok = slot_i != kLostPort && uniform() < plan_.eta_i;
      if (s_ok) emit_photon(Channel::Signal, plan_.offset_s_ps, slot_s, tk, tnext);
      if (i_ok) emit_photon(Channel::Idler, plan_.offset_i_ps, slot_i, tk, tnext);
    }
  }

  void drain_darks(Channel ch, double& next, double rate, std::uint64_t tnext) {
    while (next < static_cast<double>(tnext)) {
      local_.push_back({ch, static_cast<std::uint64_t>(std::floor(next))});
      next += exponential(rate);
    }
  }

  const Plan& plan_;
  std::uint64_t first_;
  std::uint64_t last_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> jitter_{0.0, 1.0};
  std::uint64_t next_pair_ = 0;
  double next_dark_s_ = 0.0;
  double next_dark_i_ = 0.0;
  std::vector<TimeTag> local_;
};

void run_plan(const Plan& plan, const TagSink& sink, unsigned threads) {
  const std::uint64_t blocks = (plan.pulses + plan.block_pulses - 1) / plan.block_pulses;
  threads = std::max(1u, threads);
  std::vector<std::vector<TimeTag>> buffers(threads);
  for (std::uint64_t b0 = 0; b0 < blocks; b0 += threads) {
    const std::uint64_t wave = std::min<std::uint64_t>(threads, blocks - b0);
    if (wave == 1) {
      BlockGenerator(plan, b0).run(buffers[0]);
    } else {
      std::vector<std::future<void>> jobs;
      for (std::uint64_t w = 0; w < wave; ++w)
        jobs.push_back(std::async(std::launch::async, [&, w] { BlockGenerator(plan, b0 + w).run(buffers[w]); }));
      for (auto& j : jobs) j.get();
    }
    for (std::uint64_t w = 0; w < wave; ++w) sink(buffers[w]);
  }
}

}  // namespace

void simulate(const ExperimentConfig& config, const TagSink& sink, const SimulationOptions& opts) {
  run_plan(make_plan(config, SourceMode::TimeBin, opts), sink, opts.threads);
}

void simulate_no_pump_interferometer(const ExperimentConfig& config, const TagSink& sink,
                                     const SimulationOptions& opts) {
  run_plan(make_plan(config, SourceMode::SingleBin, opts), sink, opts.threads);
}

void simulate_run(const ExperimentConfig& config, const TagSink& sink, const SimulationOptions& opts) {
  if (config.mode == SourceMode::SingleBin)
    simulate_no_pump_interferometer(config, sink, opts);
  else
    simulate(config, sink, opts);
}

std::vector<TimeTag> simulate_to_vector(const ExperimentConfig& config, const SimulationOptions& opts) {
  std::vector<TimeTag> all;
  simulate_run(config, [&](std::span<const TimeTag> batch) { all.insert(all.end(), batch.begin(), batch.end()); },
               opts);
  return all;
}

}  // namespace tbent
