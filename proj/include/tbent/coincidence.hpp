#pragma once

// Single-pass analysis of a time-sorted tag stream: per-trigger singles
// histograms, gated singles, same-pulse and neighbor-pulse coincidences.

#include <array>
#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include <json.hpp>

#include "tbent/simulator.hpp"
#include "tbent/timetag.hpp"

namespace tbent {

/// Detection gates relative to the trigger. Signal and idler carry the same
/// number of gates, spaced by one slot (bin_delay_s).
struct GateConfig {
  double gate_width_s = 0.5e-9;
  std::vector<double> signal_offsets_s;
  std::vector<double> idler_offsets_s;
  double bin_delay_s = 3e-9;
  double period_s = 1.0 / 76.2e6;
  double histogram_bin_s = 10e-12;
  /// Pulse offsets paired for accidental diagnostics (1..neighbor_periods each side).
  int neighbor_periods = 2;

  std::size_t slots() const { return signal_offsets_s.size(); }
  void validate() const;

  /// One gate per slot at the configured arrival offsets.
  static GateConfig for_experiment(const ExperimentConfig& c);
};

nlohmann::json to_json(const GateConfig& g);
GateConfig gates_from_json(const nlohmann::json& j);

struct Measured {
  double value = 0.0;
  double error = 0.0;
};

/// Coincidence counts indexed by (pulse offset, slot delay). Pulse offset m
/// pairs a signal in pulse k with an idler in pulse k+m; slot delay is
/// idler gate minus signal gate.
class CoincidenceHistogram {
public:
  CoincidenceHistogram() = default;
  CoincidenceHistogram(int neighbor_periods, int slots);

  int neighbor_periods() const noexcept { return periods_; }
  int slots() const noexcept { return slots_; }
  int max_delay() const noexcept { return slots_ - 1; }

  std::uint64_t at(int pulse_offset, int slot_delay) const;
  void add(int pulse_offset, int slot_delay, std::uint64_t n = 1);
  std::uint64_t total() const;

  CoincidenceHistogram& operator+=(const CoincidenceHistogram& other);
  friend bool operator==(const CoincidenceHistogram&, const CoincidenceHistogram&) = default;

private:
  std::size_t index(int pulse_offset, int slot_delay) const;

  int periods_ = 0;
  int slots_ = 0;
  std::vector<std::uint64_t> counts_;
};

/// Square matrix of counts indexed by (signal gate, idler gate).
using SlotMatrix = std::vector<std::vector<std::uint64_t>>;

/// Everything the engine accumulates; counters are exactly additive.
struct AnalysisCounts {
  std::uint64_t triggers = 0;
  std::array<std::uint64_t, 2> raw{};  // signal, idler
  std::array<std::vector<std::uint64_t>, 2> gated;  // per gate
  std::uint64_t dropped_before_first_trigger = 0;
  std::uint64_t beyond_period = 0;
  std::array<std::vector<std::uint64_t>, 2> trigger_histogram;  // histogram_bin_s wide bins over one period
  SlotMatrix joint;           // same pulse
  SlotMatrix neighbor_joint;  // summed over all nonzero pulse offsets
  CoincidenceHistogram histogram;

  std::uint64_t gated_total(int channel) const;
  std::uint64_t same_pulse_coincidences() const;

  AnalysisCounts& operator+=(const AnalysisCounts& other);
  friend bool operator==(const AnalysisCounts&, const AnalysisCounts&) = default;
};

/// Fold over a time-sorted stream. Each detection belongs to the latest
/// preceding trigger; detections before the first trigger are dropped and
/// counted.
class CoincidenceEngine {
public:
  explicit CoincidenceEngine(GateConfig gates);

  /// Throws DataError if the stream goes backwards in time.
  void consume(std::span<const TimeTag> batch);
  /// Closes the last pulse. Throws DataError if no trigger was seen.
  const AnalysisCounts& finish();

  const GateConfig& gates() const noexcept { return gates_; }

private:
  struct PulseEvents {
    std::uint64_t pulse = 0;
    std::vector<int> signal;
    std::vector<int> idler;
  };

  void close_pulse();
  int gate_of(int channel, std::uint64_t dt_ps) const;

  GateConfig gates_;
  AnalysisCounts counts_;
  std::array<std::vector<std::pair<double, double>>, 2> gate_ps_;
  double hist_bin_ps_ = 10.0;
  std::uint64_t last_time_ = 0;
  std::uint64_t records_ = 0;
  bool have_trigger_ = false;
  bool finished_ = false;
  std::uint64_t trigger_time_ = 0;
  PulseEvents current_;
  std::deque<PulseEvents> recent_;
};

AnalysisCounts analyze_stream(std::span<const TimeTag> stream, const GateConfig& gates);

/// Rates over an explicit duration; errors are sqrt(counts)/duration.
struct RateReport {
  Measured singles_signal;
  Measured singles_idler;
  Measured coincidence;  // all same-pulse gated signal-idler pairs
  Measured central;      // same-pulse pairs in the central gate of both channels
  double trigger_rate = 0.0;
  double duration_s = 0.0;
  std::uint64_t signal_counts = 0;
  std::uint64_t idler_counts = 0;
  std::uint64_t coincidence_counts = 0;
  std::uint64_t central_counts = 0;
  std::uint64_t trigger_counts = 0;
};

/// Duration defaults to triggers * period.
RateReport rate_report(const AnalysisCounts& counts, const GateConfig& gates, double duration_s = -1.0);

nlohmann::json to_json(const RateReport& r);
RateReport rate_report_from_json(const nlohmann::json& j);

/// R_C * R_t / (R_s * R_i) with first-order Poisson error.
Measured car(const RateReport& rates);

struct KlyshkoEfficiencies {
  Measured signal;  // R_C / R_i
  Measured idler;   // R_C / R_s
};

KlyshkoEfficiencies klyshko(const RateReport& rates);

/// (CAR - 1) / (CAR + 1)
double max_visibility_from_car(double car_value);

}  // namespace tbent
