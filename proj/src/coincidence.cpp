#include "tbent/coincidence.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "tbent/errors.hpp"

namespace tbent {

namespace {

constexpr double kPsPerSecond = 1e12;

int channel_index(Channel c) { return c == Channel::Signal ? 0 : 1; }

SlotMatrix zero_matrix(std::size_t n) { return SlotMatrix(n, std::vector<std::uint64_t>(n, 0)); }

void add_into(std::vector<std::uint64_t>& dst, const std::vector<std::uint64_t>& src) {
  if (dst.size() != src.size()) throw std::invalid_argument("cannot merge histograms of different shape");
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

void GateConfig::validate() const {
  if (!(gate_width_s > 0.0)) throw ConfigError("gate_width_s: must be positive");
  if (!(period_s > 0.0)) throw ConfigError("period_s: must be positive");
  if (!(histogram_bin_s > 0.0)) throw ConfigError("histogram_bin_s: must be positive");
  if (neighbor_periods < 0) throw ConfigError("neighbor_periods: must be non-negative");
  if (signal_offsets_s.empty() || signal_offsets_s.size() != idler_offsets_s.size())
    throw ConfigError("gates: signal and idler need the same, non-zero number of gates");
  for (const auto* offsets : {&signal_offsets_s, &idler_offsets_s}) {
    std::vector<double> sorted = *offsets;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t k = 0; k < sorted.size(); ++k) {
      if (sorted[k] - 0.5 * gate_width_s < 0.0 || sorted[k] + 0.5 * gate_width_s > period_s)
        throw ConfigError("gates: every gate must lie within one pulse period");
      if (k > 0 && sorted[k] - sorted[k - 1] < gate_width_s) throw ConfigError("gates: gates overlap");
    }
  }
}

GateConfig GateConfig::for_experiment(const ExperimentConfig& c) {
  GateConfig g;
  g.gate_width_s = c.gate_width_s;
  g.bin_delay_s = c.bin_delay_s;
  g.period_s = c.period_s();
  const int slots = c.mode == SourceMode::TimeBin ? 3 : 1;
  for (int s = 0; s < slots; ++s) {
    g.signal_offsets_s.push_back(c.signal_offset_s + s * c.bin_delay_s);
    g.idler_offsets_s.push_back(c.idler_offset_s + s * c.bin_delay_s);
  }
  return g;
}

nlohmann::json to_json(const GateConfig& g) {
  return {{"gate_width_s", g.gate_width_s},       {"signal_offsets_s", g.signal_offsets_s},
          {"idler_offsets_s", g.idler_offsets_s}, {"bin_delay_s", g.bin_delay_s},
          {"period_s", g.period_s},               {"histogram_bin_s", g.histogram_bin_s},
          {"neighbor_periods", g.neighbor_periods}};
}

GateConfig gates_from_json(const nlohmann::json& j) {
  GateConfig g;
  g.gate_width_s = j.at("gate_width_s").get<double>();
  g.signal_offsets_s = j.at("signal_offsets_s").get<std::vector<double>>();
  g.idler_offsets_s = j.at("idler_offsets_s").get<std::vector<double>>();
  g.bin_delay_s = j.at("bin_delay_s").get<double>();
  g.period_s = j.at("period_s").get<double>();
  g.histogram_bin_s = j.value("histogram_bin_s", g.histogram_bin_s);
  g.neighbor_periods = j.value("neighbor_periods", g.neighbor_periods);
  return g;
}

CoincidenceHistogram::CoincidenceHistogram(int neighbor_periods, int slots)
    : periods_(neighbor_periods), slots_(slots),
      counts_(static_cast<std::size_t>((2 * neighbor_periods + 1) * (2 * slots - 1)), 0) {}

std::size_t CoincidenceHistogram::index(int pulse_offset, int slot_delay) const {
  if (std::abs(pulse_offset) > periods_ || std::abs(slot_delay) > max_delay())
    throw std::out_of_range("coincidence histogram index out of range");
  return static_cast<std::size_t>((pulse_offset + periods_) * (2 * slots_ - 1) + slot_delay + max_delay());
}

std::uint64_t CoincidenceHistogram::at(int pulse_offset, int slot_delay) const {
  return counts_[index(pulse_offset, slot_delay)];
}

void CoincidenceHistogram::add(int pulse_offset, int slot_delay, std::uint64_t n) {
  counts_[index(pulse_offset, slot_delay)] += n;
}

std::uint64_t CoincidenceHistogram::total() const {
  std::uint64_t t = 0;
  for (auto c : counts_) t += c;
  return t;
}

CoincidenceHistogram& CoincidenceHistogram::operator+=(const CoincidenceHistogram& other) {
  if (periods_ != other.periods_ || slots_ != other.slots_)
    throw std::invalid_argument("cannot merge coincidence histograms of different shape");
  add_into(counts_, other.counts_);
  return *this;
}

std::uint64_t AnalysisCounts::gated_total(int channel) const {
  std::uint64_t t = 0;
  for (auto c : gated.at(channel)) t += c;
  return t;
}

std::uint64_t AnalysisCounts::same_pulse_coincidences() const {
  std::uint64_t t = 0;
  for (const auto& row : joint)
    for (auto c : row) t += c;
  return t;
}

AnalysisCounts& AnalysisCounts::operator+=(const AnalysisCounts& o) {
  triggers += o.triggers;
  dropped_before_first_trigger += o.dropped_before_first_trigger;
  beyond_period += o.beyond_period;
  for (int c = 0; c < 2; ++c) {
    raw[c] += o.raw[c];
    add_into(gated[c], o.gated[c]);
    add_into(trigger_histogram[c], o.trigger_histogram[c]);
  }
  if (joint.size() != o.joint.size()) throw std::invalid_argument("cannot merge counts with different gate layouts");
  for (std::size_t r = 0; r < joint.size(); ++r) {
    add_into(joint[r], o.joint[r]);
    add_into(neighbor_joint[r], o.neighbor_joint[r]);
  }
  histogram += o.histogram;
  return *this;
}

CoincidenceEngine::CoincidenceEngine(GateConfig gates) : gates_(std::move(gates)) {
  gates_.validate();
  const std::size_t n = gates_.slots();
  const auto hist_bins = static_cast<std::size_t>(std::ceil(gates_.period_s / gates_.histogram_bin_s));
  hist_bin_ps_ = gates_.histogram_bin_s * kPsPerSecond;
  for (int c = 0; c < 2; ++c) {
    counts_.gated[c].assign(n, 0);
    counts_.trigger_histogram[c].assign(hist_bins, 0);
    const auto& offsets = c == 0 ? gates_.signal_offsets_s : gates_.idler_offsets_s;
    for (double o : offsets)
      gate_ps_[c].emplace_back((o - 0.5 * gates_.gate_width_s) * kPsPerSecond,
                               (o + 0.5 * gates_.gate_width_s) * kPsPerSecond);
  }
  counts_.joint = zero_matrix(n);
  counts_.neighbor_joint = zero_matrix(n);
  counts_.histogram = CoincidenceHistogram(gates_.neighbor_periods, static_cast<int>(n));
}

int CoincidenceEngine::gate_of(int channel, std::uint64_t dt_ps) const {
  const double t = static_cast<double>(dt_ps);
  const auto& g = gate_ps_[channel];
  for (std::size_t k = 0; k < g.size(); ++k)
    if (t >= g[k].first && t < g[k].second) return static_cast<int>(k);
  return -1;
}

void CoincidenceEngine::consume(std::span<const TimeTag> batch) {
  if (finished_) throw std::logic_error("CoincidenceEngine::consume after finish");
  const double period_ps = gates_.period_s * kPsPerSecond;
  for (const TimeTag& tag : batch) {
    if (tag.timestamp_ps < last_time_)
      throw DataError("stream is not time-sorted at record " + std::to_string(records_));
    last_time_ = tag.timestamp_ps;
    ++records_;
    switch (tag.channel) {
      case Channel::Trigger:
        if (have_trigger_) {
          close_pulse();
          ++current_.pulse;
        }
        have_trigger_ = true;
        trigger_time_ = tag.timestamp_ps;
        ++counts_.triggers;
        break;
      case Channel::Signal:
      case Channel::Idler: {
        const int ch = channel_index(tag.channel);
        ++counts_.raw[ch];
        if (!have_trigger_) {
          ++counts_.dropped_before_first_trigger;
          break;
        }
        const std::uint64_t dt = tag.timestamp_ps - trigger_time_;
        if (static_cast<double>(dt) >= period_ps) {
          ++counts_.beyond_period;
          break;
        }
        auto& hist = counts_.trigger_histogram[ch];
        const auto bin = std::min(hist.size() - 1, static_cast<std::size_t>(static_cast<double>(dt) / hist_bin_ps_));
        ++hist[bin];
        const int gate = gate_of(ch, dt);
        if (gate >= 0) {
          ++counts_.gated[ch][gate];
          (ch == 0 ? current_.signal : current_.idler).push_back(gate);
        }
        break;
      }
      default:
        throw DataError("unknown channel code " + std::to_string(static_cast<int>(tag.channel)) + " at record " +
                        std::to_string(records_ - 1));
    }
  }
}

void CoincidenceEngine::close_pulse() {
  if (current_.signal.empty() && current_.idler.empty()) return;
  for (int s : current_.signal)
    for (int i : current_.idler) {
      ++counts_.joint[s][i];
      counts_.histogram.add(0, i - s);
    }
  const auto horizon = static_cast<std::uint64_t>(gates_.neighbor_periods);
  while (!recent_.empty() && recent_.front().pulse + horizon < current_.pulse) recent_.pop_front();
  for (const PulseEvents& prev : recent_) {
    const int m = static_cast<int>(current_.pulse - prev.pulse);
    for (int s : prev.signal)
      for (int i : current_.idler) {
        ++counts_.neighbor_joint[s][i];
        counts_.histogram.add(m, i - s);
      }
    for (int s : current_.signal)
      for (int i : prev.idler) {
        ++counts_.neighbor_joint[s][i];
        counts_.histogram.add(-m, i - s);
      }
  }
  if (horizon > 0) recent_.push_back(current_);
  current_.signal.clear();
  current_.idler.clear();
}

const AnalysisCounts& CoincidenceEngine::finish() {
  if (!finished_) {
    if (!have_trigger_) throw DataError("stream contains no trigger records");
    close_pulse();
    finished_ = true;
  }
  return counts_;
}

AnalysisCounts analyze_stream(std::span<const TimeTag> stream, const GateConfig& gates) {
  CoincidenceEngine engine(gates);
  engine.consume(stream);
  return engine.finish();
}

RateReport rate_report(const AnalysisCounts& counts, const GateConfig& gates, double duration_s) {
  RateReport r;
  r.duration_s = duration_s > 0.0 ? duration_s : static_cast<double>(counts.triggers) * gates.period_s;
  if (!(r.duration_s > 0.0)) throw DataError("cannot form rates over a zero duration");
  const double d = r.duration_s;
  auto rate = [d](std::uint64_t n) {
    return Measured{static_cast<double>(n) / d, std::sqrt(static_cast<double>(n)) / d};
  };
  r.signal_counts = counts.gated_total(0);
  r.idler_counts = counts.gated_total(1);
  r.coincidence_counts = counts.same_pulse_coincidences();
  const std::size_t mid = counts.joint.size() / 2;
  r.central_counts = counts.joint.empty() ? 0 : counts.joint[mid][mid];
  r.trigger_counts = counts.triggers;
  r.singles_signal = rate(r.signal_counts);
  r.singles_idler = rate(r.idler_counts);
  r.coincidence = rate(r.coincidence_counts);
  r.central = rate(r.central_counts);
  r.trigger_rate = static_cast<double>(counts.triggers) / d;
  return r;
}

nlohmann::json to_json(const RateReport& r) {
  auto m = [](const Measured& x) { return nlohmann::json{{"value", x.value}, {"error", x.error}}; };
  return {{"singles_signal_hz", m(r.singles_signal)},
          {"singles_idler_hz", m(r.singles_idler)},
          {"coincidence_hz", m(r.coincidence)},
          {"central_coincidence_hz", m(r.central)},
          {"trigger_hz", r.trigger_rate},
          {"duration_s", r.duration_s},
          {"counts",
           {{"signal", r.signal_counts},
            {"idler", r.idler_counts},
            {"coincidence", r.coincidence_counts},
            {"central", r.central_counts},
            {"trigger", r.trigger_counts}}}};
}

RateReport rate_report_from_json(const nlohmann::json& j) {
  auto m = [](const nlohmann::json& x) { return Measured{x.at("value").get<double>(), x.at("error").get<double>()}; };
  RateReport r;
  r.singles_signal = m(j.at("singles_signal_hz"));
  r.singles_idler = m(j.at("singles_idler_hz"));
  r.coincidence = m(j.at("coincidence_hz"));
  r.central = m(j.at("central_coincidence_hz"));
  r.trigger_rate = j.at("trigger_hz").get<double>();
  r.duration_s = j.at("duration_s").get<double>();
  const auto& c = j.at("counts");
  r.signal_counts = c.at("signal").get<std::uint64_t>();
  r.idler_counts = c.at("idler").get<std::uint64_t>();
  r.coincidence_counts = c.at("coincidence").get<std::uint64_t>();
  r.central_counts = c.at("central").get<std::uint64_t>();
  r.trigger_counts = c.at("trigger").get<std::uint64_t>();
  return r;
}

namespace {

// Counts behind a rate; falls back to rate*duration for hand-built reports.
double counts_of(const Measured& m, std::uint64_t n, double duration) {
  if (n > 0) return static_cast<double>(n);
  return m.value * duration;
}

}  // namespace

Measured car(const RateReport& r) {
  const double rs = r.singles_signal.value;
  const double ri = r.singles_idler.value;
  const double rc = r.coincidence.value;
  const double rt = r.trigger_rate;
  if (!(rs > 0.0) || !(ri > 0.0) || !(rt > 0.0))
    throw std::invalid_argument("CAR undefined: singles and trigger rates must be positive");
  if (!(rc > 0.0)) throw std::invalid_argument("CAR undefined: no coincidences");
  const double value = rc * rt / (rs * ri);
  double rel2 = 0.0;
  if (r.duration_s > 0.0) {
    const double d = r.duration_s;
    rel2 = 1.0 / counts_of(r.coincidence, r.coincidence_counts, d) +
           1.0 / counts_of(r.singles_signal, r.signal_counts, d) + 1.0 / counts_of(r.singles_idler, r.idler_counts, d) +
           (r.trigger_counts > 0 ? 1.0 / static_cast<double>(r.trigger_counts) : 1.0 / (rt * d));
  } else {
    auto rel = [](const Measured& m) { return m.value > 0.0 ? m.error / m.value : 0.0; };
    rel2 = std::pow(rel(r.coincidence), 2) + std::pow(rel(r.singles_signal), 2) + std::pow(rel(r.singles_idler), 2);
  }
  return {value, value * std::sqrt(rel2)};
}

KlyshkoEfficiencies klyshko(const RateReport& r) {
  if (!(r.singles_signal.value > 0.0) || !(r.singles_idler.value > 0.0))
    throw std::invalid_argument("Klyshko efficiency undefined: singles rates must be positive");
  auto ratio = [&](const Measured& partner, std::uint64_t partner_n) {
    const double value = r.coincidence.value / partner.value;
    double rel2 = 0.0;
    if (r.duration_s > 0.0 && r.coincidence.value > 0.0) {
      const double d = r.duration_s;
      rel2 = 1.0 / counts_of(r.coincidence, r.coincidence_counts, d) + 1.0 / counts_of(partner, partner_n, d);
    }
    return Measured{value, value * std::sqrt(rel2)};
  };
  return {ratio(r.singles_idler, r.idler_counts), ratio(r.singles_signal, r.signal_counts)};
}

double max_visibility_from_car(double car_value) {
  if (std::isnan(car_value) || car_value < 1.0) throw std::invalid_argument("CAR must be at least 1");
  if (std::isinf(car_value)) return 1.0;
  return (car_value - 1.0) / (car_value + 1.0);
}

}  // namespace tbent
