#include <doctest.h>

#include <random>

#include "tbent/coincidence.hpp"
#include "tbent/errors.hpp"
#include "tbent/simulator.hpp"

using namespace tbent;

namespace {

// Period 10 ns, three gates 1 ns wide at 2, 5, 8 ns.
GateConfig toy_gates() {
  GateConfig g;
  g.gate_width_s = 1e-9;
  g.signal_offsets_s = {2e-9, 5e-9, 8e-9};
  g.idler_offsets_s = {2e-9, 5e-9, 8e-9};
  g.bin_delay_s = 3e-9;
  g.period_s = 10e-9;
  g.histogram_bin_s = 100e-12;
  g.neighbor_periods = 2;
  return g;
}

TimeTag trig(std::uint64_t k) { return {Channel::Trigger, k * 10000}; }
TimeTag sig(std::uint64_t k, std::uint64_t dt) { return {Channel::Signal, k * 10000 + dt}; }
TimeTag idl(std::uint64_t k, std::uint64_t dt) { return {Channel::Idler, k * 10000 + dt}; }

bool same(const AnalysisCounts& a, const AnalysisCounts& b) { return a == b; }

}  // namespace

TEST_CASE("hand-built stream") {
  const std::vector<TimeTag> stream{
      {Channel::Signal, 0},   // before the first trigger
      trig(1),
      sig(1, 2100),           // gate 0
      idl(1, 2200),           // gate 0
      idl(1, 5000),           // gate 1
      trig(2),
      sig(2, 3500),           // between gates
      trig(3),
      sig(3, 8000),           // gate 2
      trig(4),
      idl(4, 4900),           // gate 1
      trig(5),
      trig(6),
      idl(6, 7600),           // gate 2
      {Channel::Idler, 6 * 10000 + 12000},  // past the period with no trigger
  };
  const auto c = analyze_stream(stream, toy_gates());
  CHECK(c.triggers == 6);
  CHECK(c.raw[0] == 4);
  CHECK(c.raw[1] == 5);
  CHECK(c.dropped_before_first_trigger == 1);
  CHECK(c.beyond_period == 1);
  CHECK(c.gated[0] == std::vector<std::uint64_t>{1, 0, 1});
  CHECK(c.gated[1] == std::vector<std::uint64_t>{1, 2, 1});
  CHECK(c.joint[0][0] == 1);
  CHECK(c.joint[0][1] == 1);
  CHECK(c.same_pulse_coincidences() == 2);
  // Neighbors: signal gate 0 in pulse 1 with idler gate 1 in pulse 4 is 3 pulses
  // away (outside), signal gate 2 in pulse 3 with idler gate 1 in pulse 4 (m=+1)
  // and idler gates 0/1 in pulse 1 (m=-2).
  CHECK(c.histogram.at(1, -1) == 1);
  CHECK(c.histogram.at(-2, -2) == 1);
  CHECK(c.histogram.at(-2, -1) == 1);
  CHECK(c.histogram.at(0, 0) == 1);
  CHECK(c.histogram.at(0, 1) == 1);
  CHECK(c.neighbor_joint[2][1] == 2);
  CHECK(c.neighbor_joint[2][0] == 1);
  CHECK(c.histogram.total() == 5);
  // 100 ps bins: 2100 ps -> bin 21.
  CHECK(c.trigger_histogram[0][21] == 1);
  CHECK(c.trigger_histogram[0][35] == 1);
}

TEST_CASE("malformed streams") {
  CHECK_THROWS_AS(analyze_stream(std::vector<TimeTag>{trig(2), trig(1)}, toy_gates()), DataError);
  CHECK_THROWS_AS(analyze_stream(std::vector<TimeTag>{sig(0, 5)}, toy_gates()), DataError);
  CHECK_THROWS_AS(analyze_stream(std::vector<TimeTag>{}, toy_gates()), DataError);

  auto g = toy_gates();
  g.signal_offsets_s = {2e-9, 2.5e-9, 8e-9};
  CHECK_THROWS_AS(CoincidenceEngine{g}, ConfigError);
  g = toy_gates();
  g.idler_offsets_s.pop_back();
  CHECK_THROWS_AS(CoincidenceEngine{g}, ConfigError);
}

TEST_CASE("streaming chunk equivalence") {
  ExperimentConfig c;
  c.mode = SourceMode::TimeBin;
  c.mean_pairs_per_pulse = 0.05;
  c.eta_signal = c.eta_idler = 0.6;
  c.dark_rate_signal_hz = c.dark_rate_idler_hz = 1e5;
  c.duration_s = 0.002;
  c.rng_seed = 9;
  const auto stream = simulate_to_vector(c);
  const auto gates = GateConfig::for_experiment(c);
  const auto whole = analyze_stream(stream, gates);

  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 5; ++trial) {
    CoincidenceEngine engine(gates);
    std::size_t pos = 0;
    while (pos < stream.size()) {
      const std::size_t n = std::min<std::size_t>(stream.size() - pos, 1 + rng() % 5000);
      engine.consume(std::span(stream).subspan(pos, n));
      pos += n;
    }
    CHECK(same(engine.finish(), whole));
  }
  // One record at a time.
  CoincidenceEngine single(gates);
  for (const auto& t : stream) single.consume(std::span(&t, 1));
  CHECK(same(single.finish(), whole));

  // Counts are additive.
  AnalysisCounts twice = whole;
  twice += whole;
  CHECK(twice.triggers == 2 * whole.triggers);
  CHECK(twice.histogram.total() == 2 * whole.histogram.total());
}

TEST_CASE("dark counts only give CAR near one") {
  ExperimentConfig c;
  c.mode = SourceMode::SingleBin;
  c.mean_pairs_per_pulse = 0.0;
  c.dark_rate_signal_hz = c.dark_rate_idler_hz = 4e7;
  c.duration_s = 0.05;
  c.rng_seed = 4;
  const auto gates = GateConfig::for_experiment(c);
  const auto counts = analyze_stream(simulate_to_vector(c), gates);
  const auto r = car(rate_report(counts, gates));
  CHECK(r.value == doctest::Approx(1.0).epsilon(5 * r.error));
  CHECK(r.error < 0.05);
}

TEST_CASE("estimators on quoted rates") {
  RateReport r;
  r.singles_signal = {1210.0, 0.0};
  r.singles_idler = {1090.0, 0.0};
  r.coincidence = {46.0, 0.0};
  r.trigger_rate = 76.2e6;
  CHECK(car(r).value == doctest::Approx(46.0 * 76.2e6 / (1210.0 * 1090.0)));
  const auto k = klyshko(r);
  CHECK(k.signal.value == doctest::Approx(46.0 / 1090.0));
  CHECK(k.idler.value == doctest::Approx(46.0 / 1210.0));

  r.duration_s = 100.0;
  const auto e = car(r);
  const double rel = std::sqrt(1 / 4600.0 + 1 / 121000.0 + 1 / 109000.0 + 1 / 7.62e9);
  CHECK(e.error == doctest::Approx(e.value * rel));

  CHECK(max_visibility_from_car(1.0) == 0.0);
  CHECK(max_visibility_from_car(3.0) == doctest::Approx(0.5));
  CHECK(max_visibility_from_car(INFINITY) == 1.0);
  CHECK_THROWS_AS(max_visibility_from_car(0.5), std::invalid_argument);

  RateReport empty = r;
  empty.coincidence = {0.0, 0.0};
  CHECK_THROWS_AS(car(empty), std::invalid_argument);
}

TEST_CASE("rate report and gates JSON round trip") {
  AnalysisCounts counts;
  counts.triggers = 1000;
  counts.gated[0] = {10, 20, 12};
  counts.gated[1] = {9, 21, 11};
  counts.joint = {{1, 2, 0}, {3, 4, 5}, {0, 6, 7}};
  const auto gates = toy_gates();
  const auto r = rate_report(counts, gates);
  CHECK(r.duration_s == doctest::Approx(1e-5));
  CHECK(r.central_counts == 4);
  CHECK(r.coincidence_counts == 28);
  const auto back = rate_report_from_json(nlohmann::json::parse(to_json(r).dump()));
  CHECK(to_json(back) == to_json(r));
  CHECK(to_json(gates_from_json(to_json(gates))) == to_json(gates));
}
