#include "tbent/cli.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "tbent/coincidence.hpp"
#include "tbent/config.hpp"
#include "tbent/errors.hpp"
#include "tbent/fit.hpp"
#include "tbent/manifest.hpp"
#include "tbent/simulator.hpp"
#include "tbent/timetag_io.hpp"
#include "tbent/tomography.hpp"

namespace tbent {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr int kReportFormatVersion = 1;

struct NotConverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out;
  std::string format = "json";
};

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); }
};

// run.json -> run<suffix>; other names keep their extension.
std::string sibling(const std::string& out, const std::string& suffix) {
  fs::path p(out);
  if (p.extension() == ".json") p.replace_extension();
  return p.string() + suffix;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write '" + path + "'");
  f << text;
  if (!f) throw DataError("write failed for '" + path + "'");
}

json read_json(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path + "'");
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw DataError(path + ": invalid JSON: " + e.what(), static_cast<std::int64_t>(e.byte));
  }
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

struct Row {
  double key;
  double count;
  double error;
};

std::string csv_table(const std::vector<Row>& rows) {
  std::string s = "slot_or_phase,count,error\n";
  for (const auto& r : rows) s += format_double(r.key) + "," + format_double(r.count) + "," + format_double(r.error) + "\n";
  return s;
}

json measured(const Measured& m) { return {{"value", m.value}, {"error", m.error}}; }

template <class F>
json or_null(F&& f) {
  try {
    return f();
  } catch (const std::invalid_argument&) {
    return nullptr;
  }
}

json slot_matrix_json(const SlotMatrix& m) { return m; }

json counts_json(const AnalysisCounts& c) {
  json hist = json::array();
  const auto& h = c.histogram;
  for (int m = -h.neighbor_periods(); m <= h.neighbor_periods(); ++m)
    for (int d = -h.max_delay(); d <= h.max_delay(); ++d)
      hist.push_back({{"pulse_offset", m}, {"slot_delay", d}, {"count", h.at(m, d)}});
  return {{"triggers", c.triggers},
          {"raw_signal", c.raw[0]},
          {"raw_idler", c.raw[1]},
          {"gated_signal", c.gated[0]},
          {"gated_idler", c.gated[1]},
          {"dropped_before_first_trigger", c.dropped_before_first_trigger},
          {"beyond_period", c.beyond_period},
          {"joint", slot_matrix_json(c.joint)},
          {"neighbor_joint", slot_matrix_json(c.neighbor_joint)},
          {"histogram", hist}};
}

void require_kind(const json& j, const std::string& kind, const std::string& path) {
  if (!j.is_object() || j.value("kind", "") != kind) throw DataError(path + ": not a '" + kind + "' report");
}

void emit(std::ostream& out, const Globals& g, const json& j, const std::string& csv) {
  if (g.format == "csv")
    out << csv;
  else
    out << dump(j);
}

unsigned default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string mode;
  unsigned threads = default_threads();
};

int cmd_simulate(const Globals& g, const SimulateArgs& a, std::ostream& out) {
  const Timer timer;
  if (g.config.empty()) throw ConfigError("--config: required for simulate");
  if (g.out.empty()) throw ConfigError("--out: required for simulate");
  ExperimentConfig cfg = load_experiment_config(g.config);
  if (g.seed) cfg.rng_seed = *g.seed;
  if (!a.mode.empty()) cfg.mode = parse_mode(a.mode);
  cfg.validate();

  const auto encoding = g.format == "csv" ? StreamEncoding::Csv : StreamEncoding::Binary;
  TimeTagWriter writer(g.out, encoding, to_json(cfg));
  simulate_run(cfg, [&](std::span<const TimeTag> batch) { writer.write(batch); }, {.threads = a.threads});
  writer.close();

  RunManifest m;
  m.command = "simulate";
  m.config = to_json(cfg);
  m.add_input(g.config);
  m.add_output(g.out);
  m.format_versions = {{"timetag_stream", kStreamFormatVersion}};
  m.seeds = {cfg.rng_seed};
  m.wall_clock_s = timer.seconds();
  write_manifest(m, g.out);

  if (g.format == "json")
    out << dump({{"output", g.out}, {"records", writer.records()}, {"pulses", cfg.pulse_count()}});
  return kExitOk;
}

// ----------------------------------------------------------------- analyze

struct AnalyzeArgs {
  std::string input;
  std::string gates;
  double duration_s = -1.0;
};

int cmd_analyze(const Globals& g, const AnalyzeArgs& a, std::ostream& out) {
  const Timer timer;
  if (g.out.empty()) throw ConfigError("--out: required for analyze");
  TimeTagReader reader(a.input);
  const json echo = reader.header().config;

  GateConfig gates;
  if (!a.gates.empty()) {
    try {
      gates = gates_from_json(read_json(a.gates));
    } catch (const json::exception& e) {
      throw ConfigError(std::string("--gates: ") + e.what());
    }
  } else if (!g.config.empty()) {
    gates = GateConfig::for_experiment(load_experiment_config(g.config));
  } else {
    if (!echo.is_object() || !echo.contains("rep_rate_hz"))
      throw ConfigError("--gates: stream header carries no configuration; give --gates or --config");
    gates = GateConfig::for_experiment(config_from_json(echo));
  }

  CoincidenceEngine engine(gates);
  std::vector<TimeTag> batch;
  while (reader.next(batch)) engine.consume(batch);
  const AnalysisCounts& counts = engine.finish();
  const RateReport rates = rate_report(counts, gates, a.duration_s);

  json report = {{"kind", "analysis"},
                 {"format_version", kReportFormatVersion},
                 {"input", a.input},
                 {"config", echo},
                 {"gates", to_json(gates)},
                 {"rates", to_json(rates)},
                 {"counts", counts_json(counts)}};
  report["car"] = or_null([&] { return measured(car(rates)); });
  report["max_visibility_from_car"] = or_null([&]() -> json {
    const double c = car(rates).value;
    if (c < 1.0) return nullptr;
    return max_visibility_from_car(c);
  });
  report["klyshko"] = or_null([&]() -> json {
    const auto k = klyshko(rates);
    return {{"signal", measured(k.signal)}, {"idler", measured(k.idler)}};
  });

  // Same-pulse coincidences against slot delay (five peaks for three slots).
  std::vector<Row> slots;
  const auto& h = counts.histogram;
  for (int d = -h.max_delay(); d <= h.max_delay(); ++d) {
    const double n = static_cast<double>(h.at(0, d));
    slots.push_back({static_cast<double>(d), n, std::sqrt(n)});
  }
  // All coincidences against pulse offset: central peak and accidental side peaks.
  std::vector<Row> pulses;
  for (int m = -h.neighbor_periods(); m <= h.neighbor_periods(); ++m) {
    std::uint64_t n = 0;
    for (int d = -h.max_delay(); d <= h.max_delay(); ++d) n += h.at(m, d);
    pulses.push_back({static_cast<double>(m), static_cast<double>(n), std::sqrt(static_cast<double>(n))});
  }
  std::array<std::vector<Row>, 2> singles;
  for (int ch = 0; ch < 2; ++ch)
    for (std::size_t b = 0; b < counts.trigger_histogram[ch].size(); ++b) {
      const double n = static_cast<double>(counts.trigger_histogram[ch][b]);
      singles[ch].push_back({static_cast<double>(b) * gates.histogram_bin_s, n, std::sqrt(n)});
    }

  const std::string slots_csv = csv_table(slots);
  const std::vector<std::pair<std::string, std::string>> tables = {
      {sibling(g.out, ".slots.csv"), slots_csv},
      {sibling(g.out, ".pulses.csv"), csv_table(pulses)},
      {sibling(g.out, ".singles_signal.csv"), csv_table(singles[0])},
      {sibling(g.out, ".singles_idler.csv"), csv_table(singles[1])},
  };
  write_text(g.out, dump(report));
  for (const auto& [path, text] : tables) write_text(path, text);

  RunManifest m;
  m.command = "analyze";
  m.config = {{"stream", echo}, {"gates", to_json(gates)}};
  m.add_input(a.input);
  m.add_output(g.out);
  for (const auto& t : tables) m.add_output(t.first);
  m.format_versions = {{"timetag_stream", reader.header().version}, {"report", kReportFormatVersion}};
  if (echo.is_object() && echo.contains("rng_seed")) m.seeds = {echo.at("rng_seed").get<std::uint64_t>()};
  m.wall_clock_s = timer.seconds();
  write_manifest(m, g.out);

  emit(out, g, report, slots_csv);
  return kExitOk;
}

// ------------------------------------------------------------------ fringe

struct FringeArgs {
  std::vector<std::string> runs;
  std::string scan;
  std::string weighting = "poisson";
};

// Rows of "phase_rad,counts[,integration_s]"; a non-numeric first line is a header.
FringeScan read_scan_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path + "'");
  FringeScan scan;
  std::string line;
  std::int64_t offset = 0;
  bool first = true;
  while (std::getline(f, line)) {
    const std::int64_t at = offset;
    offset += static_cast<std::int64_t>(line.size()) + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> cells;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        cells.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t", used) != std::string::npos) numeric = false;
      } catch (const std::exception&) {
        numeric = false;
      }
    }
    if (!numeric && first) {
      first = false;
      continue;
    }
    first = false;
    if (!numeric || cells.size() < 2 || cells.size() > 3) throw DataError(path + ": malformed scan row", at);
    scan.points.push_back({cells[0], cells[1], cells.size() == 3 ? cells[2] : 1.0});
  }
  return scan;
}

int cmd_fringe(const Globals& g, const FringeArgs& a, std::ostream& out) {
  const Timer timer;
  if (g.out.empty()) throw ConfigError("--out: required for fringe");
  if (a.runs.empty() == a.scan.empty()) throw ConfigError("fringe: give analyzed runs or --scan, not both");

  FringeScan scan;
  json sources = json::array();
  std::vector<std::string> inputs;
  if (!a.scan.empty()) {
    scan = read_scan_csv(a.scan);
    inputs.push_back(a.scan);
  } else {
    for (const auto& arg : a.runs) {
      // PATH or PATH@PHASE; without a phase the run's phi_s + phi_i is used.
      std::string path = arg;
      std::optional<double> phase;
      if (const auto at = arg.rfind('@'); at != std::string::npos) {
        path = arg.substr(0, at);
        try {
          phase = std::stod(arg.substr(at + 1));
        } catch (const std::exception&) {
          throw ConfigError("runs: cannot read phase in '" + arg + "'");
        }
      }
      const json r = read_json(path);
      require_kind(r, "analysis", path);
      const RateReport rates = rate_report_from_json(r.at("rates"));
      if (!phase) {
        const json& c = r.at("config");
        if (!c.contains("phi_s_rad") || !c.contains("phi_i_rad"))
          throw ConfigError("runs: '" + path + "' has no phase in its configuration; use PATH@PHASE");
        phase = c.at("phi_s_rad").get<double>() + c.at("phi_i_rad").get<double>();
      }
      scan.points.push_back({*phase, static_cast<double>(rates.central_counts), rates.duration_s});
      sources.push_back({{"path", path}, {"phase_rad", *phase}, {"config", r.at("config")}});
      inputs.push_back(path);
    }
  }

  FitWeighting w;
  if (a.weighting == "poisson")
    w = FitWeighting::Poisson;
  else if (a.weighting == "unweighted")
    w = FitWeighting::Unweighted;
  else
    throw ConfigError("--weighting: expected 'poisson' or 'unweighted'");
  const FringeFit fit = fit_fringe(scan, w);

  std::vector<Row> rows;
  json points = json::array();
  for (const auto& p : scan.points) {
    rows.push_back({p.phase_rad, p.counts, std::sqrt(p.counts)});
    points.push_back({{"phase_rad", p.phase_rad}, {"counts", p.counts}, {"integration_s", p.integration_s}});
  }
  const json report = {{"kind", "fringe"},
                       {"format_version", kReportFormatVersion},
                       {"weighting", a.weighting},
                       {"fit", to_json(fit)},
                       {"points", points},
                       {"runs", sources}};
  const std::string table = csv_table(rows);
  const std::string table_path = sibling(g.out, ".fringe.csv");
  write_text(g.out, dump(report));
  write_text(table_path, table);

  RunManifest m;
  m.command = "fringe";
  m.config = {{"weighting", a.weighting}};
  for (const auto& p : inputs) m.add_input(p);
  m.add_output(g.out);
  m.add_output(table_path);
  m.format_versions = {{"report", kReportFormatVersion}};
  m.wall_clock_s = timer.seconds();
  write_manifest(m, g.out);

  emit(out, g, report, table);
  return kExitOk;
}

// -------------------------------------------------------------------- tomo

struct TomoArgs {
  std::string xx, xy, yx, yy;
  int replicas = 200;
  int max_iterations = MleOptions{}.max_iterations;
  unsigned threads = default_threads();
};

SlotMatrix slot_matrix_from(const json& j) { return j.get<SlotMatrix>(); }

int cmd_tomo(const Globals& g, const TomoArgs& a, std::ostream& out) {
  const Timer timer;
  if (g.out.empty()) throw ConfigError("--out: required for tomo");
  const double half_pi = std::numbers::pi / 2;
  const std::array<std::tuple<std::string, const std::string*, double, double>, 4> settings{{
      {"--xx", &a.xx, 0.0, 0.0},
      {"--xy", &a.xy, 0.0, half_pi},
      {"--yx", &a.yx, half_pi, 0.0},
      {"--yy", &a.yy, half_pi, half_pi},
  }};
  for (const auto& [flag, path, ts, ti] : settings)
    if (path->empty()) throw ConfigError(flag + ": missing phase setting (theta_s=" + format_double(ts) + ", theta_i=" + format_double(ti) + ")");

  std::vector<PhaseSettingCounts> runs;
  json sources = json::array();
  for (const auto& [flag, path, ts, ti] : settings) {
    const json r = read_json(*path);
    require_kind(r, "analysis", *path);
    PhaseSettingCounts s;
    s.theta_signal = ts;
    s.theta_idler = ti;
    try {
      s.joint = slot_matrix_from(r.at("counts").at("joint"));
      s.integration_s = r.at("rates").at("duration_s").get<double>();
    } catch (const json::exception& e) {
      throw DataError(*path + ": " + e.what());
    }
    if (s.joint.size() != 3) throw DataError(*path + ": tomography needs three gates per channel");
    runs.push_back(std::move(s));
    sources.push_back({{"setting", flag.substr(2)}, {"path", *path}, {"config", r.at("config")}});
  }
  MeasurementRecord record = counts_from_phase_settings(runs);

  BootstrapOptions opts;
  opts.replicas = a.replicas;
  opts.seed = g.seed.value_or(0);
  opts.threads = a.threads;
  opts.mle.max_iterations = a.max_iterations;
  if (a.replicas != 0 && a.replicas < 2) throw ConfigError("--replicas: need 0 (no errors) or at least 2");
  const TomographyResult result = a.replicas == 0 ? mle_reconstruct(record, opts.mle) : reconstruct_with_errors(record, opts);

  json report = to_json(result);
  report["kind"] = "tomography";
  report["format_version"] = kReportFormatVersion;
  report["record"] = to_json(record);
  report["runs"] = sources;
  report["bootstrap_seed"] = opts.seed;

  std::string table = "row,col,real,imag\n";
  const char* labels[4] = {"00", "01", "10", "11"};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      const Complex z = result.rho.matrix()(i, j);
      table += std::string(labels[i]) + "," + labels[j] + "," + format_double(z.real()) + "," + format_double(z.imag()) + "\n";
    }
  const std::string table_path = sibling(g.out, ".rho.csv");
  write_text(g.out, dump(report));
  write_text(table_path, table);

  RunManifest m;
  m.command = "tomo";
  m.config = {{"replicas", a.replicas}, {"max_iterations", a.max_iterations}};
  for (const auto& [flag, path, ts, ti] : settings) m.add_input(*path);
  m.add_output(g.out);
  m.add_output(table_path);
  m.format_versions = {{"report", kReportFormatVersion}};
  m.seeds = {opts.seed};
  m.wall_clock_s = timer.seconds();
  write_manifest(m, g.out);

  emit(out, g, report, table);
  if (!result.diagnostics.converged)
    throw NotConverged("tomo: optimizer stopped after " + std::to_string(result.diagnostics.iterations) +
                       " iterations without converging");
  return kExitOk;
}

// ------------------------------------------------------------------ report

struct ReportArgs {
  std::vector<std::string> inputs;
  double klyshko_min_power_w = 0.0;
};

int cmd_report(const Globals& g, const ReportArgs& a, std::ostream& out) {
  const Timer timer;
  if (g.out.empty()) throw ConfigError("--out: required for report");
  json runs = json::array();
  std::string table = "input,quantity,value,error\n";
  auto row = [&](const std::string& path, const std::string& q, const json& v) {
    if (v.is_null()) return;
    if (v.is_object())
      table += path + "," + q + "," + format_double(v.at("value").get<double>()) + "," +
               format_double(v.at("error").get<double>()) + "\n";
    else
      table += path + "," + q + "," + format_double(v.get<double>()) + ",\n";
  };
  std::vector<PowerSeriesPoint> series;
  for (const auto& path : a.inputs) {
    const json r = read_json(path);
    const std::string kind = r.is_object() ? r.value("kind", "") : "";
    json entry = {{"path", path}, {"kind", kind}};
    if (kind == "analysis") {
      entry["car"] = r.at("car");
      entry["klyshko"] = r.at("klyshko");
      entry["max_visibility_from_car"] = r.at("max_visibility_from_car");
      entry["coincidence_hz"] = r.at("rates").at("coincidence_hz");
      row(path, "car", r.at("car"));
      if (!r.at("klyshko").is_null()) {
        row(path, "klyshko_signal", r.at("klyshko").at("signal"));
        row(path, "klyshko_idler", r.at("klyshko").at("idler"));
      }
      row(path, "max_visibility_from_car", r.at("max_visibility_from_car"));
      const json& c = r.at("config");
      if (c.is_object() && c.value("pump_power_w", 0.0) > 0.0)
        series.push_back({c.at("pump_power_w").get<double>(), rate_report_from_json(r.at("rates"))});
    } else if (kind == "fringe") {
      entry["visibility"] = r.at("fit").at("visibility");
      entry["phase_offset_rad"] = r.at("fit").at("phase_offset");
      row(path, "visibility", entry["visibility"]);
    } else if (kind == "tomography") {
      for (const char* k : {"concurrence", "fidelity_phi_plus"}) {
        entry[k] = r.at(k);
        if (r.contains("monte_carlo"))
          row(path, k, json{{"value", r.at(k)}, {"error", r.at("monte_carlo").at(k).at("std")}});
        else
          row(path, k, r.at(k));
      }
      entry["chsh"] = r.at("chsh");
      entry["converged"] = r.at("diagnostics").at("converged");
      row(path, "chsh_lower", r.at("chsh").at("lower"));
      row(path, "chsh_upper", r.at("chsh").at("upper"));
    } else {
      throw DataError(path + ": unrecognized report kind '" + kind + "'");
    }
    runs.push_back(entry);
  }
  json summary = {{"kind", "summary"}, {"format_version", kReportFormatVersion}, {"runs", runs}};
  if (series.size() >= 3) {
    PowerSeriesOptions opts;
    opts.klyshko_min_power_w = a.klyshko_min_power_w;
    summary["power_series"] = or_null([&] { return to_json(power_series_fit(series, opts)); });
  }

  const std::string table_path = sibling(g.out, ".csv");
  write_text(g.out, dump(summary));
  write_text(table_path, table);

  RunManifest m;
  m.command = "report";
  for (const auto& p : a.inputs) m.add_input(p);
  m.add_output(g.out);
  m.add_output(table_path);
  m.format_versions = {{"report", kReportFormatVersion}};
  m.wall_clock_s = timer.seconds();
  write_manifest(m, g.out);

  emit(out, g, summary, table);
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Time-bin entangled photon pair simulation and analysis"};
  app.name("tbent");
  app.fallthrough();
  app.require_subcommand(1);

  Globals g;
  app.add_option("--seed", g.seed, "RNG seed (simulation, bootstrap)");
  app.add_option("--config", g.config, "Run configuration file (key = value)");
  app.add_option("--out", g.out, "Primary output path");
  app.add_option("--format", g.format, "Stream encoding for simulate; stdout format otherwise")
      ->check(CLI::IsMember({"json", "csv"}));

  SimulateArgs sim_args;
  auto* sim = app.add_subcommand("simulate", "Write a simulated time-tag stream");
  sim->add_option("--mode", sim_args.mode, "Override the configured mode")->check(CLI::IsMember({"single-bin", "time-bin"}));
  sim->add_option("--threads", sim_args.threads, "Worker threads (output does not depend on this)");

  AnalyzeArgs an_args;
  auto* an = app.add_subcommand("analyze", "Rates, CAR, Klyshko and coincidence histograms of a stream");
  an->add_option("input", an_args.input, "Time-tag file")->required();
  an->add_option("--gates", an_args.gates, "Gate configuration JSON");
  an->add_option("--duration", an_args.duration_s, "Duration in seconds (default: triggers / rep rate)");

  FringeArgs fr_args;
  auto* fr = app.add_subcommand("fringe", "Fit the two-photon fringe of a phase scan");
  fr->add_option("runs", fr_args.runs, "Analysis reports, PATH or PATH@PHASE_RAD");
  fr->add_option("--scan", fr_args.scan, "CSV of phase_rad,counts[,integration_s]");
  fr->add_option("--weighting", fr_args.weighting, "poisson or unweighted");

  TomoArgs to_args;
  auto* to = app.add_subcommand("tomo", "Maximum-likelihood state tomography from four phase settings");
  to->add_option("--xx", to_args.xx, "Analysis report at (0, 0)");
  to->add_option("--xy", to_args.xy, "Analysis report at (0, pi/2)");
  to->add_option("--yx", to_args.yx, "Analysis report at (pi/2, 0)");
  to->add_option("--yy", to_args.yy, "Analysis report at (pi/2, pi/2)");
  to->add_option("--replicas", to_args.replicas, "Monte-Carlo replicas for errors (0 disables)");
  to->add_option("--max-iterations", to_args.max_iterations, "Optimizer iteration limit")->check(CLI::PositiveNumber);
  to->add_option("--threads", to_args.threads, "Bootstrap worker threads");

  ReportArgs re_args;
  auto* re = app.add_subcommand("report", "Summarize analysis, fringe and tomography outputs");
  re->add_option("inputs", re_args.inputs, "JSON outputs of the other commands")->required();
  re->add_option("--klyshko-min-power", re_args.klyshko_min_power_w, "Lowest pump power [W] in the Klyshko fits");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*sim) return cmd_simulate(g, sim_args, out);
    if (*an) return cmd_analyze(g, an_args, out);
    if (*fr) return cmd_fringe(g, fr_args, out);
    if (*to) return cmd_tomo(g, to_args, out);
    if (*re) return cmd_report(g, re_args, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const NotConverged& e) {
    err << "error: " << e.what() << "\n";
    return kExitNotConverged;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const nlohmann::json::exception& e) {
    err << "error: malformed input: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace tbent
