#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "tbent/cli.hpp"
#include "tbent/manifest.hpp"
#include "tbent/timetag_io.hpp"

using namespace tbent;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "tbent");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

struct Workdir {
  fs::path dir;
  Workdir() {
    static int n = 0;
    dir = fs::temp_directory_path() / ("tbent_cli_" + std::to_string(::getpid()) + "_" + std::to_string(n++));
    fs::create_directories(dir);
  }
  ~Workdir() { fs::remove_all(dir); }
  std::string operator()(const std::string& name) const { return (dir / name).string(); }
};

void write(const std::string& path, const std::string& text) { std::ofstream(path, std::ios::binary) << text; }

json load(const std::string& path) {
  std::ifstream f(path);
  return json::parse(f);
}

const std::string kTimeBin =
    "mode = time-bin\n"
    "rep_rate_hz = 76.2e6\n"
    "eta_signal = 1\n"
    "eta_idler = 1\n"
    "mean_pairs_per_pulse = 0.004\n";

std::string setting_config(double phi_s, double phi_i, double duration) {
  std::ostringstream s;
  s.precision(17);
  s << kTimeBin << "duration_s = " << duration << "\nphi_s_rad = " << phi_s << "\nphi_i_rad = " << phi_i << "\n";
  return s.str();
}

}  // namespace

TEST_CASE("usage errors") {
  CHECK(run({"--help"}).code == kExitOk);
  CHECK(run({}).code == kExitConfig);
  CHECK(run({"teleport"}).code == kExitConfig);
  CHECK(run({"--format", "xml", "report", "x.json"}).code == kExitConfig);
}

TEST_CASE("simulate") {
  Workdir w;
  write(w("run.cfg"), "mode = single-bin\nrep_rate_hz = 76.2e6\nduration_s = 0.001\neta_signal = 0.5\neta_idler = 0.5\n"
                      "mean_pairs_per_pulse = 0.01\n");
  auto r = run({"simulate", "--config", w("run.cfg"), "--out", w("a.bin"), "--seed", "11"});
  REQUIRE(r.code == kExitOk);
  CHECK(json::parse(r.out).at("pulses") == 76200);
  std::uint64_t triggers = 0;
  for (const auto& t : read_all(w("a.bin"))) triggers += t.channel == Channel::Trigger;
  CHECK(triggers == 76200);

  // Same seed, same bytes; the manifest lists the checksum.
  REQUIRE(run({"--seed", "11", "--config", w("run.cfg"), "--out", w("b.bin"), "simulate"}).code == kExitOk);
  CHECK(sha256_file(w("a.bin")) == sha256_file(w("b.bin")));
  const auto manifest = load(w("a.bin.manifest.json"));
  CHECK(manifest.at("outputs").at(0).at("sha256") == sha256_file(w("a.bin")));
  CHECK(manifest.at("seeds").at(0) == 11);
  REQUIRE(run({"simulate", "--config", w("run.cfg"), "--out", w("c.bin"), "--seed", "12"}).code == kExitOk);
  CHECK(sha256_file(w("a.bin")) != sha256_file(w("c.bin")));

  REQUIRE(run({"simulate", "--config", w("run.cfg"), "--out", w("a.csv"), "--seed", "11", "--format", "csv"}).code == kExitOk);
  CHECK(read_all(w("a.csv")) == read_all(w("a.bin")));

  write(w("bad.cfg"), "rep_rate_hz = 76.2e6\nduration_s = 1\neta_idler = 0.5\nmean_pairs_per_pulse = 0.01\n");
  r = run({"simulate", "--config", w("bad.cfg"), "--out", w("x.bin")});
  CHECK(r.code == kExitConfig);
  CHECK(r.err.find("eta_signal") != std::string::npos);
  write(w("bad.cfg"), "rep_rate_hz = 76.2e6\nduration_s = 1\neta_signal = 2\neta_idler = 0.5\nmean_pairs_per_pulse = 0.01\n");
  r = run({"simulate", "--config", w("bad.cfg"), "--out", w("x.bin")});
  CHECK(r.code == kExitConfig);
  CHECK(r.err.find("eta_signal") != std::string::npos);
  CHECK(run({"simulate", "--out", w("x.bin")}).code == kExitConfig);
}

TEST_CASE("analyze") {
  Workdir w;
  write(w("dark.cfg"), "mode = single-bin\nrep_rate_hz = 76.2e6\nduration_s = 0.02\neta_signal = 1\neta_idler = 1\n"
                       "mean_pairs_per_pulse = 0\ndark_rate_signal_hz = 4e7\ndark_rate_idler_hz = 4e7\n");
  REQUIRE(run({"simulate", "--config", w("dark.cfg"), "--out", w("dark.bin"), "--seed", "3"}).code == kExitOk);
  auto r = run({"analyze", w("dark.bin"), "--out", w("dark.json")});
  REQUIRE(r.code == kExitOk);
  const auto report = load(w("dark.json"));
  const double car = report.at("car").at("value");
  CHECK(std::abs(car - 1.0) < 5 * report.at("car").at("error").get<double>());
  CHECK(report.at("config").at("dark_rate_signal_hz") == 4e7);
  for (const char* suffix : {".slots.csv", ".pulses.csv", ".singles_signal.csv", ".singles_idler.csv"})
    CHECK(fs::exists(w(std::string("dark") + suffix)));

  // Idempotent: identical report bytes.
  REQUIRE(run({"analyze", w("dark.bin"), "--out", w("dark2.json")}).code == kExitOk);
  auto strip = [](json j) {
    j.erase("input");
    return j.dump();
  };
  CHECK(strip(load(w("dark.json"))) == strip(load(w("dark2.json"))));
  CHECK(sha256_file(w("dark.slots.csv")) == sha256_file(w("dark2.slots.csv")));

  // Time-bin: five slot delays, outer two only from accidentals.
  write(w("tb.cfg"), setting_config(0.0, 0.0, 0.005));
  REQUIRE(run({"simulate", "--config", w("tb.cfg"), "--out", w("tb.bin"), "--seed", "4"}).code == kExitOk);
  r = run({"analyze", w("tb.bin"), "--out", w("tb.json"), "--format", "csv"});
  REQUIRE(r.code == kExitOk);
  std::istringstream csv(r.out);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(csv, line)) lines.push_back(line);
  REQUIRE(lines.size() == 6);
  CHECK(lines[0] == "slot_or_phase,count,error");
  CHECK(lines[1].rfind("-2,", 0) == 0);
  CHECK(lines[5].rfind("2,", 0) == 0);

  // Corrupt stream: byte offset in the message.
  std::ifstream in(w("tb.bin"), std::ios::binary);
  std::string bytes{std::istreambuf_iterator<char>(in), {}};
  const auto header = bytes.find('\n') + 1;
  bytes[header + 9 * 100] = 9;
  write(w("corrupt.bin"), bytes);
  r = run({"analyze", w("corrupt.bin"), "--out", w("c.json")});
  CHECK(r.code == kExitData);
  CHECK(r.err.find("byte offset " + std::to_string(header + 900)) != std::string::npos);
  CHECK(run({"analyze", w("missing.bin"), "--out", w("c.json")}).code == kExitData);
}

TEST_CASE("fringe") {
  Workdir w;
  auto scan = [&](int n, double v) {
    std::ostringstream s;
    s.precision(17);
    s << "phase_rad,counts,integration_s\n";
    for (int k = 0; k < n; ++k) {
      const double ph = 2 * std::numbers::pi * k / n;
      s << ph << "," << 1000.0 * (1 - v * std::cos(ph + 0.3)) << ",1\n";
    }
    return s.str();
  };
  write(w("scan.csv"), scan(12, 0.902));
  auto r = run({"fringe", "--scan", w("scan.csv"), "--out", w("fit.json")});
  REQUIRE(r.code == kExitOk);
  CHECK(load(w("fit.json")).at("fit").at("visibility").at("value").get<double>() == doctest::Approx(0.902).epsilon(1e-9));
  CHECK(fs::exists(w("fit.fringe.csv")));

  write(w("flat.csv"), scan(8, 0.0));
  REQUIRE(run({"fringe", "--scan", w("flat.csv"), "--out", w("flat.json")}).code == kExitOk);
  CHECK(load(w("flat.json")).at("fit").at("visibility").at("value").get<double>() < 1e-9);

  write(w("three.csv"), scan(3, 0.5));
  r = run({"fringe", "--scan", w("three.csv"), "--out", w("three.json")});
  CHECK(r.code == kExitData);
  CHECK_FALSE(r.err.empty());

  write(w("junk.csv"), "phase,counts\n0,1\nabc,2\n");
  CHECK(run({"fringe", "--scan", w("junk.csv"), "--out", w("j.json")}).code == kExitData);
  CHECK(run({"fringe", "--out", w("j.json")}).code == kExitConfig);
}

TEST_CASE("tomo pipeline") {
  Workdir w;
  const double pi = std::numbers::pi;
  // Calibrated labels (theta_s, theta_i) need interferometer phases (theta_s + pi, theta_i).
  const std::vector<std::tuple<std::string, double, double>> settings{
      {"xx", pi, 0.0}, {"xy", pi, pi / 2}, {"yx", 1.5 * pi, 0.0}, {"yy", 1.5 * pi, pi / 2}};
  int seed = 20;
  for (const auto& [name, ps, pi_] : settings) {
    write(w(name + ".cfg"), setting_config(ps, pi_, 0.05));
    REQUIRE(run({"simulate", "--config", w(name + ".cfg"), "--out", w(name + ".bin"), "--seed", std::to_string(seed++)})
                .code == kExitOk);
    REQUIRE(run({"analyze", w(name + ".bin"), "--out", w(name + ".json")}).code == kExitOk);
  }
  auto r = run({"tomo", "--xx", w("xx.json"), "--xy", w("xy.json"), "--yx", w("yx.json"), "--yy", w("yy.json"),
                "--out", w("tomo.json"), "--replicas", "20", "--seed", "1"});
  REQUIRE(r.code == kExitOk);
  const auto t = load(w("tomo.json"));
  MESSAGE("pipeline fidelity " << t.at("fidelity_phi_plus"));
  CHECK(t.at("fidelity_phi_plus").get<double>() >= 0.99);
  CHECK(t.at("monte_carlo").at("replicas_used").get<int>() >= 18);
  std::ifstream rho(w("tomo.rho.csv"));
  std::string header;
  std::getline(rho, header);
  CHECK(header == "row,col,real,imag");

  r = run({"tomo", "--xx", w("xx.json"), "--xy", w("xy.json"), "--yx", w("yx.json"), "--out", w("t2.json")});
  CHECK(r.code == kExitConfig);
  CHECK(r.err.find("--yy") != std::string::npos);

  r = run({"tomo", "--xx", w("xx.json"), "--xy", w("xy.json"), "--yx", w("yx.json"), "--yy", w("yy.json"),
           "--out", w("t3.json"), "--replicas", "0", "--max-iterations", "1"});
  CHECK(r.code == kExitNotConverged);
  CHECK(load(w("t3.json")).at("diagnostics").at("converged") == false);

  r = run({"report", w("xx.json"), w("tomo.json"), "--out", w("summary.json"), "--format", "csv"});
  REQUIRE(r.code == kExitOk);
  CHECK(r.out.find("concurrence") != std::string::npos);
  CHECK(load(w("summary.json")).at("runs").size() == 2);
  CHECK(run({"report", w("xx.cfg"), "--out", w("s2.json")}).code == kExitData);
}
