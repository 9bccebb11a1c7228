#include "tbent/tomography.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

namespace tbent {

void MeasurementRecord::validate() const {
  if (entries.size() != 16) throw std::invalid_argument("measurement record needs exactly 16 entries");
  std::array<int, 16> seen{};
  for (const auto& e : entries) {
    const int k = static_cast<int>(e.signal) * 4 + static_cast<int>(e.idler);
    if (++seen[k] > 1)
      throw std::invalid_argument("measurement record repeats (" + std::string(basis_label(e.signal)) + ", " +
                                  std::string(basis_label(e.idler)) + ")");
    if (!(e.integration_s >= 0.0)) throw std::invalid_argument("measurement record has negative integration time");
  }
}

std::uint64_t MeasurementRecord::count(Basis signal, Basis idler) const {
  for (const auto& e : entries)
    if (e.signal == signal && e.idler == idler) return e.count;
  throw std::invalid_argument("measurement record lacks (" + std::string(basis_label(signal)) + ", " +
                              std::string(basis_label(idler)) + ")");
}

std::uint64_t MeasurementRecord::total() const {
  std::uint64_t t = 0;
  for (const auto& e : entries) t += e.count;
  return t;
}

MeasurementRecord MeasurementRecord::swapped() const {
  MeasurementRecord out = *this;
  for (auto& e : out.entries) std::swap(e.signal, e.idler);
  return out;
}

nlohmann::json to_json(const MeasurementRecord& r) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : r.entries)
    entries.push_back({{"signal", basis_label(e.signal)},
                       {"idler", basis_label(e.idler)},
                       {"count", e.count},
                       {"integration_s", e.integration_s}});
  return {{"entries", std::move(entries)},
          {"provenance", r.provenance},
          {"setting_normalizations", r.setting_normalizations}};
}

MeasurementRecord record_from_json(const nlohmann::json& j) {
  MeasurementRecord r;
  for (const auto& e : j.at("entries")) {
    MeasurementEntry m;
    m.signal = parse_basis(e.at("signal").get<std::string>());
    m.idler = parse_basis(e.at("idler").get<std::string>());
    const auto& c = e.at("count");
    if (!c.is_number_integer() || c.get<std::int64_t>() < 0)
      throw std::invalid_argument("measurement counts must be non-negative integers");
    m.count = c.get<std::uint64_t>();
    m.integration_s = e.value("integration_s", 0.0);
    r.entries.push_back(m);
  }
  r.provenance = j.value("provenance", "");
  if (j.contains("setting_normalizations"))
    r.setting_normalizations = j.at("setting_normalizations").get<std::vector<double>>();
  r.validate();
  return r;
}

namespace {

double born(const Matrix4c& rho, const Matrix4c& op) { return (rho.cwiseProduct(op.transpose())).sum().real(); }

}  // namespace

MeasurementRecord expected_record(const DensityMatrix2Q& rho, double scale) {
  MeasurementRecord r;
  for (const auto& [s, i] : all_basis_pairs()) {
    const double p = std::max(0.0, born(rho.matrix(), measurement_operator(s, i)));
    r.entries.push_back({s, i, static_cast<std::uint64_t>(std::llround(scale * p)), 0.0});
  }
  r.provenance = "expected counts";
  return r;
}

std::pair<double, double> interferometer_phases(double theta_signal, double theta_idler) {
  return {theta_signal + std::numbers::pi, theta_idler};
}

MeasurementRecord counts_from_phase_settings(std::span<const PhaseSettingCounts> settings) {
  auto label_of = [](double theta) -> int {
    if (std::abs(theta) < 1e-6) return 0;
    if (std::abs(theta - std::numbers::pi / 2) < 1e-6) return 1;
    return -1;
  };
  std::array<const PhaseSettingCounts*, 4> by_setting{};
  for (const auto& s : settings) {
    const int a = label_of(s.theta_signal);
    const int b = label_of(s.theta_idler);
    if (a < 0 || b < 0) throw std::invalid_argument("phase setting must use 0 or 90 degrees on each side");
    if (by_setting[a * 2 + b]) throw std::invalid_argument("phase setting given twice");
    if (s.joint.size() != 3 || std::any_of(s.joint.begin(), s.joint.end(), [](const auto& row) { return row.size() != 3; }))
      throw std::invalid_argument("phase setting needs a 3x3 slot coincidence matrix");
    by_setting[a * 2 + b] = &s;
  }
  for (int k = 0; k < 4; ++k) {
    if (!by_setting[k]) {
      const char* names[] = {"(0, 0)", "(0, 90)", "(90, 0)", "(90, 90)"};
      throw std::invalid_argument(std::string("missing phase setting ") + names[k] + " degrees");
    }
  }

  MeasurementRecord r;
  for (const auto& [s, i] : all_basis_pairs()) r.entries.push_back({s, i, 0, 0.0});
  auto entry = [&](Basis s, Basis i) -> MeasurementEntry& {
    return r.entries[static_cast<std::size_t>(s) * 4 + static_cast<std::size_t>(i)];
  };
  for (const PhaseSettingCounts* s : by_setting) {
    auto basis_of = [](int slot, double theta) {
      if (slot == 0) return Basis::Z0;
      if (slot == 2) return Basis::Z1;
      return std::abs(theta) < 1e-6 ? Basis::XPlus : Basis::YPlus;
    };
    double outside_central = 0.0;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        MeasurementEntry& e = entry(basis_of(a, s->theta_signal), basis_of(b, s->theta_idler));
        e.count += s->joint[a][b];
        e.integration_s += s->integration_s;
        if (a != 1 || b != 1) outside_central += static_cast<double>(s->joint[a][b]);
      }
    r.setting_normalizations.push_back(outside_central);
  }
  r.provenance =
      "four phase settings (0,0), (0,90), (90,0), (90,90) deg; slots 0/2 -> Z0/Z1, central slot -> X+ (0) or Y+ (90)";
  return r;
}

namespace {

std::array<Matrix2c, 4> paulis() {
  std::array<Matrix2c, 4> p;
  p[0] << 1.0, 0.0, 0.0, 1.0;
  p[1] << 0.0, 1.0, 1.0, 0.0;
  p[2] << 0.0, Complex(0, -1), Complex(0, 1), 0.0;
  p[3] << 1.0, 0.0, 0.0, -1.0;
  return p;
}

std::array<Matrix4c, 16> pauli_products() {
  const auto p = paulis();
  std::array<Matrix4c, 16> out;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      Matrix4c m;
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) m.block<2, 2>(2 * i, 2 * j) = p[a](i, j) * p[b];
      out[a * 4 + b] = m;
    }
  return out;
}

}  // namespace

Matrix4c linear_inversion(const MeasurementRecord& record) {
  record.validate();
  const auto basis = pauli_products();
  Eigen::Matrix<double, 16, 16> design;
  Eigen::Matrix<double, 16, 1> counts;
  for (int k = 0; k < 16; ++k) {
    const auto& e = record.entries[k];
    const Matrix4c op = measurement_operator(e.signal, e.idler);
    for (int j = 0; j < 16; ++j) design(k, j) = born(basis[j], op);
    counts(k) = static_cast<double>(e.count);
  }
  const Matrix4c mixed = Matrix4c::Identity() * 0.25;
  Eigen::FullPivLU<Eigen::Matrix<double, 16, 16>> lu(design);
  if (lu.rank() < 16) return mixed;
  const Eigen::Matrix<double, 16, 1> c = lu.solve(counts);
  Matrix4c a = Matrix4c::Zero();
  for (int j = 0; j < 16; ++j) a += c(j) * basis[j];
  const double tr = a.trace().real();
  if (!(tr > 0.0) || !std::isfinite(tr)) return mixed;
  a /= tr;
  return 0.5 * (a + a.adjoint());
}

DensityMatrix2Q project_to_physical(const Matrix4c& m) {
  const Matrix4c h = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix4c> eig(h);
  Eigen::Vector4d ev = eig.eigenvalues().cwiseMax(0.0);
  if (!(ev.sum() > 0.0)) return DensityMatrix2Q::maximally_mixed();
  ev /= ev.sum();
  Matrix4c out = eig.eigenvectors() * ev.cast<Complex>().asDiagonal() * eig.eigenvectors().adjoint();
  out = 0.5 * (out + out.adjoint()).eval();
  out /= out.trace().real();
  return DensityMatrix2Q(out);
}

namespace {

constexpr int kParams = 16;
using ParamVector = Eigen::Matrix<double, kParams, 1>;
using ParamMatrix = Eigen::Matrix<double, kParams, kParams>;

// Off-diagonal lower-triangle positions in parameter order.
constexpr std::array<std::pair<int, int>, 6> kLower{{{1, 0}, {2, 0}, {2, 1}, {3, 0}, {3, 1}, {3, 2}}};

Matrix4c to_triangular(const ParamVector& x) {
  Matrix4c t = Matrix4c::Zero();
  for (int d = 0; d < 4; ++d) t(d, d) = x(d);
  for (std::size_t k = 0; k < kLower.size(); ++k)
    t(kLower[k].first, kLower[k].second) = Complex(x(4 + 2 * k), x(5 + 2 * k));
  return t;
}

Matrix4c rho_of(const Matrix4c& t) {
  Matrix4c a = t.adjoint() * t;
  a = 0.5 * (a + a.adjoint()).eval();
  return a / a.trace().real();
}

// Parameters with T^dag T proportional to rho (rho must be positive definite).
ParamVector from_density(const Matrix4c& rho) {
  Matrix4c j = Matrix4c::Zero();
  for (int k = 0; k < 4; ++k) j(k, 3 - k) = 1.0;
  const Matrix4c flipped = j * rho * j;
  Eigen::LLT<Matrix4c> llt(flipped);
  const Matrix4c l = llt.matrixL();
  const Matrix4c t = j * l.adjoint() * j;
  ParamVector x;
  for (int d = 0; d < 4; ++d) x(d) = t(d, d).real();
  for (std::size_t k = 0; k < kLower.size(); ++k) {
    x(4 + 2 * k) = t(kLower[k].first, kLower[k].second).real();
    x(5 + 2 * k) = t(kLower[k].first, kLower[k].second).imag();
  }
  return x;
}

class Likelihood {
public:
  Likelihood(const MeasurementRecord& record, const std::vector<int>& groups) {
    record.validate();
    if (!groups.empty() && groups.size() != 16) throw std::invalid_argument("normalization_groups needs 16 entries");
    for (int k = 0; k < 16; ++k) {
      const auto& e = record.entries[k];
      ops_[k] = measurement_operator(e.signal, e.idler);
      n_[k] = static_cast<double>(e.count);
      group_[k] = groups.empty() ? 0 : groups[k];
      if (group_[k] < 0 || group_[k] >= 16) throw std::invalid_argument("normalization group out of range");
      total_ += n_[k];
    }
    if (!(total_ > 0.0)) throw std::invalid_argument("measurement record has no counts");
  }

  double total() const { return total_; }

  // Total log-likelihood; fills dL/drho (Hermitian G with dL = tr(G drho)) when asked.
  double value(const Matrix4c& rho, Matrix4c* grad) const {
    std::array<double, 16> p{};
    std::array<double, 16> sn{}, sp{}, norm{};
    for (int k = 0; k < 16; ++k) {
      p[k] = born(rho, ops_[k]);
      sn[group_[k]] += n_[k];
      sp[group_[k]] += p[k];
    }
    for (int g = 0; g < 16; ++g) norm[g] = sp[g] > 0.0 ? sn[g] / sp[g] : 0.0;
    double l = 0.0;
    if (grad) grad->setZero();
    for (int k = 0; k < 16; ++k) {
      const double big_n = norm[group_[k]];
      if (n_[k] > 0.0) {
        if (!(p[k] > 0.0)) return -std::numeric_limits<double>::infinity();
        l += n_[k] * std::log(big_n * p[k]);
      }
      l -= big_n * p[k];
      if (grad) *grad += (n_[k] > 0.0 ? n_[k] / p[k] - big_n : -big_n) * ops_[k];
    }
    return l;
  }

  // Objective for minimization: -L / total, and its gradient in parameter space.
  double objective(const ParamVector& x, ParamVector* grad) const {
    const Matrix4c t = to_triangular(x);
    const Matrix4c a = t.adjoint() * t;
    const double tau = a.trace().real();
    if (!(tau > 0.0)) return std::numeric_limits<double>::infinity();
    Matrix4c rho = a / tau;
    rho = 0.5 * (rho + rho.adjoint()).eval();
    Matrix4c g;
    const double l = value(rho, grad ? &g : nullptr);
    if (!std::isfinite(l)) return std::numeric_limits<double>::infinity();
    if (grad) {
      const double gbar = (g.cwiseProduct(rho.transpose())).sum().real();
      const Matrix4c k = (g - gbar * Matrix4c::Identity()) * t.adjoint();
      const double scale = -2.0 / (tau * total_);
      for (int d = 0; d < 4; ++d) (*grad)(d) = scale * k(d, d).real();
      for (std::size_t m = 0; m < kLower.size(); ++m) {
        const auto [i, j] = kLower[m];
        (*grad)(4 + 2 * m) = scale * k(j, i).real();
        (*grad)(5 + 2 * m) = -scale * k(j, i).imag();
      }
    }
    return -l / total_;
  }

private:
  std::array<Matrix4c, 16> ops_;
  std::array<double, 16> n_{};
  std::array<int, 16> group_{};
  double total_ = 0.0;
};

void fill_metrics(TomographyResult& r) {
  r.concurrence = concurrence(r.rho);
  r.fidelity = fidelity_to_pure(r.rho, bell_phi_plus());
  r.chsh = chsh_bounds(r.concurrence);
}

}  // namespace

double mle_log_likelihood(const MeasurementRecord& record, const DensityMatrix2Q& rho) {
  return Likelihood(record, {}).value(rho.matrix(), nullptr);
}

double detail::mle_objective(const MeasurementRecord& record, const std::array<double, 16>& params,
                             std::array<double, 16>* gradient) {
  const Likelihood like(record, {});
  const ParamVector x = Eigen::Map<const ParamVector>(params.data());
  ParamVector g;
  const double f = like.objective(x, gradient ? &g : nullptr);
  if (gradient) Eigen::Map<ParamVector>(gradient->data()) = g;
  return f;
}

TomographyResult mle_reconstruct(const MeasurementRecord& record, const MleOptions& opts) {
  const Likelihood like(record, opts.normalization_groups);

  // Full-rank start from the projected linear inversion.
  const DensityMatrix2Q seed = project_to_physical(linear_inversion(record));
  const Matrix4c start = 0.98 * seed.matrix() + 0.02 * Matrix4c::Identity() * 0.25;
  ParamVector x = from_density(start);
  if (!x.allFinite()) x = from_density(Matrix4c::Identity() * 0.25);

  ParamVector g;
  double f = like.objective(x, &g);
  if (!std::isfinite(f)) {
    x = from_density(Matrix4c::Identity() * 0.25);
    f = like.objective(x, &g);
  }

  // Once the tolerances are met, keep refining while the objective still
  // strictly decreases (bounded), so results do not depend on the path taken.
  constexpr double kPolishGradient = 1e-12;
  constexpr int kStallLimit = 3;
  constexpr int kPolishBudget = 200;

  TomographyResult result;
  MleDiagnostics& diag = result.diagnostics;
  ParamMatrix h = ParamMatrix::Identity();
  bool fresh = true;
  int stalled = 0;
  int polished = 0;
  for (int it = 0; it < opts.max_iterations; ++it) {
    ParamVector d = -h * g;
    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      h.setIdentity();
      fresh = true;
      d = -g;
      slope = g.dot(d);
    }
    double alpha = 1.0;
    ParamVector xn, gn;
    double fn = f;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      xn = x + alpha * d;
      fn = like.objective(xn, &gn);
      if (std::isfinite(fn) && fn <= f + 1e-4 * alpha * slope) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      if (!fresh) {
        h.setIdentity();
        fresh = true;
        continue;
      }
      // No descent left along the gradient: at a roundoff-limited optimum.
      diag.converged = diag.converged || g.norm() < opts.gradient_tolerance;
      break;
    }
    const ParamVector s = xn - x;
    const ParamVector y = gn - g;
    const double improvement = f - fn;
    stalled = improvement > 0.0 ? 0 : stalled + 1;
    x = xn;
    f = fn;
    g = gn;
    diag.iterations = it + 1;
    if (opts.keep_trajectory) diag.trajectory.push_back(-f);

    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (fresh) {
        h = ParamMatrix::Identity() * (sy / y.squaredNorm());
        fresh = false;
      }
      const double rho_k = 1.0 / sy;
      const ParamMatrix v = ParamMatrix::Identity() - rho_k * s * y.transpose();
      h = v * h * v.transpose() + rho_k * s * s.transpose();
    }

    const double gnorm = g.norm();
    if (improvement < opts.loglik_tolerance && gnorm < opts.gradient_tolerance) diag.converged = true;
    if (diag.converged && (gnorm < kPolishGradient || stalled >= kStallLimit || ++polished > kPolishBudget)) break;
    // Keep the scale gauge of T bounded.
    const double norm = x.norm();
    if (norm > 1e3 || norm < 1e-3) {
      x /= norm;
      f = like.objective(x, &g);
      h.setIdentity();
      fresh = true;
    }
  }
  diag.gradient_norm = g.norm();

  result.rho = DensityMatrix2Q(rho_of(to_triangular(x)));
  result.log_likelihood = like.value(result.rho.matrix(), nullptr);
  fill_metrics(result);
  return result;
}

namespace {

Stat summarize(const std::vector<double>& v) {
  Stat s;
  if (v.empty()) return s;
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

struct ReplicaOutcome {
  bool converged = false;
  double concurrence = 0.0;
  double fidelity = 0.0;
  ChshBounds chsh;
};

ReplicaOutcome run_replica(const MeasurementRecord& record, const BootstrapOptions& opts, int index) {
  std::seed_seq seq{static_cast<std::uint32_t>(opts.seed), static_cast<std::uint32_t>(opts.seed >> 32),
                    static_cast<std::uint32_t>(index), 0x7b0075u};
  std::mt19937_64 rng(seq);
  MeasurementRecord replica = record;
  for (auto& e : replica.entries) {
    if (e.count == 0) continue;
    std::poisson_distribution<std::int64_t> pois(static_cast<double>(e.count));
    e.count = static_cast<std::uint64_t>(pois(rng));
  }
  ReplicaOutcome out;
  if (replica.total() == 0) return out;
  const TomographyResult r = mle_reconstruct(replica, opts.mle);
  out.converged = r.diagnostics.converged;
  out.concurrence = r.concurrence;
  out.fidelity = r.fidelity;
  out.chsh = r.chsh;
  return out;
}

}  // namespace

BootstrapSummary bootstrap_errors(const MeasurementRecord& record, const BootstrapOptions& opts) {
  if (opts.replicas < 2) throw std::invalid_argument("bootstrap needs at least 2 replicas");
  record.validate();
  std::vector<ReplicaOutcome> outcomes(static_cast<std::size_t>(opts.replicas));
  const unsigned threads = std::max(1u, opts.threads);
  if (threads == 1) {
    for (int i = 0; i < opts.replicas; ++i) outcomes[i] = run_replica(record, opts, i);
  } else {
    std::vector<std::future<void>> jobs;
    for (unsigned w = 0; w < threads; ++w)
      jobs.push_back(std::async(std::launch::async, [&, w] {
        for (int i = static_cast<int>(w); i < opts.replicas; i += static_cast<int>(threads))
          outcomes[i] = run_replica(record, opts, i);
      }));
    for (auto& j : jobs) j.get();
  }

  BootstrapSummary s;
  s.requested = opts.replicas;
  std::vector<double> c, f, lo, hi;
  for (const auto& o : outcomes) {
    if (!o.converged) {
      ++s.dropped;
      continue;
    }
    c.push_back(o.concurrence);
    f.push_back(o.fidelity);
    lo.push_back(o.chsh.lower);
    hi.push_back(o.chsh.upper);
  }
  s.used = static_cast<int>(c.size());
  s.concurrence = summarize(c);
  s.fidelity = summarize(f);
  s.chsh_lower = summarize(lo);
  s.chsh_upper = summarize(hi);
  s.too_many_dropped = s.dropped * 10 > s.requested;
  s.low_precision = s.used < 10;
  return s;
}

TomographyResult reconstruct_with_errors(const MeasurementRecord& record, const BootstrapOptions& opts) {
  TomographyResult r = mle_reconstruct(record, opts.mle);
  r.errors = bootstrap_errors(record, opts);
  r.has_errors = true;
  return r;
}

nlohmann::json to_json(const TomographyResult& r) {
  auto stat = [](const Stat& s) { return nlohmann::json{{"mean", s.mean}, {"std", s.stddev}}; };
  nlohmann::json j = {
      {"rho", r.rho},
      {"log_likelihood", r.log_likelihood},
      {"concurrence", r.concurrence},
      {"fidelity_phi_plus", r.fidelity},
      {"chsh", {{"lower", r.chsh.lower}, {"upper", r.chsh.upper}}},
      {"diagnostics",
       {{"iterations", r.diagnostics.iterations},
        {"converged", r.diagnostics.converged},
        {"gradient_norm", r.diagnostics.gradient_norm}}},
  };
  if (r.has_errors) {
    j["monte_carlo"] = {{"concurrence", stat(r.errors.concurrence)},
                        {"fidelity_phi_plus", stat(r.errors.fidelity)},
                        {"chsh_lower", stat(r.errors.chsh_lower)},
                        {"chsh_upper", stat(r.errors.chsh_upper)},
                        {"replicas_requested", r.errors.requested},
                        {"replicas_used", r.errors.used},
                        {"replicas_dropped", r.errors.dropped},
                        {"too_many_dropped", r.errors.too_many_dropped},
                        {"low_precision", r.errors.low_precision}};
  }
  return j;
}

}  // namespace tbent
