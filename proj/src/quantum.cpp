#include "tbent/quantum.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace tbent {

namespace {

const double kInvSqrt2 = 1.0 / std::sqrt(2.0);
constexpr double kRoundoffFloor = 1e-14;

bool all_finite(const Matrix4c& m) {
  for (Eigen::Index i = 0; i < 16; ++i) {
    if (!std::isfinite(m(i).real()) || !std::isfinite(m(i).imag())) return false;
  }
  return true;
}

Matrix4c kron(const Matrix2c& a, const Matrix2c& b) {
  Matrix4c out;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
  return out;
}

Matrix4c sigma_y_sigma_y() {
  Matrix2c sy;
  sy << 0.0, Complex(0, -1), Complex(0, 1), 0.0;
  return kron(sy, sy);
}

}  // namespace

std::string_view basis_label(Basis b) {
  switch (b) {
    case Basis::Z0: return "Z0";
    case Basis::Z1: return "Z1";
    case Basis::XPlus: return "X+";
    case Basis::YPlus: return "Y+";
  }
  return "?";
}

Basis parse_basis(std::string_view label) {
  for (Basis b : kAllBases) {
    if (basis_label(b) == label) return b;
  }
  throw std::invalid_argument("unknown basis label '" + std::string(label) + "'");
}

Matrix2c projector(Basis b) {
  Eigen::Matrix<Complex, 2, 1> v;
  switch (b) {
    case Basis::Z0: v << 1.0, 0.0; break;
    case Basis::Z1: v << 0.0, 1.0; break;
    case Basis::XPlus: v << kInvSqrt2, kInvSqrt2; break;
    case Basis::YPlus: v << kInvSqrt2, Complex(0.0, kInvSqrt2); break;
  }
  return v * v.adjoint();
}

Matrix4c measurement_operator(Basis signal, Basis idler) {
  return kron(projector(signal), projector(idler));
}

std::array<std::pair<Basis, Basis>, 16> all_basis_pairs() {
  std::array<std::pair<Basis, Basis>, 16> out;
  std::size_t k = 0;
  for (Basis s : kAllBases)
    for (Basis i : kAllBases) out[k++] = {s, i};
  return out;
}

PureState2Q::PureState2Q(const Vector4c& amplitudes) : amps_(amplitudes) {
  for (Eigen::Index i = 0; i < 4; ++i) {
    if (!std::isfinite(amps_(i).real()) || !std::isfinite(amps_(i).imag()))
      throw std::invalid_argument("pure state has non-finite amplitude");
  }
  if (std::abs(amps_.norm() - 1.0) > 1e-12)
    throw std::invalid_argument("pure state is not normalized");
}

DensityMatrix2Q::DensityMatrix2Q(const Matrix4c& m) : m_(m) {
  if (!all_finite(m_)) throw std::invalid_argument("density matrix has non-finite entries");
  const double herm = (m_ - m_.adjoint()).cwiseAbs().maxCoeff();
  if (herm > kHermitianTolerance)
    throw std::invalid_argument("density matrix is not Hermitian (deviation " + std::to_string(herm) + ")");
  const Complex tr = m_.trace();
  if (std::abs(tr.real() - 1.0) > kTraceTolerance || std::abs(tr.imag()) > kTraceTolerance)
    throw std::invalid_argument("density matrix trace is not 1");

  Eigen::SelfAdjointEigenSolver<Matrix4c> eig(m_);
  Eigen::Vector4d evals = eig.eigenvalues();
  if (evals.minCoeff() < -kPositivityTolerance)
    throw std::invalid_argument("density matrix has negative eigenvalue " + std::to_string(evals.minCoeff()));
  // Below the roundoff floor the matrix is left untouched.
  if (evals.minCoeff() < -kRoundoffFloor) {
    evals = evals.cwiseMax(0.0);
    evals /= evals.sum();
    m_ = eig.eigenvectors() * evals.cast<Complex>().asDiagonal() * eig.eigenvectors().adjoint();
    m_ = 0.5 * (m_ + m_.adjoint()).eval();
    clamped_ = true;
  }
}

DensityMatrix2Q DensityMatrix2Q::from_pure(const PureState2Q& psi) { return DensityMatrix2Q(psi.projector()); }

DensityMatrix2Q DensityMatrix2Q::maximally_mixed() { return DensityMatrix2Q(Matrix4c::Identity() * 0.25); }

Eigen::Vector4d DensityMatrix2Q::eigenvalues() const {
  return Eigen::SelfAdjointEigenSolver<Matrix4c>(m_, Eigen::EigenvaluesOnly).eigenvalues();
}

DensityMatrix2Q DensityMatrix2Q::qubit_swapped() const {
  const Matrix4c s = swap_operator();
  return DensityMatrix2Q(s * m_ * s);
}

Matrix4c swap_operator() {
  Matrix4c s = Matrix4c::Zero();
  s(0, 0) = 1.0;
  s(1, 2) = 1.0;
  s(2, 1) = 1.0;
  s(3, 3) = 1.0;
  return s;
}

PureState2Q bell_phi_plus() { return time_bin_state(0.0); }

PureState2Q time_bin_state(double phi_p) {
  if (!std::isfinite(phi_p)) throw std::invalid_argument("phi_p must be finite");
  Vector4c v = Vector4c::Zero();
  v(0) = kInvSqrt2;
  v(3) = std::polar(kInvSqrt2, phi_p);
  return PureState2Q(v);
}

double concurrence(const DensityMatrix2Q& rho) {
  // With rho = W W^dag, the lambda_i are the singular values of W^T YY W.
  // Taking them directly avoids square roots of roundoff-level eigenvalues.
  Eigen::SelfAdjointEigenSolver<Matrix4c> eig(rho.matrix());
  const Eigen::Vector4d w = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Matrix4c half = eig.eigenvectors() * w.cast<Complex>().asDiagonal();
  const Matrix4c tau = half.transpose() * sigma_y_sigma_y() * half;
  Eigen::JacobiSVD<Matrix4c> svd(tau);
  const Eigen::Vector4d lambda = svd.singularValues();  // descending
  const double c = lambda(0) - lambda(1) - lambda(2) - lambda(3);
  return std::clamp(c, 0.0, 1.0);
}

double fidelity_to_pure(const DensityMatrix2Q& rho, const PureState2Q& psi) {
  const Complex f = psi.amplitudes().dot(rho.matrix() * psi.amplitudes());
  return std::clamp(f.real(), 0.0, 1.0);
}

ChshBounds chsh_bounds(double c) {
  if (!(c >= 0.0 && c <= 1.0)) throw std::invalid_argument("concurrence must lie in [0, 1]");
  return {2.0 * std::sqrt(2.0) * c, 2.0 * std::sqrt(1.0 + c * c)};
}

nlohmann::json matrix_to_json(const Matrix4c& m) {
  nlohmann::json re = nlohmann::json::array();
  nlohmann::json im = nlohmann::json::array();
  for (int i = 0; i < 4; ++i) {
    nlohmann::json rr = nlohmann::json::array();
    nlohmann::json ii = nlohmann::json::array();
    for (int j = 0; j < 4; ++j) {
      rr.push_back(m(i, j).real());
      ii.push_back(m(i, j).imag());
    }
    re.push_back(std::move(rr));
    im.push_back(std::move(ii));
  }
  return {{"re", std::move(re)}, {"im", std::move(im)}};
}

Matrix4c matrix_from_json(const nlohmann::json& j) {
  auto rows = [&](const char* key) -> const nlohmann::json& {
    if (!j.is_object() || !j.contains(key)) throw std::invalid_argument(std::string("matrix JSON lacks '") + key + "'");
    const auto& a = j.at(key);
    if (!a.is_array() || a.size() != 4) throw std::invalid_argument(std::string("'") + key + "' must be a 4x4 array");
    for (const auto& row : a) {
      if (!row.is_array() || row.size() != 4) throw std::invalid_argument(std::string("'") + key + "' must be a 4x4 array");
      for (const auto& x : row)
        if (!x.is_number()) throw std::invalid_argument(std::string("'") + key + "' has a non-numeric entry");
    }
    return a;
  };
  const auto& re = rows("re");
  const auto& im = rows("im");
  Matrix4c m;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m(r, c) = Complex(re[r][c].get<double>(), im[r][c].get<double>());
  return m;
}

}  // namespace tbent
