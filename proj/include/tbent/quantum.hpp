#pragma once

// Two-qubit time-bin state algebra. Qubit order is (signal, idler); the
// computational basis {|00>,|01>,|10>,|11>} labels early (0) / late (1) bins.

#include <array>
#include <complex>
#include <string>
#include <string_view>
#include <utility>

#include <Eigen/Dense>
#include <json.hpp>

namespace tbent {

using Complex = std::complex<double>;
using Matrix2c = Eigen::Matrix<Complex, 2, 2>;
using Matrix4c = Eigen::Matrix<Complex, 4, 4>;
using Vector4c = Eigen::Matrix<Complex, 4, 1>;

inline constexpr double kHermitianTolerance = 1e-12;
inline constexpr double kTraceTolerance = 1e-12;
inline constexpr double kPositivityTolerance = 1e-9;

/// Single-qubit analysis bases used by the tomography.
enum class Basis { Z0, Z1, XPlus, YPlus };

inline constexpr std::array<Basis, 4> kAllBases{Basis::Z0, Basis::Z1, Basis::XPlus, Basis::YPlus};

std::string_view basis_label(Basis b);
/// Parses "Z0", "Z1", "X+", "Y+"; throws std::invalid_argument otherwise.
Basis parse_basis(std::string_view label);

/// Rank-one projector |b><b|. |+X> and |+Y> carry 1/sqrt(2) normalization.
Matrix2c projector(Basis b);

/// Pi_signal (x) Pi_idler.
Matrix4c measurement_operator(Basis signal, Basis idler);

/// The 16 (signal, idler) combinations, signal-major in kAllBases order.
std::array<std::pair<Basis, Basis>, 16> all_basis_pairs();

/// Normalized pure state of two time-bin qubits.
class PureState2Q {
public:
  /// Throws std::invalid_argument unless | ||psi|| - 1 | <= 1e-12.
  explicit PureState2Q(const Vector4c& amplitudes);

  const Vector4c& amplitudes() const noexcept { return amps_; }
  Matrix4c projector() const { return amps_ * amps_.adjoint(); }

private:
  Vector4c amps_;
};

/// Validated two-qubit density matrix: Hermitian, unit trace, positive.
///
/// Eigenvalues in [-1e-9, 0) are clamped to zero and the matrix rebuilt;
/// anything more negative is rejected. A matrix that needs no clamping is
/// stored exactly as given.
class DensityMatrix2Q {
public:
  explicit DensityMatrix2Q(const Matrix4c& m);

  static DensityMatrix2Q from_pure(const PureState2Q& psi);
  static DensityMatrix2Q maximally_mixed();

  const Matrix4c& matrix() const noexcept { return m_; }
  bool was_clamped() const noexcept { return clamped_; }

  /// Hermitian eigenvalues in ascending order.
  Eigen::Vector4d eigenvalues() const;

  /// Swaps the roles of signal and idler.
  DensityMatrix2Q qubit_swapped() const;

  friend bool operator==(const DensityMatrix2Q& a, const DensityMatrix2Q& b) { return a.m_ == b.m_; }

private:
  Matrix4c m_;
  bool clamped_ = false;
};

PureState2Q bell_phi_plus();

/// (|00> + e^{i phi_p} |11>) / sqrt(2)
PureState2Q time_bin_state(double phi_p);

/// Wootters concurrence in [0, 1].
double concurrence(const DensityMatrix2Q& rho);

/// <psi|rho|psi>
double fidelity_to_pure(const DensityMatrix2Q& rho, const PureState2Q& psi);

struct ChshBounds {
  double lower = 0.0;
  double upper = 0.0;
};

/// Range of the maximal CHSH value compatible with a given concurrence:
/// lower 2*sqrt(2)*C, upper 2*sqrt(1 + C^2). Throws for C outside [0, 1].
ChshBounds chsh_bounds(double concurrence_value);

/// Permutation matrix exchanging the two qubits.
Matrix4c swap_operator();

// JSON form: {"re": [[...4x4...]], "im": [[...]]}.
nlohmann::json matrix_to_json(const Matrix4c& m);
Matrix4c matrix_from_json(const nlohmann::json& j);

}  // namespace tbent

namespace nlohmann {
template <>
struct adl_serializer<tbent::DensityMatrix2Q> {
  static tbent::DensityMatrix2Q from_json(const json& j) {
    return tbent::DensityMatrix2Q(tbent::matrix_from_json(j));
  }
  static void to_json(json& j, const tbent::DensityMatrix2Q& rho) { j = tbent::matrix_to_json(rho.matrix()); }
};
}  // namespace nlohmann
