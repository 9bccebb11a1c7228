#pragma once

// Reference implementations used only by the tests, written without Eigen's
// solvers: cyclic Jacobi on real embeddings of Hermitian matrices.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <random>

#include "tbent/quantum.hpp"

namespace oracle {

using cd = std::complex<double>;
using C4 = std::array<std::array<cd, 4>, 4>;

inline C4 from_eigen(const tbent::Matrix4c& m) {
  C4 a{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) a[i][j] = m(i, j);
  return a;
}

inline C4 mul(const C4& a, const C4& b) {
  C4 c{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k) c[i][j] += a[i][k] * b[k][j];
  return c;
}

template <std::size_t N>
using Real = std::array<std::array<double, N>, N>;

// Cyclic symmetric Jacobi; eigenvalues in w, eigenvectors in the columns of v.
template <std::size_t N>
void jacobi(Real<N> a, std::array<double, N>& w, Real<N>& v) {
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < N; ++j) v[i][j] = i == j ? 1.0 : 0.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < N; ++p)
      for (std::size_t q = p + 1; q < N; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-34) break;
    for (std::size_t p = 0; p < N; ++p) {
      for (std::size_t q = p + 1; q < N; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < N; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < N; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < N; ++k) {
          const double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }
  for (std::size_t i = 0; i < N; ++i) w[i] = a[i][i];
}

// Hermitian H = A + iB  ->  [[A, -B], [B, A]]; each eigenvalue appears twice.
template <std::size_t M>
Real<2 * M> embed(const std::array<std::array<cd, M>, M>& h) {
  Real<2 * M> r{};
  for (std::size_t i = 0; i < M; ++i)
    for (std::size_t j = 0; j < M; ++j) {
      r[i][j] = r[i + M][j + M] = h[i][j].real();
      r[i + M][j] = h[i][j].imag();
      r[i][j + M] = -h[i][j].imag();
    }
  return r;
}

inline std::array<double, 4> hermitian_eigenvalues(const C4& h) {
  std::array<double, 8> w{};
  Real<8> v{};
  jacobi<8>(embed<4>(h), w, v);
  std::sort(w.begin(), w.end());
  return {w[0], w[2], w[4], w[6]};
}

// f(H) via the spectral decomposition of the embedding.
inline C4 hermitian_function(const C4& h, const std::function<double(double)>& f) {
  std::array<double, 8> w{};
  Real<8> v{};
  jacobi<8>(embed<4>(h), w, v);
  C4 out{};
  for (int k = 0; k < 8; ++k) {
    std::array<cd, 4> z{};
    for (int i = 0; i < 4; ++i) z[i] = cd(v[i][k], v[i + 4][k]);
    const double fk = 0.5 * f(w[k]);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) out[i][j] += fk * z[i] * std::conj(z[j]);
  }
  return out;
}

// Singular values (descending) from the spectrum of [[0, A], [A^dag, 0]].
inline std::array<double, 4> singular_values(const C4& a) {
  std::array<std::array<cd, 8>, 8> h{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      h[i][j + 4] = a[i][j];
      h[j + 4][i] = std::conj(a[i][j]);
    }
  std::array<double, 16> w{};
  Real<16> v{};
  jacobi<16>(embed<8>(h), w, v);
  std::sort(w.begin(), w.end(), std::greater<>());
  return {w[0], w[2], w[4], w[6]};
}

// Wootters: lambda_i are the singular values of sqrt(rho) YY conj(sqrt(rho)).
inline double concurrence(const tbent::Matrix4c& rho_e) {
  const C4 rho = from_eigen(rho_e);
  const C4 root = hermitian_function(rho, [](double x) { return std::sqrt(std::max(x, 0.0)); });
  // sigma_y (x) sigma_y: (0,3)=-1, (1,2)=1, (2,1)=1, (3,0)=-1.
  C4 yy{};
  yy[0][3] = -1.0;
  yy[1][2] = 1.0;
  yy[2][1] = 1.0;
  yy[3][0] = -1.0;
  C4 root_conj{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) root_conj[i][j] = std::conj(root[i][j]);
  const auto l = singular_values(mul(mul(root, yy), root_conj));
  return std::max(0.0, l[0] - l[1] - l[2] - l[3]);
}

// Element magnitudes of a reconstructed two-photon time-bin state, taken as
// real and non-negative; diagonal renormalized to unit trace.
inline tbent::Matrix4c abs_completion_state() {
  const double a[4][4] = {{50.9, 1.7, 1.8, 44.5}, {1.7, 0.3, 0.17, 2.5}, {1.8, 0.17, 0.21, 1.4}, {44.5, 2.5, 1.4, 48.6}};
  tbent::Matrix4c m;
  double tr = 0.0;
  for (int i = 0; i < 4; ++i) tr += a[i][i];
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) m(i, j) = a[i][j] / tr;
  return m;
}

// Haar-ish random mixed state: G G^dag / tr with Gaussian G.
inline tbent::Matrix4c random_state(std::mt19937_64& rng, int rank = 4) {
  std::normal_distribution<double> n;
  Eigen::Matrix<tbent::Complex, 4, Eigen::Dynamic> g(4, rank);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < rank; ++j) g(i, j) = tbent::Complex(n(rng), n(rng));
  tbent::Matrix4c m = g * g.adjoint();
  m = 0.5 * (m + m.adjoint()).eval();
  return m / m.trace().real();
}

inline tbent::Matrix2c random_unitary(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  tbent::Matrix2c g;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) g(i, j) = tbent::Complex(n(rng), n(rng));
  Eigen::HouseholderQR<tbent::Matrix2c> qr(g);
  return qr.householderQ() * tbent::Matrix2c::Identity();
}

}  // namespace oracle
