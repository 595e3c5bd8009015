#pragma once

// Shared test fixtures: seeded random operators and states, and independent
// reference implementations built on Eigen.

#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "psme/matcore.hpp"
#include "psme/model.hpp"

namespace psme::testing {

using EigenMatrix = Eigen::MatrixXcd;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  std::size_t index(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(engine_);
  }
  Complex complex_normal() { return {normal(), normal()}; }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

inline ComplexMatrix random_matrix(Rng& rng, std::size_t n, double scale = 1.0) {
  ComplexMatrix m(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m(i, j) = scale * rng.complex_normal();
  return m;
}

inline ComplexMatrix random_hermitian(Rng& rng, std::size_t n, double scale = 1.0) {
  return hermitian_part(random_matrix(rng, n, scale));
}

/// G G^dagger / tr, full rank almost surely.
inline ComplexMatrix random_density(Rng& rng, std::size_t n) {
  const ComplexMatrix g = random_matrix(rng, n);
  ComplexMatrix rho = g * adjoint(g);
  rho *= 1.0 / trace(rho).real();
  return hermitian_part(rho);
}

inline ComplexMatrix random_pure(Rng& rng, std::size_t n) {
  std::vector<Complex> v(n);
  double norm2 = 0.0;
  for (auto& c : v) {
    c = rng.complex_normal();
    norm2 += std::norm(c);
  }
  ComplexMatrix rho(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) rho(i, j) = v[i] * std::conj(v[j]) / norm2;
  return rho;
}

inline EigenMatrix to_eigen(const ComplexMatrix& m) {
  EigenMatrix e(m.dim(), m.dim());
  for (std::size_t i = 0; i < m.dim(); ++i)
    for (std::size_t j = 0; j < m.dim(); ++j) e(i, j) = m(i, j);
  return e;
}

inline ComplexMatrix from_eigen(const EigenMatrix& e) {
  ComplexMatrix m(static_cast<std::size_t>(e.rows()));
  for (Eigen::Index i = 0; i < e.rows(); ++i)
    for (Eigen::Index j = 0; j < e.cols(); ++j) m(i, j) = e(i, j);
  return m;
}

/// Pade-based exponential from Eigen's MatrixFunctions module.
inline ComplexMatrix reference_expm(const ComplexMatrix& a) {
  return from_eigen(to_eigen(a).exp());
}

/// Smallest eigenvalue of the Hermitian part through Eigen's self-adjoint solver.
inline double reference_min_eigenvalue(const ComplexMatrix& a) {
  const EigenMatrix h = to_eigen(hermitian_part(a));
  return Eigen::SelfAdjointEigenSolver<EigenMatrix>(h, Eigen::EigenvaluesOnly).eigenvalues()(0);
}

/// Entrywise Kronecker definition: (A kron B)[i p + k, j p + l] = A[i, j] B[k, l].
inline ComplexMatrix reference_kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  const std::size_t p = b.dim();
  ComplexMatrix out(a.dim() * p);
  for (std::size_t i = 0; i < a.dim(); ++i)
    for (std::size_t j = 0; j < a.dim(); ++j)
      for (std::size_t k = 0; k < p; ++k)
        for (std::size_t l = 0; l < p; ++l) out(i * p + k, j * p + l) = a(i, j) * b(k, l);
  return out;
}

/// Worst deviation of a density matrix from the physical constraints.
struct StateAudit {
  std::size_t count = 0;
  double max_trace_error = 0.0;
  double max_hermiticity = 0.0;
  double min_eigenvalue = 1.0;
  double max_bloch_norm = 0.0;
  double max_purity = 0.0;

  void add(const ComplexMatrix& rho) {
    ++count;
    max_trace_error = std::max(max_trace_error, std::abs(trace(rho) - 1.0));
    max_hermiticity = std::max(max_hermiticity, hermiticity_residual(rho));
    min_eigenvalue = std::min(min_eigenvalue, reference_min_eigenvalue(rho));
    max_purity = std::max(max_purity, purity(hermitian_part(rho)));
    if (rho.dim() == 2) max_bloch_norm = std::max(max_bloch_norm, bloch_from_rho(rho).norm());
  }
  void add_bloch(const BlochVector& b) {
    max_bloch_norm = std::max(max_bloch_norm, b.norm());
  }
  bool ok() const {
    return max_trace_error <= 1e-9 && max_hermiticity <= 1e-9 && min_eigenvalue >= -1e-7 &&
           max_bloch_norm <= 1.0 + 1e-9 && max_purity <= 1.0 + 1e-9;
  }
};

}  // namespace psme::testing
