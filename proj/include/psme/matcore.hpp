#pragma once

// Dense complex linear algebra for small operator spaces.
//
// Matrices are square and stored column-major, so that vec() is a plain copy
// of the storage and vec/unvec round-trip bit-for-bit.

#include <complex>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/container/small_vector.hpp>

namespace psme {

using Complex = std::complex<double>;

inline constexpr Complex kI{0.0, 1.0};

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Raised by solve_linear when a pivot vanishes to working precision.
class SingularMatrixError : public Error {
 public:
  SingularMatrixError(const std::string& what, double pivot)
      : Error(what), pivot_(pivot) {}
  double pivot() const noexcept { return pivot_; }

 private:
  double pivot_;
};

/// Raised when an integrator produces NaN/Inf or a collapsed state.
class NumericalFailure : public Error {
 public:
  NumericalFailure(const std::string& what, double time)
      : Error(what + " (t=" + std::to_string(time) + ")"), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

class ComplexMatrix {
 public:
  // Inline capacity covers every 2x2 operator and the 4x4 vectorized system.
  using Storage = boost::container::small_vector<Complex, 16>;

  /// Zero matrix of dimension n (n >= 1).
  explicit ComplexMatrix(std::size_t n);

  static ComplexMatrix zeros(std::size_t n) { return ComplexMatrix(n); }
  static ComplexMatrix identity(std::size_t n);
  static ComplexMatrix diagonal(std::span<const Complex> d);
  static ComplexMatrix diagonal(std::initializer_list<Complex> d);
  /// Row-major literal, e.g. from_rows({{0, 1}, {1, 0}}).
  static ComplexMatrix from_rows(
      std::initializer_list<std::initializer_list<Complex>> rows);

  std::size_t dim() const noexcept { return n_; }

  Complex& operator()(std::size_t row, std::size_t col) noexcept {
    return data_[col * n_ + row];
  }
  const Complex& operator()(std::size_t row, std::size_t col) const noexcept {
    return data_[col * n_ + row];
  }

  /// Column-major entries.
  std::span<const Complex> data() const noexcept { return {data_.data(), data_.size()}; }
  std::span<Complex> data() noexcept { return {data_.data(), data_.size()}; }

  ComplexMatrix& operator+=(const ComplexMatrix& o);
  ComplexMatrix& operator-=(const ComplexMatrix& o);
  ComplexMatrix& operator*=(Complex s) noexcept;

  /// Largest entry modulus.
  double max_abs() const noexcept;
  /// Frobenius norm.
  double norm() const noexcept;
  bool all_finite() const noexcept;

 private:
  std::size_t n_;
  Storage data_;
};

ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix& b);
ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix& b);
ComplexMatrix operator-(ComplexMatrix a);
ComplexMatrix operator*(ComplexMatrix a, Complex s);
ComplexMatrix operator*(Complex s, ComplexMatrix a);
ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b);

/// Column vector produced by vec(); length n^2 for an n x n source.
struct VecColumn {
  std::vector<Complex> entries;

  std::size_t length() const noexcept { return entries.size(); }
};

ComplexMatrix matmul(const ComplexMatrix& a, const ComplexMatrix& b);
ComplexMatrix adjoint(const ComplexMatrix& a);
/// Plain transpose, no conjugation.
ComplexMatrix transpose(const ComplexMatrix& a);
Complex trace(const ComplexMatrix& a) noexcept;

/// a - b measured entrywise.
double max_abs_diff(const ComplexMatrix& a, const ComplexMatrix& b);
bool approx_equal(const ComplexMatrix& a, const ComplexMatrix& b, double abs_tol);

inline constexpr double kDefaultExpmTol = 1e-12;

/// Matrix exponential by scaling and squaring around a Taylor core.
/// Nilpotent arguments give the truncated series exactly.
ComplexMatrix expm(const ComplexMatrix& a, double tol = kDefaultExpmTol);

ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b);

VecColumn vec(const ComplexMatrix& a);
ComplexMatrix unvec(const VecColumn& v, std::size_t n);
VecColumn matvec(const ComplexMatrix& m, const VecColumn& v);

/// Dense LU with partial pivoting. Throws SingularMatrixError.
VecColumn solve_linear(const ComplexMatrix& m, const VecColumn& rhs);

/// Relative backward tolerance guaranteed by solve_linear on well conditioned input.
inline constexpr double kSolveResidualTol = 1e-10;

/// ||a - a^dagger||_max <= 1e-9 (1 + ||a||_max)
bool is_hermitian(const ComplexMatrix& a);
double hermiticity_residual(const ComplexMatrix& a);
/// (a + a^dagger) / 2
ComplexMatrix hermitian_part(const ComplexMatrix& a);

/// Smallest eigenvalue of (a + a^dagger)/2. Throws if a is not Hermitian.
double min_eigenvalue_hermitian(const ComplexMatrix& a);

/// Density matrix obtained by clipping the negative eigenvalues of the
/// Hermitian part of `a` to zero and rescaling to unit trace. Throws if no
/// positive eigenvalue remains.
ComplexMatrix project_to_density(const ComplexMatrix& a);

/// Returns `a` unchanged when its Hermitian part is positive semidefinite,
/// otherwise tr(a) * project_to_density(a). `a` must have positive trace.
ComplexMatrix enforce_positivity(const ComplexMatrix& a);

}  // namespace psme
