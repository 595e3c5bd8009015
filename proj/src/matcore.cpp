#include "psme/matcore.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

namespace psme {

namespace {

void require_same_dim(const ComplexMatrix& a, const ComplexMatrix& b, const char* op) {
  if (a.dim() != b.dim()) {
    throw DimensionError(std::string(op) + ": dimension mismatch (" +
                         std::to_string(a.dim()) + " vs " + std::to_string(b.dim()) + ")");
  }
}

}  // namespace

ComplexMatrix::ComplexMatrix(std::size_t n) : n_(n), data_(n * n, Complex{}) {
  if (n == 0) throw DimensionError("ComplexMatrix: dimension must be >= 1");
}

ComplexMatrix ComplexMatrix::identity(std::size_t n) {
  ComplexMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

ComplexMatrix ComplexMatrix::diagonal(std::span<const Complex> d) {
  ComplexMatrix m(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

ComplexMatrix ComplexMatrix::diagonal(std::initializer_list<Complex> d) {
  return diagonal(std::span<const Complex>(d.begin(), d.size()));
}

ComplexMatrix ComplexMatrix::from_rows(
    std::initializer_list<std::initializer_list<Complex>> rows) {
  const std::size_t n = rows.size();
  ComplexMatrix m(n);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != n) throw DimensionError("from_rows: matrix must be square");
    std::size_t j = 0;
    for (const auto& v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

ComplexMatrix& ComplexMatrix::operator+=(const ComplexMatrix& o) {
  require_same_dim(*this, o, "operator+=");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
  return *this;
}

ComplexMatrix& ComplexMatrix::operator-=(const ComplexMatrix& o) {
  require_same_dim(*this, o, "operator-=");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
  return *this;
}

ComplexMatrix& ComplexMatrix::operator*=(Complex s) noexcept {
  for (auto& v : data_) v *= s;
  return *this;
}

double ComplexMatrix::max_abs() const noexcept {
  double m = 0.0;
  for (const auto& v : data_) m = std::max(m, std::abs(v));
  return m;
}

double ComplexMatrix::norm() const noexcept {
  double s = 0.0;
  for (const auto& v : data_) s += std::norm(v);
  return std::sqrt(s);
}

bool ComplexMatrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](const Complex& v) {
    return std::isfinite(v.real()) && std::isfinite(v.imag());
  });
}

ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix& b) { return a += b; }
ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix& b) { return a -= b; }
ComplexMatrix operator-(ComplexMatrix a) { return a *= -1.0; }
ComplexMatrix operator*(ComplexMatrix a, Complex s) { return a *= s; }
ComplexMatrix operator*(Complex s, ComplexMatrix a) { return a *= s; }
ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b) { return matmul(a, b); }

ComplexMatrix matmul(const ComplexMatrix& a, const ComplexMatrix& b) {
  require_same_dim(a, b, "matmul");
  const std::size_t n = a.dim();
  ComplexMatrix c(n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < n; ++k) {
      const Complex bkj = b(k, j);
      if (bkj == Complex{}) continue;
      for (std::size_t i = 0; i < n; ++i) c(i, j) += a(i, k) * bkj;
    }
  }
  return c;
}

ComplexMatrix adjoint(const ComplexMatrix& a) {
  const std::size_t n = a.dim();
  ComplexMatrix t(n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i) t(j, i) = std::conj(a(i, j));
  return t;
}

ComplexMatrix transpose(const ComplexMatrix& a) {
  const std::size_t n = a.dim();
  ComplexMatrix t(n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i) t(j, i) = a(i, j);
  return t;
}

Complex trace(const ComplexMatrix& a) noexcept {
  Complex s{};
  for (std::size_t i = 0; i < a.dim(); ++i) s += a(i, i);
  return s;
}

double max_abs_diff(const ComplexMatrix& a, const ComplexMatrix& b) {
  require_same_dim(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t k = 0; k < a.data().size(); ++k)
    m = std::max(m, std::abs(a.data()[k] - b.data()[k]));
  return m;
}

bool approx_equal(const ComplexMatrix& a, const ComplexMatrix& b, double abs_tol) {
  return a.dim() == b.dim() && max_abs_diff(a, b) <= abs_tol;
}

ComplexMatrix expm(const ComplexMatrix& a, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("expm: tol must be positive");
  if (!a.all_finite()) throw Error("expm: non-finite entries");
  const std::size_t n = a.dim();

  // Scale so that ||a / 2^s||_1 <= 1/2; the Taylor tail is then bounded by
  // the first omitted term.
  double norm1 = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < n; ++i) col += std::abs(a(i, j));
    norm1 = std::max(norm1, col);
  }
  int squarings = 0;
  if (norm1 > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm1 / 0.5)));
  const ComplexMatrix scaled = a * Complex(std::ldexp(1.0, -squarings));

  // Relative error grows by at most 2^s through the squaring phase.
  const double eps = std::numeric_limits<double>::epsilon();
  const double stop = std::min(tol, eps) * std::ldexp(1.0, -squarings);

  ComplexMatrix result = ComplexMatrix::identity(n);
  ComplexMatrix term = ComplexMatrix::identity(n);
  for (int k = 1; k <= 40; ++k) {
    term = term * scaled;
    term *= 1.0 / k;
    result += term;
    const double tn = term.max_abs();
    if (tn == 0.0 || tn <= stop * std::max(1.0, result.max_abs())) break;
  }
  for (int s = 0; s < squarings; ++s) result = result * result;
  if (!result.all_finite()) throw Error("expm: overflow");
  return result;
}

ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  const std::size_t na = a.dim();
  const std::size_t nb = b.dim();
  ComplexMatrix k(na * nb);
  for (std::size_t ja = 0; ja < na; ++ja)
    for (std::size_t ia = 0; ia < na; ++ia) {
      const Complex s = a(ia, ja);
      if (s == Complex{}) continue;
      for (std::size_t jb = 0; jb < nb; ++jb)
        for (std::size_t ib = 0; ib < nb; ++ib)
          k(ia * nb + ib, ja * nb + jb) = s * b(ib, jb);
    }
  return k;
}

VecColumn vec(const ComplexMatrix& a) {
  return VecColumn{{a.data().begin(), a.data().end()}};
}

ComplexMatrix unvec(const VecColumn& v, std::size_t n) {
  if (v.length() != n * n) {
    throw DimensionError("unvec: length " + std::to_string(v.length()) +
                         " is not " + std::to_string(n) + "^2");
  }
  ComplexMatrix m(n);
  std::copy(v.entries.begin(), v.entries.end(), m.data().begin());
  return m;
}

VecColumn matvec(const ComplexMatrix& m, const VecColumn& v) {
  const std::size_t n = m.dim();
  if (v.length() != n) throw DimensionError("matvec: length mismatch");
  VecColumn out{std::vector<Complex>(n)};
  for (std::size_t j = 0; j < n; ++j) {
    const Complex vj = v.entries[j];
    for (std::size_t i = 0; i < n; ++i) out.entries[i] += m(i, j) * vj;
  }
  return out;
}

VecColumn solve_linear(const ComplexMatrix& m, const VecColumn& rhs) {
  const std::size_t n = m.dim();
  if (rhs.length() != n) throw DimensionError("solve_linear: rhs length mismatch");
  if (!m.all_finite()) throw Error("solve_linear: non-finite matrix");

  ComplexMatrix lu = m;
  std::vector<Complex> x = rhs.entries;
  const double scale = std::max(m.max_abs(), std::numeric_limits<double>::min());
  const double pivot_floor =
      static_cast<double>(n) * std::numeric_limits<double>::epsilon() * scale;

  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    double best = std::abs(lu(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      const double v = std::abs(lu(i, k));
      if (v > best) {
        best = v;
        p = i;
      }
    }
    if (best <= pivot_floor) {
      throw SingularMatrixError(
          "solve_linear: matrix is singular to working precision (pivot " +
              std::to_string(best) + ")",
          best);
    }
    if (p != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(lu(k, j), lu(p, j));
      std::swap(x[k], x[p]);
    }
    const Complex inv_pivot = 1.0 / lu(k, k);
    for (std::size_t i = k + 1; i < n; ++i) {
      const Complex f = lu(i, k) * inv_pivot;
      if (f == Complex{}) continue;
      for (std::size_t j = k + 1; j < n; ++j) lu(i, j) -= f * lu(k, j);
      x[i] -= f * x[k];
    }
  }
  for (std::size_t k = n; k-- > 0;) {
    Complex s = x[k];
    for (std::size_t j = k + 1; j < n; ++j) s -= lu(k, j) * x[j];
    x[k] = s / lu(k, k);
  }
  return VecColumn{std::move(x)};
}

double hermiticity_residual(const ComplexMatrix& a) {
  double r = 0.0;
  for (std::size_t j = 0; j < a.dim(); ++j)
    for (std::size_t i = 0; i <= j; ++i)
      r = std::max(r, std::abs(a(i, j) - std::conj(a(j, i))));
  return r;
}

bool is_hermitian(const ComplexMatrix& a) {
  return hermiticity_residual(a) <= 1e-9 * (1.0 + a.max_abs());
}

ComplexMatrix hermitian_part(const ComplexMatrix& a) {
  const std::size_t n = a.dim();
  ComplexMatrix h(n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i) h(i, j) = 0.5 * (a(i, j) + std::conj(a(j, i)));
  return h;
}

double min_eigenvalue_hermitian(const ComplexMatrix& a) {
  if (!is_hermitian(a)) {
    throw Error("min_eigenvalue_hermitian: matrix is not Hermitian (residual " +
                std::to_string(hermiticity_residual(a)) + ")");
  }
  const ComplexMatrix h = hermitian_part(a);
  const std::size_t n = h.dim();
  if (n == 1) return h(0, 0).real();
  if (n == 2) {
    // Closed form for the qubit case, which dominates the validity checks.
    const double p = 0.5 * (h(0, 0).real() + h(1, 1).real());
    const double q = 0.5 * (h(0, 0).real() - h(1, 1).real());
    return p - std::hypot(q, std::abs(h(0, 1)));
  }
  Eigen::MatrixXcd em(n, n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i)
      em(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = h(i, j);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(em, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw Error("min_eigenvalue_hermitian: eigensolver failed");
  return solver.eigenvalues().minCoeff();
}

ComplexMatrix project_to_density(const ComplexMatrix& a) {
  const ComplexMatrix h = hermitian_part(a);
  const std::size_t n = h.dim();
  Eigen::MatrixXcd em(n, n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i)
      em(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = h(i, j);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(em);
  if (solver.info() != Eigen::Success) throw Error("project_to_density: eigensolver failed");
  Eigen::VectorXd w = solver.eigenvalues().cwiseMax(0.0);
  const double total = w.sum();
  if (!(total > 0.0)) throw Error("project_to_density: no positive eigenvalue");
  w /= total;
  const Eigen::MatrixXcd v = solver.eigenvectors();
  const Eigen::MatrixXcd rho = v * w.cast<Complex>().asDiagonal() * v.adjoint();
  ComplexMatrix out(n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i)
      out(i, j) = rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return hermitian_part(out);
}

ComplexMatrix enforce_positivity(const ComplexMatrix& a) {
  if (min_eigenvalue_hermitian(hermitian_part(a)) >= 0.0) return a;
  const double tr = trace(a).real();
  if (!(tr > 0.0)) throw Error("enforce_positivity: trace must be positive");
  return tr * project_to_density(a);
}

}  // namespace psme
