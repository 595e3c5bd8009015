#include "psme/model.hpp"

#include <cmath>
#include <stdexcept>

namespace psme {

namespace {

void require_efficiency(double eta) {
  if (!(eta > 0.0 && eta <= 1.0)) {
    throw std::invalid_argument("eta must lie in (0, 1], got " + std::to_string(eta));
  }
}

std::optional<ComplexMatrix> try_inverse(const ComplexMatrix& c) {
  const std::size_t n = c.dim();
  ComplexMatrix inv(n);
  try {
    for (std::size_t j = 0; j < n; ++j) {
      VecColumn e{std::vector<Complex>(n)};
      e.entries[j] = 1.0;
      const VecColumn col = solve_linear(c, e);
      for (std::size_t i = 0; i < n; ++i) inv(i, j) = col.entries[i];
    }
  } catch (const SingularMatrixError&) {
    return std::nullopt;
  }
  return inv;
}

}  // namespace

DiffusionModel build_diffusion_model(ComplexMatrix h, ComplexMatrix l, double eta) {
  if (h.dim() != l.dim()) throw std::invalid_argument("H and L dimensions differ");
  if (!is_hermitian(h)) throw std::invalid_argument("H must be Hermitian");
  require_efficiency(eta);
  ComplexMatrix k = kI * h + 0.5 * (adjoint(l) * l);
  const double kappa = 1.0 / std::sqrt(eta);
  return DiffusionModel(std::move(h), std::move(l), std::move(k), eta, kappa);
}

JumpModel build_jump_model(ComplexMatrix c, ComplexMatrix e, double lambda, double eta) {
  if (c.dim() != e.dim()) throw std::invalid_argument("C and E dimensions differ");
  if (!is_hermitian(e)) throw std::invalid_argument("E must be Hermitian");
  if (!(lambda > 0.0)) {
    throw std::invalid_argument("lambda must be positive, got " + std::to_string(lambda));
  }
  require_efficiency(eta);

  JumpModel m;
  m.c_dag_ = adjoint(c);
  m.g_ = (0.5 * lambda) * (m.c_dag_ * c) + kI * e;
  m.h_ = e + Complex(0.0, 0.5 * lambda) * (c - m.c_dag_);
  m.c_inv_ = try_inverse(c);
  m.c_ = std::move(c);
  m.e_ = std::move(e);
  m.lambda_ = lambda;
  m.eta_ = eta;
  return m;
}

const ComplexMatrix& JumpModel::jump_operator_inverse() const {
  if (!c_inv_) throw Error("jump operator C is not invertible");
  return *c_inv_;
}

ComplexMatrix JumpModel::apply_jump(const ComplexMatrix& rho) const { return c_ * rho * c_dag_; }

ComplexMatrix JumpModel::equivalent_lindblad_coupling() const {
  return std::sqrt(lambda_) * (c_ - ComplexMatrix::identity(dim()));
}

const PauliSet& pauli() {
  static const PauliSet set{
      ComplexMatrix::from_rows({{0.0, 1.0}, {1.0, 0.0}}),
      ComplexMatrix::from_rows({{0.0, -kI}, {kI, 0.0}}),
      ComplexMatrix::from_rows({{1.0, 0.0}, {0.0, -1.0}}),
      ComplexMatrix::from_rows({{0.0, 0.0}, {1.0, 0.0}}),
  };
  return set;
}

double BlochVector::norm() const noexcept { return std::sqrt(x * x + y * y + z * z); }

BlochVector bloch_from_rho(const ComplexMatrix& rho) {
  if (rho.dim() != 2) throw DimensionError("bloch_from_rho: rho must be 2x2");
  if (std::abs(trace(rho) - 1.0) > 1e-6) {
    throw std::invalid_argument("bloch_from_rho: trace differs from 1");
  }
  if (!is_hermitian(rho)) throw std::invalid_argument("bloch_from_rho: rho is not Hermitian");
  const auto& p = pauli();
  return {trace(rho * p.sigma_x).real(), trace(rho * p.sigma_y).real(),
          trace(rho * p.sigma_z).real()};
}

ComplexMatrix rho_from_bloch(const BlochVector& b) {
  if (b.norm() > 1.0 + 1e-12) throw std::invalid_argument("rho_from_bloch: |b| > 1");
  const auto& p = pauli();
  ComplexMatrix rho = ComplexMatrix::identity(2);
  rho += b.x * p.sigma_x;
  rho += b.y * p.sigma_y;
  rho += b.z * p.sigma_z;
  rho *= 0.5;
  return rho;
}

DiffusionModel two_level_model(double gamma, double alpha, double detuning, double phi,
                               double eta) {
  if (!(gamma > 0.0)) {
    throw std::invalid_argument("gamma must be positive, got " + std::to_string(gamma));
  }
  const auto& p = pauli();
  ComplexMatrix h = (0.5 * alpha) * p.sigma_x + (0.5 * detuning) * p.sigma_z;
  ComplexMatrix l = (std::sqrt(gamma) * std::polar(1.0, -phi)) * p.sigma;
  return build_diffusion_model(std::move(h), std::move(l), eta);
}

double expected_measurement(const ComplexMatrix& rho, const ComplexMatrix& l) {
  const Complex m = trace((l + adjoint(l)) * rho);
  if (std::abs(m.imag()) > 1e-9) {
    throw Error("expected_measurement: imaginary residue " + std::to_string(m.imag()) +
                " indicates a corrupted state");
  }
  return m.real();
}

double purity(const ComplexMatrix& rho) { return trace(rho * rho).real(); }

}  // namespace psme
