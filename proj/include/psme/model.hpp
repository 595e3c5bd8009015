#pragma once

#include <optional>

#include "psme/matcore.hpp"

namespace psme {

/// Homodyne-monitored system: Hamiltonian H, coupling L, detection efficiency eta.
/// Derived: K = iH + L^dagger L / 2 and kappa = eta^{-1/2}.
class DiffusionModel {
 public:
  const ComplexMatrix& hamiltonian() const noexcept { return h_; }
  const ComplexMatrix& coupling() const noexcept { return l_; }
  const ComplexMatrix& k() const noexcept { return k_; }
  double eta() const noexcept { return eta_; }
  double kappa() const noexcept { return kappa_; }
  std::size_t dim() const noexcept { return h_.dim(); }

 private:
  friend DiffusionModel build_diffusion_model(ComplexMatrix, ComplexMatrix, double);
  DiffusionModel(ComplexMatrix h, ComplexMatrix l, ComplexMatrix k, double eta, double kappa)
      : h_(std::move(h)), l_(std::move(l)), k_(std::move(k)), eta_(eta), kappa_(kappa) {}

  ComplexMatrix h_;
  ComplexMatrix l_;
  ComplexMatrix k_;
  double eta_;
  double kappa_;
};

/// Photon-counting system: jump operator C, energy operator E, intensity lambda, efficiency eta.
/// Derived: G = (lambda/2) C^dagger C + iE and H = E + (i lambda/2)(C - C^dagger).
class JumpModel {
 public:
  const ComplexMatrix& jump_operator() const noexcept { return c_; }
  const ComplexMatrix& energy() const noexcept { return e_; }
  const ComplexMatrix& g() const noexcept { return g_; }
  const ComplexMatrix& hamiltonian() const noexcept { return h_; }
  double lambda() const noexcept { return lambda_; }
  double eta() const noexcept { return eta_; }
  std::size_t dim() const noexcept { return c_.dim(); }

  bool jump_operator_invertible() const noexcept { return c_inv_.has_value(); }
  /// C^{-1}; throws if C is singular.
  const ComplexMatrix& jump_operator_inverse() const;

  /// C rho C^dagger
  ComplexMatrix apply_jump(const ComplexMatrix& rho) const;
  /// sqrt(lambda) (C - I): the Lindblad coupling reproducing the averaged dynamics.
  ComplexMatrix equivalent_lindblad_coupling() const;

 private:
  friend JumpModel build_jump_model(ComplexMatrix, ComplexMatrix, double, double);
  JumpModel() = default;

  ComplexMatrix c_{1};
  ComplexMatrix c_dag_{1};
  ComplexMatrix e_{1};
  ComplexMatrix g_{1};
  ComplexMatrix h_{1};
  std::optional<ComplexMatrix> c_inv_;
  double lambda_ = 0.0;
  double eta_ = 1.0;
};

/// Throws std::invalid_argument on non-Hermitian H, eta outside (0, 1] or
/// mismatched dimensions.
DiffusionModel build_diffusion_model(ComplexMatrix h, ComplexMatrix l, double eta);

/// Throws std::invalid_argument on non-Hermitian E, lambda <= 0 or eta outside (0, 1].
JumpModel build_jump_model(ComplexMatrix c, ComplexMatrix e, double lambda, double eta);

struct PauliSet {
  ComplexMatrix sigma_x;
  ComplexMatrix sigma_y;
  ComplexMatrix sigma_z;
  /// Lowering operator [[0, 0], [1, 0]].
  ComplexMatrix sigma;
};

const PauliSet& pauli();

struct BlochVector {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double norm() const noexcept;
};

/// x = tr(rho sigma_x) etc. Requires a 2x2 Hermitian rho with unit trace (1e-6).
BlochVector bloch_from_rho(const ComplexMatrix& rho);
/// (I + x sigma_x + y sigma_y + z sigma_z) / 2. Requires |b| <= 1.
ComplexMatrix rho_from_bloch(const BlochVector& b);

/// Driven two-level atom under homodyne detection:
/// H = (alpha/2) sigma_x + (detuning/2) sigma_z, L = sqrt(gamma) e^{-i phi} sigma.
DiffusionModel two_level_model(double gamma, double alpha, double detuning, double phi,
                               double eta);

/// tr((L + L^dagger) rho). Throws if the imaginary residue exceeds 1e-9.
double expected_measurement(const ComplexMatrix& rho, const ComplexMatrix& l);

/// tr(rho^2)
double purity(const ComplexMatrix& rho);

}  // namespace psme
