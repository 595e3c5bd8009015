#include <doctest.h>

#include <cmath>
#include <numbers>

#include "psme/model.hpp"
#include "psme/traj.hpp"
#include "support.hpp"

using namespace psme;
using psme::testing::Rng;

TEST_CASE("Pauli algebra") {
  const auto& p = pauli();
  const ComplexMatrix id = ComplexMatrix::identity(2);
  CHECK(max_abs_diff(p.sigma_x * p.sigma_x, id) == 0.0);
  CHECK(max_abs_diff(p.sigma_y * p.sigma_y, id) == 0.0);
  CHECK(max_abs_diff(p.sigma_z * p.sigma_z, id) == 0.0);
  CHECK(max_abs_diff(p.sigma_x * p.sigma_y, kI * p.sigma_z) == 0.0);
  CHECK(max_abs_diff(p.sigma, 0.5 * (p.sigma_x - kI * p.sigma_y)) == 0.0);
  CHECK(max_abs_diff(p.sigma * p.sigma, ComplexMatrix(2)) == 0.0);
}

TEST_CASE("diffusion model derived operators") {
  Rng rng(1);
  const ComplexMatrix h = testing::random_hermitian(rng, 3);
  const ComplexMatrix l = testing::random_matrix(rng, 3);
  const DiffusionModel m = build_diffusion_model(h, l, 0.64);
  CHECK(max_abs_diff(m.k(), kI * h + 0.5 * adjoint(l) * l) < 1e-15);
  CHECK(m.kappa() == doctest::Approx(1.25).epsilon(1e-15));
  CHECK(m.dim() == 3);
}

TEST_CASE("diffusion model validation") {
  const ComplexMatrix h = pauli().sigma_z;
  const ComplexMatrix l = pauli().sigma;
  CHECK_THROWS_AS(build_diffusion_model(h, l, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(build_diffusion_model(h, l, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(build_diffusion_model(pauli().sigma, l, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(build_diffusion_model(h, ComplexMatrix(3), 1.0), std::invalid_argument);
  CHECK_NOTHROW(build_diffusion_model(h, l, 1.0));
}

TEST_CASE("two-level model operators") {
  const double alpha = 7.0 / std::numbers::sqrt2;
  const DiffusionModel m = two_level_model(1.0, alpha, 0.3, 0.0, 0.85);
  const ComplexMatrix h = ComplexMatrix::from_rows({{0.15, alpha / 2}, {alpha / 2, -0.15}});
  CHECK(max_abs_diff(m.hamiltonian(), h) < 1e-15);
  CHECK(max_abs_diff(m.coupling(), pauli().sigma) == 0.0);
  const DiffusionModel q = two_level_model(4.0, alpha, 0.0, std::numbers::pi / 2, 1.0);
  CHECK(max_abs_diff(q.coupling(), -2.0 * kI * pauli().sigma) < 1e-15);
  CHECK_THROWS_AS(two_level_model(0.0, alpha, 0.0, 0.0, 0.85), std::invalid_argument);
}

TEST_CASE("measured quadrature: x for phi = 0, -y for phi = pi/2") {
  Rng rng(2);
  const double gamma = 2.0;
  const DiffusionModel m0 = two_level_model(gamma, 1.0, 0.0, 0.0, 0.85);
  const DiffusionModel m1 = two_level_model(gamma, 1.0, 0.0, std::numbers::pi / 2, 0.85);
  for (int c = 0; c < 50; ++c) {
    const ComplexMatrix rho = testing::random_density(rng, 2);
    const BlochVector b = bloch_from_rho(rho);
    CHECK(expected_measurement(rho, m0.coupling()) == doctest::Approx(std::sqrt(gamma) * b.x).epsilon(1e-12));
    CHECK(expected_measurement(rho, m1.coupling()) == doctest::Approx(-std::sqrt(gamma) * b.y).epsilon(1e-12));
  }
  CHECK(expected_measurement(rho_from_bloch({1, 0, 0}), m0.coupling()) == doctest::Approx(std::sqrt(gamma)));
}

TEST_CASE("Bloch conversions") {
  const ComplexMatrix rho0 = ComplexMatrix::from_rows({{0.5, 0.5}, {0.5, 0.5}});
  const BlochVector b = bloch_from_rho(rho0);
  CHECK(b.x == doctest::Approx(1.0));
  CHECK(b.y == doctest::Approx(0.0));
  CHECK(b.z == doctest::Approx(0.0));
  CHECK(max_abs_diff(rho_from_bloch({1, 0, 0}), rho0) < 1e-15);

  Rng rng(3);
  for (int c = 0; c < 50; ++c) {
    const ComplexMatrix rho = testing::random_density(rng, 2);
    const BlochVector v = bloch_from_rho(rho);
    CHECK(v.norm() <= 1.0 + 1e-12);
    CHECK(max_abs_diff(rho_from_bloch(v), rho) < 1e-14);
    // Purity of a qubit is (1 + |b|^2) / 2.
    CHECK(purity(rho) == doctest::Approx(0.5 * (1.0 + v.norm() * v.norm())).epsilon(1e-12));
  }
  CHECK_THROWS_AS(rho_from_bloch({1.0, 0.1, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(bloch_from_rho(ComplexMatrix::identity(2)), std::invalid_argument);
  CHECK_THROWS_AS(bloch_from_rho(ComplexMatrix::identity(3)), DimensionError);
}

TEST_CASE("jump model derived operators") {
  Rng rng(4);
  const ComplexMatrix c = testing::random_matrix(rng, 3);
  const ComplexMatrix e = testing::random_hermitian(rng, 3);
  const double lambda = 0.7;
  const JumpModel m = build_jump_model(c, e, lambda, 0.9);
  CHECK(max_abs_diff(m.g(), 0.5 * lambda * adjoint(c) * c + kI * e) < 1e-15);
  CHECK(max_abs_diff(m.hamiltonian(), e + (0.5 * lambda * kI) * (c - adjoint(c))) < 1e-15);
  CHECK(is_hermitian(m.hamiltonian()));
  CHECK(m.jump_operator_invertible());
  CHECK(max_abs_diff(m.jump_operator_inverse() * c, ComplexMatrix::identity(3)) < 1e-12);
  const ComplexMatrix rho = testing::random_density(rng, 3);
  CHECK(max_abs_diff(m.apply_jump(rho), c * rho * adjoint(c)) < 1e-15);
  CHECK(max_abs_diff(m.equivalent_lindblad_coupling(), std::sqrt(lambda) * (c - ComplexMatrix::identity(3))) <
        1e-15);
}

TEST_CASE("jump model validation and singular C") {
  const ComplexMatrix e(2);
  CHECK_THROWS_AS(build_jump_model(pauli().sigma_x, e, 0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(build_jump_model(pauli().sigma_x, e, 1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(build_jump_model(pauli().sigma_x, pauli().sigma, 1.0, 1.0), std::invalid_argument);
  const JumpModel s = build_jump_model(pauli().sigma, e, 1.0, 1.0);
  CHECK_FALSE(s.jump_operator_invertible());
  CHECK_THROWS(s.jump_operator_inverse());
}

TEST_CASE("property: averaged jump drift equals the Lindblad generator with L = sqrt(lambda)(C - I)") {
  // -G rho - rho G^dagger + lambda C rho C^dagger == -i[H, rho] + L rho L^dagger - {L^dagger L, rho}/2
  Rng rng(5);
  for (int c = 0; c < 50; ++c) {
    const std::size_t n = rng.index(2, 3);
    const JumpModel m = build_jump_model(testing::random_matrix(rng, n), testing::random_hermitian(rng, n),
                                         rng.uniform(0.1, 3.0), 1.0);
    const ComplexMatrix rho = testing::random_density(rng, n);
    const ComplexMatrix g_rho = m.g() * rho;
    const ComplexMatrix averaged = -g_rho - adjoint(g_rho) + m.lambda() * m.apply_jump(rho);
    const ComplexMatrix lindblad = master_rhs(m.hamiltonian(), m.equivalent_lindblad_coupling(), rho);
    CHECK(max_abs_diff(averaged, lindblad) < 1e-12);
  }
}

TEST_CASE("expected_measurement rejects a non-Hermitian argument") {
  const ComplexMatrix bad = ComplexMatrix::from_rows({{0.5, kI}, {0.0, 0.5}});
  CHECK_THROWS(expected_measurement(bad, pauli().sigma));
}
