#pragma once

// Photon-counting evolutions: record sampling, the normalized and linear jump
// master equations, and the pathwise solution with gauge A = C^{-N}.

#include <cstdint>
#include <vector>

#include "psme/diffusion.hpp"
#include "psme/matcore.hpp"
#include "psme/model.hpp"

namespace psme {

/// Uniformly sampled counting record; counts[n] is dN over (t_n, t_{n+1}] and
/// takes values in {0, 1}.
struct CountingRecord {
  double dt = 0.0;
  std::vector<int> counts;
  double t0 = 0.0;

  std::size_t steps() const noexcept { return counts.size(); }
  double time(std::size_t n) const noexcept { return t0 + static_cast<double>(n) * dt; }
  /// Right end of every interval containing a count.
  std::vector<double> jump_times() const;
  /// N at the grid points t0 .. t_N.
  std::vector<int> cumulative() const;
  void validate() const;
};

/// A = C^{-N} and A^{-1} = C^N, updated at each count.
class JumpGauge {
 public:
  explicit JumpGauge(const JumpModel& model);

  int count() const noexcept { return n_; }
  const ComplexMatrix& a() const noexcept { return a_; }
  const ComplexMatrix& a_inv() const noexcept { return a_inv_; }
  /// A <- A C^{-1}, A^{-1} <- C A^{-1}
  void on_jump();

 private:
  ComplexMatrix c_;
  ComplexMatrix c_inv_;
  int n_ = 0;
  ComplexMatrix a_;
  ComplexMatrix a_inv_;
};

/// One Euler step of the normalized jump equation: the drift
///   [-G rho - rho G^dagger + (1-eta) lambda J rho + eta lambda rho tr(J rho)] dt
/// followed, when dN = 1, by rho -> J rho / tr(J rho). Result has unit trace
/// and is projected back onto the positive cone if the step left it.
ComplexMatrix jump_sme_step(const JumpModel& model, const ComplexMatrix& rho, int dn, double dt);

/// One Euler step of the linear jump equation (drift, then rho~ -> J rho~ on a count).
ComplexMatrix jump_unnorm_step(const JumpModel& model, const ComplexMatrix& rho_tilde, int dn,
                               double dt);

struct CountingSample {
  CountingRecord record;
  /// States of the normalized equation evolved alongside the draws.
  std::vector<DensityState> states;
};

/// Bernoulli draw per step with p_n = eta lambda tr(C rho C^dagger) dt from the
/// concurrently evolved state. Throws if any p_n >= 0.1.
CountingSample sample_counting_record(const JumpModel& model, const ComplexMatrix& rho0, double dt,
                                      double horizon, std::uint64_t seed);

/// Euler for the linear equation at dt / refine, with each count applied at
/// the end of its record interval. Renormalized each step; log_lambda = log tr rho~.
std::vector<DensityState> jump_unnormalized_path(const JumpModel& model,
                                                 const CountingRecord& record,
                                                 const ComplexMatrix& rho0, int refine);

/// r' = -A G A^{-1} r - r (A G A^{-1})^dagger + (1-eta) lambda C r C^dagger + eta lambda r
ComplexMatrix jump_pathwise_rhs(const JumpModel& model, const JumpGauge& g, const ComplexMatrix& r);

struct JumpPathwiseSolution {
  std::vector<PathwiseState> r_path;
  std::vector<DensityState> recovered;
};

enum class JumpGaugeMode {
  /// A = C^{-N} from the start of the record.
  global,
  /// Gauge reset to the identity after each count, r rescaled to unit trace.
  /// Stays well conditioned over long records with many counts.
  rebased,
};

/// RK4 between counts with A piecewise constant. Requires invertible C.
JumpPathwiseSolution jump_pathwise_solve(const JumpModel& model, const CountingRecord& record,
                                         const ComplexMatrix& r0, int substeps,
                                         JumpGaugeMode mode = JumpGaugeMode::global);

/// phi' = (-A G A^{-1} + lambda/2) phi. Requires eta == 1.
StateVector jump_pathwise_schrodinger_rhs(const JumpModel& model, const JumpGauge& g,
                                          const StateVector& phi);

std::vector<StateVector> integrate_jump_pathwise_schrodinger(const JumpModel& model,
                                                             const CountingRecord& record,
                                                             const StateVector& phi0,
                                                             int substeps);

}  // namespace psme
