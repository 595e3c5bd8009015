#pragma once

// Diffusion (homodyne) evolutions: Euler-Maruyama references for the
// normalized and linear stochastic master equations, the pathwise gauge
// transform and its ODE, and the implicit robust filter.

#include <cstddef>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "psme/matcore.hpp"
#include "psme/model.hpp"

namespace psme {

/// Normalized state rho plus the accumulated log of the normalization, so that
/// the unnormalized state is exp(log_lambda) * rho.
struct DensityState {
  ComplexMatrix rho;
  double log_lambda = 0.0;
  double t = 0.0;

  ComplexMatrix unnormalized() const;
};

/// Uniformly sampled homodyne record. increments[n] = y(t_{n+1}) - y(t_n) and
/// y(t0) = 0; y is the piecewise-linear interpolant of the cumulative sums.
struct MeasurementRecord {
  double dt = 0.0;
  std::vector<double> increments;
  double t0 = 0.0;

  std::size_t steps() const noexcept { return increments.size(); }
  double time(std::size_t n) const noexcept { return t0 + static_cast<double>(n) * dt; }
  double end_time() const noexcept { return time(steps()); }
  /// y at the grid points t0 .. t_N (size steps() + 1).
  std::vector<double> cumulative() const;
  double value_at(double t) const;
  /// Sums groups of `factor` increments. Throws if steps() is not a multiple.
  MeasurementRecord coarsen(std::size_t factor) const;
  /// Throws std::invalid_argument if dt <= 0 or an increment is not finite.
  void validate() const;
};

/// Gauge-transformed unnormalized state r = A rho_tilde A^dagger.
struct PathwiseState {
  ComplexMatrix r;
  double t = 0.0;
};

struct Gauge {
  ComplexMatrix a;
  ComplexMatrix a_inv;
};

/// A = exp{-(L/kappa^2) y + (L^2 / 2 kappa^2) t} and its inverse.
Gauge gauge(const ComplexMatrix& l, double kappa, double y, double t,
            double tol = kDefaultExpmTol);

/// Right-hand side of the pathwise master equation
///   r' = (1 - 1/kappa^2) L r L^dagger - M r - r M^dagger,  M = A K A^{-1}.
ComplexMatrix pathwise_rhs(const DiffusionModel& model, const Gauge& g, const ComplexMatrix& r);

/// Classical RK4 on the piecewise-linear record, `substeps` steps per record
/// interval. Returns steps() + 1 states starting with r0 at t0.
std::vector<PathwiseState> integrate_pathwise(const DiffusionModel& model,
                                              const MeasurementRecord& record,
                                              const ComplexMatrix& r0, int substeps);

struct RecoveredState {
  ComplexMatrix rho_tilde;
  ComplexMatrix rho;
  double log_lambda = 0.0;
};

/// rho_tilde = A^{-1} r A^{-dagger}, rho = rho_tilde / tr(rho_tilde).
RecoveredState recover(const ComplexMatrix& a_inv, const ComplexMatrix& r);

/// E(dy) = exp{(L/kappa^2) dy - (L^2 / 2 kappa^2) dt}
ComplexMatrix measurement_update(const DiffusionModel& model, double dy, double dt);

/// The vectorized implicit operator (I kron A) + (B^T kron I) - (D^T kron C)
/// with A = I + K dt, B = K^dagger dt, C = L, D = (1 - 1/kappa^2) L^dagger dt.
ComplexMatrix implicit_system(const DiffusionModel& model, double dt);

/// One implicit robust step: solves A X + X B - C X D = E(dy) prev E(dy)^dagger.
/// A zero-length step with dy = 0 returns prev unchanged.
ComplexMatrix robust_step(const DiffusionModel& model, const ComplexMatrix& prev, double dy,
                          double dt);

enum class Scheme { robust, em, pathwise };

Scheme parse_scheme(std::string_view name);
std::string_view scheme_name(Scheme s) noexcept;

/// Incremental filter over a homodyne record. Every scheme renormalizes after
/// each step and accumulates log tr into log_lambda.
class DiffusionFilter {
 public:
  virtual ~DiffusionFilter() = default;

  const DensityState& state() const noexcept { return state_; }
  double dt() const noexcept { return dt_; }
  /// Consumes one record increment and advances the state by dt.
  void step(double dy);

 protected:
  DiffusionFilter(const DiffusionModel& model, DensityState initial, double dt);
  /// Unnormalized successor of the current normalized state.
  virtual ComplexMatrix advance(const ComplexMatrix& rho, double dy) = 0;

  const DiffusionModel& model_;

 private:
  DensityState state_;
  double dt_;
  std::size_t n_ = 0;
  double t0_;
};

/// The returned filter borrows `model`, which must outlive it.
std::unique_ptr<DiffusionFilter> make_diffusion_filter(Scheme scheme, const DiffusionModel& model,
                                                       const ComplexMatrix& rho0, double dt,
                                                       double t0 = 0.0, int substeps = 4);

/// Iterates robust_step over the record. Returns steps() + 1 normalized states.
std::vector<DensityState> robust_filter(const DiffusionModel& model,
                                        const MeasurementRecord& record,
                                        const ComplexMatrix& rho0);

/// Euler-Maruyama for the linear equation
///   d rho~ = [L rho~ L^dagger - K rho~ - rho~ K^dagger] dt + kappa^-2 [L rho~ + rho~ L^dagger] dy.
/// rho_tilde0 need not have unit trace; its log trace seeds log_lambda.
/// A step that leaves the positive cone is projected back (project_to_density).
std::vector<DensityState> em_unnormalized(const DiffusionModel& model,
                                          const MeasurementRecord& record,
                                          const ComplexMatrix& rho_tilde0);

struct SimulatedPath {
  std::vector<DensityState> states;
  MeasurementRecord record;
  /// Largest |tr(rho) - 1| observed before renormalization.
  double max_trace_drift = 0.0;
  /// Steps whose state left the positive cone and was projected back.
  std::size_t positivity_corrections = 0;
};

/// Euler-Maruyama for the normalized equation driven by innovations nu, with
/// the synthesized record dy_n = M(rho_{n-1}) dt + kappa dnu_n. log_lambda
/// accumulates kappa^-2 (M dy - M^2 dt / 2). States leaving the positive cone
/// are projected back and counted.
SimulatedPath em_normalized(const DiffusionModel& model, std::span<const double> nu_increments,
                            double dt, const ComplexMatrix& rho0, double t0 = 0.0);

using StateVector = std::vector<Complex>;

/// phi' = -A K A^{-1} phi. Requires kappa == 1.
StateVector pathwise_schrodinger_rhs(const DiffusionModel& model, const Gauge& g,
                                     const StateVector& phi);

/// RK4 counterpart of integrate_pathwise for state vectors.
std::vector<StateVector> integrate_pathwise_schrodinger(const DiffusionModel& model,
                                                        const MeasurementRecord& record,
                                                        const StateVector& phi0, int substeps);

/// max |y(s1) - y(s2)| over |s1 - s2| <= window, s1, s2 in [t0, T].
double modulus_of_continuity(const MeasurementRecord& record, double window);
/// max |y(s1) - y(s2)| over t0 <= s1, s2 <= t0 + window.
double initial_window_oscillation(const MeasurementRecord& record, double window);

}  // namespace psme
