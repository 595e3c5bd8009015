#pragma once

// Trajectory and ensemble orchestration, the deterministic master-equation
// oracle, and the convergence/continuity diagnostics.

#include <array>
#include <cstdint>
#include <variant>
#include <vector>

#include "psme/diffusion.hpp"
#include "psme/jump.hpp"
#include "psme/model.hpp"

namespace psme {

/// -i[H, rho] + L rho L^dagger - (L^dagger L rho + rho L^dagger L) / 2
ComplexMatrix master_rhs(const ComplexMatrix& h, const ComplexMatrix& l, const ComplexMatrix& rho);

/// RK4 with `substeps` steps per dt. Returns steps + 1 states.
std::vector<ComplexMatrix> integrate_master(const ComplexMatrix& h, const ComplexMatrix& l,
                                            const ComplexMatrix& rho0, double dt,
                                            std::size_t steps, int substeps = 10);

using AnyRecord = std::variant<MeasurementRecord, CountingRecord>;

struct TrajectoryResult {
  std::vector<double> times;
  std::vector<DensityState> states;
  /// Empty unless the system is a qubit.
  std::vector<BlochVector> bloch;
  AnyRecord record;
  std::uint64_t seed = 0;
};

/// Number of steps for horizon T at step dt; T must be a whole number of steps.
std::size_t step_count(double dt, double horizon);

/// Simulates the homodyne record online, dy_n = M(rho_{n-1}) dt + kappa dnu_n,
/// while filtering it with `scheme`. A pure function of its arguments.
TrajectoryResult run_trajectory(const DiffusionModel& model, Scheme scheme, double dt,
                                double horizon, const ComplexMatrix& rho0, std::uint64_t seed,
                                int substeps = 4);

/// Offline replay of a stored record through the same filter used online.
TrajectoryResult filter_record(const DiffusionModel& model, Scheme scheme,
                               const MeasurementRecord& record, const ComplexMatrix& rho0,
                               std::uint64_t seed, int substeps = 4);

/// Samples a counting record and reports either the normalized jump equation
/// (Scheme::em) or the recovered pathwise solution (Scheme::pathwise).
TrajectoryResult run_jump_trajectory(const JumpModel& model, Scheme scheme, double dt,
                                     double horizon, const ComplexMatrix& rho0,
                                     std::uint64_t seed, int substeps = 4);

TrajectoryResult filter_counting_record(const JumpModel& model, Scheme scheme,
                                        const CountingRecord& record, const ComplexMatrix& rho0,
                                        std::uint64_t seed, int substeps = 4);

/// Increments of y(t) = sin(t) on [0, T].
MeasurementRecord smooth_record(double dt, double horizon);

/// Homodyne record of the normalized Euler-Maruyama equation driven by seeded
/// Gaussian innovations.
MeasurementRecord brownian_record(const DiffusionModel& model, double dt, double horizon,
                                  const ComplexMatrix& rho0, std::uint64_t seed);

struct CoordinateSummary {
  std::array<double, 3> mean{};
  std::array<double, 3> stddev{};
};

struct EnsembleResult {
  std::size_t n_traj = 0;
  std::uint64_t base_seed = 0;
  std::vector<double> times;
  std::vector<BlochVector> final_bloch;
  std::vector<double> final_purity;
  std::vector<ComplexMatrix> mean_rho_path;
  CoordinateSummary summary;
};

struct EnsembleOptions {
  int substeps = 4;
  /// 0 selects std::thread::hardware_concurrency().
  unsigned threads = 0;
};

/// Trajectory i uses seed base_seed + i. Results do not depend on the thread count.
EnsembleResult run_ensemble(const DiffusionModel& model, Scheme scheme, double dt, double horizon,
                            const ComplexMatrix& rho0, std::size_t n_traj,
                            std::uint64_t base_seed, EnsembleOptions options = {});

EnsembleResult run_jump_ensemble(const JumpModel& model, Scheme scheme, double dt, double horizon,
                                 const ComplexMatrix& rho0, std::size_t n_traj,
                                 std::uint64_t base_seed, EnsembleOptions options = {});

inline constexpr int kHistogramBins = 41;

struct SteadyStateStats {
  /// Bins over [-1, 1], indexed x, y, z.
  std::array<std::vector<std::size_t>, 3> histogram;
  /// Fraction of trajectories with |coordinate| > threshold.
  std::array<double, 3> fraction_beyond{};
  std::array<double, 3> mean_abs{};
  double threshold = 0.6;
  double mean_purity = 0.0;
};

std::size_t histogram_bin(double v) noexcept;

SteadyStateStats steady_state_stats(const EnsembleResult& e, double threshold = 0.6);

struct ConvergenceRow {
  double delta = 0.0;
  /// sup_n |rho~_robust(t_n) - rho~_oracle(t_n)| (Frobenius)
  double sup_error = 0.0;
  /// Same for the normalized states.
  double sup_error_normalized = 0.0;
  double w_sliding = 0.0;
  double w_initial = 0.0;
  /// sup_error / (delta + w_sliding)
  double k = 0.0;
};

/// Coarsens the fine record to every delta, filters it with the robust scheme
/// and compares against RK4 on the pathwise equation over the fine record.
std::vector<ConvergenceRow> convergence_report(const DiffusionModel& model,
                                               const MeasurementRecord& fine,
                                               const std::vector<double>& deltas,
                                               const ComplexMatrix& rho0,
                                               int oracle_substeps = 4);

struct LipschitzRow {
  double epsilon = 0.0;
  double gap = 0.0;
  double gap_unnormalized = 0.0;
  double ratio = 0.0;
  double ratio_unnormalized = 0.0;
};

/// y2 = y + epsilon sin(pi (t - t0) / (T - t0)); gaps are sup-norm (Frobenius) over the grid.
std::vector<LipschitzRow> lipschitz_report(const DiffusionModel& model, const MeasurementRecord& y,
                                           const std::vector<double>& epsilons,
                                           const ComplexMatrix& rho0);

/// Sup over the common grid of the Frobenius distance.
double sup_distance(const std::vector<ComplexMatrix>& a, const std::vector<ComplexMatrix>& b);

}  // namespace psme
