#include "psme/traj.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>

namespace psme {

namespace {

constexpr std::size_t kChunk = 32;

void attach_bloch(TrajectoryResult& r) {
  if (r.states.empty() || r.states.front().rho.dim() != 2) return;
  r.bloch.reserve(r.states.size());
  for (const auto& s : r.states) r.bloch.push_back(bloch_from_rho(s.rho));
}

TrajectoryResult finish(std::vector<DensityState> states, AnyRecord record, std::uint64_t seed) {
  TrajectoryResult r;
  r.times.reserve(states.size());
  for (const auto& s : states) r.times.push_back(s.t);
  r.states = std::move(states);
  r.record = std::move(record);
  r.seed = seed;
  attach_bloch(r);
  return r;
}

template <class RunOne>
EnsembleResult ensemble(std::size_t n_traj, std::uint64_t base_seed, unsigned threads,
                        std::size_t steps, std::size_t dim, RunOne&& run_one) {
  if (n_traj < 1) throw std::invalid_argument("n_traj must be >= 1");
  const std::size_t n_chunks = (n_traj + kChunk - 1) / kChunk;

  EnsembleResult out;
  out.n_traj = n_traj;
  out.base_seed = base_seed;
  out.final_bloch.resize(n_traj);
  out.final_purity.resize(n_traj);
  std::vector<std::vector<ComplexMatrix>> chunk_sums(
      n_chunks, std::vector<ComplexMatrix>(steps + 1, ComplexMatrix(dim)));
  std::vector<double> times;

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto worker = [&] {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= n_chunks) return;
      try {
        for (std::size_t i = c * kChunk; i < std::min(n_traj, (c + 1) * kChunk); ++i) {
          const TrajectoryResult tr = run_one(base_seed + i);
          auto& sums = chunk_sums[c];
          for (std::size_t n = 0; n <= steps; ++n) sums[n] += tr.states[n].rho;
          const ComplexMatrix& last = tr.states.back().rho;
          out.final_purity[i] = purity(last);
          if (dim == 2) out.final_bloch[i] = bloch_from_rho(last);
          if (i == 0) times = tr.times;
        }
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n_chunks;
        return;
      }
    }
  };

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n_chunks));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned k = 0; k < threads; ++k) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  // Chunk sums are combined in chunk order, independent of scheduling.
  out.mean_rho_path.assign(steps + 1, ComplexMatrix(dim));
  for (const auto& sums : chunk_sums)
    for (std::size_t n = 0; n <= steps; ++n) out.mean_rho_path[n] += sums[n];
  for (auto& m : out.mean_rho_path) m *= 1.0 / static_cast<double>(n_traj);
  out.times = std::move(times);

  if (dim == 2) {
    for (int c = 0; c < 3; ++c) {
      const auto coord = [c](const BlochVector& b) { return c == 0 ? b.x : c == 1 ? b.y : b.z; };
      double mean = 0.0;
      for (const auto& b : out.final_bloch) mean += coord(b);
      mean /= static_cast<double>(n_traj);
      double var = 0.0;
      for (const auto& b : out.final_bloch) var += (coord(b) - mean) * (coord(b) - mean);
      out.summary.mean[c] = mean;
      out.summary.stddev[c] = n_traj > 1 ? std::sqrt(var / static_cast<double>(n_traj - 1)) : 0.0;
    }
  }
  return out;
}

std::vector<ComplexMatrix> unnormalized_path(const std::vector<DensityState>& states) {
  std::vector<ComplexMatrix> out;
  out.reserve(states.size());
  for (const auto& s : states) out.push_back(s.unnormalized());
  return out;
}

std::vector<ComplexMatrix> normalized_path(const std::vector<DensityState>& states) {
  std::vector<ComplexMatrix> out;
  out.reserve(states.size());
  for (const auto& s : states) out.push_back(s.rho);
  return out;
}

}  // namespace

ComplexMatrix master_rhs(const ComplexMatrix& h, const ComplexMatrix& l, const ComplexMatrix& rho) {
  const ComplexMatrix ldl = adjoint(l) * l;
  ComplexMatrix out = -kI * (h * rho - rho * h);
  out += l * rho * adjoint(l);
  out -= 0.5 * (ldl * rho + rho * ldl);
  return out;
}

std::vector<ComplexMatrix> integrate_master(const ComplexMatrix& h, const ComplexMatrix& l,
                                            const ComplexMatrix& rho0, double dt,
                                            std::size_t steps, int substeps) {
  if (substeps < 1) throw std::invalid_argument("substeps must be >= 1");
  const double step = dt / substeps;
  std::vector<ComplexMatrix> path{rho0};
  path.reserve(steps + 1);
  ComplexMatrix rho = rho0;
  for (std::size_t n = 0; n < steps; ++n) {
    for (int k = 0; k < substeps; ++k) {
      const ComplexMatrix k1 = master_rhs(h, l, rho);
      const ComplexMatrix k2 = master_rhs(h, l, rho + (0.5 * step) * k1);
      const ComplexMatrix k3 = master_rhs(h, l, rho + (0.5 * step) * k2);
      const ComplexMatrix k4 = master_rhs(h, l, rho + step * k3);
      rho += (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    path.push_back(rho);
  }
  return path;
}

std::size_t step_count(double dt, double horizon) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (!(horizon >= dt)) throw std::invalid_argument("T must be >= dt");
  const auto n = static_cast<std::size_t>(std::llround(horizon / dt));
  if (std::abs(static_cast<double>(n) * dt - horizon) > 1e-9 * horizon) {
    throw std::invalid_argument("T must be an integer multiple of dt");
  }
  return n;
}

TrajectoryResult run_trajectory(const DiffusionModel& model, Scheme scheme, double dt,
                                double horizon, const ComplexMatrix& rho0, std::uint64_t seed,
                                int substeps) {
  const std::size_t steps = step_count(dt, horizon);
  const auto filter = make_diffusion_filter(scheme, model, rho0, dt, 0.0, substeps);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> innovation(0.0, std::sqrt(dt));
  MeasurementRecord record{dt, {}, 0.0};
  record.increments.reserve(steps);
  std::vector<DensityState> states;
  states.reserve(steps + 1);
  states.push_back(filter->state());
  for (std::size_t n = 0; n < steps; ++n) {
    const double m = expected_measurement(filter->state().rho, model.coupling());
    const double dy = m * dt + model.kappa() * innovation(rng);
    filter->step(dy);
    record.increments.push_back(dy);
    states.push_back(filter->state());
  }
  return finish(std::move(states), std::move(record), seed);
}

TrajectoryResult filter_record(const DiffusionModel& model, Scheme scheme,
                               const MeasurementRecord& record, const ComplexMatrix& rho0,
                               std::uint64_t seed, int substeps) {
  record.validate();
  const auto filter = make_diffusion_filter(scheme, model, rho0, record.dt, record.t0, substeps);
  std::vector<DensityState> states;
  states.reserve(record.steps() + 1);
  states.push_back(filter->state());
  for (double dy : record.increments) {
    filter->step(dy);
    states.push_back(filter->state());
  }
  return finish(std::move(states), record, seed);
}

TrajectoryResult filter_counting_record(const JumpModel& model, Scheme scheme,
                                        const CountingRecord& record, const ComplexMatrix& rho0,
                                        std::uint64_t seed, int substeps) {
  record.validate();
  switch (scheme) {
    case Scheme::em: {
      std::vector<DensityState> states{{rho0, 0.0, record.t0}};
      states.reserve(record.steps() + 1);
      ComplexMatrix rho = rho0;
      for (std::size_t n = 0; n < record.steps(); ++n) {
        rho = jump_sme_step(model, rho, record.counts[n], record.dt);
        states.push_back({rho, 0.0, record.time(n + 1)});
      }
      return finish(std::move(states), record, seed);
    }
    case Scheme::pathwise:
      return finish(
          jump_pathwise_solve(model, record, rho0, substeps, JumpGaugeMode::rebased).recovered,
          record, seed);
    case Scheme::robust: break;
  }
  throw std::invalid_argument("scheme 'robust' is defined for diffusion records only");
}

TrajectoryResult run_jump_trajectory(const JumpModel& model, Scheme scheme, double dt,
                                     double horizon, const ComplexMatrix& rho0,
                                     std::uint64_t seed, int substeps) {
  if (scheme == Scheme::robust) {
    throw std::invalid_argument("scheme 'robust' is defined for diffusion records only");
  }
  step_count(dt, horizon);
  CountingSample sample = sample_counting_record(model, rho0, dt, horizon, seed);
  if (scheme == Scheme::em) return finish(std::move(sample.states), std::move(sample.record), seed);
  return filter_counting_record(model, scheme, sample.record, rho0, seed, substeps);
}

MeasurementRecord smooth_record(double dt, double horizon) {
  const std::size_t steps = step_count(dt, horizon);
  MeasurementRecord r{dt, {}, 0.0};
  r.increments.reserve(steps);
  for (std::size_t n = 0; n < steps; ++n) {
    r.increments.push_back(std::sin(static_cast<double>(n + 1) * dt) -
                           std::sin(static_cast<double>(n) * dt));
  }
  return r;
}

MeasurementRecord brownian_record(const DiffusionModel& model, double dt, double horizon,
                                  const ComplexMatrix& rho0, std::uint64_t seed) {
  const std::size_t steps = step_count(dt, horizon);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> innovation(0.0, std::sqrt(dt));
  std::vector<double> nu(steps);
  for (double& v : nu) v = innovation(rng);
  return em_normalized(model, nu, dt, rho0).record;
}

EnsembleResult run_ensemble(const DiffusionModel& model, Scheme scheme, double dt, double horizon,
                            const ComplexMatrix& rho0, std::size_t n_traj,
                            std::uint64_t base_seed, EnsembleOptions options) {
  const std::size_t steps = step_count(dt, horizon);
  return ensemble(n_traj, base_seed, options.threads, steps, model.dim(), [&](std::uint64_t seed) {
    return run_trajectory(model, scheme, dt, horizon, rho0, seed, options.substeps);
  });
}

EnsembleResult run_jump_ensemble(const JumpModel& model, Scheme scheme, double dt, double horizon,
                                 const ComplexMatrix& rho0, std::size_t n_traj,
                                 std::uint64_t base_seed, EnsembleOptions options) {
  const std::size_t steps = step_count(dt, horizon);
  return ensemble(n_traj, base_seed, options.threads, steps, model.dim(), [&](std::uint64_t seed) {
    return run_jump_trajectory(model, scheme, dt, horizon, rho0, seed, options.substeps);
  });
}

std::size_t histogram_bin(double v) noexcept {
  const double u = (std::clamp(v, -1.0, 1.0) + 1.0) / 2.0 * kHistogramBins;
  return std::min<std::size_t>(static_cast<std::size_t>(u), kHistogramBins - 1);
}

SteadyStateStats steady_state_stats(const EnsembleResult& e, double threshold) {
  SteadyStateStats s;
  s.threshold = threshold;
  for (auto& h : s.histogram) h.assign(kHistogramBins, 0);
  const double n = static_cast<double>(std::max<std::size_t>(e.final_bloch.size(), 1));
  for (const auto& b : e.final_bloch) {
    const std::array<double, 3> v{b.x, b.y, b.z};
    for (int c = 0; c < 3; ++c) {
      ++s.histogram[c][histogram_bin(v[c])];
      if (std::abs(v[c]) > threshold) s.fraction_beyond[c] += 1.0 / n;
      s.mean_abs[c] += std::abs(v[c]) / n;
    }
  }
  for (double p : e.final_purity) s.mean_purity += p;
  if (!e.final_purity.empty()) s.mean_purity /= static_cast<double>(e.final_purity.size());
  return s;
}

double sup_distance(const std::vector<ComplexMatrix>& a, const std::vector<ComplexMatrix>& b) {
  if (a.size() != b.size()) throw DimensionError("sup_distance: path lengths differ");
  double d = 0.0;
  for (std::size_t n = 0; n < a.size(); ++n) d = std::max(d, (a[n] - b[n]).norm());
  return d;
}

std::vector<ConvergenceRow> convergence_report(const DiffusionModel& model,
                                               const MeasurementRecord& fine,
                                               const std::vector<double>& deltas,
                                               const ComplexMatrix& rho0, int oracle_substeps) {
  fine.validate();
  const std::vector<PathwiseState> oracle_r = integrate_pathwise(model, fine, rho0, oracle_substeps);
  const std::vector<double> y = fine.cumulative();
  std::vector<ComplexMatrix> oracle_tilde;
  std::vector<ComplexMatrix> oracle_rho;
  oracle_tilde.reserve(y.size());
  for (std::size_t n = 0; n < y.size(); ++n) {
    const Gauge g = gauge(model.coupling(), model.kappa(), y[n], fine.time(n) - fine.t0);
    RecoveredState rec = recover(g.a_inv, oracle_r[n].r);
    oracle_tilde.push_back(std::move(rec.rho_tilde));
    oracle_rho.push_back(std::move(rec.rho));
  }

  std::vector<ConvergenceRow> rows;
  for (double delta : deltas) {
    const auto factor = static_cast<std::size_t>(std::llround(delta / fine.dt));
    if (factor == 0 || std::abs(static_cast<double>(factor) * fine.dt - delta) > 1e-9 * delta) {
      throw std::invalid_argument("delta " + std::to_string(delta) +
                                  " is not a multiple of the fine step");
    }
    const MeasurementRecord coarse = fine.coarsen(factor);
    const std::vector<DensityState> approx = robust_filter(model, coarse, rho0);

    ConvergenceRow row;
    row.delta = delta;
    for (std::size_t n = 0; n < approx.size(); ++n) {
      const std::size_t f = n * factor;
      row.sup_error = std::max(row.sup_error, (approx[n].unnormalized() - oracle_tilde[f]).norm());
      row.sup_error_normalized =
          std::max(row.sup_error_normalized, (approx[n].rho - oracle_rho[f]).norm());
    }
    row.w_sliding = modulus_of_continuity(fine, delta);
    row.w_initial = initial_window_oscillation(fine, delta);
    row.k = row.sup_error / (delta + row.w_sliding);
    rows.push_back(row);
  }
  return rows;
}

std::vector<LipschitzRow> lipschitz_report(const DiffusionModel& model, const MeasurementRecord& y,
                                           const std::vector<double>& epsilons,
                                           const ComplexMatrix& rho0) {
  y.validate();
  const double span = y.end_time() - y.t0;
  std::vector<double> shape(y.steps() + 1);
  double peak = 0.0;
  for (std::size_t n = 0; n <= y.steps(); ++n) {
    shape[n] = std::sin(std::numbers::pi * (y.time(n) - y.t0) / span);
    peak = std::max(peak, std::abs(shape[n]));
  }

  const std::vector<DensityState> base = robust_filter(model, y, rho0);
  const auto base_rho = normalized_path(base);
  const auto base_tilde = unnormalized_path(base);

  std::vector<LipschitzRow> rows;
  for (double eps : epsilons) {
    if (!(eps >= 0.0)) throw std::invalid_argument("epsilon must be nonnegative");
    MeasurementRecord perturbed = y;
    for (std::size_t n = 0; n < y.steps(); ++n) {
      perturbed.increments[n] += eps * (shape[n + 1] - shape[n]) / peak;
    }
    const std::vector<DensityState> other = robust_filter(model, perturbed, rho0);
    LipschitzRow row;
    row.epsilon = eps;
    row.gap = sup_distance(base_rho, normalized_path(other));
    row.gap_unnormalized = sup_distance(base_tilde, unnormalized_path(other));
    if (eps > 0.0) {
      row.ratio = row.gap / eps;
      row.ratio_unnormalized = row.gap_unnormalized / eps;
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace psme
