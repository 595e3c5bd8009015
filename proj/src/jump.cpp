#include "psme/jump.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace psme {

namespace {

ComplexMatrix jump_drift(const JumpModel& model, const ComplexMatrix& rho, double rate_scale) {
  const double lambda = model.lambda();
  const double eta = model.eta();
  const ComplexMatrix grho = model.g() * rho;
  ComplexMatrix d = -grho;
  d -= adjoint(grho);
  d += ((1.0 - eta) * lambda) * model.apply_jump(rho);
  d += (eta * lambda * rate_scale) * rho;
  return d;
}

void require_count(int dn) {
  if (dn != 0 && dn != 1) throw std::invalid_argument("counting increments must be 0 or 1");
}

ComplexMatrix normalized(const ComplexMatrix& x, double t) {
  const double tr = trace(x).real();
  if (!x.all_finite() || !(tr > 0.0)) throw NumericalFailure("jump state collapsed", t);
  ComplexMatrix rho = hermitian_part(x);
  rho *= 1.0 / tr;
  if (min_eigenvalue_hermitian(rho) < 0.0) rho = project_to_density(rho);
  return rho;
}

ComplexMatrix rhs_with(const JumpModel& model, const ComplexMatrix& m, const ComplexMatrix& r) {
  const ComplexMatrix mr = m * r;
  ComplexMatrix out = -mr;
  out -= adjoint(mr);
  out += ((1.0 - model.eta()) * model.lambda()) * model.apply_jump(r);
  out += (model.eta() * model.lambda()) * r;
  return out;
}

}  // namespace

std::vector<double> CountingRecord::jump_times() const {
  std::vector<double> times;
  for (std::size_t n = 0; n < counts.size(); ++n)
    if (counts[n] != 0) times.push_back(time(n + 1));
  return times;
}

std::vector<int> CountingRecord::cumulative() const {
  std::vector<int> n(counts.size() + 1, 0);
  for (std::size_t k = 0; k < counts.size(); ++k) n[k + 1] = n[k] + counts[k];
  return n;
}

void CountingRecord::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("record dt must be positive");
  for (int c : counts) require_count(c);
}

JumpGauge::JumpGauge(const JumpModel& model)
    : c_(model.jump_operator()),
      c_inv_(model.jump_operator_inverse()),
      a_(ComplexMatrix::identity(model.dim())),
      a_inv_(ComplexMatrix::identity(model.dim())) {}

void JumpGauge::on_jump() {
  ++n_;
  a_ = a_ * c_inv_;
  a_inv_ = c_ * a_inv_;
}

ComplexMatrix jump_sme_step(const JumpModel& model, const ComplexMatrix& rho, int dn, double dt) {
  require_count(dn);
  if (!(dt >= 0.0)) throw std::invalid_argument("jump_sme_step: dt must be nonnegative");
  const double rate = trace(model.apply_jump(rho)).real();
  ComplexMatrix next = rho + dt * jump_drift(model, rho, rate);
  if (dn == 1) {
    const ComplexMatrix jumped = model.apply_jump(next);
    if (!(trace(jumped).real() > 0.0)) {
      throw std::invalid_argument("count recorded where tr(C rho C^dagger) = 0");
    }
    next = jumped;
  }
  return normalized(next, 0.0);
}

ComplexMatrix jump_unnorm_step(const JumpModel& model, const ComplexMatrix& rho_tilde, int dn,
                               double dt) {
  require_count(dn);
  ComplexMatrix next = rho_tilde + dt * jump_drift(model, rho_tilde, 1.0);
  if (dn == 1) next = model.apply_jump(next);
  if (!next.all_finite()) throw NumericalFailure("jump_unnorm_step: non-finite state", 0.0);
  return next;
}

CountingSample sample_counting_record(const JumpModel& model, const ComplexMatrix& rho0, double dt,
                                      double horizon, std::uint64_t seed) {
  if (!(dt > 0.0)) throw std::invalid_argument("sample_counting_record: dt must be positive");
  if (!(horizon >= dt)) throw std::invalid_argument("sample_counting_record: T must be >= dt");
  const auto steps = static_cast<std::size_t>(std::llround(horizon / dt));

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  CountingSample out;
  out.record = CountingRecord{dt, {}, 0.0};
  out.record.counts.reserve(steps);
  out.states.reserve(steps + 1);
  out.states.push_back({rho0, 0.0, 0.0});
  ComplexMatrix rho = rho0;
  for (std::size_t n = 0; n < steps; ++n) {
    const double p = model.eta() * model.lambda() * trace(model.apply_jump(rho)).real() * dt;
    if (p >= 0.1) {
      throw std::invalid_argument("jump probability per step " + std::to_string(p) +
                                  " >= 0.1; use a smaller dt");
    }
    const int dn = uniform(rng) < p ? 1 : 0;
    rho = jump_sme_step(model, rho, dn, dt);
    out.record.counts.push_back(dn);
    out.states.push_back({rho, 0.0, out.record.time(n + 1)});
  }
  return out;
}

std::vector<DensityState> jump_unnormalized_path(const JumpModel& model,
                                                 const CountingRecord& record,
                                                 const ComplexMatrix& rho0, int refine) {
  record.validate();
  if (refine < 1) throw std::invalid_argument("refine must be >= 1");
  const double h = record.dt / refine;
  std::vector<DensityState> out;
  out.reserve(record.steps() + 1);
  out.push_back({rho0, 0.0, record.t0});
  ComplexMatrix rho = rho0;
  double log_lambda = 0.0;
  for (std::size_t n = 0; n < record.steps(); ++n) {
    const double t = record.time(n + 1);
    for (int k = 0; k < refine; ++k) {
      const int dn = (k == refine - 1) ? record.counts[n] : 0;
      const ComplexMatrix next = jump_unnorm_step(model, rho, dn, h);
      const double tr = trace(next).real();
      if (!(tr > 0.0)) throw NumericalFailure("jump_unnormalized_path: collapsed state", t);
      rho = normalized(next, t);
      log_lambda += std::log(tr);
    }
    out.push_back({rho, log_lambda, t});
  }
  return out;
}

ComplexMatrix jump_pathwise_rhs(const JumpModel& model, const JumpGauge& g, const ComplexMatrix& r) {
  return rhs_with(model, g.a() * model.g() * g.a_inv(), r);
}

JumpPathwiseSolution jump_pathwise_solve(const JumpModel& model, const CountingRecord& record,
                                         const ComplexMatrix& r0, int substeps,
                                         JumpGaugeMode mode) {
  record.validate();
  if (!model.jump_operator_invertible()) {
    throw std::invalid_argument("pathwise jump solution requires an invertible jump operator");
  }
  if (substeps < 1) throw std::invalid_argument("substeps must be >= 1");
  if (!is_hermitian(r0) || !(trace(r0).real() > 0.0)) {
    throw std::invalid_argument("jump_pathwise_solve: r0 must be Hermitian with positive trace");
  }

  JumpGauge g(model);
  ComplexMatrix m = g.a() * model.g() * g.a_inv();
  const double h = record.dt / substeps;
  const bool rebased = mode == JumpGaugeMode::rebased;

  JumpPathwiseSolution out;
  out.r_path.reserve(record.steps() + 1);
  out.recovered.reserve(record.steps() + 1);
  ComplexMatrix r = r0;
  double log_scale = 0.0;
  const auto emit = [&](double t) {
    const RecoveredState rec = rebased ? recover(ComplexMatrix::identity(model.dim()), r)
                                       : recover(g.a_inv(), r);
    out.r_path.push_back({r, t});
    out.recovered.push_back({hermitian_part(rec.rho), log_scale + rec.log_lambda, t});
  };
  emit(record.t0);
  for (std::size_t n = 0; n < record.steps(); ++n) {
    for (int k = 0; k < substeps; ++k) {
      const ComplexMatrix k1 = rhs_with(model, m, r);
      const ComplexMatrix k2 = rhs_with(model, m, r + (0.5 * h) * k1);
      const ComplexMatrix k3 = rhs_with(model, m, r + (0.5 * h) * k2);
      const ComplexMatrix k4 = rhs_with(model, m, r + h * k3);
      r += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    const double t = record.time(n + 1);
    if (!r.all_finite()) throw NumericalFailure("jump_pathwise_solve: non-finite state", t);
    if (record.counts[n] == 1) {
      if (rebased) {
        r = model.apply_jump(r);
        const double tr = trace(r).real();
        if (!(tr > 0.0)) throw NumericalFailure("jump_pathwise_solve: collapsed state", t);
        r = hermitian_part(r);
        r *= 1.0 / tr;
        log_scale += std::log(tr);
      } else {
        g.on_jump();
        m = g.a() * model.g() * g.a_inv();
      }
    }
    emit(t);
  }
  return out;
}

StateVector jump_pathwise_schrodinger_rhs(const JumpModel& model, const JumpGauge& g,
                                          const StateVector& phi) {
  if (model.eta() != 1.0) {
    throw std::logic_error("jump pathwise Schrodinger equation requires perfect counting (eta = 1)");
  }
  if (phi.size() != model.dim()) throw DimensionError("jump_pathwise_schrodinger_rhs: dimension mismatch");
  ComplexMatrix op = -(g.a() * model.g() * g.a_inv());
  op += (0.5 * model.lambda()) * ComplexMatrix::identity(model.dim());
  return matvec(op, VecColumn{phi}).entries;
}

std::vector<StateVector> integrate_jump_pathwise_schrodinger(const JumpModel& model,
                                                             const CountingRecord& record,
                                                             const StateVector& phi0,
                                                             int substeps) {
  record.validate();
  if (substeps < 1) throw std::invalid_argument("substeps must be >= 1");
  JumpGauge g(model);
  const double h = record.dt / substeps;
  const auto axpy = [](const StateVector& x, Complex a, const StateVector& d) {
    StateVector out = x;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += a * d[i];
    return out;
  };
  std::vector<StateVector> path{phi0};
  StateVector phi = phi0;
  for (std::size_t n = 0; n < record.steps(); ++n) {
    for (int k = 0; k < substeps; ++k) {
      const StateVector k1 = jump_pathwise_schrodinger_rhs(model, g, phi);
      const StateVector k2 = jump_pathwise_schrodinger_rhs(model, g, axpy(phi, 0.5 * h, k1));
      const StateVector k3 = jump_pathwise_schrodinger_rhs(model, g, axpy(phi, 0.5 * h, k2));
      const StateVector k4 = jump_pathwise_schrodinger_rhs(model, g, axpy(phi, h, k3));
      for (std::size_t i = 0; i < phi.size(); ++i)
        phi[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    if (record.counts[n] == 1) g.on_jump();
    path.push_back(phi);
  }
  return path;
}

}  // namespace psme
