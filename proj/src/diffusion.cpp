#include "psme/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace psme {

namespace {

void require_density(const ComplexMatrix& rho, const char* who) {
  if (!is_hermitian(rho)) throw std::invalid_argument(std::string(who) + ": state is not Hermitian");
  if (std::abs(trace(rho) - 1.0) > 1e-9) {
    throw std::invalid_argument(std::string(who) + ": state must have unit trace");
  }
}

/// Splits an unnormalized successor into (rho, log tr). Hermitizes to strip
/// rounding-level skew parts.
DensityState normalize(const ComplexMatrix& x, double log_lambda, double t) {
  const double tr = trace(x).real();
  if (!x.all_finite() || !(tr > 0.0) || !std::isfinite(tr)) {
    throw NumericalFailure("state collapsed or diverged", t);
  }
  ComplexMatrix rho = hermitian_part(x);
  rho *= 1.0 / tr;
  return DensityState{std::move(rho), log_lambda + std::log(tr), t};
}

/// M = A K A^{-1}
ComplexMatrix gauged_k(const DiffusionModel& model, const Gauge& g) {
  return g.a * model.k() * g.a_inv;
}

ComplexMatrix pathwise_rhs_with(const DiffusionModel& model, const ComplexMatrix& m,
                                const ComplexMatrix& l_dag, const ComplexMatrix& r) {
  const double kappa2 = model.kappa() * model.kappa();
  ComplexMatrix out = (1.0 - 1.0 / kappa2) * (model.coupling() * r * l_dag);
  const ComplexMatrix mr = m * r;
  out -= mr;
  out -= adjoint(mr);  // r M^dagger = (M r)^dagger for Hermitian r
  return out;
}

/// Exponent of the gauge: -(L/kappa^2) y + (L^2/2kappa^2) t
ComplexMatrix gauge_exponent(const ComplexMatrix& l, double kappa, double y, double t) {
  const double kappa2 = kappa * kappa;
  return (-y / kappa2) * l + (0.5 * t / kappa2) * (l * l);
}

ComplexMatrix rk4_pathwise(const DiffusionModel& model, const ComplexMatrix& l_dag,
                           const ComplexMatrix& r, double h, const ComplexMatrix& m0,
                           const ComplexMatrix& m_half, const ComplexMatrix& m1) {
  const ComplexMatrix k1 = pathwise_rhs_with(model, m0, l_dag, r);
  const ComplexMatrix k2 = pathwise_rhs_with(model, m_half, l_dag, r + (0.5 * h) * k1);
  const ComplexMatrix k3 = pathwise_rhs_with(model, m_half, l_dag, r + (0.5 * h) * k2);
  const ComplexMatrix k4 = pathwise_rhs_with(model, m1, l_dag, r + h * k3);
  ComplexMatrix next = r;
  next += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  return next;
}

ComplexMatrix em_increment(const DiffusionModel& model, const ComplexMatrix& rho, double dy,
                           double dt) {
  const ComplexMatrix& l = model.coupling();
  const ComplexMatrix l_dag = adjoint(l);
  const ComplexMatrix krho = model.k() * rho;
  const ComplexMatrix lrho = l * rho;
  ComplexMatrix drift = lrho * l_dag;
  drift -= krho;
  drift -= adjoint(krho);
  const double kappa2 = model.kappa() * model.kappa();
  ComplexMatrix out = rho;
  out += dt * drift;
  out += (dy / kappa2) * (lrho + adjoint(lrho));
  return out;
}

ComplexMatrix solve_implicit(const ComplexMatrix& system, const ComplexMatrix& update,
                             const ComplexMatrix& prev) {
  const ComplexMatrix rhs = update * prev * adjoint(update);
  return unvec(solve_linear(system, vec(rhs)), prev.dim());
}

class RobustFilter final : public DiffusionFilter {
 public:
  RobustFilter(const DiffusionModel& model, DensityState initial, double dt)
      : DiffusionFilter(model, std::move(initial), dt), system_(implicit_system(model, dt)) {}

 protected:
  ComplexMatrix advance(const ComplexMatrix& rho, double dy) override {
    return solve_implicit(system_, measurement_update(model_, dy, dt()), rho);
  }

 private:
  ComplexMatrix system_;
};

class EulerMaruyamaFilter final : public DiffusionFilter {
 public:
  EulerMaruyamaFilter(const DiffusionModel& model, DensityState initial, double dt)
      : DiffusionFilter(model, std::move(initial), dt) {}

 protected:
  ComplexMatrix advance(const ComplexMatrix& rho, double dy) override {
    const ComplexMatrix next = em_increment(model_, rho, dy, dt());
    if (!next.all_finite() || !(trace(next).real() > 0.0)) return next;
    return enforce_positivity(next);
  }
};

/// RK4 on the pathwise equation with the gauge re-based at the start of every
/// interval, so that r(0) equals the current state and A(dt)^{-1} = E(dy).
class PathwiseFilter final : public DiffusionFilter {
 public:
  PathwiseFilter(const DiffusionModel& model, DensityState initial, double dt, int substeps)
      : DiffusionFilter(model, std::move(initial), dt),
        substeps_(substeps),
        l_dag_(adjoint(model.coupling())) {
    if (substeps < 1) throw std::invalid_argument("substeps must be >= 1");
  }

 protected:
  ComplexMatrix advance(const ComplexMatrix& rho, double dy) override {
    const double h = dt() / substeps_;
    const auto m_at = [&](double s) {
      return gauged_k(model_, gauge(model_.coupling(), model_.kappa(), dy * s / dt(), s));
    };
    ComplexMatrix r = rho;
    ComplexMatrix m0 = m_at(0.0);
    for (int k = 0; k < substeps_; ++k) {
      const double s = k * h;
      const ComplexMatrix m_half = m_at(s + 0.5 * h);
      ComplexMatrix m1 = m_at(s + h);
      r = rk4_pathwise(model_, l_dag_, r, h, m0, m_half, m1);
      m0 = std::move(m1);
    }
    const ComplexMatrix e = measurement_update(model_, dy, dt());
    return e * r * adjoint(e);
  }

 private:
  int substeps_;
  ComplexMatrix l_dag_;
};

}  // namespace

ComplexMatrix DensityState::unnormalized() const { return std::exp(log_lambda) * rho; }

std::vector<double> MeasurementRecord::cumulative() const {
  std::vector<double> y(increments.size() + 1, 0.0);
  for (std::size_t n = 0; n < increments.size(); ++n) y[n + 1] = y[n] + increments[n];
  return y;
}

double MeasurementRecord::value_at(double t) const {
  if (increments.empty()) return 0.0;
  const double u = std::clamp((t - t0) / dt, 0.0, static_cast<double>(steps()));
  const auto n = std::min(static_cast<std::size_t>(u), steps() - 1);
  double y = 0.0;
  for (std::size_t k = 0; k < n; ++k) y += increments[k];
  return y + increments[n] * (u - static_cast<double>(n));
}

MeasurementRecord MeasurementRecord::coarsen(std::size_t factor) const {
  if (factor == 0 || steps() % factor != 0) {
    throw std::invalid_argument("coarsen: " + std::to_string(steps()) +
                                " steps not divisible by " + std::to_string(factor));
  }
  MeasurementRecord out{dt * static_cast<double>(factor), {}, t0};
  out.increments.reserve(steps() / factor);
  for (std::size_t n = 0; n < steps(); n += factor) {
    double s = 0.0;
    for (std::size_t k = 0; k < factor; ++k) s += increments[n + k];
    out.increments.push_back(s);
  }
  return out;
}

void MeasurementRecord::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("record dt must be positive");
  for (double v : increments) {
    if (!std::isfinite(v)) throw std::invalid_argument("record contains a non-finite increment");
  }
}

Gauge gauge(const ComplexMatrix& l, double kappa, double y, double t, double tol) {
  if (!std::isfinite(y) || !std::isfinite(t)) throw std::invalid_argument("gauge: non-finite y or t");
  const ComplexMatrix x = gauge_exponent(l, kappa, y, t);
  return Gauge{expm(x, tol), expm(-x, tol)};
}

ComplexMatrix pathwise_rhs(const DiffusionModel& model, const Gauge& g, const ComplexMatrix& r) {
  if (r.dim() != model.dim()) throw DimensionError("pathwise_rhs: dimension mismatch");
  const ComplexMatrix m = gauged_k(model, g);
  const double kappa2 = model.kappa() * model.kappa();
  ComplexMatrix out = (1.0 - 1.0 / kappa2) * (model.coupling() * r * adjoint(model.coupling()));
  out -= m * r;
  out -= r * adjoint(m);
  return out;
}

std::vector<PathwiseState> integrate_pathwise(const DiffusionModel& model,
                                              const MeasurementRecord& record,
                                              const ComplexMatrix& r0, int substeps) {
  record.validate();
  if (substeps < 1) throw std::invalid_argument("substeps must be >= 1");
  if (!is_hermitian(r0) || !(trace(r0).real() > 0.0)) {
    throw std::invalid_argument("integrate_pathwise: r0 must be Hermitian with positive trace");
  }
  const ComplexMatrix l_dag = adjoint(model.coupling());
  const std::vector<double> y = record.cumulative();
  const double h = record.dt / substeps;

  const auto m_at = [&](std::size_t n, double s) {
    const double yt = y[n] + record.increments[n] * s / record.dt;
    return gauged_k(model, gauge(model.coupling(), model.kappa(), yt, record.time(n) - record.t0 + s));
  };

  std::vector<PathwiseState> path;
  path.reserve(record.steps() + 1);
  path.push_back({r0, record.t0});
  ComplexMatrix r = r0;
  for (std::size_t n = 0; n < record.steps(); ++n) {
    ComplexMatrix m0 = m_at(n, 0.0);
    for (int k = 0; k < substeps; ++k) {
      const double s = k * h;
      const ComplexMatrix m_half = m_at(n, s + 0.5 * h);
      ComplexMatrix m1 = m_at(n, s + h);
      r = rk4_pathwise(model, l_dag, r, h, m0, m_half, m1);
      m0 = std::move(m1);
    }
    if (!r.all_finite()) throw NumericalFailure("integrate_pathwise: non-finite state", record.time(n + 1));
    path.push_back({r, record.time(n + 1)});
  }
  return path;
}

RecoveredState recover(const ComplexMatrix& a_inv, const ComplexMatrix& r) {
  ComplexMatrix rho_tilde = a_inv * r * adjoint(a_inv);
  const double tr = trace(rho_tilde).real();
  if (!(tr > 0.0) || !std::isfinite(tr)) {
    throw Error("recover: nonpositive trace signals numerical collapse");
  }
  ComplexMatrix rho = rho_tilde * Complex(1.0 / tr);
  return {std::move(rho_tilde), std::move(rho), std::log(tr)};
}

ComplexMatrix measurement_update(const DiffusionModel& model, double dy, double dt) {
  if (!std::isfinite(dy)) throw std::invalid_argument("non-finite record increment");
  // exp{(L/k^2) dy - (L^2/2k^2) dt} is the gauge exponent negated at (dy, dt).
  return expm(-gauge_exponent(model.coupling(), model.kappa(), dy, dt));
}

ComplexMatrix implicit_system(const DiffusionModel& model, double dt) {
  const std::size_t n = model.dim();
  const ComplexMatrix id = ComplexMatrix::identity(n);
  const double kappa2 = model.kappa() * model.kappa();
  const ComplexMatrix a = id + dt * model.k();
  const ComplexMatrix b = dt * adjoint(model.k());
  const ComplexMatrix& c = model.coupling();
  const ComplexMatrix d = ((1.0 - 1.0 / kappa2) * dt) * adjoint(model.coupling());
  return kron(id, a) + kron(transpose(b), id) - kron(transpose(d), c);
}

ComplexMatrix robust_step(const DiffusionModel& model, const ComplexMatrix& prev, double dy,
                          double dt) {
  if (dt == 0.0 && dy == 0.0) return prev;
  if (!(dt > 0.0)) throw std::invalid_argument("robust_step: dt must be positive");
  return solve_implicit(implicit_system(model, dt), measurement_update(model, dy, dt), prev);
}

Scheme parse_scheme(std::string_view name) {
  if (name == "robust") return Scheme::robust;
  if (name == "em") return Scheme::em;
  if (name == "pathwise") return Scheme::pathwise;
  throw std::invalid_argument("unknown scheme '" + std::string(name) + "'");
}

std::string_view scheme_name(Scheme s) noexcept {
  switch (s) {
    case Scheme::robust: return "robust";
    case Scheme::em: return "em";
    case Scheme::pathwise: return "pathwise";
  }
  return "?";
}

DiffusionFilter::DiffusionFilter(const DiffusionModel& model, DensityState initial, double dt)
    : model_(model), state_(std::move(initial)), dt_(dt), t0_(state_.t) {
  if (!(dt > 0.0)) throw std::invalid_argument("filter dt must be positive");
  if (state_.rho.dim() != model.dim()) throw DimensionError("filter: state dimension mismatch");
}

void DiffusionFilter::step(double dy) {
  if (!std::isfinite(dy)) throw std::invalid_argument("non-finite record increment");
  ++n_;
  const double t = t0_ + static_cast<double>(n_) * dt_;
  state_ = normalize(advance(state_.rho, dy), state_.log_lambda, t);
}

std::unique_ptr<DiffusionFilter> make_diffusion_filter(Scheme scheme, const DiffusionModel& model,
                                                       const ComplexMatrix& rho0, double dt,
                                                       double t0, int substeps) {
  require_density(rho0, "make_diffusion_filter");
  DensityState initial{rho0, 0.0, t0};
  switch (scheme) {
    case Scheme::robust: return std::make_unique<RobustFilter>(model, std::move(initial), dt);
    case Scheme::em: return std::make_unique<EulerMaruyamaFilter>(model, std::move(initial), dt);
    case Scheme::pathwise:
      return std::make_unique<PathwiseFilter>(model, std::move(initial), dt, substeps);
  }
  throw std::invalid_argument("unknown scheme");
}

namespace {

std::vector<DensityState> run_filter(DiffusionFilter& filter, const MeasurementRecord& record) {
  std::vector<DensityState> out;
  out.reserve(record.steps() + 1);
  out.push_back(filter.state());
  for (double dy : record.increments) {
    filter.step(dy);
    out.push_back(filter.state());
  }
  return out;
}

}  // namespace

std::vector<DensityState> robust_filter(const DiffusionModel& model,
                                        const MeasurementRecord& record,
                                        const ComplexMatrix& rho0) {
  record.validate();
  const auto filter = make_diffusion_filter(Scheme::robust, model, rho0, record.dt, record.t0);
  return run_filter(*filter, record);
}

std::vector<DensityState> em_unnormalized(const DiffusionModel& model,
                                          const MeasurementRecord& record,
                                          const ComplexMatrix& rho_tilde0) {
  record.validate();
  if (!is_hermitian(rho_tilde0)) throw std::invalid_argument("em_unnormalized: rho_tilde0 not Hermitian");
  const DensityState seed = normalize(rho_tilde0, 0.0, record.t0);
  auto filter = make_diffusion_filter(Scheme::em, model, seed.rho, record.dt, record.t0);
  std::vector<DensityState> out = run_filter(*filter, record);
  for (auto& s : out) s.log_lambda += seed.log_lambda;
  return out;
}

SimulatedPath em_normalized(const DiffusionModel& model, std::span<const double> nu_increments,
                            double dt, const ComplexMatrix& rho0, double t0) {
  require_density(rho0, "em_normalized");
  if (!(dt > 0.0)) throw std::invalid_argument("em_normalized: dt must be positive");
  const ComplexMatrix& l = model.coupling();
  const ComplexMatrix l_dag = adjoint(l);
  const double kappa = model.kappa();

  SimulatedPath out;
  out.record = MeasurementRecord{dt, {}, t0};
  out.record.increments.reserve(nu_increments.size());
  out.states.reserve(nu_increments.size() + 1);
  out.states.push_back({rho0, 0.0, t0});

  ComplexMatrix rho = rho0;
  double log_lambda = 0.0;
  for (std::size_t n = 0; n < nu_increments.size(); ++n) {
    const double dnu = nu_increments[n];
    const double t = t0 + static_cast<double>(n + 1) * dt;
    const double m = expected_measurement(rho, l);
    const double dy = m * dt + kappa * dnu;

    const ComplexMatrix krho = model.k() * rho;
    const ComplexMatrix lrho = l * rho;
    ComplexMatrix next = rho;
    next += dt * (lrho * l_dag - krho - adjoint(krho));
    next += (dnu / kappa) * (lrho + adjoint(lrho) - m * rho);
    if (!next.all_finite()) throw NumericalFailure("em_normalized: non-finite state", t);

    const double tr = trace(next).real();
    out.max_trace_drift = std::max(out.max_trace_drift, std::abs(tr - 1.0));
    if (!(tr > 0.0)) throw NumericalFailure("em_normalized: nonpositive trace", t);
    rho = hermitian_part(next);
    rho *= 1.0 / tr;
    if (min_eigenvalue_hermitian(rho) < 0.0) {
      rho = project_to_density(rho);
      ++out.positivity_corrections;
    }
    log_lambda += (m * dy - 0.5 * m * m * dt) / (kappa * kappa);

    out.record.increments.push_back(dy);
    out.states.push_back({rho, log_lambda, t});
  }
  return out;
}

StateVector pathwise_schrodinger_rhs(const DiffusionModel& model, const Gauge& g,
                                     const StateVector& phi) {
  if (std::abs(model.kappa() - 1.0) > 1e-12) {
    throw std::logic_error("pathwise Schrodinger equation requires perfect detection (kappa = 1)");
  }
  if (phi.size() != model.dim()) throw DimensionError("pathwise_schrodinger_rhs: dimension mismatch");
  const ComplexMatrix m = gauged_k(model, g);
  VecColumn out = matvec(m, VecColumn{phi});
  for (auto& v : out.entries) v = -v;
  return std::move(out.entries);
}

std::vector<StateVector> integrate_pathwise_schrodinger(const DiffusionModel& model,
                                                        const MeasurementRecord& record,
                                                        const StateVector& phi0, int substeps) {
  record.validate();
  if (substeps < 1) throw std::invalid_argument("substeps must be >= 1");
  const std::vector<double> y = record.cumulative();
  const double h = record.dt / substeps;
  const auto g_at = [&](std::size_t n, double s) {
    const double yt = y[n] + record.increments[n] * s / record.dt;
    return gauge(model.coupling(), model.kappa(), yt, record.time(n) - record.t0 + s);
  };
  const auto axpy = [](const StateVector& x, Complex a, const StateVector& d) {
    StateVector out = x;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += a * d[i];
    return out;
  };

  std::vector<StateVector> path{phi0};
  StateVector phi = phi0;
  for (std::size_t n = 0; n < record.steps(); ++n) {
    for (int k = 0; k < substeps; ++k) {
      const double s = k * h;
      const Gauge g0 = g_at(n, s);
      const Gauge gh = g_at(n, s + 0.5 * h);
      const Gauge g1 = g_at(n, s + h);
      const StateVector k1 = pathwise_schrodinger_rhs(model, g0, phi);
      const StateVector k2 = pathwise_schrodinger_rhs(model, gh, axpy(phi, 0.5 * h, k1));
      const StateVector k3 = pathwise_schrodinger_rhs(model, gh, axpy(phi, 0.5 * h, k2));
      const StateVector k4 = pathwise_schrodinger_rhs(model, g1, axpy(phi, h, k3));
      for (std::size_t i = 0; i < phi.size(); ++i) {
        phi[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      }
    }
    path.push_back(phi);
  }
  return path;
}

double modulus_of_continuity(const MeasurementRecord& record, double window) {
  const std::vector<double> y = record.cumulative();
  // Grid points suffice when the window is a multiple of dt; otherwise this
  // rounds the window down to whole steps.
  const auto span = static_cast<std::size_t>(std::floor(window / record.dt + 1e-9));
  double w = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const std::size_t end = std::min(y.size(), i + span + 1);
    for (std::size_t j = i + 1; j < end; ++j) w = std::max(w, std::abs(y[j] - y[i]));
  }
  return w;
}

double initial_window_oscillation(const MeasurementRecord& record, double window) {
  const std::vector<double> y = record.cumulative();
  const auto span = static_cast<std::size_t>(std::floor(window / record.dt + 1e-9));
  const std::size_t end = std::min(y.size(), span + 1);
  const auto [lo, hi] = std::minmax_element(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(end));
  return *hi - *lo;
}

}  // namespace psme
