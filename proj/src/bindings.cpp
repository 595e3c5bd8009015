#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <string>

#include "psme/commands.hpp"
#include "psme/config.hpp"
#include "psme/io.hpp"
#include "psme/traj.hpp"

namespace py = pybind11;
using namespace psme;

namespace {

using ComplexArray = py::array_t<Complex, py::array::c_style | py::array::forcecast>;

ComplexMatrix to_matrix(const ComplexArray& a) {
  if (a.ndim() != 2 || a.shape(0) != a.shape(1)) throw DimensionError("expected a square 2-d array");
  const auto n = static_cast<std::size_t>(a.shape(0));
  ComplexMatrix m(n);
  const auto r = a.unchecked<2>();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m(i, j) = r(i, j);
  return m;
}

ComplexArray to_array(const ComplexMatrix& m) {
  const auto n = static_cast<py::ssize_t>(m.dim());
  ComplexArray a({n, n});
  auto w = a.mutable_unchecked<2>();
  for (py::ssize_t i = 0; i < n; ++i)
    for (py::ssize_t j = 0; j < n; ++j) w(i, j) = m(i, j);
  return a;
}

py::array_t<double> bloch_array(const std::vector<BlochVector>& v) {
  py::array_t<double> a({static_cast<py::ssize_t>(v.size()), py::ssize_t{3}});
  auto w = a.mutable_unchecked<2>();
  for (std::size_t i = 0; i < v.size(); ++i) {
    w(i, 0) = v[i].x;
    w(i, 1) = v[i].y;
    w(i, 2) = v[i].z;
  }
  return a;
}

py::dict trajectory_dict(const TrajectoryResult& r) {
  py::dict d;
  std::vector<double> log_lambda;
  std::vector<double> purities;
  for (const auto& s : r.states) {
    log_lambda.push_back(s.log_lambda);
    purities.push_back(purity(s.rho));
  }
  d["times"] = py::array(py::cast(r.times));
  d["bloch"] = bloch_array(r.bloch);
  d["log_lambda"] = py::array(py::cast(log_lambda));
  d["purity"] = py::array(py::cast(purities));
  d["final_rho"] = to_array(r.states.back().rho);
  d["seed"] = r.seed;
  if (const auto* m = std::get_if<MeasurementRecord>(&r.record)) {
    d["record"] = py::array(py::cast(m->increments));
  } else {
    d["record"] = py::array(py::cast(std::get<CountingRecord>(r.record).counts));
  }
  return d;
}

TrajectoryResult trajectory(const RunConfig& c) {
  if (c.mode == Mode::diffusion) {
    return run_trajectory(c.diffusion_model(), c.scheme, c.dt, c.horizon, c.initial_state(), c.seed, c.substeps);
  }
  return run_jump_trajectory(c.jump_model(), c.scheme, c.dt, c.horizon, c.initial_state(), c.seed, c.substeps);
}

TrajectoryResult replay(const RunConfig& c, const std::vector<double>& increments) {
  if (c.mode == Mode::diffusion) {
    const MeasurementRecord rec{c.dt, increments, 0.0};
    return filter_record(c.diffusion_model(), c.scheme, rec, c.initial_state(), c.seed, c.substeps);
  }
  CountingRecord rec{c.dt, {}, 0.0};
  for (double v : increments) rec.counts.push_back(static_cast<int>(v));
  return filter_counting_record(c.jump_model(), c.scheme, rec, c.initial_state(), c.seed, c.substeps);
}

}  // namespace

PYBIND11_MODULE(_psme, m) {
  m.doc() = "Trajectory simulation and robust filtering for continuously monitored qubits";
  m.attr("__version__") = kVersion;

  // Translators run newest first, so the subclass is registered last.
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def("normalize_config", [](const std::string& text) { return parse_config(text).echo().dump(); },
        py::arg("config_json"));

  m.def(
      "trajectory",
      [](const std::string& text) {
        const RunConfig c = parse_config(text);
        py::gil_scoped_release release;
        TrajectoryResult r = trajectory(c);
        py::gil_scoped_acquire acquire;
        return trajectory_dict(r);
      },
      py::arg("config_json"));

  m.def(
      "filter_record",
      [](const std::string& text, const std::vector<double>& increments) {
        return trajectory_dict(replay(parse_config(text), increments));
      },
      py::arg("config_json"), py::arg("increments"));

  m.def(
      "ensemble",
      [](const std::string& text) {
        const RunConfig c = parse_config(text);
        const EnsembleOptions opts{c.substeps, c.threads};
        EnsembleResult e;
        {
          py::gil_scoped_release release;
          e = c.mode == Mode::diffusion
                  ? run_ensemble(c.diffusion_model(), c.scheme, c.dt, c.horizon, c.initial_state(), c.n_traj,
                                 c.seed, opts)
                  : run_jump_ensemble(c.jump_model(), c.scheme, c.dt, c.horizon, c.initial_state(), c.n_traj,
                                      c.seed, opts);
        }
        std::vector<BlochVector> mean;
        for (const auto& rho : e.mean_rho_path) mean.push_back(bloch_from_rho(rho));
        py::dict d;
        d["times"] = py::array(py::cast(e.times));
        d["final_bloch"] = bloch_array(e.final_bloch);
        d["final_purity"] = py::array(py::cast(e.final_purity));
        d["mean_bloch"] = bloch_array(mean);
        return d;
      },
      py::arg("config_json"));

  m.def(
      "master_path",
      [](const std::string& text) {
        const RunConfig c = parse_config(text);
        ComplexMatrix h(2), l(2);
        if (c.mode == Mode::diffusion) {
          const DiffusionModel dm = c.diffusion_model();
          h = dm.hamiltonian();
          l = dm.coupling();
        } else {
          const JumpModel jm = c.jump_model();
          h = jm.hamiltonian();
          l = jm.equivalent_lindblad_coupling();
        }
        std::vector<BlochVector> b;
        for (const auto& rho : integrate_master(h, l, c.initial_state(), c.dt, step_count(c.dt, c.horizon)))
          b.push_back(bloch_from_rho(rho));
        return bloch_array(b);
      },
      py::arg("config_json"));

  m.def(
      "run_command",
      [](const std::string& command, const std::string& text, const std::filesystem::path& out,
         const std::filesystem::path& record) {
        const RunConfig c = parse_config(text);
        if (command == "simulate") return cmd_simulate(c, out);
        if (command == "filter") return cmd_filter(c, record, out);
        if (command == "converge") return cmd_converge(c, out);
        if (command == "lipschitz") return cmd_lipschitz(c, out);
        throw py::value_error("unknown command '" + command + "'");
      },
      py::arg("command"), py::arg("config_json"), py::arg("out_dir"), py::arg("record") = std::filesystem::path{});

  m.def("expm", [](const ComplexArray& a) { return to_array(expm(to_matrix(a))); }, py::arg("a"));
}
