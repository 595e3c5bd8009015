#include "psme/commands.hpp"

#include <fstream>
#include <sstream>

#include "psme/io.hpp"

namespace psme {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

fs::path write_file(const fs::path& dir, const char* name, const std::string& content) {
  const fs::path path = dir / name;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << content;
  out.close();
  if (!out) throw Error("failed writing " + path.string());
  return path;
}

void prepare(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());
}

ordered_json envelope(const RunConfig& c, const char* command) {
  ordered_json j;
  j["software"] = "psme";
  j["version"] = kVersion;
  j["command"] = command;
  j["seed"] = c.seed;
  j["config"] = c.echo();
  return j;
}

std::string dump(const ordered_json& j) { return j.dump(2) + "\n"; }

ordered_json bloch_json(const BlochVector& b) { return {b.x, b.y, b.z}; }

ordered_json matrix_json(const ComplexMatrix& m) {
  ordered_json rows = ordered_json::array();
  for (std::size_t i = 0; i < m.dim(); ++i) {
    ordered_json row = ordered_json::array();
    for (std::size_t j = 0; j < m.dim(); ++j) row.push_back({m(i, j).real(), m(i, j).imag()});
    rows.push_back(row);
  }
  return rows;
}

ordered_json final_state_json(const TrajectoryResult& r) {
  ordered_json j;
  const DensityState& last = r.states.back();
  j["t"] = last.t;
  if (!r.bloch.empty()) j["bloch"] = bloch_json(r.bloch.back());
  j["log_lambda"] = last.log_lambda;
  j["purity"] = purity(last.rho);
  return j;
}

TrajectoryResult single_trajectory(const RunConfig& c) {
  const ComplexMatrix rho0 = c.initial_state();
  if (c.mode == Mode::diffusion) {
    return run_trajectory(c.diffusion_model(), c.scheme, c.dt, c.horizon, rho0, c.seed, c.substeps);
  }
  return run_jump_trajectory(c.jump_model(), c.scheme, c.dt, c.horizon, rho0, c.seed, c.substeps);
}

EnsembleResult ensemble(const RunConfig& c) {
  const ComplexMatrix rho0 = c.initial_state();
  const EnsembleOptions opts{c.substeps, c.threads};
  if (c.mode == Mode::diffusion) {
    return run_ensemble(c.diffusion_model(), c.scheme, c.dt, c.horizon, rho0, c.n_traj, c.seed, opts);
  }
  return run_jump_ensemble(c.jump_model(), c.scheme, c.dt, c.horizon, rho0, c.n_traj, c.seed, opts);
}

FileList write_single(const RunConfig& c, const TrajectoryResult& r, const fs::path& dir,
                      const char* command, bool with_record) {
  const Provenance prov{c.echo(), c.seed};
  FileList files;
  std::ostringstream traj;
  write_trajectory(traj, r, prov);
  files.push_back(write_file(dir, "trajectory.csv", traj.str()));
  if (with_record) {
    std::ostringstream rec;
    write_record(rec, r.record, prov);
    files.push_back(write_file(dir, "record.csv", rec.str()));
  }
  ordered_json s = envelope(c, command);
  s["steps"] = r.states.size() - 1;
  s["final"] = final_state_json(r);
  files.push_back(write_file(dir, "summary.json", dump(s)));
  return files;
}

FileList write_ensemble(const RunConfig& c, const EnsembleResult& e, const fs::path& dir) {
  const Provenance prov{c.echo(), c.seed};
  FileList files;

  std::ostringstream fin;
  write_provenance(fin, prov);
  fin << "trajectory,seed,x,y,z,purity\n";
  for (std::size_t i = 0; i < e.n_traj; ++i) {
    const BlochVector& b = e.final_bloch[i];
    fin << i << ',' << e.base_seed + i << ',' << format_double(b.x) << ',' << format_double(b.y)
        << ',' << format_double(b.z) << ',' << format_double(e.final_purity[i]) << '\n';
  }
  files.push_back(write_file(dir, "ensemble_final.csv", fin.str()));

  std::ostringstream mean;
  write_provenance(mean, prov);
  mean << "t,x,y,z,purity\n";
  for (std::size_t n = 0; n < e.mean_rho_path.size(); ++n) {
    const BlochVector b = bloch_from_rho(e.mean_rho_path[n]);
    mean << format_double(e.times[n]) << ',' << format_double(b.x) << ',' << format_double(b.y)
         << ',' << format_double(b.z) << ',' << format_double(purity(e.mean_rho_path[n])) << '\n';
  }
  files.push_back(write_file(dir, "mean_path.csv", mean.str()));

  const SteadyStateStats stats = steady_state_stats(e);
  ordered_json s = envelope(c, "simulate");
  s["n_traj"] = e.n_traj;
  ordered_json summary;
  summary["t"] = e.times.back();
  summary["mean"] = e.summary.mean;
  summary["stddev"] = e.summary.stddev;
  s["summary"] = summary;
  ordered_json steady;
  steady["bins"] = kHistogramBins;
  steady["range"] = {-1.0, 1.0};
  steady["histogram"] = {{"x", stats.histogram[0]}, {"y", stats.histogram[1]}, {"z", stats.histogram[2]}};
  steady["threshold"] = stats.threshold;
  steady["fraction_beyond"] = stats.fraction_beyond;
  steady["mean_abs"] = stats.mean_abs;
  steady["mean_purity"] = stats.mean_purity;
  s["steady_state"] = steady;
  ordered_json finals = ordered_json::array();
  for (const auto& b : e.final_bloch) finals.push_back(bloch_json(b));
  s["final_bloch"] = finals;
  ordered_json path = ordered_json::array();
  for (const auto& m : e.mean_rho_path) path.push_back(matrix_json(m));
  s["mean_rho_path"] = path;
  files.push_back(write_file(dir, "summary.json", dump(s)));
  return files;
}

void require_diffusion(const RunConfig& c, const char* command) {
  if (c.mode != Mode::diffusion) {
    throw ConfigError("mode", std::string(command) + " requires mode 'diffusion'");
  }
}

}  // namespace

FileList cmd_simulate(const RunConfig& config, const fs::path& out_dir) {
  prepare(out_dir);
  if (config.n_traj == 1) return write_single(config, single_trajectory(config), out_dir, "simulate", true);
  return write_ensemble(config, ensemble(config), out_dir);
}

FileList cmd_filter(const RunConfig& config, const fs::path& record_file, const fs::path& out_dir) {
  std::ifstream in(record_file, std::ios::binary);
  if (!in) throw Error("cannot open record file " + record_file.string());
  const AnyRecord record = read_record(in, config.dt);
  const bool counting = std::holds_alternative<CountingRecord>(record);
  if (counting != (config.mode == Mode::jump)) {
    throw Error(std::string("record/config mode mismatch: record is ") +
                (counting ? "a counting record (t,dN)" : "a homodyne record (t,dy)") +
                " but config mode is " + (config.mode == Mode::jump ? "'jump'" : "'diffusion'"));
  }
  const ComplexMatrix rho0 = config.initial_state();
  prepare(out_dir);
  TrajectoryResult r =
      counting ? filter_counting_record(config.jump_model(), config.scheme,
                                        std::get<CountingRecord>(record), rho0, config.seed,
                                        config.substeps)
               : filter_record(config.diffusion_model(), config.scheme,
                               std::get<MeasurementRecord>(record), rho0, config.seed,
                               config.substeps);
  return write_single(config, r, out_dir, "filter", false);
}

FileList cmd_converge(const RunConfig& config, const fs::path& out_dir) {
  require_diffusion(config, "converge");
  const DiffusionModel model = config.diffusion_model();
  const ComplexMatrix rho0 = config.initial_state();
  const MeasurementRecord fine =
      config.converge_record == "smooth"
          ? smooth_record(config.fine_dt, config.horizon)
          : brownian_record(model, config.fine_dt, config.horizon, rho0, config.seed);
  const auto rows = convergence_report(model, fine, config.deltas, rho0);
  prepare(out_dir);

  const Provenance prov{config.echo(), config.seed};
  FileList files;
  std::ostringstream csv;
  write_provenance(csv, prov);
  csv << "delta,sup_error,sup_error_normalized,w_sliding,w_initial,k\n";
  for (const auto& r : rows) {
    csv << format_double(r.delta) << ',' << format_double(r.sup_error) << ','
        << format_double(r.sup_error_normalized) << ',' << format_double(r.w_sliding) << ','
        << format_double(r.w_initial) << ',' << format_double(r.k) << '\n';
  }
  files.push_back(write_file(out_dir, "converge.csv", csv.str()));
  std::ostringstream rec;
  write_measurement_record(rec, fine, prov);
  files.push_back(write_file(out_dir, "record.csv", rec.str()));

  ordered_json s = envelope(config, "converge");
  s["record"] = config.converge_record;
  ordered_json table = ordered_json::array();
  bool monotone = true;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    table.push_back({{"delta", rows[i].delta},
                     {"sup_error", rows[i].sup_error},
                     {"sup_error_normalized", rows[i].sup_error_normalized},
                     {"w_sliding", rows[i].w_sliding},
                     {"w_initial", rows[i].w_initial},
                     {"k", rows[i].k}});
    if (i > 0 && (rows[i].delta < rows[i - 1].delta) != (rows[i].sup_error <= rows[i - 1].sup_error)) {
      monotone = false;
    }
  }
  s["rows"] = table;
  s["monotone"] = monotone;
  files.push_back(write_file(out_dir, "summary.json", dump(s)));
  return files;
}

FileList cmd_lipschitz(const RunConfig& config, const fs::path& out_dir) {
  require_diffusion(config, "lipschitz");
  const DiffusionModel model = config.diffusion_model();
  const ComplexMatrix rho0 = config.initial_state();
  const MeasurementRecord y = brownian_record(model, config.dt, config.horizon, rho0, config.seed);
  const auto rows = lipschitz_report(model, y, config.epsilons, rho0);
  prepare(out_dir);

  const Provenance prov{config.echo(), config.seed};
  FileList files;
  std::ostringstream csv;
  write_provenance(csv, prov);
  csv << "epsilon,gap,gap_unnormalized,ratio,ratio_unnormalized\n";
  double lo = 0.0;
  double hi = 0.0;
  bool seen = false;
  ordered_json table = ordered_json::array();
  for (const auto& r : rows) {
    csv << format_double(r.epsilon) << ',' << format_double(r.gap) << ','
        << format_double(r.gap_unnormalized) << ',' << format_double(r.ratio) << ','
        << format_double(r.ratio_unnormalized) << '\n';
    table.push_back({{"epsilon", r.epsilon},
                     {"gap", r.gap},
                     {"gap_unnormalized", r.gap_unnormalized},
                     {"ratio", r.ratio},
                     {"ratio_unnormalized", r.ratio_unnormalized}});
    if (r.epsilon > 0.0) {
      lo = seen ? std::min(lo, r.ratio) : r.ratio;
      hi = seen ? std::max(hi, r.ratio) : r.ratio;
      seen = true;
    }
  }
  files.push_back(write_file(out_dir, "lipschitz.csv", csv.str()));
  std::ostringstream rec;
  write_measurement_record(rec, y, prov);
  files.push_back(write_file(out_dir, "record.csv", rec.str()));

  ordered_json s = envelope(config, "lipschitz");
  s["rows"] = table;
  s["ratio_spread"] = seen && lo > 0.0 ? ordered_json(hi / lo) : ordered_json(nullptr);
  files.push_back(write_file(out_dir, "summary.json", dump(s)));
  return files;
}

}  // namespace psme
