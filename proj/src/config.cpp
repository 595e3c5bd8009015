#include "psme/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace psme {

namespace {

using nlohmann::json;

const std::set<std::string, std::less<>> kKnownKeys{
    "mode",    "scheme",     "gamma",  "alpha",    "Delta",     "phi",
    "eta",     "C",          "E",      "lambda",   "rho0_bloch", "dt",
    "T",       "n_traj",     "seed",   "output_dir", "substeps", "threads",
    "converge_record", "fine_dt", "deltas", "epsilons"};

double number(const json& doc, const char* key, double fallback) {
  if (!doc.contains(key)) return fallback;
  const json& v = doc.at(key);
  if (!v.is_number()) throw ConfigError(key, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(key, "must be finite");
  return d;
}

std::uint64_t unsigned_integer(const json& doc, const char* key, std::uint64_t fallback) {
  if (!doc.contains(key)) return fallback;
  const json& v = doc.at(key);
  if (!v.is_number_unsigned()) {
    throw ConfigError(key, "expected a nonnegative integer");
  }
  return v.get<std::uint64_t>();
}

std::string text(const json& doc, const char* key, std::string fallback) {
  if (!doc.contains(key)) return fallback;
  const json& v = doc.at(key);
  if (!v.is_string()) throw ConfigError(key, "expected a string");
  return v.get<std::string>();
}

std::vector<double> number_list(const json& doc, const char* key, std::vector<double> fallback) {
  if (!doc.contains(key)) return fallback;
  const json& v = doc.at(key);
  if (!v.is_array() || v.empty()) throw ConfigError(key, "expected a nonempty array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) throw ConfigError(std::string(key) + "[" + std::to_string(i) + "]", "expected a number");
    out.push_back(v[i].get<double>());
  }
  return out;
}

Complex complex_entry(const json& v, const std::string& path) {
  if (v.is_number()) return {v.get<double>(), 0.0};
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) {
    return {v[0].get<double>(), v[1].get<double>()};
  }
  throw ConfigError(path, "expected a number or a [re, im] pair");
}

ComplexMatrix operator_field(const json& doc, const char* key, const ComplexMatrix& fallback) {
  if (!doc.contains(key)) return fallback;
  const json& v = doc.at(key);
  if (v.is_string()) {
    const auto op = named_operator(v.get<std::string>());
    if (!op) throw ConfigError(key, "unknown operator name '" + v.get<std::string>() + "'");
    return *op;
  }
  if (!v.is_array() || v.size() != 2) throw ConfigError(key, "expected an operator name or a 2x2 matrix");
  ComplexMatrix m(2);
  for (std::size_t i = 0; i < 2; ++i) {
    const std::string row_path = std::string(key) + "[" + std::to_string(i) + "]";
    if (!v[i].is_array() || v[i].size() != 2) throw ConfigError(row_path, "expected a row of 2 entries");
    for (std::size_t j = 0; j < 2; ++j) {
      m(i, j) = complex_entry(v[i][j], row_path + "[" + std::to_string(j) + "]");
    }
  }
  return m;
}

json matrix_echo(const ComplexMatrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.dim(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < m.dim(); ++j) row.push_back({m(i, j).real(), m(i, j).imag()});
    rows.push_back(row);
  }
  return rows;
}

Scheme scheme_field(const json& doc, const std::string& fallback) {
  try {
    return parse_scheme(text(doc, "scheme", fallback));
  } catch (const std::invalid_argument& e) {
    throw ConfigError("scheme", e.what());
  }
}

void require(bool ok, const char* field, const std::string& message) {
  if (!ok) throw ConfigError(field, message);
}

}  // namespace

std::optional<ComplexMatrix> named_operator(std::string_view name) {
  const auto& p = pauli();
  if (name == "identity") return ComplexMatrix::identity(2);
  if (name == "zero") return ComplexMatrix(2);
  if (name == "pauli_x") return p.sigma_x;
  if (name == "pauli_y") return p.sigma_y;
  if (name == "pauli_z") return p.sigma_z;
  if (name == "sigma") return p.sigma;
  if (name == "sigma_dag") return adjoint(p.sigma);
  return std::nullopt;
}

RunConfig parse_config(std::string_view source) {
  json doc;
  try {
    doc = json::parse(source);
  } catch (const json::parse_error& e) {
    throw ConfigError("$", std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("$", "expected a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (!kKnownKeys.contains(key)) throw ConfigError(key, "unknown key");
  }

  RunConfig c;
  const std::string mode = text(doc, "mode", "diffusion");
  if (mode == "diffusion") {
    c.mode = Mode::diffusion;
  } else if (mode == "jump") {
    c.mode = Mode::jump;
  } else {
    throw ConfigError("mode", "expected 'diffusion' or 'jump'");
  }

  c.gamma = number(doc, "gamma", c.gamma);
  c.alpha = number(doc, "alpha", c.alpha);
  c.detuning = number(doc, "Delta", c.detuning);
  c.phi = number(doc, "phi", c.phi);
  c.eta = number(doc, "eta", c.eta);
  c.jump_c = operator_field(doc, "C", c.jump_c);
  c.energy = operator_field(doc, "E", c.energy);
  c.lambda = number(doc, "lambda", c.lambda);
  c.dt = number(doc, "dt", c.dt);
  c.horizon = number(doc, "T", c.horizon);
  c.n_traj = unsigned_integer(doc, "n_traj", c.n_traj);
  c.seed = unsigned_integer(doc, "seed", c.seed);
  c.output_dir = text(doc, "output_dir", c.output_dir);
  c.substeps = static_cast<int>(unsigned_integer(doc, "substeps", static_cast<std::uint64_t>(c.substeps)));
  c.threads = static_cast<unsigned>(unsigned_integer(doc, "threads", c.threads));
  c.converge_record = text(doc, "converge_record", c.converge_record);
  c.fine_dt = number(doc, "fine_dt", c.fine_dt);
  c.deltas = number_list(doc, "deltas", c.deltas);
  c.epsilons = number_list(doc, "epsilons", c.epsilons);
  if (doc.contains("rho0_bloch")) {
    const auto b = number_list(doc, "rho0_bloch", {});
    require(b.size() == 3, "rho0_bloch", "expected [x, y, z]");
    c.initial = {b[0], b[1], b[2]};
  }

  require(c.eta > 0.0 && c.eta <= 1.0, "eta", "must lie in (0, 1]");
  require(c.gamma > 0.0, "gamma", "must be positive");
  require(c.lambda > 0.0, "lambda", "must be positive");
  require(c.dt > 0.0, "dt", "must be positive");
  require(c.horizon >= c.dt, "T", "must be >= dt");
  const double n_steps = std::round(c.horizon / c.dt);
  require(std::abs(n_steps * c.dt - c.horizon) <= 1e-9 * c.horizon, "T", "must be a multiple of dt");
  require(c.n_traj >= 1, "n_traj", "must be >= 1");
  require(c.substeps >= 1, "substeps", "must be >= 1");
  require(c.initial.norm() <= 1.0 + 1e-12, "rho0_bloch", "Bloch vector must have norm <= 1");
  require(c.converge_record == "smooth" || c.converge_record == "brownian", "converge_record",
          "expected 'smooth' or 'brownian'");
  require(c.fine_dt > 0.0, "fine_dt", "must be positive");
  for (double d : c.deltas) {
    const double k = std::round(d / c.fine_dt);
    require(d > 0.0 && k >= 1.0 && std::abs(k * c.fine_dt - d) <= 1e-9 * d, "deltas",
            "every delta must be a positive multiple of fine_dt");
  }
  for (double e : c.epsilons) require(e >= 0.0, "epsilons", "must be nonnegative");

  // Re-validate through the model builders so that parse errors name the field.
  if (c.mode == Mode::diffusion) {
    (void)c.diffusion_model();
    c.scheme = scheme_field(doc, "robust");
  } else {
    require(is_hermitian(c.energy), "E", "must be Hermitian");
    const JumpModel jm = c.jump_model();
    const std::string fallback = jm.jump_operator_invertible() ? "pathwise" : "em";
    c.scheme = scheme_field(doc, fallback);
    require(c.scheme != Scheme::robust, "scheme", "'robust' applies to diffusion mode only");
    require(c.scheme != Scheme::pathwise || jm.jump_operator_invertible(), "scheme",
            "'pathwise' requires an invertible C");
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

nlohmann::ordered_json RunConfig::echo() const {
  nlohmann::ordered_json j;
  j["mode"] = mode == Mode::diffusion ? "diffusion" : "jump";
  j["scheme"] = std::string(scheme_name(scheme));
  if (mode == Mode::diffusion) {
    j["gamma"] = gamma;
    j["alpha"] = alpha;
    j["Delta"] = detuning;
    j["phi"] = phi;
  } else {
    j["C"] = matrix_echo(jump_c);
    j["E"] = matrix_echo(energy);
    j["lambda"] = lambda;
  }
  j["eta"] = eta;
  j["rho0_bloch"] = {initial.x, initial.y, initial.z};
  j["dt"] = dt;
  j["T"] = horizon;
  j["n_traj"] = n_traj;
  j["seed"] = seed;
  j["substeps"] = substeps;
  j["converge_record"] = converge_record;
  j["fine_dt"] = fine_dt;
  j["deltas"] = deltas;
  j["epsilons"] = epsilons;
  return j;
}

DiffusionModel RunConfig::diffusion_model() const {
  try {
    return two_level_model(gamma, alpha, detuning, phi, eta);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("model", e.what());
  }
}

JumpModel RunConfig::jump_model() const {
  try {
    return build_jump_model(jump_c, energy, lambda, eta);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("model", e.what());
  }
}

ComplexMatrix RunConfig::initial_state() const { return rho_from_bloch(initial); }

}  // namespace psme
