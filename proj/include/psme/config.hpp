#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "psme/diffusion.hpp"
#include "psme/jump.hpp"
#include "psme/model.hpp"

namespace psme {

/// Schema violation; field() is the JSON path of the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& message)
      : Error(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

enum class Mode { diffusion, jump };

struct RunConfig {
  Mode mode = Mode::diffusion;
  /// Defaults to robust for diffusion and pathwise (or em for singular C) for jumps.
  Scheme scheme = Scheme::robust;

  // two-level homodyne model
  double gamma = 1.0;
  double alpha = 4.949747468305833;  // 7 / sqrt(2)
  double detuning = 0.0;
  double phi = 0.0;
  double eta = 0.85;

  // counting model
  ComplexMatrix jump_c = pauli().sigma_x;
  ComplexMatrix energy = ComplexMatrix(2);
  double lambda = 1.0;

  BlochVector initial{1.0, 0.0, 0.0};
  double dt = 0.01;
  double horizon = 25.0;
  std::size_t n_traj = 1;
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  int substeps = 4;
  unsigned threads = 0;

  // converge
  std::string converge_record = "smooth";
  double fine_dt = 1e-3;
  std::vector<double> deltas{0.04, 0.02, 0.01};
  // lipschitz
  std::vector<double> epsilons{1e-2, 1e-3, 1e-4};

  /// Normalized echo of every field, embedded in all outputs.
  nlohmann::ordered_json echo() const;
  DiffusionModel diffusion_model() const;
  JumpModel jump_model() const;
  ComplexMatrix initial_state() const;
};

/// Parses and validates a JSON document. Unknown keys are rejected.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

/// Named 2x2 operators: identity, zero, pauli_x, pauli_y, pauli_z, sigma, sigma_dag.
std::optional<ComplexMatrix> named_operator(std::string_view name);

}  // namespace psme
