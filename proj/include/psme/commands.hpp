#pragma once

// Subcommand implementations behind the psme executable. Each writes its
// outputs into `out_dir` (created if missing) and returns the files written.

#include <filesystem>
#include <vector>

#include "psme/config.hpp"

namespace psme {

using FileList = std::vector<std::filesystem::path>;

/// n_traj == 1: trajectory.csv, record.csv, summary.json.
/// n_traj > 1: ensemble_final.csv, mean_path.csv, summary.json.
FileList cmd_simulate(const RunConfig& config, const std::filesystem::path& out_dir);

/// Replays a record file; trajectory.csv matches the simulate output byte for byte.
FileList cmd_filter(const RunConfig& config, const std::filesystem::path& record_file,
                    const std::filesystem::path& out_dir);

/// converge.csv, record.csv, summary.json.
FileList cmd_converge(const RunConfig& config, const std::filesystem::path& out_dir);

/// lipschitz.csv, record.csv, summary.json.
FileList cmd_lipschitz(const RunConfig& config, const std::filesystem::path& out_dir);

}  // namespace psme
