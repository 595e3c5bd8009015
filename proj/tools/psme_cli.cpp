#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "psme/commands.hpp"
#include "psme/io.hpp"

namespace {

// Errors are reported on a single line so scripts can parse them.
std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulate and filter continuously monitored qubits"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("psme ") + psme::kVersion);

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::string record_path;

  const auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file (defaults apply when omitted)");
    sub->add_option("--out", out_dir, "Output directory (overrides output_dir)");
    sub->add_option("--seed", seed, "Seed (overrides the config)");
  };
  CLI::App* simulate = app.add_subcommand("simulate", "Simulate a trajectory or an ensemble");
  CLI::App* filter = app.add_subcommand("filter", "Filter a stored measurement record");
  CLI::App* converge = app.add_subcommand("converge", "Robust-scheme convergence table");
  CLI::App* lipschitz = app.add_subcommand("lipschitz", "Record-perturbation continuity table");
  for (CLI::App* sub : {simulate, filter, converge, lipschitz}) common(sub);
  filter->add_option("--record", record_path, "Record CSV (t,dy or t,dN)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: usage: " << one_line(e.what()) << '\n';
    return 2;
  }

  try {
    psme::RunConfig config = config_path.empty() ? psme::parse_config("{}") : psme::load_config(config_path);
    if (seed) config.seed = *seed;
    const std::filesystem::path out = out_dir.empty() ? config.output_dir : out_dir;

    psme::FileList files;
    if (simulate->parsed()) {
      files = psme::cmd_simulate(config, out);
    } else if (filter->parsed()) {
      files = psme::cmd_filter(config, record_path, out);
    } else if (converge->parsed()) {
      files = psme::cmd_converge(config, out);
    } else {
      files = psme::cmd_lipschitz(config, out);
    }
    for (const auto& f : files) std::cout << f.string() << '\n';
    return 0;
  } catch (const psme::ConfigError& e) {
    std::cerr << "error: config: " << one_line(e.what()) << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: runtime: " << one_line(e.what()) << '\n';
    return 1;
  }
}
