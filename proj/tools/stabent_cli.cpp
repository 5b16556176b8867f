// Experiment runner: stabent <simulate|bound|entropy|diagnose> --config file.json

#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "stabent/commands.hpp"
#include "stabent/config.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> paths;
  std::optional<std::size_t> horizon;
  int verbose = 0;
  bool quiet = false;
};

void add_flags(CLI::App& sub, Flags& f) {
  sub.add_option("--config", f.config, "experiment configuration (JSON)")->required();
  sub.add_option("--seed", f.seed, "override the base seed");
  sub.add_option("--out", f.out, "override the output directory");
  sub.add_option("--paths", f.paths, "override the number of sample paths");
  sub.add_option("--horizon", f.horizon, "override the horizon T");
  sub.add_flag("-v,--verbose", f.verbose, "list written files");
  sub.add_flag("-q,--quiet", f.quiet, "suppress progress messages");
}

int run(const std::string& command, const Flags& f) {
  stabent::ExperimentConfig cfg = stabent::load_config(f.config);
  if (f.seed) cfg.seed = *f.seed;
  if (f.out) cfg.output_dir = *f.out;
  if (f.paths) cfg.paths = *f.paths;
  if (f.horizon) cfg.horizon = *f.horizon;
  if (cfg.paths < 1) throw stabent::ConfigError("--paths must be >= 1");
  if (cfg.horizon < 1 || cfg.effective_burn_in() >= cfg.horizon)
    throw stabent::ConfigError("--horizon must exceed the burn-in");

  std::ostringstream sink;
  std::ostream& log = f.quiet ? static_cast<std::ostream&>(sink) : std::cerr;
  stabent::CommandResult r;
  if (command == "simulate") r = stabent::cmd_simulate(cfg, log);
  else if (command == "bound") r = stabent::cmd_bound(cfg, log);
  else if (command == "entropy") r = stabent::cmd_entropy(cfg, log);
  else r = stabent::cmd_diagnose(cfg, log);
  if (f.verbose > 0)
    for (const auto& file : r.files) std::cerr << "wrote " << cfg.output_dir << '/' << file << '\n';
  return r.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Closed-loop simulation, capacity bounds and stabilization entropy over finite channels"};
  app.footer(std::string("Exit codes: 0 success, 2 configuration or input error, 3 assumption-violation findings.\n\n") +
             stabent::kConfigKeyHelp);
  app.require_subcommand(1);
  Flags flags[4];
  int top_verbose = 0;
  bool top_quiet = false;
  app.add_flag("-v,--verbose", top_verbose, "list written files");
  app.add_flag("-q,--quiet", top_quiet, "suppress progress messages");

  // Each subcommand binds its own Flags: CLI11 resets variables bound by
  // subcommands that were not selected.
  std::string chosen;
  std::size_t chosen_index = 0;
  const std::pair<const char*, const char*> commands[] = {
      {"simulate", "closed-loop trajectories and a divergence summary"},
      {"bound", "empirical measure, Gamma checks and capacity bounds"},
      {"entropy", "stabilization entropy curve from spanning-set counts"},
      {"diagnose", "ergodicity diagnostics: convergence, dispersion, overflow"}};
  for (std::size_t i = 0; i < 4; ++i) {
    CLI::App* sub = app.add_subcommand(commands[i].first, commands[i].second);
    add_flags(*sub, flags[i]);
    sub->footer(stabent::kConfigKeyHelp);
    sub->callback([&chosen, &chosen_index, i, n = std::string(commands[i].first)] {
      chosen = n;
      chosen_index = i;
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : stabent::kExitConfig;
  }

  Flags& f = flags[chosen_index];
  f.verbose += top_verbose;
  f.quiet = f.quiet || top_quiet;
  try {
    return run(chosen, f);
  } catch (const stabent::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return stabent::kExitConfig;
  } catch (const stabent::ParseError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return stabent::kExitConfig;
  } catch (const stabent::DimensionError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return stabent::kExitConfig;
  } catch (const stabent::PreconditionError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return stabent::kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
