#ifndef STABENT_COMMANDS_HPP
#define STABENT_COMMANDS_HPP

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "stabent/capacity_bounds.hpp"
#include "stabent/config.hpp"
#include "stabent/dynamics.hpp"
#include "stabent/ergodics.hpp"
#include "stabent/simulation.hpp"
#include "stabent/stabilization_entropy.hpp"

namespace stabent {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitViolation = 3;

struct CommandResult {
  int exit_code = kExitOk;
  std::vector<std::string> files;  // relative to the output directory
};

namespace detail {

// Stream offsets for the independent parts of one experiment.
inline constexpr std::uint64_t kMonteCarloStream = 1ull << 32;
inline constexpr std::uint64_t kFalsifyStream = (1ull << 32) + 1;
inline constexpr std::uint64_t kEntropyStream = (1ull << 32) + 1024;

class OutputDir {
 public:
  explicit OutputDir(const std::string& dir) : root_(dir) { std::filesystem::create_directories(root_); }

  std::ofstream open(const std::string& name, CommandResult& result) const {
    const auto path = root_ / name;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    result.files.push_back(name);
    return out;
  }

  void write_json(const std::string& name, const nlohmann::json& j, CommandResult& result) const {
    auto out = open(name, result);
    out << j.dump(2) << '\n';
  }

 private:
  std::filesystem::path root_;
};

inline nlohmann::json vector_json(const Vector& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

inline nlohmann::json run_header(const ExperimentConfig& c, const CodingPolicy& policy, const char* command) {
  return nlohmann::json{{"command", command},         {"model", c.model.name()},
                        {"policy", policy.name()},   {"alphabet", policy.alphabet_size()},
                        {"capacity", policy.capacity()}, {"horizon", c.horizon},
                        {"paths", c.paths},          {"seed", c.seed}};
}

inline const char* status_name(MeasureStatus s) {
  switch (s) {
    case MeasureStatus::kOk: return "ok";
    case MeasureStatus::kOverflowWarning: return "overflow_warning";
    case MeasureStatus::kAllOverflow: return "all_overflow";
  }
  return "ok";
}

}  // namespace detail

/// Trajectory CSVs (trajectories/path_NNNN.csv) and summary.json.
inline CommandResult cmd_simulate(const ExperimentConfig& c, std::ostream& log) {
  CommandResult result;
  const auto policy = c.make_policy();
  const detail::OutputDir out(c.output_dir);
  const auto paths = batch_rollout(c.model, *policy, c.noise, c.init, c.horizon, c.paths, c.seed);
  const std::size_t files = std::min(c.paths, c.trajectory_files.value_or(c.paths));
  for (std::size_t k = 0; k < files; ++k) {
    char name[48];
    std::snprintf(name, sizeof(name), "trajectories/path_%04zu.csv", k);
    auto f = out.open(name, result);
    write_trajectory_csv(f, paths[k]);
  }
  const auto s = summarize(paths);
  bool replay = true, causal = true;
  for (const auto& p : paths) {
    replay = replay && replay_matches(c.model, p);
    causal = causal && causality_audit(*policy, p);
  }
  nlohmann::json j = detail::run_header(c, *policy, "simulate");
  j["diverged"] = s.diverged;
  j["diverged_fraction"] = s.diverged_fraction();
  j["unstable_growth"] = s.unstable_growth;
  j["replay_ok"] = replay;
  j["causality_ok"] = causal;
  out.write_json("summary.json", j, result);
  log << "simulate: " << s.diverged << "/" << s.paths << " paths diverged, " << s.unstable_growth
      << " with unstable growth\n";
  return result;
}

/// measure.csv and bound.json. Exit code 3 when the capacity check is
/// violated, a declared floor is falsified, or the measure is unusable.
inline CommandResult cmd_bound(const ExperimentConfig& c, std::ostream& log) {
  CommandResult result;
  const auto policy = c.make_policy();
  const detail::OutputDir out(c.output_dir);
  const auto paths = batch_rollout(c.model, *policy, c.noise, c.init, c.horizon, c.paths, c.seed);
  const auto q = empirical_measure(paths, c.partition, c.effective_burn_in());
  {
    auto f = out.open("measure.csv", result);
    write_measure_csv(f, q);
  }

  nlohmann::json j = detail::run_header(c, *policy, "bound");
  j["measure"] = {{"burn_in", q.burn_in},
                  {"samples", q.samples()},
                  {"overflow_mass", q.overflow_mass()},
                  {"status", detail::status_name(q.status())}};

  bool findings = false;
  nlohmann::json checks = nlohmann::json::array();
  for (std::size_t i = 0; i < c.gamma.subsets.size(); ++i) {
    const IndexSubset& p = c.gamma.subsets[i];
    if (!p.floor()) continue;
    const auto r = gamma_falsify(c.model, p, c.falsify_box, c.noise, c.falsify_samples,
                                 derive_seed(c.seed, detail::kFalsifyStream + i));
    findings = findings || r.counterexample;
    checks.push_back({{"p", p.one_based()},
                      {"c_p", *p.floor()},
                      {"falsified", r.counterexample},
                      {"min_abs_det", r.min_abs_det},
                      {"x", detail::vector_json(r.x)},
                      {"w", detail::vector_json(r.w)},
                      {"samples", r.samples}});
    if (r.counterexample) log << "bound: floor c_p = " << *p.floor() << " for p = " << p.str() << " is falsified\n";
  }
  j["gamma_checks"] = std::move(checks);

  BoundOptions opts;
  opts.n_mc = c.mc_samples;
  opts.seed = derive_seed(c.seed, detail::kMonteCarloStream);
  opts.common_random_numbers = c.common_random_numbers;
  opts.capacity = c.capacity.value_or(policy->capacity());
  try {
    const auto report = refined_bound(c.model, c.gamma, q, c.noise, opts);
    j["bound"] = to_json(report);
    findings = findings || report.violation;
    if (report.best)
      log << "bound: max over Gamma " << format_g17(report.best->mean) << " bits at p = " << report.best->subset.str()
          << (report.violation ? " (exceeds capacity)" : "") << '\n';
  } catch (const PreconditionError& e) {
    j["bound"] = nullptr;
    j["measure_error"] = e.what();
    findings = true;
    log << "bound: " << e.what() << '\n';
  }
  j["findings"] = findings;
  out.write_json("bound.json", j, result);
  result.exit_code = findings ? kExitViolation : kExitOk;
  return result;
}

/// entropy.csv, entropy.json and optional satisfaction_T<T>.csv files.
inline CommandResult cmd_entropy(const ExperimentConfig& c, std::ostream& log) {
  CommandResult result;
  const auto policy = c.make_policy();
  const detail::OutputDir out(c.output_dir);
  const auto& ec = c.entropy;
  const std::size_t n = c.model.state_dim();
  EntropyTemplate tmpl;
  tmpl.split = ec.split.value_or(n);
  tmpl.d_sets = ec.d.build(tmpl.split);
  tmpl.e_sets = ec.e.build(n - tmpl.split);
  tmpl.f_sets = ec.f.build(c.model.noise_dim());
  tmpl.rho = ec.rho;
  tmpl.epsilon = ec.epsilon;
  tmpl.vacuous = ec.vacuous;
  tmpl.scenarios = ec.scenarios;
  tmpl.measure_horizon = ec.measure_horizon;
  tmpl.measure_paths = ec.measure_paths;
  tmpl.mode = ec.mode;

  const auto curve = entropy_rate(c.model, *policy, c.noise, c.init, tmpl, ec.horizons,
                                  derive_seed(c.seed, detail::kEntropyStream));
  {
    auto f = out.open("entropy.csv", result);
    write_entropy_csv(f, curve);
  }
  bool findings = false;
  nlohmann::json points = nlohmann::json::array();
  const auto env = curve.envelope();
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    const auto& p = curve.points[i];
    findings = findings || (p.feasible && !p.within_capacity);
    points.push_back({{"T", p.horizon},
                      {"feasible", p.feasible},
                      {"s_estimate", p.feasible ? nlohmann::json(p.s_estimate) : nlohmann::json(nullptr)},
                      {"rate", p.feasible ? nlohmann::json(p.rate) : nlohmann::json(nullptr)},
                      {"envelope", std::isfinite(env[i]) ? nlohmann::json(env[i]) : nlohmann::json(nullptr)},
                      {"candidates", p.candidates},
                      {"covered_fraction", p.covered_fraction},
                      {"within_capacity", p.within_capacity}});
    if (ec.dump_matrix) {
      auto f = out.open("satisfaction_T" + std::to_string(p.horizon) + ".csv", result);
      write_satisfaction_csv(f, p.matrix);
    }
    log << "entropy: T = " << p.horizon << ", empirical s = "
        << (p.feasible ? std::to_string(p.s_estimate) : std::string("inf")) << ", candidates = " << p.candidates
        << '\n';
  }
  nlohmann::json j = detail::run_header(c, *policy, "entropy");
  j["estimate"] = "empirical s over sampled scenarios";
  j["rho"] = ec.rho;
  j["epsilon"] = ec.vacuous ? nlohmann::json(nullptr) : nlohmann::json(ec.epsilon);
  j["scenarios"] = ec.scenarios;
  j["thresholds"] = curve.thresholds;
  j["points"] = std::move(points);
  const double limsup = curve.limsup_estimate();
  j["limsup_estimate"] = std::isfinite(limsup) ? nlohmann::json(limsup) : nlohmann::json(nullptr);
  j["findings"] = findings;
  out.write_json("entropy.json", j, result);
  result.exit_code = findings ? kExitViolation : kExitOk;
  return result;
}

/// measure.csv, convergence.csv (first path), dispersion.csv, diagnose.json.
inline CommandResult cmd_diagnose(const ExperimentConfig& c, std::ostream& log) {
  CommandResult result;
  const auto policy = c.make_policy();
  const detail::OutputDir out(c.output_dir);
  const auto paths = batch_rollout(c.model, *policy, c.noise, c.init, c.horizon, c.paths, c.seed);
  const std::size_t burn_in = c.effective_burn_in();
  const auto q = empirical_measure(paths, c.partition, burn_in);
  const auto curves = frequency_convergence(paths.front(), c.partition, geometric_checkpoints(c.horizon, c.checkpoints));
  const auto disp = ergodicity_dispersion(paths, c.partition, burn_in);
  {
    auto f = out.open("measure.csv", result);
    write_measure_csv(f, q);
  }
  {
    auto f = out.open("convergence.csv", result);
    write_convergence_csv(f, curves, c.partition.cell_count());
  }
  double max_disp = 0.0, sum_disp = 0.0;
  {
    auto f = out.open("dispersion.csv", result);
    f << "cell,dispersion\n";
    for (std::size_t i = 0; i < disp.size(); ++i) {
      if (i == c.partition.overflow_index()) f << "overflow";
      else f << i;
      f << ',' << format_g17(disp[i]) << '\n';
      max_disp = std::max(max_disp, disp[i]);
      sum_disp += disp[i];
    }
  }
  const auto s = summarize(paths);
  nlohmann::json j = detail::run_header(c, *policy, "diagnose");
  j["burn_in"] = burn_in;
  j["overflow_mass"] = q.overflow_mass();
  j["status"] = detail::status_name(q.status());
  j["max_dispersion"] = max_disp;
  j["mean_dispersion"] = sum_disp / static_cast<double>(disp.size());
  j["diverged"] = s.diverged;
  out.write_json("diagnose.json", j, result);
  log << "diagnose: max dispersion " << format_g17(max_disp) << ", overflow mass " << format_g17(q.overflow_mass())
      << '\n';
  return result;
}

}  // namespace stabent

#endif  // STABENT_COMMANDS_HPP
