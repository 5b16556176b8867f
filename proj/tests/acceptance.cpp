// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "stabent/capacity_bounds.hpp"
#include "stabent/commands.hpp"
#include "stabent/config.hpp"
#include "stabent/dynamics.hpp"
#include "stabent/ergodics.hpp"
#include "stabent/policies.hpp"
#include "stabent/simulation.hpp"
#include "stabent/stabilization_entropy.hpp"
#include "stabent/system_model.hpp"

using namespace stabent;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

std::string config_path(const std::string& name) { return std::string(STABENT_EXAMPLE_CONFIGS) + "/" + name; }

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

struct Run {
  ExperimentConfig cfg;
  std::unique_ptr<CodingPolicy> policy;
  std::vector<Trajectory> paths;
  EmpiricalMeasure q;
};

Run simulate_example(const std::string& name) {
  Run r;
  r.cfg = load_config(config_path(name));
  r.policy = r.cfg.make_policy();
  r.paths = batch_rollout(r.cfg.model, *r.policy, r.cfg.noise, r.cfg.init, r.cfg.horizon, r.cfg.paths, r.cfg.seed);
  r.q = empirical_measure(r.paths, r.cfg.partition, r.cfg.effective_burn_in());
  return r;
}

BoundOptions options_for(const Run& r) {
  BoundOptions opts;
  opts.n_mc = r.cfg.mc_samples;
  opts.seed = derive_seed(r.cfg.seed, 1);
  opts.common_random_numbers = true;
  opts.capacity = r.cfg.capacity.value_or(r.policy->capacity());
  return opts;
}

const SubsetEstimate* estimate_for(const BoundReport& rep, const IndexSubset& p) {
  for (const auto& s : rep.subsets)
    if (s.subset == p && s.estimate) return &*s.estimate;
  return nullptr;
}

// 1. Example 1: classical 0, refined 1, both exact.
Outcome example_one_bounds() {
  const auto start = std::chrono::steady_clock::now();
  const Run r = simulate_example("example1_bound.json");
  const auto rep = refined_bound(r.cfg.model, r.cfg.gamma, r.q, r.cfg.noise, options_for(r));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const auto* p1 = estimate_for(rep, IndexSubset::from_one_based(2, {1}));
  const bool ok = rep.classical && p1 && rep.best && rep.classical->mean == 0.0 && rep.classical->std_error == 0.0 &&
                  p1->mean == 1.0 && p1->std_error == 0.0 && rep.best->mean == 1.0 && secs < 1.0;
  return {ok, "classical=" + (rep.classical ? fmt("%.17g", rep.classical->mean) : std::string("n/a")) +
                  " refined{1}=" + (p1 ? fmt("%.17g", p1->mean) : std::string("n/a")) + " time=" + fmt("%.3f", secs) +
                  "s (< 1 s)"};
}

// 2. Example 2: refined{1} - classical = 1 under common random numbers, for several Q.
Outcome example_two_gap() {
  const auto start = std::chrono::steady_clock::now();
  Run r = simulate_example("example2_quantizer.json");
  std::vector<EmpiricalMeasure> measures{r.q};
  measures.push_back(empirical_measure(r.paths, Partition(vec({-4, -4}), vec({4, 4}), {7, 5}), 0));
  {
    // An arbitrary histogram unrelated to any closed loop.
    EmpiricalMeasure m;
    m.partition = Partition(vec({-3, -3}), vec({3, 3}), {6, 6});
    std::mt19937_64 rng(5);
    m.counts.assign(37, 0);
    for (std::size_t c = 0; c < 36; ++c) m.counts[c] = rng() % 100;
    measures.push_back(m);
  }
  const GammaDeclaration gamma{{IndexSubset::from_one_based(2, {1})}};
  double worst = 0.0;
  bool ok = true;
  for (std::size_t i = 0; i < measures.size(); ++i) {
    BoundOptions opts = options_for(r);
    opts.n_mc = 100000;
    opts.seed = derive_seed(r.cfg.seed, 10 + i);
    const auto rep = refined_bound(r.cfg.model, gamma, measures[i], r.cfg.noise, opts);
    if (!rep.best || !rep.classical) {
      ok = false;
      continue;
    }
    worst = std::max(worst, std::abs(rep.best->mean - rep.classical->mean - 1.0));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  ok = ok && worst <= 1e-12 && secs < 10.0;
  return {ok, "max |gap - 1| over " + std::to_string(measures.size()) + " measures = " + fmt("%.3g", worst) +
                  " (<= 1e-12), n_mc=1e5, time=" + fmt("%.2f", secs) + "s (< 10 s)"};
}

// 3. Stabilized runs respect the capacity.
Outcome capacity_consistency() {
  const auto start = std::chrono::steady_clock::now();
  const Run cubic = simulate_example("example2_quantizer.json");
  const auto rep = refined_bound(cubic.cfg.model, cubic.cfg.gamma, cubic.q, cubic.cfg.noise, options_for(cubic));
  const auto cubic_summary = summarize(cubic.paths);

  const Run dbl = simulate_example("doubling_zoom.json");
  const auto rep2 = refined_bound(dbl.cfg.model, dbl.cfg.gamma, dbl.q, dbl.cfg.noise, options_for(dbl));
  const auto dbl_summary = summarize(dbl.paths);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const bool ok = rep.best && rep2.best && cubic_summary.diverged == 0 && dbl_summary.diverged == 0 &&
                  cubic.paths.size() == 64 && cubic.cfg.horizon == 10000 && cubic.policy->capacity() == 12.0 &&
                  rep.best->mean <= 12.0 && !rep.violation && dbl.policy->capacity() == 2.0 &&
                  rep2.best->mean == 1.0 && !rep2.violation && secs < 120.0;
  return {ok, "example2 max=" + (rep.best ? fmt("%.4f", rep.best->mean) : std::string("n/a")) + " <= 12 violation=" +
                  (rep.violation ? "true" : "false") + ", doubling refined=" +
                  (rep2.best ? fmt("%.17g", rep2.best->mean) : std::string("n/a")) + " <= 2, diverged " +
                  std::to_string(cubic_summary.diverged + dbl_summary.diverged) + ", time=" + fmt("%.2f", secs) +
                  "s (< 120 s)"};
}

// 4. s <= M^T and rate <= log2 M for every instance.
Outcome counting_bound() {
  const std::vector<std::string> models{"stable_ar1", "scalar_doubling"};
  std::size_t instances = 0, points = 0, infeasible = 0;
  bool ok = true;
  std::string first_failure;
  for (const auto& name : models) {
    const SystemModel m = catalog_model(name);
    const NoiseSpec noise = NoiseSpec::gaussian(Vector::Zero(1), Vector::Ones(1));
    const InitSpec init = InitSpec::uniform(-Vector::Ones(1), Vector::Ones(1));
    const CancelRule rule(m, Vector::Zero(1), Vector::Zero(1));
    for (std::size_t alphabet : {2, 4}) {
      std::vector<std::pair<std::string, std::unique_ptr<CodingPolicy>>> policies;
      policies.emplace_back("null", std::make_unique<NullPolicy>(alphabet, 1));
      policies.emplace_back("uniform", std::make_unique<UniformQuantizerPolicy>(
                                           QuantizerGrid(vec({-2}), vec({2}), {alphabet - 1}), alphabet, rule));
      policies.emplace_back("zoom", std::make_unique<ZoomPolicy>(alphabet, ZoomParams{}, rule, 1));
      for (const auto& [label, policy] : policies) {
        EntropyTemplate tmpl;
        tmpl.d_sets = SetFamily::grid(vec({-6}), vec({6}), {1});
        tmpl.e_sets = SetFamily::whole(0);
        tmpl.f_sets = SetFamily::whole(1);
        tmpl.epsilon = 0.5;
        tmpl.scenarios = 200;
        tmpl.mode = CoverMode::kExact;
        const auto curve =
            entropy_rate(m, *policy, noise, init, tmpl, {1, 2, 3, 4, 5, 6, 7, 8}, derive_seed(99, instances));
        ++instances;
        for (const auto& p : curve.points) {
          ++points;
          const bool candidates_ok = at_most_power(p.candidates, alphabet, p.horizon);
          bool point_ok = candidates_ok && p.feasible;
          if (p.feasible) {
            point_ok = point_ok && at_most_power(p.s_estimate, alphabet, p.horizon) &&
                       p.rate <= std::log2(static_cast<double>(alphabet));
          } else {
            ++infeasible;
          }
          if (!point_ok && first_failure.empty())
            first_failure = " first failure: " + name + "/" + label + " M=" + std::to_string(alphabet) +
                            " T=" + std::to_string(p.horizon);
          ok = ok && point_ok;
        }
      }
    }
  }
  return {ok, std::to_string(instances) + " (model, policy, M) instances x T=1..8, " + std::to_string(points) +
                  " points, infeasible " + std::to_string(infeasible) + first_failure};
}

// 5. Exact cover against a 2^n oracle; greedy never below exact.
Outcome set_cover_correctness() {
  std::mt19937_64 rng(314);
  std::uniform_int_distribution<std::size_t> size(1, 12);
  std::uniform_real_distribution<double> rho(0.05, 0.95), dens(0.05, 0.6);
  std::size_t agree = 0, greedy_ok = 0, feasible = 0;
  const std::size_t trials = 200;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    const std::size_t nc = size(rng), ns = size(rng);
    auto m = SatisfactionMatrix::empty(nc, ns);
    std::bernoulli_distribution hit(dens(rng));
    for (std::size_t c = 0; c < nc; ++c)
      for (std::size_t s = 0; s < ns; ++s)
        if (hit(rng)) m.set(c, s);
    const double r = rho(rng);
    const std::size_t need = required_coverage(ns, r);
    std::optional<std::size_t> oracle;
    for (std::uint32_t mask = 0; mask < (1u << nc); ++mask) {
      std::size_t covered = 0;
      for (std::size_t s = 0; s < ns; ++s) {
        bool any = false;
        for (std::size_t c = 0; c < nc; ++c) any = any || (((mask >> c) & 1u) && m.at(c, s));
        covered += any;
      }
      const auto k = static_cast<std::size_t>(std::popcount(mask));
      if (covered >= need && (!oracle || k < *oracle)) oracle = k;
    }
    const auto exact = min_spanning_estimate(m, r, CoverMode::kExact);
    const auto greedy = min_spanning_estimate(m, r, CoverMode::kGreedy);
    feasible += oracle.has_value();
    agree += exact.feasible == oracle.has_value() && (!oracle || exact.cardinality == *oracle);
    greedy_ok += greedy.feasible == oracle.has_value() && (!oracle || greedy.cardinality >= exact.cardinality);
  }
  return {agree == trials && greedy_ok == trials,
          "exact==oracle " + std::to_string(agree) + "/" + std::to_string(trials) + ", greedy>=exact " +
              std::to_string(greedy_ok) + "/" + std::to_string(trials) + " (" + std::to_string(feasible) +
              " feasible)"};
}

// 6. Symbolic vs central-difference subset Jacobians.
Outcome jacobian_fidelity() {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  double worst = 0.0;
  std::size_t checks = 0;
  for (const auto& name : catalog_names()) {
    const SystemModel m = catalog_model(name);
    const std::size_t n = m.state_dim();
    for (std::size_t mask = 1; mask < (std::size_t{1} << n); ++mask) {
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < n; ++i)
        if ((mask >> i) & 1u) idx.push_back(i + 1);
      const auto p = IndexSubset::from_one_based(n, idx);
      for (int pt = 0; pt < 100; ++pt) {
        Vector x(static_cast<Eigen::Index>(n)), w(static_cast<Eigen::Index>(m.noise_dim()));
        for (auto& v : x) v = u(rng);
        for (auto& v : w) v = u(rng);
        const Matrix sym = subset_jacobian(m, p, x, w);
        const Matrix fd = subset_jacobian_fd(m, p, x, w);
        worst = std::max(worst, (sym - fd).norm() / std::max(sym.norm(), 1e-300));
        ++checks;
      }
    }
  }
  return {worst < 1e-5, std::to_string(checks) + " (model, p, point) checks, max rel err " + fmt("%.3g", worst) +
                            " (< 1e-5)"};
}

// 7. Stable AR(1): pooled variance and cell weights against N(0, 4/3).
Outcome stationary_law() {
  const Run r = simulate_example("ar1_diagnose.json");
  double sum = 0, sq = 0;
  std::size_t n = 0;
  for (const auto& p : r.paths)
    for (std::size_t t = r.cfg.effective_burn_in(); t < p.horizon; ++t) {
      const double x = p.state(t)(0);
      sum += x;
      sq += x * x;
      ++n;
    }
  const double mean = sum / static_cast<double>(n);
  const double var = sq / static_cast<double>(n) - mean * mean;
  const double rel = std::abs(var - 4.0 / 3.0) / (4.0 / 3.0);
  const double sd = std::sqrt(4.0 / 3.0);
  const auto cdf = [sd](double x) { return 0.5 * std::erfc(-x / (sd * std::sqrt(2.0))); };
  const double samples = static_cast<double>(r.q.samples());
  double worst_z = 0.0;
  for (std::size_t c = 0; c < r.cfg.partition.cell_count(); ++c) {
    const double prob = cdf(r.cfg.partition.cell_high(c)(0)) - cdf(r.cfg.partition.cell_low(c)(0));
    const double sigma = std::sqrt(prob * (1 - prob) / samples);
    worst_z = std::max(worst_z, std::abs(r.q.weight(c) - prob) / sigma);
  }
  const bool ok = r.paths.size() == 64 && r.cfg.horizon == 10000 && rel < 0.05 && worst_z <= 3.0;
  return {ok, "variance " + fmt("%.4f", var) + " (rel err " + fmt("%.4f", rel) + " < 0.05), max cell |z| " +
                  fmt("%.2f", worst_z) + " (<= 3) over " + std::to_string(r.cfg.partition.cell_count()) + " cells"};
}

// 8. psi_p round trip and the four-dimensional worked case.
Outcome permutation_algebra() {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::size_t good = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng() % 8;
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 1);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(1 + rng() % n);
    std::sort(idx.begin(), idx.end());
    const auto p = IndexSubset::from_one_based(n, idx);
    Vector x(static_cast<Eigen::Index>(n));
    for (auto& v : x) v = u(rng);
    good += inverse_permute(p, permute_state(p, x)) == x && permute_state(p, inverse_permute(p, x)) == x;
  }
  const auto p = IndexSubset::from_one_based(4, {2, 4});
  const bool worked = permute_state(p, vec({1, 2, 3, 4})) == vec({2, 4, 1, 3}) &&
                      inverse_permute(p, vec({10, 20, 30, 40})) == vec({30, 10, 40, 20}) &&
                      project(p, vec({1, 2, 3, 4})) == vec({2, 4});
  return {good == 1000 && worked, "round trips " + std::to_string(good) + "/1000, worked N=4 p={2,4} case " +
                                      (worked ? "exact" : "MISMATCH")};
}

// 9. Declared determinant floors on the cubic model.
Outcome gamma_falsification() {
  const ExperimentConfig cfg = load_config(config_path("example2_quantizer.json"));
  const auto sampler = DomainSampler::default_for(2);
  const auto keep = gamma_falsify(cfg.model, IndexSubset::from_one_based(2, {1, 2}, 0.4), sampler, cfg.noise, 100000,
                                  derive_seed(cfg.seed, 2));
  const auto drop = gamma_falsify(cfg.model, IndexSubset::from_one_based(2, {1, 2}, 0.6), sampler, cfg.noise, 100000,
                                  derive_seed(cfg.seed, 3));
  const bool ok = !keep.counterexample && drop.counterexample && keep.samples == 100000;
  return {ok, "c_p=0.4 " + std::string(keep.counterexample ? "falsified" : "survives") + " (min |det| " +
                  fmt("%.5f", keep.min_abs_det) + "), c_p=0.6 " +
                  (drop.counterexample ? "falsified" : "survives") + " (min |det| " + fmt("%.5f", drop.min_abs_det) +
                  ")"};
}

// 10. Every subcommand reruns to byte-identical files.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    out[fs::relative(e.path(), dir).string()] = buf.str();
  }
  return out;
}

Outcome reproducibility() {
  using Cmd = CommandResult (*)(const ExperimentConfig&, std::ostream&);
  const std::tuple<const char*, Cmd, const char*> runs[] = {
      {"simulate", cmd_simulate, "doubling_zoom.json"},   {"bound", cmd_bound, "example2_quantizer.json"},
      {"bound", cmd_bound, "dsl_example2.json"},          {"entropy", cmd_entropy, "doubling_zoom.json"},
      {"diagnose", cmd_diagnose, "ar1_diagnose.json"},    {"simulate", cmd_simulate, "example1_bound.json"}};
  const fs::path root = fs::temp_directory_path() / "stabent_acceptance";
  std::size_t identical = 0, files = 0;
  std::string mismatch;
  for (std::size_t i = 0; i < std::size(runs); ++i) {
    const auto& [name, fn, config] = runs[i];
    std::map<std::string, std::string> outputs[2];
    for (int rep = 0; rep < 2; ++rep) {
      ExperimentConfig cfg = load_config(config_path(config));
      cfg.output_dir = (root / (std::to_string(i) + "_" + std::to_string(rep))).string();
      fs::remove_all(cfg.output_dir);
      std::ostringstream log;
      fn(cfg, log);
      outputs[rep] = snapshot(cfg.output_dir);
    }
    files += outputs[0].size();
    if (!outputs[0].empty() && outputs[0] == outputs[1]) ++identical;
    else if (mismatch.empty()) mismatch = std::string(" mismatch: ") + name + " " + config;
  }
  fs::remove_all(root);
  return {identical == std::size(runs), std::to_string(identical) + "/" + std::to_string(std::size(runs)) +
                                            " subcommand runs identical (" + std::to_string(files) + " files)" +
                                            mismatch};
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"Example 1 bounds", example_one_bounds},
      {"Example 2 refinement gap", example_two_gap},
      {"capacity consistency of stabilized runs", capacity_consistency},
      {"counting bound s <= M^T", counting_bound},
      {"set-cover correctness", set_cover_correctness},
      {"Jacobian fidelity", jacobian_fidelity},
      {"stationary law of stable AR(1)", stationary_law},
      {"permutation algebra", permutation_algebra},
      {"Gamma falsification", gamma_falsification},
      {"reproducibility", reproducibility}};
  int failures = 0;
  for (std::size_t i = 0; i < std::size(criteria); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(std::size(criteria)) - failures, std::size(criteria));
  return failures == 0 ? 0 : 1;
}
