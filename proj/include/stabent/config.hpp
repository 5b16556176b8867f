#ifndef STABENT_CONFIG_HPP
#define STABENT_CONFIG_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "stabent/dynamics.hpp"
#include "stabent/ergodics.hpp"
#include "stabent/error.hpp"
#include "stabent/model_source.hpp"
#include "stabent/policies.hpp"
#include "stabent/random.hpp"
#include "stabent/stabilization_entropy.hpp"
#include "stabent/system_model.hpp"

namespace stabent {

/// Reference text for every configuration key; printed by `--help`.
inline constexpr const char* kConfigKeyHelp = R"(Configuration file (JSON). Unknown keys are errors.
Vectors may be given as arrays or as a single number broadcast to the dimension.

  model                 object, exactly one of:
    catalog             example1 | example2 | scalar_doubling | stable_ar1
    text                model text: "state N", "noise K", "control N'",
                        "B = [a, b; c, d]", equations "x1' = ..." (one per line)
  noise                 object: type = gaussian (mean, stddev) | uniform (low, high)
                        | atoms (atoms: [[..], ..], probabilities) | zero
                        default: gaussian, mean 0, stddev 1
  init                  object: type = uniform (low, high) | gaussian (mean, stddev),
                        fixed: {"x1": value, ...} pins coordinates
                        default: uniform on [-1, 1]^N
  policy                object: type = null | uniform | zoom
    alphabet            channel alphabet size M (or bits: M = 2^bits)
    target              control target state (default 0)
    low, high, levels   uniform: quantizer box and per-axis level counts
                        (M must be at least prod(levels) + 1)
    zoom_in, zoom_out   zoom: contraction in (0,1), expansion > 1 (0.9, 4)
    initial_half_width  zoom: starting box half-width (1)
    min_half_width      zoom: floor on the half-width (1e-9)
    initial_center      zoom: starting box center (0)
    levels              zoom: per-axis levels (default: equal split of M - 1)
  gamma                 array of {p: [1-based indices], c_p: floor}; default [{p: [1..N]}]
  partition             object: low, high, cells (per axis) for the empirical measure
  horizon               steps T per path (1000)
  paths                 number of sample paths (16)
  burn_in               steps dropped before the empirical measure (default T/10)
  mc_samples            Monte Carlo draws per subset integral (10000)
  seed                  base seed (0)
  common_random_numbers reuse one draw stream for every subset (true)
  capacity              capacity C in bits for the violation check (default log2 M)
  falsify_samples       draws per Gamma falsification test (100000)
  falsify_box           object: low, high (default [-100, 100]^N), cauchy_fraction (0.1)
  trajectory_files      number of per-path trajectory CSVs written by simulate (all)
  entropy               object:
    horizons            list of T values ([4, 6, 8])
    split               m, the number of leading state coordinates classified by D (N)
    d, e, f             families: {low, high, cells} grid or "whole" (default "whole")
    rho                 uncovered scenario mass allowed, in (0,1) (0.5)
    epsilon             threshold slack, r = (1 + epsilon)(1 - mass) (0.01)
    vacuous             use r = 1 everywhere (false)
    scenarios           sampled scenarios per horizon (200)
    measure_horizon     horizon of the measure run (2000)
    measure_paths       paths of the measure run (8)
    mode                greedy | exact (greedy)
    dump_matrix         write the satisfaction matrix per horizon (false)
  diagnose              object:
    checkpoints         number of convergence checkpoints (20)
  output_dir            output directory (".")
)";

struct PolicyConfig {
  std::string type = "null";
  std::size_t alphabet = 2;
  std::optional<Vector> target;
  std::optional<Vector> low;
  std::optional<Vector> high;
  std::vector<std::size_t> levels;
  ZoomParams zoom;
};

struct FamilyConfig {
  bool whole = true;
  Vector low;
  Vector high;
  std::vector<std::size_t> cells;

  SetFamily build(std::size_t dim) const {
    if (whole) return SetFamily::whole(dim);
    if (static_cast<std::size_t>(low.size()) != dim) throw ConfigError("set family dimension mismatch");
    return SetFamily::grid(low, high, cells);
  }
};

struct EntropyConfig {
  std::vector<std::size_t> horizons{4, 6, 8};
  std::optional<std::size_t> split;
  FamilyConfig d, e, f;
  double rho = 0.5;
  double epsilon = 0.01;
  bool vacuous = false;
  std::size_t scenarios = 200;
  std::size_t measure_horizon = 2000;
  std::size_t measure_paths = 8;
  CoverMode mode = CoverMode::kGreedy;
  bool dump_matrix = false;
};

/// Fully resolved experiment: every output is a function of this and the
/// build.
struct ExperimentConfig {
  SystemModel model = catalog_model("example1");
  NoiseSpec noise;
  InitSpec init;
  PolicyConfig policy;
  GammaDeclaration gamma;
  Partition partition;
  std::size_t horizon = 1000;
  std::size_t paths = 16;
  std::optional<std::size_t> burn_in;
  std::size_t mc_samples = 10000;
  std::uint64_t seed = 0;
  bool common_random_numbers = true;
  std::optional<double> capacity;
  std::size_t falsify_samples = 100000;
  DomainSampler falsify_box;
  std::optional<std::size_t> trajectory_files;
  EntropyConfig entropy;
  std::size_t checkpoints = 20;
  std::string output_dir = ".";

  std::size_t effective_burn_in() const { return burn_in.value_or(default_burn_in(horizon)); }

  std::unique_ptr<CodingPolicy> make_policy() const;
};

namespace detail {

using nlohmann::json;

class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  const json& at(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ConfigError(where(key) + ": missing");
    return j_.at(key);
  }

  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError("unknown key '" + where(it.key()) + "'");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline double number(const json& j, const std::string& where) {
  if (!j.is_number()) throw ConfigError(where + ": expected a number");
  return j.get<double>();
}

inline std::size_t count(const json& j, const std::string& where) {
  if (!j.is_number_integer() || j.get<long long>() < 0) throw ConfigError(where + ": expected a non-negative integer");
  return j.get<std::size_t>();
}

inline bool boolean(const json& j, const std::string& where) {
  if (!j.is_boolean()) throw ConfigError(where + ": expected true or false");
  return j.get<bool>();
}

inline std::string text(const json& j, const std::string& where) {
  if (!j.is_string()) throw ConfigError(where + ": expected a string");
  return j.get<std::string>();
}

inline Vector vec(const json& j, std::size_t dim, const std::string& where) {
  const auto n = static_cast<Eigen::Index>(dim);
  if (j.is_number()) return Vector::Constant(n, j.get<double>());
  if (!j.is_array()) throw ConfigError(where + ": expected a number or an array");
  if (j.size() != dim)
    throw ConfigError(where + ": expected " + std::to_string(dim) + " entries, got " + std::to_string(j.size()));
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = number(j[static_cast<std::size_t>(i)], where);
  return v;
}

inline std::vector<std::size_t> counts(const json& j, std::size_t dim, const std::string& where) {
  if (j.is_number_integer()) return std::vector<std::size_t>(dim, count(j, where));
  if (!j.is_array() || j.size() != dim)
    throw ConfigError(where + ": expected an integer or " + std::to_string(dim) + " integers");
  std::vector<std::size_t> out;
  for (const auto& v : j) out.push_back(count(v, where));
  return out;
}

inline SystemModel read_model(const json& j) {
  ObjectReader r(j, "model");
  const bool cat = r.has("catalog"), txt = r.has("text");
  if (cat == txt) throw ConfigError("model: give exactly one of 'catalog' or 'text'");
  r.finish();
  if (cat) return catalog_model(text(j.at("catalog"), "model.catalog"));
  try {
    return SystemModel::from_source(parse_model(text(j.at("text"), "model.text")));
  } catch (const ParseError& e) {
    throw ConfigError(std::string("model.text: ") + e.what());
  } catch (const DimensionError& e) {
    throw ConfigError(std::string("model.text: ") + e.what());
  }
}

inline NoiseSpec read_noise(const json& j, std::size_t k) {
  ObjectReader r(j, "noise");
  const std::string type = r.has("type") ? text(j.at("type"), "noise.type") : "gaussian";
  NoiseSpec s;
  if (type == "gaussian") {
    const Vector mean = r.has("mean") ? vec(j.at("mean"), k, "noise.mean") : Vector::Zero(static_cast<Eigen::Index>(k));
    const Vector sd = r.has("stddev") ? vec(j.at("stddev"), k, "noise.stddev")
                                      : Vector::Ones(static_cast<Eigen::Index>(k));
    s = NoiseSpec::gaussian(mean, sd);
  } else if (type == "uniform") {
    s = NoiseSpec::uniform(vec(r.at("low"), k, "noise.low"), vec(r.at("high"), k, "noise.high"));
  } else if (type == "atoms") {
    const json& atoms = r.at("atoms");
    if (!atoms.is_array()) throw ConfigError("noise.atoms: expected an array");
    std::vector<Vector> pts;
    for (const auto& a : atoms) pts.push_back(vec(a, k, "noise.atoms"));
    const json& probs = r.at("probabilities");
    if (!probs.is_array()) throw ConfigError("noise.probabilities: expected an array");
    std::vector<double> p;
    for (const auto& v : probs) p.push_back(number(v, "noise.probabilities"));
    s = NoiseSpec::discrete(pts, p);
  } else if (type == "zero") {
    s = NoiseSpec::zero(k);
  } else {
    throw ConfigError("noise.type: unknown family '" + type + "'");
  }
  r.finish();
  return s;
}

inline InitSpec read_init(const json& j, std::size_t n) {
  ObjectReader r(j, "init");
  const std::string type = r.has("type") ? text(j.at("type"), "init.type") : "uniform";
  InitSpec s;
  if (type == "uniform") {
    s = InitSpec::uniform(r.has("low") ? vec(j.at("low"), n, "init.low") : Vector::Constant(static_cast<Eigen::Index>(n), -1.0),
                          r.has("high") ? vec(j.at("high"), n, "init.high") : Vector::Ones(static_cast<Eigen::Index>(n)));
  } else if (type == "gaussian") {
    s = InitSpec::gaussian(
        r.has("mean") ? vec(j.at("mean"), n, "init.mean") : Vector::Zero(static_cast<Eigen::Index>(n)),
        r.has("stddev") ? vec(j.at("stddev"), n, "init.stddev") : Vector::Ones(static_cast<Eigen::Index>(n)));
  } else {
    throw ConfigError("init.type: unknown family '" + type + "'");
  }
  if (r.has("fixed")) {
    const json& fixed = j.at("fixed");
    if (!fixed.is_object()) throw ConfigError("init.fixed: expected an object like {\"x1\": 0.5}");
    for (auto it = fixed.begin(); it != fixed.end(); ++it) {
      const std::string& key = it.key();
      std::size_t idx = 0;
      try {
        if (key.size() < 2 || key[0] != 'x') throw std::invalid_argument(key);
        std::size_t used = 0;
        idx = std::stoul(key.substr(1), &used);
        if (used != key.size() - 1) throw std::invalid_argument(key);
      } catch (const std::exception&) {
        throw ConfigError("init.fixed: key '" + key + "' is not x<i>");
      }
      if (idx < 1 || idx > n) throw ConfigError("init.fixed: '" + key + "' is outside x1..x" + std::to_string(n));
      s.pin(idx - 1, number(it.value(), "init.fixed." + key));
    }
  }
  r.finish();
  return s;
}

inline PolicyConfig read_policy(const json& j, std::size_t n) {
  ObjectReader r(j, "policy");
  PolicyConfig p;
  p.type = r.has("type") ? text(j.at("type"), "policy.type") : "null";
  const bool has_alphabet = r.has("alphabet"), has_bits = r.has("bits");
  if (has_alphabet && has_bits) throw ConfigError("policy: give 'alphabet' or 'bits', not both");
  if (has_alphabet) p.alphabet = count(j.at("alphabet"), "policy.alphabet");
  if (has_bits) {
    const std::size_t bits = count(j.at("bits"), "policy.bits");
    if (bits < 1 || bits > 31) throw ConfigError("policy.bits: expected 1..31");
    p.alphabet = std::size_t{1} << bits;
  }
  if (p.alphabet < 1) throw ConfigError("policy.alphabet: must be >= 1");
  if (r.has("target")) p.target = vec(j.at("target"), n, "policy.target");
  if (p.type == "null") {
    // no further keys
  } else if (p.type == "uniform") {
    p.low = vec(r.at("low"), n, "policy.low");
    p.high = vec(r.at("high"), n, "policy.high");
    p.levels = counts(r.at("levels"), n, "policy.levels");
  } else if (p.type == "zoom") {
    if (r.has("zoom_in")) p.zoom.zoom_in = number(j.at("zoom_in"), "policy.zoom_in");
    if (r.has("zoom_out")) p.zoom.zoom_out = number(j.at("zoom_out"), "policy.zoom_out");
    if (r.has("initial_half_width"))
      p.zoom.initial_half_width = number(j.at("initial_half_width"), "policy.initial_half_width");
    if (r.has("min_half_width")) p.zoom.min_half_width = number(j.at("min_half_width"), "policy.min_half_width");
    if (r.has("initial_center")) p.zoom.initial_center = vec(j.at("initial_center"), n, "policy.initial_center");
    if (r.has("levels")) p.zoom.levels = counts(j.at("levels"), n, "policy.levels");
  } else {
    throw ConfigError("policy.type: unknown policy '" + p.type + "'");
  }
  r.finish();
  return p;
}

inline GammaDeclaration read_gamma(const json& j, std::size_t n) {
  if (!j.is_array()) throw ConfigError("gamma: expected an array");
  GammaDeclaration g;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string where = "gamma[" + std::to_string(i) + "]";
    ObjectReader r(j[i], where);
    const json& pj = r.at("p");
    if (!pj.is_array()) throw ConfigError(where + ".p: expected an array");
    std::vector<std::size_t> idx;
    for (const auto& v : pj) idx.push_back(count(v, where + ".p"));
    std::optional<double> floor;
    if (r.has("c_p")) floor = number(j[i].at("c_p"), where + ".c_p");
    r.finish();
    try {
      g.subsets.push_back(IndexSubset::from_one_based(n, idx, floor));
    } catch (const Error& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  try {
    g.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("gamma: ") + e.what());
  }
  return g;
}

inline FamilyConfig read_family(const json& j, std::size_t dim, const std::string& where) {
  FamilyConfig f;
  if (j.is_string()) {
    if (j.get<std::string>() != "whole") throw ConfigError(where + ": expected \"whole\" or {low, high, cells}");
    return f;
  }
  ObjectReader r(j, where);
  f.whole = false;
  f.low = vec(r.at("low"), dim, where + ".low");
  f.high = vec(r.at("high"), dim, where + ".high");
  f.cells = counts(r.at("cells"), dim, where + ".cells");
  r.finish();
  return f;
}

inline EntropyConfig read_entropy(const json& j, std::size_t n, std::size_t k) {
  ObjectReader r(j, "entropy");
  EntropyConfig e;
  if (r.has("horizons")) {
    const json& h = j.at("horizons");
    if (!h.is_array() || h.empty()) throw ConfigError("entropy.horizons: expected a nonempty array");
    e.horizons.clear();
    for (const auto& v : h) {
      const std::size_t t = count(v, "entropy.horizons");
      if (t < 1) throw ConfigError("entropy.horizons: horizons must be >= 1");
      e.horizons.push_back(t);
    }
  }
  if (r.has("split")) {
    e.split = count(j.at("split"), "entropy.split");
    if (*e.split > n) throw ConfigError("entropy.split: exceeds the state dimension");
  }
  const std::size_t m = e.split.value_or(n);
  if (r.has("d")) e.d = read_family(j.at("d"), m, "entropy.d");
  if (r.has("e")) e.e = read_family(j.at("e"), n - m, "entropy.e");
  if (r.has("f")) e.f = read_family(j.at("f"), k, "entropy.f");
  if (r.has("rho")) e.rho = number(j.at("rho"), "entropy.rho");
  if (!(e.rho > 0.0 && e.rho < 1.0)) throw ConfigError("entropy.rho: must lie in (0,1)");
  if (r.has("epsilon")) e.epsilon = number(j.at("epsilon"), "entropy.epsilon");
  if (r.has("vacuous")) e.vacuous = boolean(j.at("vacuous"), "entropy.vacuous");
  if (r.has("scenarios")) e.scenarios = count(j.at("scenarios"), "entropy.scenarios");
  if (e.scenarios < 1) throw ConfigError("entropy.scenarios: must be >= 1");
  if (r.has("measure_horizon")) e.measure_horizon = count(j.at("measure_horizon"), "entropy.measure_horizon");
  if (r.has("measure_paths")) e.measure_paths = count(j.at("measure_paths"), "entropy.measure_paths");
  if (e.measure_horizon < 10 || e.measure_paths < 1)
    throw ConfigError("entropy: measure_horizon must be >= 10 and measure_paths >= 1");
  if (r.has("mode")) {
    const std::string mode = text(j.at("mode"), "entropy.mode");
    if (mode == "greedy") e.mode = CoverMode::kGreedy;
    else if (mode == "exact") e.mode = CoverMode::kExact;
    else throw ConfigError("entropy.mode: expected greedy or exact");
  }
  if (r.has("dump_matrix")) e.dump_matrix = boolean(j.at("dump_matrix"), "entropy.dump_matrix");
  r.finish();
  return e;
}

}  // namespace detail

inline std::unique_ptr<CodingPolicy> ExperimentConfig::make_policy() const {
  const std::size_t n = model.state_dim();
  const Vector target = policy.target.value_or(Vector::Zero(static_cast<Eigen::Index>(n)));
  try {
    if (policy.type == "null") return std::make_unique<NullPolicy>(policy.alphabet, model.control_dim());
    CancelRule rule(model, noise.expectation(), target);
    if (policy.type == "uniform") {
      return std::make_unique<UniformQuantizerPolicy>(QuantizerGrid(*policy.low, *policy.high, policy.levels),
                                                      policy.alphabet, std::move(rule));
    }
    return std::make_unique<ZoomPolicy>(policy.alphabet, policy.zoom, std::move(rule), n);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("policy: ") + e.what());
  }
}

/// Parses and validates a configuration document. Every problem, including
/// unknown keys, surfaces as ConfigError.
inline ExperimentConfig parse_config(const nlohmann::json& j) {
  using namespace detail;
  ObjectReader r(j, "");
  ExperimentConfig c;
  c.model = r.has("model") ? read_model(j.at("model")) : catalog_model("example1");
  const std::size_t n = c.model.state_dim(), k = c.model.noise_dim();
  try {
    c.noise = r.has("noise") ? read_noise(j.at("noise"), k)
                             : NoiseSpec::gaussian(Vector::Zero(static_cast<Eigen::Index>(k)),
                                                   Vector::Ones(static_cast<Eigen::Index>(k)));
    c.noise.validate();
    c.init = r.has("init") ? read_init(j.at("init"), n)
                           : InitSpec::uniform(Vector::Constant(static_cast<Eigen::Index>(n), -1.0),
                                               Vector::Ones(static_cast<Eigen::Index>(n)));
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  c.policy = r.has("policy") ? read_policy(j.at("policy"), n) : PolicyConfig{};
  c.gamma = r.has("gamma") ? read_gamma(j.at("gamma"), n) : GammaDeclaration{{IndexSubset::full(n)}};
  if (r.has("partition")) {
    ObjectReader pr(j.at("partition"), "partition");
    const Vector lo = vec(pr.at("low"), n, "partition.low"), hi = vec(pr.at("high"), n, "partition.high");
    const auto cells = counts(pr.at("cells"), n, "partition.cells");
    pr.finish();
    try {
      c.partition = Partition(lo, hi, cells);
    } catch (const Error& e) {
      throw ConfigError(std::string("partition: ") + e.what());
    }
  } else {
    c.partition = Partition(Vector::Constant(static_cast<Eigen::Index>(n), -10.0),
                            Vector::Constant(static_cast<Eigen::Index>(n), 10.0), std::vector<std::size_t>(n, 20));
  }
  if (r.has("horizon")) c.horizon = count(j.at("horizon"), "horizon");
  if (r.has("paths")) c.paths = count(j.at("paths"), "paths");
  if (r.has("burn_in")) c.burn_in = count(j.at("burn_in"), "burn_in");
  if (r.has("mc_samples")) c.mc_samples = count(j.at("mc_samples"), "mc_samples");
  if (r.has("seed")) c.seed = j.at("seed").is_number_unsigned() ? j.at("seed").get<std::uint64_t>()
                                                                  : count(j.at("seed"), "seed");
  if (r.has("common_random_numbers"))
    c.common_random_numbers = boolean(j.at("common_random_numbers"), "common_random_numbers");
  if (r.has("capacity")) c.capacity = number(j.at("capacity"), "capacity");
  if (r.has("falsify_samples")) c.falsify_samples = count(j.at("falsify_samples"), "falsify_samples");
  c.falsify_box = DomainSampler::default_for(n);
  if (r.has("falsify_box")) {
    ObjectReader fr(j.at("falsify_box"), "falsify_box");
    if (fr.has("low")) c.falsify_box.low = vec(j.at("falsify_box").at("low"), n, "falsify_box.low");
    if (fr.has("high")) c.falsify_box.high = vec(j.at("falsify_box").at("high"), n, "falsify_box.high");
    if (fr.has("cauchy_fraction"))
      c.falsify_box.cauchy_fraction = number(j.at("falsify_box").at("cauchy_fraction"), "falsify_box.cauchy_fraction");
    fr.finish();
  }
  if (r.has("trajectory_files")) c.trajectory_files = count(j.at("trajectory_files"), "trajectory_files");
  if (r.has("entropy")) c.entropy = read_entropy(j.at("entropy"), n, k);
  if (r.has("diagnose")) {
    ObjectReader dr(j.at("diagnose"), "diagnose");
    if (dr.has("checkpoints")) c.checkpoints = count(j.at("diagnose").at("checkpoints"), "diagnose.checkpoints");
    dr.finish();
  }
  if (r.has("output_dir")) c.output_dir = text(j.at("output_dir"), "output_dir");
  r.finish();

  if (c.horizon < 1) throw ConfigError("horizon: must be >= 1");
  if (c.paths < 1) throw ConfigError("paths: must be >= 1");
  if (c.mc_samples < 1) throw ConfigError("mc_samples: must be >= 1");
  if (c.effective_burn_in() >= c.horizon) throw ConfigError("burn_in: must be below the horizon");
  if (c.checkpoints < 1) throw ConfigError("diagnose.checkpoints: must be >= 1");
  c.make_policy();  // surface policy errors now
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parse_config(j);
}

}  // namespace stabent

#endif  // STABENT_CONFIG_HPP
