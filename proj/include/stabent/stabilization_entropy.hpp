#ifndef STABENT_STABILIZATION_ENTROPY_HPP
#define STABENT_STABILIZATION_ENTROPY_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "stabent/ergodics.hpp"
#include "stabent/error.hpp"
#include "stabent/linalg.hpp"
#include "stabent/policies.hpp"
#include "stabent/random.hpp"
#include "stabent/simulation.hpp"
#include "stabent/system_model.hpp"

namespace stabent {

/// Finite family of pairwise disjoint half-open boxes [lo, hi) in R^d.
/// In dimension 0 the single allowed member is the whole (one-point) space.
class SetFamily {
 public:
  SetFamily() = default;
  SetFamily(std::size_t dim, std::vector<Vector> lows, std::vector<Vector> highs)
      : dim_(dim), lows_(std::move(lows)), highs_(std::move(highs)) {
    if (lows_.size() != highs_.size() || lows_.empty()) throw PreconditionError("set family needs >= 1 box");
    for (std::size_t i = 0; i < lows_.size(); ++i) {
      if (static_cast<std::size_t>(lows_[i].size()) != dim_ || static_cast<std::size_t>(highs_[i].size()) != dim_)
        throw DimensionError("set family box has the wrong dimension");
      for (Eigen::Index a = 0; a < lows_[i].size(); ++a)
        if (!(lows_[i](a) < highs_[i](a))) throw PreconditionError("set family box is empty");
    }
    for (std::size_t i = 0; i < lows_.size(); ++i)
      for (std::size_t j = i + 1; j < lows_.size(); ++j)
        if (overlap(i, j)) {
          throw PreconditionError("set family members " + std::to_string(i + 1) + " and " + std::to_string(j + 1) +
                                  " intersect");
        }
  }

  /// Equal-width grid cells of [low, high) with `cells[i]` cells on axis i.
  static SetFamily grid(const Vector& low, const Vector& high, const std::vector<std::size_t>& cells) {
    const QuantizerGrid g(low, high, cells);
    std::vector<Vector> lows, highs;
    for (std::size_t c = 0; c < g.cell_count(); ++c) {
      lows.push_back(g.cell_low(c));
      highs.push_back(g.cell_high(c));
    }
    return SetFamily(static_cast<std::size_t>(low.size()), std::move(lows), std::move(highs));
  }

  /// The single set R^d (d may be 0).
  static SetFamily whole(std::size_t dim) {
    const double inf = std::numeric_limits<double>::infinity();
    return SetFamily(dim, {Vector::Constant(static_cast<Eigen::Index>(dim), -inf)},
                     {Vector::Constant(static_cast<Eigen::Index>(dim), inf)});
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return lows_.size(); }
  const Vector& low(std::size_t i) const { return lows_[i]; }
  const Vector& high(std::size_t i) const { return highs_[i]; }

  std::optional<std::size_t> index_of(const Vector& v) const {
    for (std::size_t i = 0; i < lows_.size(); ++i) {
      bool inside = true;
      for (Eigen::Index a = 0; a < v.size() && inside; ++a) inside = v(a) >= lows_[i](a) && v(a) < highs_[i](a);
      if (inside) return i;
    }
    return std::nullopt;
  }

 private:
  bool overlap(std::size_t i, std::size_t j) const {
    for (std::size_t a = 0; a < dim_; ++a) {
      const auto k = static_cast<Eigen::Index>(a);
      if (!(lows_[i](k) < highs_[j](k) && lows_[j](k) < highs_[i](k))) return false;
    }
    return true;
  }

  std::size_t dim_ = 0;
  std::vector<Vector> lows_;
  std::vector<Vector> highs_;
};

/// A (T, D, E, F, rho, R) spanning problem. The state splits into its first
/// `split` coordinates (classified by D) and the rest (classified by E); the
/// noise is classified by F. thresholds[(j * e + k) * f + l] = r_{j,k,l}.
struct SpanningInstance {
  std::size_t horizon = 1;
  std::size_t split = 1;
  SetFamily d_sets;
  SetFamily e_sets;
  SetFamily f_sets;
  double rho = 0.5;
  std::vector<double> thresholds;

  std::size_t triple_count() const { return d_sets.size() * e_sets.size() * f_sets.size(); }

  std::size_t triple(std::size_t j, std::size_t k, std::size_t l) const {
    return (j * e_sets.size() + k) * f_sets.size() + l;
  }

  void validate(const SystemModel& model) const {
    if (horizon < 1) throw PreconditionError("spanning horizon must be >= 1");
    if (split > model.state_dim()) throw DimensionError("split point exceeds the state dimension");
    if (d_sets.dim() != split || e_sets.dim() != model.state_dim() - split)
      throw DimensionError("D/E families do not match the state split");
    if (f_sets.dim() != model.noise_dim()) throw DimensionError("F family does not match the noise dimension");
    if (!(rho > 0.0 && rho < 1.0)) throw PreconditionError("rho must lie in (0,1)");
    validate_thresholds(thresholds, triple_count());
  }

  static void validate_thresholds(const std::vector<double>& r, std::size_t count) {
    if (r.size() != count)
      throw DimensionError("expected " + std::to_string(count) + " thresholds, got " + std::to_string(r.size()));
    double slack = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (!(r[i] >= 0.0 && r[i] <= 1.0))
        throw PreconditionError("threshold r[" + std::to_string(i) + "] = " + std::to_string(r[i]) +
                                " lies outside [0,1]");
      slack += 1.0 - r[i];
    }
    if (slack > 1.0 + 1e-12) {
      throw PreconditionError("sum of (1 - r) is " + format_g17(slack) + ", which exceeds 1");
    }
  }
};

/// Thresholds with r = 1 everywhere: every control sequence qualifies.
inline std::vector<double> vacuous_thresholds(std::size_t count) { return std::vector<double>(count, 1.0); }

/// r_{j,k,l} from kappa = Q(D_j x E_k) nu(F_l): 1 if kappa = 0, epsilon if
/// kappa = 1, (1 + epsilon)(1 - kappa) otherwise. `q_masses` is d x e.
inline std::vector<double> build_R_epsilon(const Matrix& q_masses, const std::vector<double>& nu_weights,
                                           double epsilon) {
  if (!(epsilon > 0.0)) throw PreconditionError("epsilon must be positive");
  const auto d = static_cast<std::size_t>(q_masses.rows());
  const auto e = static_cast<std::size_t>(q_masses.cols());
  const std::size_t f = nu_weights.size();
  std::vector<double> r;
  r.reserve(d * e * f);
  double slack = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t k = 0; k < e; ++k) {
      for (std::size_t l = 0; l < f; ++l) {
        const double kappa = q_masses(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) * nu_weights[l];
        if (!(kappa >= 0.0 && kappa <= 1.0)) throw PreconditionError("cell mass outside [0,1]");
        double v = 0.0;
        if (kappa == 0.0) {
          v = 1.0;
        } else if (kappa == 1.0) {
          v = epsilon;
        } else {
          v = (1.0 + epsilon) * (1.0 - kappa);
          if (v >= 1.0) {
            throw PreconditionError("epsilon " + format_g17(epsilon) + " too large: cell (" + std::to_string(j + 1) +
                                    "," + std::to_string(k + 1) + "," + std::to_string(l + 1) + ") with mass " +
                                    format_g17(kappa) + " gets r = " + format_g17(v) + " >= 1");
          }
        }
        slack += 1.0 - v;
        r.push_back(v);
      }
    }
  }
  if (slack < 0.0 || slack > 1.0 + 1e-12) {
    throw PreconditionError("epsilon " + format_g17(epsilon) + " too large: sum of (1 - r) is " + format_g17(slack) +
                            ", outside [0,1]");
  }
  return r;
}

/// Q(D_j x E_k) from the post-burn-in states of `paths`, as a d x e matrix.
inline Matrix joint_cell_masses(const std::vector<Trajectory>& paths, const SetFamily& d_sets,
                                const SetFamily& e_sets, std::size_t split, std::size_t burn_in) {
  Matrix counts = Matrix::Zero(static_cast<Eigen::Index>(d_sets.size()), static_cast<Eigen::Index>(e_sets.size()));
  double total = 0.0;
  for (const auto& traj : paths) {
    if (traj.horizon <= burn_in) throw PreconditionError("burn-in leaves no samples");
    const std::size_t n = traj.state_dim();
    for (std::size_t t = burn_in; t < traj.horizon; ++t) {
      total += 1.0;
      if (t > traj.steps() || (traj.diverged() && t == traj.steps())) continue;
      const Vector x = traj.state(t);
      const auto j = d_sets.index_of(x.head(static_cast<Eigen::Index>(split)));
      const auto k = e_sets.index_of(x.tail(static_cast<Eigen::Index>(n - split)));
      if (j && k) counts(static_cast<Eigen::Index>(*j), static_cast<Eigen::Index>(*k)) += 1.0;
    }
  }
  return counts / total;
}

inline std::vector<double> noise_cell_masses(const NoiseSpec& noise, const SetFamily& f_sets) {
  std::vector<double> out;
  for (std::size_t l = 0; l < f_sets.size(); ++l) out.push_back(noise.probability(f_sets.low(l), f_sets.high(l)));
  return out;
}

// ---------------------------------------------------------------------------
// Scenarios and candidates

/// One sampled omega: an initial state and a noise path w_0..w_{T-1}.
struct Scenario {
  Vector x0;
  Matrix noise;  // K x T
};

inline std::vector<Scenario> draw_scenarios(const InitSpec& init, const NoiseSpec& noise, std::size_t horizon,
                                            std::size_t count, std::uint64_t seed) {
  std::vector<Scenario> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, i));
    Scenario s;
    s.x0 = init.sample(rng);
    s.noise.resize(static_cast<Eigen::Index>(noise.dim()), static_cast<Eigen::Index>(horizon));
    for (std::size_t t = 0; t < horizon; ++t) s.noise.col(static_cast<Eigen::Index>(t)) = noise.sample(rng);
    out.push_back(std::move(s));
  }
  return out;
}

enum class CandidateOrigin { kPolicy, kGrid };

/// Open-loop control sequences, each N' x T.
struct CandidateControls {
  CandidateOrigin origin = CandidateOrigin::kPolicy;
  std::vector<Matrix> sequences;
  std::vector<std::vector<Symbol>> symbols;  // policy origin only

  std::size_t size() const { return sequences.size(); }
};

/// Closed-loop control sequences the policy produces on the scenarios,
/// deduplicated by symbol sequence. Since u is a function of q_0..q_t the
/// result never exceeds M^T sequences.
inline CandidateControls policy_candidates(const SystemModel& model, const CodingPolicy& policy,
                                           const std::vector<Scenario>& scenarios, std::size_t horizon) {
  CandidateControls out;
  out.origin = CandidateOrigin::kPolicy;
  std::map<std::vector<Symbol>, std::size_t> seen;
  const auto m = static_cast<Eigen::Index>(model.control_dim());
  for (const auto& sc : scenarios) {
    auto encoder = policy.make_encoder();
    auto controller = policy.make_controller();
    Vector x = sc.x0;
    Matrix u = Matrix::Zero(m, static_cast<Eigen::Index>(horizon));
    std::vector<Symbol> q(horizon, 0);
    for (std::size_t t = 0; t < horizon; ++t) {
      q[t] = encoder->encode(x);
      u.col(static_cast<Eigen::Index>(t)) = controller->control(q[t]);
      x = step(model, x, sc.noise.col(static_cast<Eigen::Index>(t)), u.col(static_cast<Eigen::Index>(t)));
      if (beyond_threshold(x)) break;  // rest of the sequence stays q = 0, u = 0
    }
    if (seen.emplace(q, out.sequences.size()).second) {
      out.sequences.push_back(std::move(u));
      out.symbols.push_back(std::move(q));
    }
  }
  return out;
}

/// Every sequence with u_t drawn from `values`; |values|^T sequences.
inline CandidateControls grid_candidates(const std::vector<Vector>& values, std::size_t horizon,
                                         std::size_t max_count = 1u << 20) {
  if (values.empty()) throw PreconditionError("grid candidates need at least one control value");
  double count = std::pow(static_cast<double>(values.size()), static_cast<double>(horizon));
  if (count > static_cast<double>(max_count)) throw PreconditionError("grid candidate set too large");
  CandidateControls out;
  out.origin = CandidateOrigin::kGrid;
  const auto m = values.front().size();
  std::vector<std::size_t> digits(horizon, 0);
  for (auto n = static_cast<std::size_t>(count); n-- > 0;) {
    Matrix u(m, static_cast<Eigen::Index>(horizon));
    for (std::size_t t = 0; t < horizon; ++t) u.col(static_cast<Eigen::Index>(t)) = values[digits[t]];
    out.sequences.push_back(std::move(u));
    for (std::size_t t = 0; t < horizon; ++t) {
      if (++digits[t] < values.size()) break;
      digits[t] = 0;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Frequency conditions and coverage

/// Joint occupancy counts of (pi_m x_t, pi_{N-m} x_t, w_t) over
/// t in [0, T-1] for the open-loop trajectory under u. Times after the
/// trajectory leaves the finite range are counted nowhere.
inline std::vector<std::size_t> occupancy_counts(const SystemModel& model, const Matrix& u, const Scenario& sc,
                                                 const SpanningInstance& inst) {
  const std::size_t n = model.state_dim();
  const auto head = static_cast<Eigen::Index>(inst.split);
  const auto tail = static_cast<Eigen::Index>(n - inst.split);
  if (static_cast<std::size_t>(u.cols()) != inst.horizon || static_cast<std::size_t>(sc.noise.cols()) < inst.horizon)
    throw DimensionError("control or noise sequence shorter than the horizon");
  std::vector<std::size_t> counts(inst.triple_count(), 0);
  Vector x = sc.x0;
  for (std::size_t t = 0; t < inst.horizon; ++t) {
    const auto col = static_cast<Eigen::Index>(t);
    const Vector w = sc.noise.col(col);
    const auto j = inst.d_sets.index_of(x.head(head));
    const auto k = inst.e_sets.index_of(x.tail(tail));
    const auto l = inst.f_sets.index_of(w);
    if (j && k && l) ++counts[inst.triple(*j, *k, *l)];
    x = step(model, x, w, u.col(col));
    if (beyond_threshold(x)) break;
  }
  return counts;
}

/// (1/T) #{t : (x_t split, w_t) in D_j x E_k x F_l} >= 1 - r_{j,k,l} for
/// every triple.
inline bool satisfies_frequencies(const SystemModel& model, const Matrix& u, const Scenario& sc,
                                  const SpanningInstance& inst) {
  const auto counts = occupancy_counts(model, u, sc, inst);
  const double horizon = static_cast<double>(inst.horizon);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (static_cast<double>(counts[i]) < (1.0 - inst.thresholds[i]) * horizon - 1e-9) return false;
  }
  return true;
}

/// Bitset rows: covers[c] has bit s set iff candidate c satisfies scenario s.
struct SatisfactionMatrix {
  std::size_t scenarios = 0;
  std::vector<std::vector<std::uint64_t>> covers;

  std::size_t candidates() const { return covers.size(); }
  std::size_t words() const { return (scenarios + 63) / 64; }

  bool at(std::size_t candidate, std::size_t scenario) const {
    return (covers[candidate][scenario / 64] >> (scenario % 64)) & 1u;
  }

  void set(std::size_t candidate, std::size_t scenario) {
    covers[candidate][scenario / 64] |= std::uint64_t{1} << (scenario % 64);
  }

  static SatisfactionMatrix empty(std::size_t candidates, std::size_t scenarios) {
    SatisfactionMatrix m;
    m.scenarios = scenarios;
    m.covers.assign(candidates, std::vector<std::uint64_t>((scenarios + 63) / 64, 0));
    return m;
  }
};

inline SatisfactionMatrix satisfaction_matrix(const SystemModel& model, const CandidateControls& candidates,
                                              const std::vector<Scenario>& scenarios, const SpanningInstance& inst) {
  inst.validate(model);
  auto m = SatisfactionMatrix::empty(candidates.size(), scenarios.size());
  for (std::size_t c = 0; c < candidates.size(); ++c)
    for (std::size_t s = 0; s < scenarios.size(); ++s)
      if (satisfies_frequencies(model, candidates.sequences[c], scenarios[s], inst)) m.set(c, s);
  return m;
}

/// Scenarios that must be covered: ceil((1 - rho) n).
inline std::size_t required_coverage(std::size_t scenarios, double rho) {
  return static_cast<std::size_t>(std::ceil((1.0 - rho) * static_cast<double>(scenarios) - 1e-9));
}

namespace detail {

inline std::size_t popcount_words(const std::vector<std::uint64_t>& bits) {
  std::size_t n = 0;
  for (auto w : bits) n += static_cast<std::size_t>(__builtin_popcountll(w));
  return n;
}

}  // namespace detail

struct SpanningCheck {
  bool spanning = false;
  double covered_fraction = 0.0;
};

/// Coverage of the scenario sample by the chosen candidates.
inline SpanningCheck coverage(const SatisfactionMatrix& m, const std::vector<std::size_t>& chosen, double rho) {
  if (m.scenarios == 0) throw PreconditionError("coverage needs at least one scenario");
  std::vector<std::uint64_t> acc(m.words(), 0);
  for (std::size_t c : chosen)
    for (std::size_t w = 0; w < acc.size(); ++w) acc[w] |= m.covers.at(c)[w];
  const std::size_t covered = detail::popcount_words(acc);
  return SpanningCheck{covered >= required_coverage(m.scenarios, rho),
                       static_cast<double>(covered) / static_cast<double>(m.scenarios)};
}

inline SpanningCheck is_spanning(const SystemModel& model, const CandidateControls& set, const SpanningInstance& inst,
                                 const std::vector<Scenario>& scenarios) {
  const auto m = satisfaction_matrix(model, set, scenarios, inst);
  std::vector<std::size_t> all(set.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return coverage(m, all, inst.rho);
}

enum class CoverMode { kExact, kGreedy };

inline constexpr std::size_t kExactCandidateLimit = 20;

struct SpanningEstimate {
  bool feasible = false;
  std::size_t cardinality = 0;  // meaningful only when feasible
  std::vector<std::size_t> chosen;
};

namespace detail {

// Depth-first search over combinations of exactly `size` candidates.
inline bool cover_with(const SatisfactionMatrix& m, std::size_t size, std::size_t need, std::size_t start,
                       std::vector<std::uint64_t>& acc, std::vector<std::size_t>& chosen) {
  if (chosen.size() == size) return popcount_words(acc) >= need;
  for (std::size_t c = start; c + (size - chosen.size()) <= m.candidates(); ++c) {
    std::vector<std::uint64_t> saved = acc;
    for (std::size_t w = 0; w < acc.size(); ++w) acc[w] |= m.covers[c][w];
    chosen.push_back(c);
    if (cover_with(m, size, need, c + 1, acc, chosen)) return true;
    chosen.pop_back();
    acc = std::move(saved);
  }
  return false;
}

}  // namespace detail

/// Smallest set of candidates covering at least ceil((1 - rho) n) sampled
/// scenarios. Exact mode searches subsets by increasing size (at most 20
/// candidates); greedy mode adds the candidate with the largest marginal
/// coverage, lowest index first on ties, and upper-bounds the exact value.
inline SpanningEstimate min_spanning_estimate(const SatisfactionMatrix& m, double rho, CoverMode mode) {
  if (m.scenarios == 0) throw PreconditionError("min_spanning_estimate needs at least one scenario");
  const std::size_t need = required_coverage(m.scenarios, rho);
  SpanningEstimate out;
  std::vector<std::uint64_t> all(m.words(), 0);
  for (const auto& row : m.covers)
    for (std::size_t w = 0; w < all.size(); ++w) all[w] |= row[w];
  if (detail::popcount_words(all) < need) return out;  // infeasible at this candidate scale

  if (mode == CoverMode::kExact) {
    if (m.candidates() > kExactCandidateLimit) {
      throw PreconditionError("exact mode is limited to " + std::to_string(kExactCandidateLimit) + " candidates, got " +
                              std::to_string(m.candidates()));
    }
    for (std::size_t size = 0; size <= m.candidates(); ++size) {
      std::vector<std::uint64_t> acc(m.words(), 0);
      std::vector<std::size_t> chosen;
      if (detail::cover_with(m, size, need, 0, acc, chosen)) {
        out.feasible = true;
        out.cardinality = size;
        out.chosen = std::move(chosen);
        return out;
      }
    }
    return out;
  }

  std::vector<std::uint64_t> acc(m.words(), 0);
  std::vector<bool> used(m.candidates(), false);
  std::size_t covered = 0;
  while (covered < need) {
    std::size_t best = m.candidates();
    std::size_t best_gain = 0;
    for (std::size_t c = 0; c < m.candidates(); ++c) {
      if (used[c]) continue;
      std::size_t gain = 0;
      for (std::size_t w = 0; w < acc.size(); ++w)
        gain += static_cast<std::size_t>(__builtin_popcountll(m.covers[c][w] & ~acc[w]));
      if (gain > best_gain) {
        best_gain = gain;
        best = c;
      }
    }
    if (best == m.candidates()) return SpanningEstimate{};
    used[best] = true;
    out.chosen.push_back(best);
    for (std::size_t w = 0; w < acc.size(); ++w) acc[w] |= m.covers[best][w];
    covered += best_gain;
  }
  out.feasible = true;
  out.cardinality = out.chosen.size();
  return out;
}

inline void write_satisfaction_csv(std::ostream& out, const SatisfactionMatrix& m) {
  out << "scenario";
  for (std::size_t c = 0; c < m.candidates(); ++c) out << ",u" << c;
  out << '\n';
  for (std::size_t s = 0; s < m.scenarios; ++s) {
    out << s;
    for (std::size_t c = 0; c < m.candidates(); ++c) out << ',' << (m.at(c, s) ? 1 : 0);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Entropy-rate curve

/// Everything but the horizon: families, rho, epsilon, sampling sizes.
struct EntropyTemplate {
  std::size_t split = 1;
  SetFamily d_sets;
  SetFamily e_sets;
  SetFamily f_sets;
  double rho = 0.5;
  double epsilon = 0.01;
  bool vacuous = false;  // R = 1 everywhere instead of R_epsilon
  std::size_t scenarios = 200;
  std::size_t measure_horizon = 2000;
  std::size_t measure_paths = 8;
  CoverMode mode = CoverMode::kGreedy;
};

struct EntropyPoint {
  std::size_t horizon = 0;
  std::size_t candidates = 0;
  bool feasible = false;
  std::size_t s_estimate = 0;
  double rate = std::numeric_limits<double>::infinity();
  double covered_fraction = 0.0;
  bool within_capacity = false;  // s <= M^T
  SatisfactionMatrix matrix;
};

struct EntropyCurve {
  double capacity = 0.0;
  std::vector<double> thresholds;
  std::vector<EntropyPoint> points;

  /// Max rate over the two largest horizons.
  double limsup_estimate() const {
    std::vector<const EntropyPoint*> sorted;
    for (const auto& p : points) sorted.push_back(&p);
    std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->horizon < b->horizon; });
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = sorted.size() >= 2 ? sorted.size() - 2 : 0; i < sorted.size(); ++i)
      best = std::max(best, sorted[i]->rate);
    return best;
  }

  /// envelope[i] = max rate over horizons >= points[i].horizon.
  std::vector<double> envelope() const {
    std::vector<double> env(points.size());
    double run = -std::numeric_limits<double>::infinity();
    for (std::size_t i = points.size(); i-- > 0;) {
      run = std::max(run, points[i].rate);
      env[i] = run;
    }
    return env;
  }
};

/// s <= M^T, without overflow.
inline bool at_most_power(std::size_t s, std::size_t base, std::size_t exponent) {
  long double bound = 1.0L;
  for (std::size_t i = 0; i < exponent; ++i) {
    bound *= static_cast<long double>(base);
    if (bound >= static_cast<long double>(s)) return true;
  }
  return static_cast<long double>(s) <= bound;
}

/// For each T: scenarios from init x nu^T, candidates from the policy's
/// closed loop on those scenarios, R_epsilon from a long closed-loop
/// histogram, then the greedy (or exact) minimal spanning cardinality and
/// its rate (1/T) log2 s.
inline EntropyCurve entropy_rate(const SystemModel& model, const CodingPolicy& policy, const NoiseSpec& noise,
                                 const InitSpec& init, const EntropyTemplate& tmpl,
                                 const std::vector<std::size_t>& horizons, std::uint64_t seed) {
  EntropyCurve curve;
  curve.capacity = policy.capacity();
  const std::size_t triples = tmpl.d_sets.size() * tmpl.e_sets.size() * tmpl.f_sets.size();
  if (tmpl.vacuous) {
    curve.thresholds = vacuous_thresholds(triples);
  } else {
    const auto paths = batch_rollout(model, policy, noise, init, tmpl.measure_horizon, tmpl.measure_paths,
                                     derive_seed(seed, 0));
    const Matrix q = joint_cell_masses(paths, tmpl.d_sets, tmpl.e_sets, tmpl.split,
                                       default_burn_in(tmpl.measure_horizon));
    curve.thresholds = build_R_epsilon(q, noise_cell_masses(noise, tmpl.f_sets), tmpl.epsilon);
  }
  for (std::size_t horizon : horizons) {
    SpanningInstance inst{horizon, tmpl.split, tmpl.d_sets, tmpl.e_sets, tmpl.f_sets, tmpl.rho, curve.thresholds};
    inst.validate(model);
    const auto scenarios = draw_scenarios(init, noise, horizon, tmpl.scenarios, derive_seed(seed, horizon + 1));
    const auto candidates = policy_candidates(model, policy, scenarios, horizon);
    EntropyPoint pt;
    pt.horizon = horizon;
    pt.candidates = candidates.size();
    pt.matrix = satisfaction_matrix(model, candidates, scenarios, inst);
    const CoverMode mode =
        tmpl.mode == CoverMode::kExact && candidates.size() <= kExactCandidateLimit ? CoverMode::kExact
                                                                                     : CoverMode::kGreedy;
    const auto est = min_spanning_estimate(pt.matrix, tmpl.rho, mode);
    pt.feasible = est.feasible;
    if (est.feasible) {
      pt.s_estimate = est.cardinality;
      pt.rate = std::log2(static_cast<double>(est.cardinality)) / static_cast<double>(horizon);
      pt.covered_fraction = coverage(pt.matrix, est.chosen, tmpl.rho).covered_fraction;
      pt.within_capacity = at_most_power(est.cardinality, policy.alphabet_size(), horizon);
    }
    curve.points.push_back(std::move(pt));
  }
  return curve;
}

/// Columns T,s_estimate,rate,capacity,candidates,covered_fraction. An
/// infeasible horizon prints s_estimate and rate as "inf".
inline void write_entropy_csv(std::ostream& out, const EntropyCurve& curve) {
  out << "T,s_estimate,rate,capacity,candidates,covered_fraction\n";
  for (const auto& p : curve.points) {
    out << p.horizon << ',' << (p.feasible ? std::to_string(p.s_estimate) : std::string("inf")) << ','
        << (p.feasible ? format_g17(p.rate) : std::string("inf")) << ',' << format_g17(curve.capacity) << ','
        << p.candidates << ',' << format_g17(p.covered_fraction) << '\n';
  }
}

}  // namespace stabent

#endif  // STABENT_STABILIZATION_ENTROPY_HPP
