#ifndef STABENT_SIMULATION_HPP
#define STABENT_SIMULATION_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "stabent/error.hpp"
#include "stabent/linalg.hpp"
#include "stabent/policies.hpp"
#include "stabent/random.hpp"
#include "stabent/system_model.hpp"

namespace stabent {

inline constexpr double kDivergenceThreshold = 1e12;

/// Final state larger than this multiple of max(1, |x_0|) counts as
/// unstable growth even below the divergence threshold.
inline constexpr double kGrowthFactor = 100.0;

enum class PathStatus { kOk, kDiverged };

/// One closed-loop sample path. Column t of `states` is x_t (t = 0..steps),
/// column t of `noise`/`controls` and `symbols[t]` belong to step t. A
/// diverged path stops at the first state beyond the threshold.
struct Trajectory {
  std::uint64_t seed = 0;
  std::size_t horizon = 0;  // requested T
  Matrix states;
  Matrix noise;
  std::vector<Symbol> symbols;
  Matrix controls;
  PathStatus status = PathStatus::kOk;
  std::optional<std::size_t> diverged_at;  // index of the first offending state

  std::size_t steps() const { return symbols.size(); }
  std::size_t state_dim() const { return static_cast<std::size_t>(states.rows()); }
  Vector state(std::size_t t) const { return states.col(static_cast<Eigen::Index>(t)); }
  Vector noise_at(std::size_t t) const { return noise.col(static_cast<Eigen::Index>(t)); }
  Vector control(std::size_t t) const { return controls.col(static_cast<Eigen::Index>(t)); }
  Vector final_state() const { return states.col(states.cols() - 1); }

  bool diverged() const { return status == PathStatus::kDiverged; }

  bool unstable_growth() const {
    if (diverged()) return true;
    const double start = std::max(1.0, states.col(0).cwiseAbs().maxCoeff());
    return final_state().cwiseAbs().maxCoeff() > kGrowthFactor * start;
  }
};

inline bool beyond_threshold(const Vector& x) {
  return !x.allFinite() || x.cwiseAbs().maxCoeff() > kDivergenceThreshold;
}

/// x' = f(x, w) + B u.
inline Vector step(const SystemModel& model, const Vector& x, const Vector& w, const Vector& u) {
  if (static_cast<std::size_t>(u.size()) != model.control_dim()) {
    throw DimensionError("control has dimension " + std::to_string(u.size()) + ", expected " +
                         std::to_string(model.control_dim()));
  }
  return model.dynamics(x, w) + model.control_matrix() * u;
}

inline void check_compatible(const SystemModel& model, const NoiseSpec& noise, const InitSpec& init) {
  if (noise.dim() != model.noise_dim())
    throw DimensionError("noise spec has dimension " + std::to_string(noise.dim()) + ", model expects " +
                         std::to_string(model.noise_dim()));
  if (init.dim() != model.state_dim())
    throw DimensionError("init spec has dimension " + std::to_string(init.dim()) + ", model expects " +
                         std::to_string(model.state_dim()));
}

/// Simulates the closed loop for T steps from a fresh encoder/controller
/// pair. The RNG draws x_0 first, then w_t in time order.
inline Trajectory rollout(const SystemModel& model, const CodingPolicy& policy, const NoiseSpec& noise,
                          const InitSpec& init, std::size_t horizon, std::uint64_t seed) {
  check_compatible(model, noise, init);
  const auto n = static_cast<Eigen::Index>(model.state_dim());
  const auto k = static_cast<Eigen::Index>(model.noise_dim());
  const auto m = static_cast<Eigen::Index>(model.control_dim());
  const auto alphabet = policy.alphabet_size();

  Trajectory traj;
  traj.seed = seed;
  traj.horizon = horizon;
  traj.states.resize(n, static_cast<Eigen::Index>(horizon) + 1);
  traj.noise.resize(k, static_cast<Eigen::Index>(horizon));
  traj.controls.resize(m, static_cast<Eigen::Index>(horizon));
  traj.symbols.reserve(horizon);

  Rng rng(seed);
  Vector x = init.sample(rng);
  traj.states.col(0) = x;
  auto encoder = policy.make_encoder();
  auto controller = policy.make_controller();
  std::size_t t = 0;
  for (; t < horizon; ++t) {
    const Symbol q = encoder->encode(x);
    if (q < 1 || q > alphabet) throw PreconditionError("policy emitted symbol outside {1..M}");
    const Vector u = controller->control(q);
    const Vector w = noise.sample(rng);
    x = step(model, x, w, u);
    const auto col = static_cast<Eigen::Index>(t);
    traj.symbols.push_back(q);
    traj.controls.col(col) = u;
    traj.noise.col(col) = w;
    traj.states.col(col + 1) = x;
    if (beyond_threshold(x)) {
      traj.status = PathStatus::kDiverged;
      traj.diverged_at = t + 1;
      ++t;
      break;
    }
  }
  if (t < horizon) {
    traj.states.conservativeResize(n, static_cast<Eigen::Index>(t) + 1);
    traj.noise.conservativeResize(k, static_cast<Eigen::Index>(t));
    traj.controls.conservativeResize(m, static_cast<Eigen::Index>(t));
  }
  return traj;
}

/// Path k runs with seed derive_seed(base_seed, k).
inline std::vector<Trajectory> batch_rollout(const SystemModel& model, const CodingPolicy& policy,
                                             const NoiseSpec& noise, const InitSpec& init, std::size_t horizon,
                                             std::size_t n_paths, std::uint64_t base_seed) {
  if (n_paths < 1) throw PreconditionError("batch_rollout needs n_paths >= 1");
  std::vector<Trajectory> out;
  out.reserve(n_paths);
  for (std::size_t k = 0; k < n_paths; ++k)
    out.push_back(rollout(model, policy, noise, init, horizon, derive_seed(base_seed, k)));
  return out;
}

struct DivergenceSummary {
  std::size_t paths = 0;
  std::size_t diverged = 0;
  std::size_t unstable_growth = 0;

  double diverged_fraction() const { return paths ? static_cast<double>(diverged) / static_cast<double>(paths) : 0.0; }
};

inline DivergenceSummary summarize(const std::vector<Trajectory>& paths) {
  DivergenceSummary s;
  s.paths = paths.size();
  for (const auto& p : paths) {
    s.diverged += p.diverged() ? 1 : 0;
    s.unstable_growth += p.unstable_growth() ? 1 : 0;
  }
  return s;
}

/// Recomputes x_{t+1} from the stored (x_t, w_t, u_t); true iff every state
/// matches bit for bit.
inline bool replay_matches(const SystemModel& model, const Trajectory& traj) {
  for (std::size_t t = 0; t < traj.steps(); ++t) {
    const Vector next = step(model, traj.state(t), traj.noise_at(t), traj.control(t));
    const Vector stored = traj.state(t + 1);
    for (Eigen::Index i = 0; i < next.size(); ++i) {
      if (std::isnan(next(i)) && std::isnan(stored(i))) continue;
      if (next(i) != stored(i)) return false;
    }
  }
  return true;
}

/// Re-derives q_t from x_0..x_t with a fresh encoder and u_t from q_0..q_t
/// with a fresh controller; true iff both reproduce the stored values.
inline bool causality_audit(const CodingPolicy& policy, const Trajectory& traj) {
  auto encoder = policy.make_encoder();
  auto controller = policy.make_controller();
  for (std::size_t t = 0; t < traj.steps(); ++t) {
    if (encoder->encode(traj.state(t)) != traj.symbols[t]) return false;
  }
  for (std::size_t t = 0; t < traj.steps(); ++t) {
    const Vector u = controller->control(traj.symbols[t]);
    if (!(u.array() == traj.control(t).array()).all()) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// CSV export

inline std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Header t,x1..xN,w1..wK,q,u1..uN'. Rows t = 0..steps-1 carry the step
/// data; a last row carries x_T with the remaining fields empty.
inline void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  const auto n = traj.states.rows();
  const auto k = traj.noise.rows();
  const auto m = traj.controls.rows();
  out << 't';
  for (Eigen::Index i = 0; i < n; ++i) out << ",x" << i + 1;
  for (Eigen::Index i = 0; i < k; ++i) out << ",w" << i + 1;
  out << ",q";
  for (Eigen::Index i = 0; i < m; ++i) out << ",u" << i + 1;
  out << '\n';
  for (std::size_t t = 0; t <= traj.steps(); ++t) {
    const auto c = static_cast<Eigen::Index>(t);
    out << t;
    for (Eigen::Index i = 0; i < n; ++i) out << ',' << format_g17(traj.states(i, c));
    const bool last = t == traj.steps();
    for (Eigen::Index i = 0; i < k; ++i) out << ',' << (last ? std::string() : format_g17(traj.noise(i, c)));
    out << ',' << (last ? std::string() : std::to_string(traj.symbols[t]));
    for (Eigen::Index i = 0; i < m; ++i) out << ',' << (last ? std::string() : format_g17(traj.controls(i, c)));
    out << '\n';
  }
}

}  // namespace stabent

#endif  // STABENT_SIMULATION_HPP
