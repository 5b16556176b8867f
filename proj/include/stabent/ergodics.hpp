#ifndef STABENT_ERGODICS_HPP
#define STABENT_ERGODICS_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "stabent/error.hpp"
#include "stabent/linalg.hpp"
#include "stabent/policies.hpp"
#include "stabent/simulation.hpp"

namespace stabent {

/// Overflow mass above this makes integrals against the measure suspect.
inline constexpr double kOverflowWarningMass = 0.01;

/// Grid cells over a closed box plus one overflow cell for everything else.
/// Cell indices follow QuantizerGrid; the overflow cell is `cell_count()`.
class Partition {
 public:
  Partition() = default;
  Partition(Vector low, Vector high, std::vector<std::size_t> cells)
      : grid_(std::move(low), std::move(high), std::move(cells)) {}

  std::size_t dim() const { return grid_.dim(); }
  std::size_t cell_count() const { return grid_.cell_count(); }
  std::size_t overflow_index() const { return grid_.cell_count(); }
  const QuantizerGrid& grid() const { return grid_; }

  std::size_t locate(const Vector& x) const {
    if (!x.allFinite()) return overflow_index();
    return grid_.cell_of(x).value_or(overflow_index());
  }

  Vector cell_low(std::size_t c) const { return grid_.cell_low(c); }
  Vector cell_high(std::size_t c) const { return grid_.cell_high(c); }

 private:
  QuantizerGrid grid_;
};

enum class MeasureStatus { kOk, kOverflowWarning, kAllOverflow };

/// Histogram stand-in for the asymptotic mean: pooled post-burn-in
/// occupation counts. weights[overflow_index()] is the overflow mass.
struct EmpiricalMeasure {
  Partition partition;
  std::vector<std::uint64_t> counts;
  std::size_t burn_in = 0;

  std::uint64_t samples() const {
    std::uint64_t s = 0;
    for (auto c : counts) s += c;
    return s;
  }

  std::vector<double> weights() const {
    const double total = static_cast<double>(samples());
    std::vector<double> w(counts.size(), 0.0);
    if (total == 0.0) return w;
    for (std::size_t i = 0; i < counts.size(); ++i) w[i] = static_cast<double>(counts[i]) / total;
    return w;
  }

  double weight(std::size_t cell) const {
    const auto total = samples();
    return total ? static_cast<double>(counts.at(cell)) / static_cast<double>(total) : 0.0;
  }

  double overflow_mass() const { return weight(partition.overflow_index()); }

  MeasureStatus status() const {
    const auto total = samples();
    if (total == 0 || counts[partition.overflow_index()] == total) return MeasureStatus::kAllOverflow;
    return overflow_mass() > kOverflowWarningMass ? MeasureStatus::kOverflowWarning : MeasureStatus::kOk;
  }

  /// Pooling: the result weighs each side by its sample count.
  EmpiricalMeasure merged(const EmpiricalMeasure& other) const {
    if (other.counts.size() != counts.size()) throw DimensionError("merging measures on different partitions");
    EmpiricalMeasure out = *this;
    for (std::size_t i = 0; i < counts.size(); ++i) out.counts[i] += other.counts[i];
    return out;
  }
};

/// Cell of x_t; times past a truncated (diverged) path's end are overflow.
inline std::size_t locate_at(const Partition& partition, const Trajectory& traj, std::size_t t) {
  if (t >= traj.steps() + (traj.diverged() ? 0 : 1)) return partition.overflow_index();
  return partition.locate(traj.state(t));
}

/// Counts x_t for t in [burn_in, T-1] over every path.
inline EmpiricalMeasure empirical_measure(const std::vector<Trajectory>& paths, const Partition& partition,
                                          std::size_t burn_in) {
  EmpiricalMeasure m;
  m.partition = partition;
  m.burn_in = burn_in;
  m.counts.assign(partition.cell_count() + 1, 0);
  for (const auto& traj : paths) {
    if (traj.state_dim() != partition.dim()) throw DimensionError("partition and trajectory dimensions differ");
    if (traj.horizon <= burn_in) {
      throw PreconditionError("burn-in " + std::to_string(burn_in) + " leaves no samples of horizon " +
                              std::to_string(traj.horizon));
    }
    for (std::size_t t = burn_in; t < traj.horizon; ++t) ++m.counts[locate_at(partition, traj, t)];
  }
  return m;
}

inline std::size_t default_burn_in(std::size_t horizon) { return horizon / 10; }

/// Running Cesaro averages (1/T') sum_{t<T'} 1{x_t in cell} at each
/// checkpoint T'. rows[i][c] belongs to checkpoints[i].
struct ConvergenceCurves {
  std::vector<std::size_t> checkpoints;
  std::vector<std::vector<double>> rows;
};

inline ConvergenceCurves frequency_convergence(const Trajectory& traj, const Partition& partition,
                                               std::vector<std::size_t> checkpoints) {
  for (std::size_t i = 0; i < checkpoints.size(); ++i) {
    if (checkpoints[i] < 1 || checkpoints[i] > traj.horizon)
      throw PreconditionError("checkpoint " + std::to_string(checkpoints[i]) + " outside [1, T]");
    if (i && checkpoints[i] <= checkpoints[i - 1]) throw PreconditionError("checkpoints must increase");
  }
  ConvergenceCurves curves;
  curves.checkpoints = checkpoints;
  std::vector<std::uint64_t> counts(partition.cell_count() + 1, 0);
  std::size_t next = 0;
  for (std::size_t t = 0; t < traj.horizon && next < checkpoints.size(); ++t) {
    ++counts[locate_at(partition, traj, t)];
    if (t + 1 == checkpoints[next]) {
      std::vector<double> row(counts.size());
      for (std::size_t c = 0; c < counts.size(); ++c)
        row[c] = static_cast<double>(counts[c]) / static_cast<double>(t + 1);
      curves.rows.push_back(std::move(row));
      ++next;
    }
  }
  return curves;
}

/// Roughly geometric checkpoints ending at T.
inline std::vector<std::size_t> geometric_checkpoints(std::size_t horizon, std::size_t count = 20) {
  std::vector<std::size_t> out;
  if (horizon == 0) return out;
  for (std::size_t i = 1; i <= count; ++i) {
    const double frac = static_cast<double>(i) / static_cast<double>(count);
    auto c = static_cast<std::size_t>(std::llround(std::pow(static_cast<double>(horizon), frac)));
    c = std::max<std::size_t>(c, 1);
    if (out.empty() || c > out.back()) out.push_back(c);
  }
  if (out.back() != horizon) out.push_back(horizon);
  return out;
}

/// Per-cell population standard deviation, across paths, of each path's
/// terminal occupation frequencies. Zero for a single path.
inline std::vector<double> ergodicity_dispersion(const std::vector<Trajectory>& paths, const Partition& partition,
                                                 std::size_t burn_in = 0) {
  const std::size_t cells = partition.cell_count() + 1;
  std::vector<double> mean(cells, 0.0), m2(cells, 0.0);
  if (paths.empty()) throw PreconditionError("dispersion needs at least one path");
  std::size_t n = 0;
  for (const auto& traj : paths) {
    const auto w = empirical_measure({traj}, partition, burn_in).weights();
    ++n;
    for (std::size_t c = 0; c < cells; ++c) {
      const double delta = w[c] - mean[c];
      mean[c] += delta / static_cast<double>(n);
      m2[c] += delta * (w[c] - mean[c]);
    }
  }
  std::vector<double> out(cells);
  for (std::size_t c = 0; c < cells; ++c) out[c] = std::sqrt(std::max(0.0, m2[c] / static_cast<double>(n)));
  return out;
}

// ---------------------------------------------------------------------------
// CSV export

inline void write_measure_csv(std::ostream& out, const EmpiricalMeasure& m) {
  const std::size_t n = m.partition.dim();
  out << "cell";
  for (std::size_t i = 0; i < n; ++i) out << ",lo" << i + 1 << ",hi" << i + 1;
  out << ",weight\n";
  const auto w = m.weights();
  for (std::size_t c = 0; c < m.partition.cell_count(); ++c) {
    const Vector lo = m.partition.cell_low(c), hi = m.partition.cell_high(c);
    out << c;
    for (std::size_t i = 0; i < n; ++i)
      out << ',' << format_g17(lo(static_cast<Eigen::Index>(i))) << ',' << format_g17(hi(static_cast<Eigen::Index>(i)));
    out << ',' << format_g17(w[c]) << '\n';
  }
  out << "overflow";
  for (std::size_t i = 0; i < n; ++i) out << ",,";
  out << ',' << format_g17(w[m.partition.overflow_index()]) << '\n';
}

inline void write_convergence_csv(std::ostream& out, const ConvergenceCurves& curves, std::size_t cells) {
  out << "T";
  for (std::size_t c = 0; c < cells; ++c) out << ",cell" << c;
  out << ",overflow\n";
  for (std::size_t i = 0; i < curves.checkpoints.size(); ++i) {
    out << curves.checkpoints[i];
    for (double v : curves.rows[i]) out << ',' << format_g17(v);
    out << '\n';
  }
}

}  // namespace stabent

#endif  // STABENT_ERGODICS_HPP
