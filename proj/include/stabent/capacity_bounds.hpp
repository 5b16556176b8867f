#ifndef STABENT_CAPACITY_BOUNDS_HPP
#define STABENT_CAPACITY_BOUNDS_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "stabent/dynamics.hpp"
#include "stabent/ergodics.hpp"
#include "stabent/error.hpp"
#include "stabent/linalg.hpp"
#include "stabent/random.hpp"
#include "stabent/system_model.hpp"

namespace stabent {

/// Streaming mean/variance. The mean is a Neumaier-compensated sum so that
/// differences between estimates built on the same samples stay exact to
/// rounding; the variance uses Welford updates and merges by (n, mean, M2).
class RunningStats {
 public:
  void push(double v) {
    ++n_;
    const double t = sum_ + v;
    comp_ += std::abs(sum_) >= std::abs(v) ? (sum_ - t) + v : (v - t) + sum_;
    sum_ = t;
    const double delta = v - welford_mean_;
    welford_mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (v - welford_mean_);
  }

  void merge(const RunningStats& o) {
    if (o.n_ == 0) return;
    if (n_ == 0) {
      *this = o;
      return;
    }
    const double na = static_cast<double>(n_), nb = static_cast<double>(o.n_);
    const double delta = o.welford_mean_ - welford_mean_;
    m2_ += o.m2_ + delta * delta * na * nb / (na + nb);
    welford_mean_ += delta * nb / (na + nb);
    const double t = sum_ + o.sum_;
    comp_ += (std::abs(sum_) >= std::abs(o.sum_) ? (sum_ - t) + o.sum_ : (o.sum_ - t) + sum_) + o.comp_;
    sum_ = t;
    n_ += o.n_;
  }

  std::size_t count() const { return n_; }
  double mean() const { return n_ ? (sum_ + comp_) / static_cast<double>(n_) : 0.0; }
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double stderr_of_mean() const { return n_ ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0; }

 private:
  std::size_t n_ = 0;
  double sum_ = 0.0;
  double comp_ = 0.0;
  double welford_mean_ = 0.0;
  double m2_ = 0.0;
};

/// Draws states from a histogram measure: a cell by weight (overflow
/// excluded), then a uniform point inside it.
class MeasureSampler {
 public:
  explicit MeasureSampler(const EmpiricalMeasure& q) : partition_(q.partition) {
    const std::size_t cells = q.partition.cell_count();
    std::uint64_t acc = 0;
    for (std::size_t c = 0; c < cells; ++c) {
      if (q.counts[c] == 0) continue;
      acc += q.counts[c];
      cells_.push_back(c);
      cumulative_.push_back(acc);
    }
    if (acc == 0) throw PreconditionError("measure has no mass inside the partition box");
    total_ = acc;
  }

  Vector sample(Rng& rng) const {
    const std::uint64_t r = std::uniform_int_distribution<std::uint64_t>(0, total_ - 1)(rng);
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), r);
    const std::size_t cell = cells_[static_cast<std::size_t>(it - cumulative_.begin())];
    const Vector lo = partition_.cell_low(cell), hi = partition_.cell_high(cell);
    Vector x(lo.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = std::uniform_real_distribution<double>(lo(i), hi(i))(rng);
    return x;
  }

 private:
  Partition partition_;
  std::vector<std::size_t> cells_;
  std::vector<std::uint64_t> cumulative_;
  std::uint64_t total_ = 0;
};

struct SubsetEstimate {
  IndexSubset subset;
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
};

inline void check_bound_inputs(const EmpiricalMeasure& q, std::size_t n_mc) {
  if (n_mc < 1) throw PreconditionError("Monte Carlo sample count must be >= 1");
  if (q.overflow_mass() >= kOverflowWarningMass) {
    throw PreconditionError("measure overflow mass " + std::to_string(q.overflow_mass()) +
                            " is not below 1%; enlarge the partition box");
  }
}

/// Monte Carlo estimate of E_{x~Q, w~nu} log2 |det Df^p_w| from n_mc draws.
/// Calls with the same seed see the same (x, w) draws, which is how
/// common random numbers are obtained across subsets.
inline SubsetEstimate subset_bound(const SystemModel& model, const IndexSubset& p, const EmpiricalMeasure& q,
                                   const NoiseSpec& noise, std::size_t n_mc, std::uint64_t seed) {
  check_bound_inputs(q, n_mc);
  if (noise.dim() != model.noise_dim()) throw DimensionError("noise spec does not match the model");
  const MeasureSampler sampler(q);
  Rng rng(seed);
  RunningStats stats;
  for (std::size_t i = 0; i < n_mc; ++i) {
    const Vector x = sampler.sample(rng);
    const Vector w = noise.sample(rng);
    try {
      stats.push(log2_abs_det(subset_jacobian(model, p, x, w)));
    } catch (const SingularJacobianError& e) {
      std::string where = "x = (";
      for (Eigen::Index k = 0; k < x.size(); ++k) where += (k ? ", " : "") + format_g17(x(k));
      throw SingularJacobianError("subset " + p.str() + " has a singular Jacobian at " + where + "): " + e.what());
    }
  }
  return SubsetEstimate{p, stats.mean(), stats.stderr_of_mean(), stats.count()};
}

/// Integral with p = {1..N}.
inline SubsetEstimate classical_bound(const SystemModel& model, const EmpiricalMeasure& q, const NoiseSpec& noise,
                                      std::size_t n_mc, std::uint64_t seed) {
  return subset_bound(model, IndexSubset::full(model.state_dim()), q, noise, n_mc, seed);
}

/// Sum of log2 |lambda| over eigenvalues of A outside the unit circle.
inline double linear_closed_form(const Matrix& a) {
  if (a.rows() != a.cols()) throw DimensionError("linear_closed_form needs a square matrix");
  const Eigen::EigenSolver<Matrix> solver(a, false);
  double total = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double mag = std::abs(solver.eigenvalues()(i));
    if (mag > 1.0) total += std::log2(mag);
  }
  return total;
}

struct SubsetResult {
  IndexSubset subset;
  std::optional<SubsetEstimate> estimate;
  std::string error;
};

struct BoundReport {
  std::vector<SubsetResult> subsets;
  std::optional<SubsetEstimate> best;  // max over successful subsets
  std::optional<SubsetEstimate> classical;
  std::string classical_error;
  std::optional<double> linear;
  std::optional<double> capacity;
  bool violation = false;
  bool common_random_numbers = true;
  std::size_t samples = 0;
};

struct BoundOptions {
  std::size_t n_mc = 10000;
  std::uint64_t seed = 0;
  bool common_random_numbers = true;
  std::optional<double> capacity;
};

/// Evaluates every declared subset, keeps going past per-subset failures,
/// and records the maximum (ties go to the lexicographically smallest p).
/// violation is max > C + 2 stderr(max).
inline BoundReport refined_bound(const SystemModel& model, const GammaDeclaration& gamma, const EmpiricalMeasure& q,
                                 const NoiseSpec& noise, const BoundOptions& opts) {
  gamma.validate();
  check_bound_inputs(q, opts.n_mc);
  BoundReport report;
  report.common_random_numbers = opts.common_random_numbers;
  report.samples = opts.n_mc;
  report.capacity = opts.capacity;
  for (std::size_t i = 0; i < gamma.subsets.size(); ++i) {
    const IndexSubset& p = gamma.subsets[i];
    SubsetResult r{p, std::nullopt, {}};
    const std::uint64_t seed = opts.common_random_numbers ? opts.seed : derive_seed(opts.seed, i + 1);
    try {
      r.estimate = subset_bound(model, p, q, noise, opts.n_mc, seed);
    } catch (const Error& e) {
      r.error = e.what();
    }
    if (r.estimate) {
      const bool better = !report.best || r.estimate->mean > report.best->mean ||
                          (r.estimate->mean == report.best->mean && p < report.best->subset);
      if (better) report.best = r.estimate;
    }
    report.subsets.push_back(std::move(r));
  }
  const std::uint64_t classical_seed =
      opts.common_random_numbers ? opts.seed : derive_seed(opts.seed, gamma.subsets.size() + 1);
  try {
    report.classical = classical_bound(model, q, noise, opts.n_mc, classical_seed);
  } catch (const Error& e) {
    report.classical_error = e.what();
  }
  if (model.linear_matrix()) report.linear = linear_closed_form(*model.linear_matrix());
  if (report.best && report.capacity) {
    report.violation = report.best->mean > *report.capacity + 2.0 * report.best->std_error;
  }
  return report;
}

inline nlohmann::json to_json(const BoundReport& r) {
  using nlohmann::json;
  json subsets = json::array();
  for (const auto& s : r.subsets) {
    json entry{{"p", s.subset.one_based()}};
    if (s.estimate) {
      entry["mean"] = s.estimate->mean;
      entry["stderr"] = s.estimate->std_error;
      entry["samples"] = s.estimate->samples;
    } else {
      entry["error"] = s.error;
    }
    subsets.push_back(std::move(entry));
  }
  json out;
  out["subsets"] = std::move(subsets);
  out["max_bound"] = r.best ? json(r.best->mean) : json(nullptr);
  out["max_stderr"] = r.best ? json(r.best->std_error) : json(nullptr);
  out["argmax"] = r.best ? json(r.best->subset.one_based()) : json(nullptr);
  out["classical_bound"] = r.classical ? json(r.classical->mean) : json(nullptr);
  out["classical_stderr"] = r.classical ? json(r.classical->std_error) : json(nullptr);
  if (!r.classical) out["classical_error"] = r.classical_error;
  out["linear_closed_form"] = r.linear ? json(*r.linear) : json(nullptr);
  out["capacity"] = r.capacity ? json(*r.capacity) : json(nullptr);
  out["violation"] = r.violation;
  out["common_random_numbers"] = r.common_random_numbers;
  out["samples"] = r.samples;
  return out;
}

}  // namespace stabent

#endif  // STABENT_CAPACITY_BOUNDS_HPP
