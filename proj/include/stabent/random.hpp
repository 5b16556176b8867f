#ifndef STABENT_RANDOM_HPP
#define STABENT_RANDOM_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "stabent/error.hpp"
#include "stabent/linalg.hpp"

namespace stabent {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Seed of stream `k` split from `base`. Streams are independent of how many
/// siblings exist, so adding paths never reshuffles existing ones.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t k) {
  return splitmix64(splitmix64(base) ^ splitmix64(0xD1B54A32D192ED03ULL * (k + 1)));
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

inline double standard_normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

namespace detail {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace detail

/// i.i.d. noise law nu. Gaussian and uniform families have independent
/// coordinates; discrete atoms are vectors with probabilities.
struct NoiseSpec {
  enum class Family { kGaussian, kUniform, kAtoms };

  Family family = Family::kGaussian;
  Vector mean;    // gaussian
  Vector stddev;  // gaussian, zero allowed (point mass)
  Vector low;     // uniform
  Vector high;    // uniform
  std::vector<Vector> atoms;
  std::vector<double> probabilities;

  static NoiseSpec gaussian(Vector mean, Vector stddev) {
    NoiseSpec s;
    s.family = Family::kGaussian;
    s.mean = std::move(mean);
    s.stddev = std::move(stddev);
    s.validate();
    return s;
  }

  static NoiseSpec uniform(Vector low, Vector high) {
    NoiseSpec s;
    s.family = Family::kUniform;
    s.low = std::move(low);
    s.high = std::move(high);
    s.validate();
    return s;
  }

  static NoiseSpec discrete(std::vector<Vector> atoms, std::vector<double> probabilities) {
    NoiseSpec s;
    s.family = Family::kAtoms;
    s.atoms = std::move(atoms);
    s.probabilities = std::move(probabilities);
    s.validate();
    return s;
  }

  /// Noise identically zero in `dim` coordinates.
  static NoiseSpec zero(std::size_t dim) {
    const auto n = static_cast<Eigen::Index>(dim);
    return gaussian(Vector::Zero(n), Vector::Zero(n));
  }

  std::size_t dim() const {
    switch (family) {
      case Family::kGaussian: return static_cast<std::size_t>(mean.size());
      case Family::kUniform: return static_cast<std::size_t>(low.size());
      case Family::kAtoms: return atoms.empty() ? 0 : static_cast<std::size_t>(atoms.front().size());
    }
    return 0;
  }

  void validate() const {
    switch (family) {
      case Family::kGaussian:
        if (mean.size() != stddev.size()) throw DimensionError("gaussian mean/stddev size mismatch");
        for (Eigen::Index i = 0; i < stddev.size(); ++i)
          if (!(stddev(i) >= 0.0)) throw PreconditionError("gaussian stddev must be >= 0");
        break;
      case Family::kUniform:
        if (low.size() != high.size()) throw DimensionError("uniform low/high size mismatch");
        for (Eigen::Index i = 0; i < low.size(); ++i)
          if (!(low(i) < high(i))) throw PreconditionError("uniform bounds need low < high");
        break;
      case Family::kAtoms: {
        if (atoms.empty() || atoms.size() != probabilities.size())
          throw PreconditionError("discrete noise needs one probability per atom");
        double total = 0.0;
        for (std::size_t i = 0; i < atoms.size(); ++i) {
          if (atoms[i].size() != atoms.front().size()) throw DimensionError("atoms differ in dimension");
          if (!(probabilities[i] >= 0.0)) throw PreconditionError("negative atom probability");
          total += probabilities[i];
        }
        if (std::abs(total - 1.0) > 1e-12) {
          throw PreconditionError("atom probabilities sum to " + std::to_string(total) + ", not 1");
        }
        break;
      }
    }
  }

  Vector sample(Rng& rng) const {
    const auto n = static_cast<Eigen::Index>(dim());
    Vector w(n);
    switch (family) {
      case Family::kGaussian:
        for (Eigen::Index i = 0; i < n; ++i)
          w(i) = stddev(i) == 0.0 ? mean(i) : mean(i) + stddev(i) * standard_normal(rng);
        break;
      case Family::kUniform:
        for (Eigen::Index i = 0; i < n; ++i)
          w(i) = std::uniform_real_distribution<double>(low(i), high(i))(rng);
        break;
      case Family::kAtoms: {
        const double u = uniform01(rng);
        double acc = 0.0;
        std::size_t pick = atoms.size() - 1;
        for (std::size_t i = 0; i < atoms.size(); ++i) {
          acc += probabilities[i];
          if (u < acc) {
            pick = i;
            break;
          }
        }
        w = atoms[pick];
        break;
      }
    }
    return w;
  }

  Vector expectation() const {
    switch (family) {
      case Family::kGaussian: return mean;
      case Family::kUniform: return 0.5 * (low + high);
      case Family::kAtoms: {
        Vector m = Vector::Zero(atoms.front().size());
        for (std::size_t i = 0; i < atoms.size(); ++i) m += probabilities[i] * atoms[i];
        return m;
      }
    }
    return {};
  }

  /// nu([lo, hi)) for a half-open box; bounds may be infinite.
  double probability(const Vector& lo, const Vector& hi) const {
    const auto n = static_cast<Eigen::Index>(dim());
    if (lo.size() != n || hi.size() != n) throw DimensionError("probability box dimension mismatch");
    switch (family) {
      case Family::kGaussian: {
        double p = 1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          if (stddev(i) == 0.0) {
            p *= (mean(i) >= lo(i) && mean(i) < hi(i)) ? 1.0 : 0.0;
          } else {
            p *= detail::normal_cdf((hi(i) - mean(i)) / stddev(i)) -
                 detail::normal_cdf((lo(i) - mean(i)) / stddev(i));
          }
        }
        return p;
      }
      case Family::kUniform: {
        double p = 1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          const double a = std::max(lo(i), low(i));
          const double b = std::min(hi(i), high(i));
          p *= b > a ? (b - a) / (high(i) - low(i)) : 0.0;
        }
        return p;
      }
      case Family::kAtoms: {
        double p = 0.0;
        for (std::size_t k = 0; k < atoms.size(); ++k) {
          bool inside = true;
          for (Eigen::Index i = 0; i < n; ++i)
            inside = inside && atoms[k](i) >= lo(i) && atoms[k](i) < hi(i);
          if (inside) p += probabilities[k];
        }
        return p;
      }
    }
    return 0.0;
  }
};

/// Initial-state law: independent coordinates with bounded densities
/// (gaussian or uniform), some of which may be pinned to fixed values.
struct InitSpec {
  enum class Family { kGaussian, kUniform };

  Family family = Family::kUniform;
  Vector first;   // mean or low
  Vector second;  // stddev or high
  std::vector<std::optional<double>> fixed;

  static InitSpec gaussian(Vector mean, Vector stddev) {
    InitSpec s{Family::kGaussian, std::move(mean), std::move(stddev), {}};
    s.fixed.resize(static_cast<std::size_t>(s.first.size()));
    s.validate();
    return s;
  }

  static InitSpec uniform(Vector low, Vector high) {
    InitSpec s{Family::kUniform, std::move(low), std::move(high), {}};
    s.fixed.resize(static_cast<std::size_t>(s.first.size()));
    s.validate();
    return s;
  }

  /// Every coordinate pinned.
  static InitSpec fixed_at(const Vector& x0) {
    InitSpec s = uniform(x0.array() - 1.0, x0.array() + 1.0);
    for (Eigen::Index i = 0; i < x0.size(); ++i) s.fixed[static_cast<std::size_t>(i)] = x0(i);
    return s;
  }

  InitSpec& pin(std::size_t coordinate, double value) {
    if (coordinate >= fixed.size()) throw DimensionError("pinned coordinate out of range");
    fixed[coordinate] = value;
    return *this;
  }

  std::size_t dim() const { return static_cast<std::size_t>(first.size()); }

  void validate() const {
    if (first.size() != second.size()) throw DimensionError("init parameter size mismatch");
    for (Eigen::Index i = 0; i < first.size(); ++i) {
      if (family == Family::kGaussian && !(second(i) > 0.0))
        throw PreconditionError("init gaussian stddev must be > 0 (bounded density)");
      if (family == Family::kUniform && !(first(i) < second(i)))
        throw PreconditionError("init uniform bounds need low < high");
    }
  }

  Vector sample(Rng& rng) const {
    const auto n = first.size();
    Vector x(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      // Draw even for pinned coordinates so the stream layout does not
      // depend on which coordinates are pinned.
      const double draw = family == Family::kGaussian
                              ? first(i) + second(i) * standard_normal(rng)
                              : std::uniform_real_distribution<double>(first(i), second(i))(rng);
      const auto& pinned = fixed[static_cast<std::size_t>(i)];
      x(i) = pinned ? *pinned : draw;
    }
    return x;
  }
};

}  // namespace stabent

#endif  // STABENT_RANDOM_HPP
