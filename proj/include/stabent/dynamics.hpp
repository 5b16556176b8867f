#ifndef STABENT_DYNAMICS_HPP
#define STABENT_DYNAMICS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "stabent/error.hpp"
#include "stabent/linalg.hpp"
#include "stabent/random.hpp"
#include "stabent/system_model.hpp"

namespace stabent {

/// A coordinate subset p of {1..N} with its complement z, both increasing.
/// Stored 0-based; `one_based()` gives the external form.
class IndexSubset {
 public:
  IndexSubset() = default;

  static IndexSubset from_one_based(std::size_t n, const std::vector<std::size_t>& p,
                                    std::optional<double> floor = std::nullopt) {
    if (p.empty()) throw PreconditionError("index subset must be nonempty");
    IndexSubset s;
    s.n_ = n;
    s.floor_ = floor;
    std::vector<bool> in(n, false);
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p[i] < 1 || p[i] > n) {
        throw DimensionError("index " + std::to_string(p[i]) + " outside {1.." + std::to_string(n) + "}");
      }
      if (i > 0 && p[i] <= p[i - 1]) throw PreconditionError("subset indices must be strictly increasing");
      in[p[i] - 1] = true;
      s.p_.push_back(p[i] - 1);
    }
    for (std::size_t i = 0; i < n; ++i)
      if (!in[i]) s.z_.push_back(i);
    if (floor && !(*floor > 0.0 && *floor <= 1.0))
      throw PreconditionError("determinant floor c_p must lie in (0,1]");
    return s;
  }

  static IndexSubset full(std::size_t n, std::optional<double> floor = std::nullopt) {
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i + 1;
    return from_one_based(n, all, floor);
  }

  std::size_t dim() const { return n_; }
  std::size_t size() const { return p_.size(); }
  const std::vector<std::size_t>& indices() const { return p_; }
  const std::vector<std::size_t>& complement() const { return z_; }
  const std::optional<double>& floor() const { return floor_; }
  bool is_full() const { return p_.size() == n_; }

  std::vector<std::size_t> one_based() const {
    std::vector<std::size_t> out;
    for (std::size_t i : p_) out.push_back(i + 1);
    return out;
  }

  std::string str() const {
    std::string out = "{";
    for (std::size_t i = 0; i < p_.size(); ++i) {
      if (i) out += ',';
      out += std::to_string(p_[i] + 1);
    }
    return out + "}";
  }

  friend bool operator==(const IndexSubset& a, const IndexSubset& b) {
    return a.n_ == b.n_ && a.p_ == b.p_;
  }

  /// Lexicographic order on the index lists.
  friend bool operator<(const IndexSubset& a, const IndexSubset& b) { return a.p_ < b.p_; }

 private:
  std::size_t n_ = 0;
  std::vector<std::size_t> p_;
  std::vector<std::size_t> z_;
  std::optional<double> floor_;
};

/// Subsets declared to have a uniform determinant floor. Membership is a
/// claim from configuration; gamma_falsify can only refute it.
struct GammaDeclaration {
  std::vector<IndexSubset> subsets;

  void validate() const {
    if (subsets.empty()) throw PreconditionError("Gamma declaration must be nonempty");
    for (std::size_t i = 0; i < subsets.size(); ++i)
      for (std::size_t j = i + 1; j < subsets.size(); ++j)
        if (subsets[i] == subsets[j]) throw PreconditionError("duplicate subset " + subsets[i].str());
  }
};

inline void check_state_dim(const IndexSubset& p, Eigen::Index size, const char* what) {
  if (static_cast<std::size_t>(size) != p.dim()) {
    throw DimensionError(std::string(what) + ": vector has dimension " + std::to_string(size) +
                         ", expected " + std::to_string(p.dim()));
  }
}

/// psi_p: coordinates in p first (in order), then the complement.
inline Vector permute_state(const IndexSubset& p, const Vector& x) {
  check_state_dim(p, x.size(), "permute_state");
  Vector out(x.size());
  Eigen::Index i = 0;
  for (std::size_t k : p.indices()) out(i++) = x(static_cast<Eigen::Index>(k));
  for (std::size_t k : p.complement()) out(i++) = x(static_cast<Eigen::Index>(k));
  return out;
}

inline Vector inverse_permute(const IndexSubset& p, const Vector& v) {
  check_state_dim(p, v.size(), "inverse_permute");
  Vector out(v.size());
  Eigen::Index i = 0;
  for (std::size_t k : p.indices()) out(static_cast<Eigen::Index>(k)) = v(i++);
  for (std::size_t k : p.complement()) out(static_cast<Eigen::Index>(k)) = v(i++);
  return out;
}

inline Vector project(const IndexSubset& p, const Vector& x) {
  check_state_dim(p, x.size(), "project");
  Vector out(static_cast<Eigen::Index>(p.size()));
  for (std::size_t i = 0; i < p.size(); ++i)
    out(static_cast<Eigen::Index>(i)) = x(static_cast<Eigen::Index>(p.indices()[i]));
  return out;
}

inline Vector project_complement(const IndexSubset& p, const Vector& x) {
  check_state_dim(p, x.size(), "project_complement");
  Vector out(static_cast<Eigen::Index>(p.complement().size()));
  for (std::size_t i = 0; i < p.complement().size(); ++i)
    out(static_cast<Eigen::Index>(i)) = x(static_cast<Eigen::Index>(p.complement()[i]));
  return out;
}

/// f^p(xp; xz, w) = pi_p f(psi_p^{-1}(xp, xz), w).
inline Vector subset_map(const SystemModel& model, const IndexSubset& p, const Vector& xp,
                         const Vector& xz, const Vector& w) {
  if (p.dim() != model.state_dim()) throw DimensionError("subset built for a different state dimension");
  if (static_cast<std::size_t>(xp.size()) != p.size() ||
      static_cast<std::size_t>(xz.size()) != p.complement().size()) {
    throw DimensionError("subset_map: split vector sizes do not match " + p.str());
  }
  Vector stacked(xp.size() + xz.size());
  stacked << xp, xz;
  return project(p, model.dynamics(inverse_permute(p, stacked), w));
}

/// |p| x |p| Jacobian of f^p_w with respect to xp, at the full state x.
inline Matrix subset_jacobian(const SystemModel& model, const IndexSubset& p, const Vector& x,
                              const Vector& w) {
  if (p.dim() != model.state_dim()) throw DimensionError("subset built for a different state dimension");
  const Matrix full = model.jacobian(x, w);
  const auto k = static_cast<Eigen::Index>(p.size());
  Matrix out(k, k);
  for (Eigen::Index r = 0; r < k; ++r)
    for (Eigen::Index c = 0; c < k; ++c)
      out(r, c) = full(static_cast<Eigen::Index>(p.indices()[static_cast<std::size_t>(r)]),
                       static_cast<Eigen::Index>(p.indices()[static_cast<std::size_t>(c)]));
  return out;
}

/// Same Jacobian by central differences of subset_map.
inline Matrix subset_jacobian_fd(const SystemModel& model, const IndexSubset& p, const Vector& x,
                                 const Vector& w, double h = kFiniteDifferenceStep) {
  const Vector xz = project_complement(p, x);
  DynamicsFn restricted = [&](const Vector& xp, const Vector& ww) {
    return subset_map(model, p, xp, xz, ww);
  };
  return central_difference_jacobian(restricted, project(p, x), w, h);
}

// ---------------------------------------------------------------------------
// Randomized falsification of a declared determinant floor.

/// Draws states from a box, mixing in heavy-tailed Cauchy draws to probe
/// behavior far from the box.
struct DomainSampler {
  Vector low;
  Vector high;
  double cauchy_fraction = 0.1;
  double cauchy_scale = 1.0;

  static DomainSampler default_for(std::size_t n) {
    const auto k = static_cast<Eigen::Index>(n);
    return DomainSampler{Vector::Constant(k, -100.0), Vector::Constant(k, 100.0), 0.1, 1.0};
  }

  Vector sample(Rng& rng) const {
    Vector x(low.size());
    const bool heavy = uniform01(rng) < cauchy_fraction;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      x(i) = heavy ? std::cauchy_distribution<double>(0.0, cauchy_scale)(rng)
                   : std::uniform_real_distribution<double>(low(i), high(i))(rng);
    }
    return x;
  }
};

struct FalsificationResult {
  bool counterexample = false;
  Vector x;  // argmin of |det| (the counterexample when one was found)
  Vector w;
  double min_abs_det = std::numeric_limits<double>::infinity();
  std::size_t samples = 0;
};

inline constexpr std::size_t kFalsifyChunk = 4096;

/// Samples (x, w) and looks for |det Df^p_w| <= c_p. Never certifies the
/// floor; without a counterexample it reports the smallest |det| seen.
inline FalsificationResult gamma_falsify(const SystemModel& model, const IndexSubset& p,
                                         const DomainSampler& sampler, const NoiseSpec& noise,
                                         std::size_t n, std::uint64_t seed) {
  if (n < 1) throw PreconditionError("gamma_falsify needs at least one sample");
  if (!p.floor()) throw PreconditionError("subset " + p.str() + " has no declared floor c_p");
  const double floor = *p.floor();
  FalsificationResult best;
  best.samples = n;
  for (std::size_t chunk = 0; chunk * kFalsifyChunk < n; ++chunk) {
    Rng rng(derive_seed(seed, chunk));
    const std::size_t end = std::min(n, (chunk + 1) * kFalsifyChunk);
    for (std::size_t i = chunk * kFalsifyChunk; i < end; ++i) {
      const Vector x = sampler.sample(rng);
      const Vector w = noise.sample(rng);
      const Matrix j = subset_jacobian(model, p, x, w);
      double det = std::abs(j.partialPivLu().determinant());
      if (std::isnan(det)) det = 0.0;
      if (det < best.min_abs_det) {
        best.min_abs_det = det;
        best.x = x;
        best.w = w;
      }
    }
  }
  best.counterexample = best.min_abs_det <= floor;
  return best;
}

}  // namespace stabent

#endif  // STABENT_DYNAMICS_HPP
