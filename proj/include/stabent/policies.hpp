#ifndef STABENT_POLICIES_HPP
#define STABENT_POLICIES_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stabent/error.hpp"
#include "stabent/linalg.hpp"
#include "stabent/system_model.hpp"

namespace stabent {

/// Channel symbol in {1..M}.
using Symbol = std::uint32_t;

/// Encoder side of a coding policy. Sees x_0..x_t one state at a time and
/// keeps whatever history it needs internally.
class Encoder {
 public:
  virtual ~Encoder() = default;
  virtual Symbol encode(const Vector& x) = 0;
};

/// Controller side. Sees only the symbols q_0..q_t.
class Controller {
 public:
  virtual ~Controller() = default;
  virtual Vector control(Symbol q) = 0;
};

/// Factory for fresh encoder/controller pairs; one pair drives one path.
class CodingPolicy {
 public:
  virtual ~CodingPolicy() = default;
  virtual std::string name() const = 0;
  virtual std::size_t alphabet_size() const = 0;
  virtual std::unique_ptr<Encoder> make_encoder() const = 0;
  virtual std::unique_ptr<Controller> make_controller() const = 0;

  /// C = log2 M bits per channel use.
  double capacity() const { return std::log2(static_cast<double>(alphabet_size())); }
};

// ---------------------------------------------------------------------------

class NullPolicy final : public CodingPolicy {
 public:
  NullPolicy(std::size_t alphabet, std::size_t control_dim) : alphabet_(alphabet), control_dim_(control_dim) {
    if (alphabet < 1) throw PreconditionError("alphabet size must be >= 1");
  }

  std::string name() const override { return "null"; }
  std::size_t alphabet_size() const override { return alphabet_; }

  std::unique_ptr<Encoder> make_encoder() const override {
    struct Impl final : Encoder {
      Symbol encode(const Vector&) override { return 1; }
    };
    return std::make_unique<Impl>();
  }

  std::unique_ptr<Controller> make_controller() const override {
    struct Impl final : Controller {
      explicit Impl(std::size_t n) : zero(Vector::Zero(static_cast<Eigen::Index>(n))) {}
      Vector control(Symbol) override { return zero; }
      Vector zero;
    };
    return std::make_unique<Impl>(control_dim_);
  }

 private:
  std::size_t alphabet_;
  std::size_t control_dim_;
};

// ---------------------------------------------------------------------------
// Uniform grid over a box. Cells are indexed row-major with the last axis
// varying fastest; each axis is split into equal half-open intervals except
// the last, which also contains the upper face.

class QuantizerGrid {
 public:
  QuantizerGrid() = default;

  QuantizerGrid(Vector low, Vector high, std::vector<std::size_t> levels)
      : low_(std::move(low)), high_(std::move(high)), levels_(std::move(levels)) {
    if (low_.size() != high_.size() || static_cast<std::size_t>(low_.size()) != levels_.size()) {
      throw DimensionError("quantizer box and levels differ in dimension");
    }
    cells_ = 1;
    for (Eigen::Index i = 0; i < low_.size(); ++i) {
      if (!(low_(i) < high_(i)) || !std::isfinite(low_(i)) || !std::isfinite(high_(i))) {
        throw PreconditionError("degenerate quantizer box on axis " + std::to_string(i + 1));
      }
      if (levels_[static_cast<std::size_t>(i)] < 1) throw PreconditionError("quantizer needs >= 1 level per axis");
      cells_ *= levels_[static_cast<std::size_t>(i)];
    }
  }

  std::size_t dim() const { return levels_.size(); }
  std::size_t cell_count() const { return cells_; }
  const Vector& low() const { return low_; }
  const Vector& high() const { return high_; }
  const std::vector<std::size_t>& levels() const { return levels_; }

  /// Flat cell index of x, or nullopt when x is outside the closed box.
  std::optional<std::size_t> cell_of(const Vector& x) const {
    std::size_t flat = 0;
    for (std::size_t i = 0; i < levels_.size(); ++i) {
      const auto a = static_cast<Eigen::Index>(i);
      const double v = x(a);
      if (!(v >= low_(a) && v <= high_(a))) return std::nullopt;
      const double width = (high_(a) - low_(a)) / static_cast<double>(levels_[i]);
      auto k = static_cast<std::size_t>(std::floor((v - low_(a)) / width));
      k = std::min(k, levels_[i] - 1);
      flat = flat * levels_[i] + k;
    }
    return flat;
  }

  Vector cell_low(std::size_t flat) const { return corner(flat, 0.0); }
  Vector cell_high(std::size_t flat) const { return corner(flat, 1.0); }
  Vector centroid(std::size_t flat) const { return corner(flat, 0.5); }

 private:
  Vector corner(std::size_t flat, double offset) const {
    Vector out(low_.size());
    for (std::size_t i = levels_.size(); i-- > 0;) {
      const auto a = static_cast<Eigen::Index>(i);
      const std::size_t k = flat % levels_[i];
      flat /= levels_[i];
      const double width = (high_(a) - low_(a)) / static_cast<double>(levels_[i]);
      out(a) = low_(a) + (static_cast<double>(k) + offset) * width;
    }
    return out;
  }

  Vector low_;
  Vector high_;
  std::vector<std::size_t> levels_;
  std::size_t cells_ = 0;
};

/// u = B^+ (target - f(xhat, wbar)): cancels the predicted drift at the
/// reconstruction xhat, with wbar the noise mean.
class CancelRule {
 public:
  CancelRule(const SystemModel& model, Vector noise_mean, Vector target)
      : model_(model), b_pinv_(pseudo_inverse(model.control_matrix())),
        noise_mean_(std::move(noise_mean)), target_(std::move(target)) {
    if (static_cast<std::size_t>(target_.size()) != model.state_dim())
      throw DimensionError("control target dimension mismatch");
  }

  Vector operator()(const Vector& xhat) const {
    return b_pinv_ * (target_ - model_.dynamics(xhat, noise_mean_));
  }

  /// Predicted next state f(xhat, wbar) + B u.
  Vector image(const Vector& xhat, const Vector& u) const {
    return model_.dynamics(xhat, noise_mean_) + model_.control_matrix() * u;
  }

  std::size_t control_dim() const { return model_.control_dim(); }

 private:
  SystemModel model_;
  Matrix b_pinv_;
  Vector noise_mean_;
  Vector target_;
};

/// Memoryless quantizer: symbol k+1 for grid cell k, symbol cells+1 for
/// overflow. The controller applies the cancel rule at the cell centroid and
/// u = 0 on overflow.
class UniformQuantizerPolicy final : public CodingPolicy {
 public:
  UniformQuantizerPolicy(QuantizerGrid grid, std::size_t alphabet, CancelRule rule)
      : grid_(std::move(grid)), alphabet_(alphabet), rule_(std::move(rule)) {
    if (alphabet_ < grid_.cell_count() + 1) {
      throw PreconditionError("alphabet of " + std::to_string(alphabet_) + " symbols cannot carry " +
                              std::to_string(grid_.cell_count()) + " cells plus the overflow symbol");
    }
  }

  std::string name() const override { return "uniform"; }
  std::size_t alphabet_size() const override { return alphabet_; }
  const QuantizerGrid& grid() const { return grid_; }
  Symbol overflow_symbol() const { return static_cast<Symbol>(grid_.cell_count() + 1); }

  Symbol symbol_for(const Vector& x) const {
    const auto cell = grid_.cell_of(x);
    return cell ? static_cast<Symbol>(*cell + 1) : overflow_symbol();
  }

  Vector control_for(Symbol q) const {
    if (q == overflow_symbol()) return Vector::Zero(static_cast<Eigen::Index>(rule_.control_dim()));
    if (q < 1 || q > grid_.cell_count()) throw PreconditionError("symbol outside the quantizer alphabet");
    return rule_(grid_.centroid(q - 1));
  }

  std::unique_ptr<Encoder> make_encoder() const override {
    struct Impl final : Encoder {
      explicit Impl(const UniformQuantizerPolicy& p) : policy(p) {}
      Symbol encode(const Vector& x) override { return policy.symbol_for(x); }
      const UniformQuantizerPolicy& policy;
    };
    return std::make_unique<Impl>(*this);
  }

  std::unique_ptr<Controller> make_controller() const override {
    struct Impl final : Controller {
      explicit Impl(const UniformQuantizerPolicy& p) : policy(p) {}
      Vector control(Symbol q) override { return policy.control_for(q); }
      const UniformQuantizerPolicy& policy;
    };
    return std::make_unique<Impl>(*this);
  }

 private:
  QuantizerGrid grid_;
  std::size_t alphabet_;
  CancelRule rule_;
};

// ---------------------------------------------------------------------------
// Adaptive zoom quantizer.

struct ZoomState {
  Vector center;
  double half_width = 1.0;

  friend bool operator==(const ZoomState& a, const ZoomState& b) {
    return a.half_width == b.half_width && a.center.size() == b.center.size() &&
           (a.center.array() == b.center.array()).all();
  }
};

struct ZoomParams {
  double zoom_in = 0.9;    // alpha in (0, 1)
  double zoom_out = 4.0;   // beta > 1
  double initial_half_width = 1.0;
  double min_half_width = 1e-9;
  std::optional<Vector> initial_center;
  std::vector<std::size_t> levels;  // per axis; empty = equal split of M - 1
};

/// Largest equal per-axis level count k with k^n <= usable.
inline std::vector<std::size_t> equal_levels(std::size_t usable, std::size_t n) {
  std::size_t k = 1;
  auto fits = [&](std::size_t c) {
    std::size_t prod = 1;
    for (std::size_t i = 0; i < n; ++i) {
      prod *= c;
      if (prod > usable) return false;
    }
    return true;
  };
  while (fits(k + 1)) ++k;
  return std::vector<std::size_t>(n, k);
}

/// Quantizes x_t on [c - L, c + L]^N with M - 1 cells and one overflow
/// symbol. In range: L <- alpha L and c <- predicted image of the cell
/// centroid. Overflow: L <- beta L, u = 0 and c <- f(c, wbar). Encoder and
/// controller run the same update from q_t alone, so their states agree.
class ZoomPolicy final : public CodingPolicy {
 public:
  ZoomPolicy(std::size_t alphabet, ZoomParams params, CancelRule rule, std::size_t state_dim)
      : alphabet_(alphabet), params_(std::move(params)), rule_(std::move(rule)), state_dim_(state_dim) {
    if (alphabet_ < 2) throw PreconditionError("zoom policy needs M >= 2 (one overflow symbol)");
    if (!(params_.zoom_in > 0.0 && params_.zoom_in < 1.0)) throw PreconditionError("zoom-in factor must lie in (0,1)");
    if (!(params_.zoom_out > 1.0)) throw PreconditionError("zoom-out factor must exceed 1");
    if (!(params_.initial_half_width > 0.0)) throw PreconditionError("initial half-width must be positive");
    if (params_.levels.empty()) params_.levels = equal_levels(alphabet_ - 1, state_dim_);
    if (params_.levels.size() != state_dim_) throw DimensionError("zoom levels differ from state dimension");
    cells_ = 1;
    for (std::size_t k : params_.levels) {
      if (k < 1) throw PreconditionError("zoom policy needs >= 1 level per axis");
      cells_ *= k;
    }
    if (cells_ + 1 > alphabet_) throw PreconditionError("zoom grid needs more symbols than the alphabet has");
    if (params_.initial_center && static_cast<std::size_t>(params_.initial_center->size()) != state_dim_)
      throw DimensionError("zoom initial center dimension mismatch");
  }

  std::string name() const override { return "zoom"; }
  std::size_t alphabet_size() const override { return alphabet_; }
  Symbol overflow_symbol() const { return static_cast<Symbol>(cells_ + 1); }
  const ZoomParams& params() const { return params_; }

  ZoomState initial_state() const {
    return ZoomState{params_.initial_center.value_or(Vector::Zero(static_cast<Eigen::Index>(state_dim_))),
                     params_.initial_half_width};
  }

  QuantizerGrid grid(const ZoomState& s) const {
    return QuantizerGrid(s.center.array() - s.half_width, s.center.array() + s.half_width, params_.levels);
  }

  Symbol quantize(const ZoomState& s, const Vector& x) const {
    const auto cell = grid(s).cell_of(x);
    return cell ? static_cast<Symbol>(*cell + 1) : overflow_symbol();
  }

  /// Shared state transition; returns u_t.
  Vector advance(ZoomState& s, Symbol q) const {
    if (q == overflow_symbol()) {
      const Vector u = Vector::Zero(static_cast<Eigen::Index>(rule_.control_dim()));
      s.center = rule_.image(s.center, u);
      s.half_width *= params_.zoom_out;
      return u;
    }
    if (q < 1 || q > cells_) throw PreconditionError("symbol outside the zoom alphabet");
    const Vector xhat = grid(s).centroid(q - 1);
    const Vector u = rule_(xhat);
    s.center = rule_.image(xhat, u);
    s.half_width = std::max(params_.zoom_in * s.half_width, params_.min_half_width);
    return u;
  }

  class ZoomEncoder final : public Encoder {
   public:
    explicit ZoomEncoder(const ZoomPolicy& p) : policy_(p), state_(p.initial_state()) {}
    Symbol encode(const Vector& x) override {
      const Symbol q = policy_.quantize(state_, x);
      policy_.advance(state_, q);
      return q;
    }
    const ZoomState& state() const { return state_; }

   private:
    const ZoomPolicy& policy_;
    ZoomState state_;
  };

  class ZoomController final : public Controller {
   public:
    explicit ZoomController(const ZoomPolicy& p) : policy_(p), state_(p.initial_state()) {}
    Vector control(Symbol q) override { return policy_.advance(state_, q); }
    const ZoomState& state() const { return state_; }

   private:
    const ZoomPolicy& policy_;
    ZoomState state_;
  };

  std::unique_ptr<Encoder> make_encoder() const override { return std::make_unique<ZoomEncoder>(*this); }
  std::unique_ptr<Controller> make_controller() const override {
    return std::make_unique<ZoomController>(*this);
  }

 private:
  std::size_t alphabet_;
  ZoomParams params_;
  CancelRule rule_;
  std::size_t state_dim_;
  std::size_t cells_ = 1;
};

}  // namespace stabent

#endif  // STABENT_POLICIES_HPP
