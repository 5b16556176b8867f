#ifndef STABENT_SYSTEM_MODEL_HPP
#define STABENT_SYSTEM_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stabent/error.hpp"
#include "stabent/expr.hpp"
#include "stabent/linalg.hpp"
#include "stabent/model_source.hpp"

namespace stabent {

using DynamicsFn = std::function<Vector(const Vector& x, const Vector& w)>;
using JacobianFn = std::function<Matrix(const Vector& x, const Vector& w)>;

inline constexpr double kFiniteDifferenceStep = 1e-5;

/// Central-difference Jacobian of x -> f(x, w). The step for coordinate i is
/// h * max(1, |x_i|).
inline Matrix central_difference_jacobian(const DynamicsFn& f, const Vector& x, const Vector& w,
                                          double h = kFiniteDifferenceStep) {
  const Eigen::Index n = x.size();
  Matrix jac;
  Vector probe = x;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double step = h * std::max(1.0, std::abs(x(i)));
    probe(i) = x(i) + step;
    const Vector up = f(probe, w);
    probe(i) = x(i) - step;
    const Vector down = f(probe, w);
    probe(i) = x(i);
    if (i == 0) jac.resize(up.size(), n);
    jac.col(i) = (up - down) / (2.0 * step);
  }
  return jac;
}

enum class JacobianSource { kSymbolic, kAnalytic, kFiniteDifference };

/// x_{t+1} = f(x_t, w_t) + B u_t together with a Jacobian provider for
/// x -> f(x, w). Immutable after construction and safe to share.
class SystemModel {
 public:
  SystemModel(std::string name, std::size_t state_dim, std::size_t noise_dim, Matrix control_matrix,
              DynamicsFn dynamics, std::optional<JacobianFn> jacobian = std::nullopt,
              JacobianSource source = JacobianSource::kAnalytic,
              std::optional<Matrix> linear_matrix = std::nullopt)
      : name_(std::move(name)),
        state_dim_(state_dim),
        noise_dim_(noise_dim),
        control_matrix_(std::move(control_matrix)),
        dynamics_(std::move(dynamics)),
        jacobian_(std::move(jacobian)),
        source_(jacobian_ ? source : JacobianSource::kFiniteDifference),
        linear_matrix_(std::move(linear_matrix)) {
    if (static_cast<std::size_t>(control_matrix_.rows()) != state_dim_) {
      throw DimensionError("B has " + std::to_string(control_matrix_.rows()) +
                           " rows, expected " + std::to_string(state_dim_));
    }
  }

  /// Builds a model whose Jacobian is the symbolic derivative of each
  /// equation.
  static SystemModel from_source(const ModelSource& src, std::string name = "dsl") {
    const std::size_t n = src.state_dim;
    std::vector<Expr> eqs = src.equations;
    std::vector<Expr> partials;
    partials.reserve(n * n);
    bool constant_jacobian = true;
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c) {
        partials.push_back(differentiate(eqs[r], c));
        constant_jacobian = constant_jacobian && is_constant_expr(partials.back());
      }
    }
    auto f = [eqs, n](const Vector& x, const Vector& w) {
      Vector out(static_cast<Eigen::Index>(n));
      const std::span<const double> xs(x.data(), static_cast<std::size_t>(x.size()));
      const std::span<const double> ws(w.data(), static_cast<std::size_t>(w.size()));
      for (std::size_t i = 0; i < n; ++i) out(static_cast<Eigen::Index>(i)) = evaluate(eqs[i], xs, ws);
      return out;
    };
    auto jac = [partials, n](const Vector& x, const Vector& w) {
      Matrix out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
      const std::span<const double> xs(x.data(), static_cast<std::size_t>(x.size()));
      const std::span<const double> ws(w.data(), static_cast<std::size_t>(w.size()));
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c)
          out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
              evaluate(partials[r * n + c], xs, ws);
      return out;
    };
    std::optional<Matrix> linear;
    if (constant_jacobian) {
      linear = jac(Vector::Zero(static_cast<Eigen::Index>(n)),
                   Vector::Zero(static_cast<Eigen::Index>(src.noise_dim)));
    }
    return SystemModel(std::move(name), n, src.noise_dim, src.control_matrix, std::move(f),
                       JacobianFn(std::move(jac)), JacobianSource::kSymbolic, std::move(linear));
  }

  const std::string& name() const { return name_; }
  std::size_t state_dim() const { return state_dim_; }
  std::size_t noise_dim() const { return noise_dim_; }
  std::size_t control_dim() const { return static_cast<std::size_t>(control_matrix_.cols()); }
  const Matrix& control_matrix() const { return control_matrix_; }
  JacobianSource jacobian_source() const { return source_; }

  /// The constant Jacobian A when f(x, w) is affine in x.
  const std::optional<Matrix>& linear_matrix() const { return linear_matrix_; }

  Vector dynamics(const Vector& x, const Vector& w) const {
    check_dims(x, w);
    return dynamics_(x, w);
  }

  Matrix jacobian(const Vector& x, const Vector& w) const {
    check_dims(x, w);
    if (jacobian_) return (*jacobian_)(x, w);
    return central_difference_jacobian(dynamics_, x, w);
  }

  Matrix finite_difference_jacobian(const Vector& x, const Vector& w) const {
    check_dims(x, w);
    return central_difference_jacobian(dynamics_, x, w);
  }

  /// The same model with its Jacobian provider dropped, so that Jacobians
  /// come from central differences.
  SystemModel opaque() const {
    return SystemModel(name_, state_dim_, noise_dim_, control_matrix_, dynamics_, std::nullopt,
                       JacobianSource::kFiniteDifference, linear_matrix_);
  }

 private:
  void check_dims(const Vector& x, const Vector& w) const {
    if (static_cast<std::size_t>(x.size()) != state_dim_) {
      throw DimensionError("state has dimension " + std::to_string(x.size()) + ", model " +
                           name_ + " expects " + std::to_string(state_dim_));
    }
    if (static_cast<std::size_t>(w.size()) != noise_dim_) {
      throw DimensionError("noise has dimension " + std::to_string(w.size()) + ", model " +
                           name_ + " expects " + std::to_string(noise_dim_));
    }
  }

  std::string name_;
  std::size_t state_dim_;
  std::size_t noise_dim_;
  Matrix control_matrix_;
  DynamicsFn dynamics_;
  std::optional<JacobianFn> jacobian_;
  JacobianSource source_;
  std::optional<Matrix> linear_matrix_;
};

// ---------------------------------------------------------------------------
// Built-in catalog

inline std::vector<std::string> catalog_names() {
  return {"example1", "example2", "scalar_doubling", "stable_ar1"};
}

namespace detail {

inline SystemModel linear_catalog_model(std::string name, Matrix a, std::size_t noise_dim) {
  const auto n = a.rows();
  auto f = [a](const Vector& x, const Vector& w) -> Vector { return a * x + w; };
  auto jac = [a](const Vector&, const Vector&) -> Matrix { return a; };
  return SystemModel(std::move(name), static_cast<std::size_t>(n), noise_dim, Matrix::Identity(n, n),
                     std::move(f), JacobianFn(std::move(jac)), JacobianSource::kAnalytic, a);
}

}  // namespace detail

/// Catalog models:
///   example1         x' = diag(2, 1/2) x + w + u, w in R^2
///   example2         x' = (x^3 + x)(1 + y^2) + u1, y' = y/2 + w + u2, scalar w
///   scalar_doubling  x' = 2x + w + u
///   stable_ar1       x' = x/2 + w + u
inline SystemModel catalog_model(std::string_view name) {
  if (name == "example1") {
    Matrix a(2, 2);
    a << 2.0, 0.0, 0.0, 0.5;
    return detail::linear_catalog_model("example1", a, 2);
  }
  if (name == "example2") {
    auto f = [](const Vector& s, const Vector& w) -> Vector {
      const double x = s(0), y = s(1);
      Vector out(2);
      out << (x * x * x + x) * (1.0 + y * y), 0.5 * y + w(0);
      return out;
    };
    auto jac = [](const Vector& s, const Vector&) -> Matrix {
      const double x = s(0), y = s(1);
      Matrix out(2, 2);
      out << (3.0 * x * x + 1.0) * (1.0 + y * y), (x * x * x + x) * 2.0 * y, 0.0, 0.5;
      return out;
    };
    return SystemModel("example2", 2, 1, Matrix::Identity(2, 2), std::move(f),
                       JacobianFn(std::move(jac)), JacobianSource::kAnalytic);
  }
  if (name == "scalar_doubling") {
    return detail::linear_catalog_model("scalar_doubling", Matrix::Constant(1, 1, 2.0), 1);
  }
  if (name == "stable_ar1") {
    return detail::linear_catalog_model("stable_ar1", Matrix::Constant(1, 1, 0.5), 1);
  }
  throw ConfigError("unknown catalog model '" + std::string(name) + "'");
}

}  // namespace stabent

#endif  // STABENT_SYSTEM_MODEL_HPP
