#ifndef STABENT_LINALG_HPP
#define STABENT_LINALG_HPP

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "stabent/error.hpp"

namespace stabent {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Determinants with magnitude below this are treated as singular.
inline constexpr double kSingularDetFloor = 1e-300;

/// log2 |det M| from the diagonal of a partially pivoted LU factorization.
/// Throws SingularJacobianError instead of returning -inf.
inline double log2_abs_det(const Matrix& m) {
  if (m.rows() != m.cols()) {
    throw DimensionError("log2_abs_det: matrix is " + std::to_string(m.rows()) +
                         "x" + std::to_string(m.cols()) + ", not square");
  }
  if (m.rows() == 0) return 0.0;
  if (!m.allFinite()) {
    throw SingularJacobianError("log2_abs_det: matrix has non-finite entries");
  }
  const Eigen::PartialPivLU<Matrix> lu(m);
  const Matrix& packed = lu.matrixLU();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < packed.rows(); ++i) {
    const double d = std::abs(packed(i, i));
    if (d == 0.0) {
      throw SingularJacobianError("log2_abs_det: exactly singular matrix");
    }
    acc += std::log2(d);
  }
  if (acc < std::log2(kSingularDetFloor)) {
    throw SingularJacobianError("log2_abs_det: |det| = 2^" + std::to_string(acc) +
                                " is below the singularity floor 1e-300");
  }
  return acc;
}

inline Matrix pseudo_inverse(const Matrix& m) {
  return Eigen::CompleteOrthogonalDecomposition<Matrix>(m).pseudoInverse();
}

inline bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace stabent

#endif  // STABENT_LINALG_HPP
