#ifndef ROAMTOK_LINALG_HPP
#define ROAMTOK_LINALG_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <string>

#include "roamtok/errors.hpp"

namespace roamtok {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kSolveResidualTol = 1e-10;

/// Smallest eigenvalue of a symmetric matrix.
inline double min_eigenvalue(const Matrix& sym) {
  if (sym.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline bool is_symmetric(const Matrix& m, double tol = 1e-12) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

inline bool is_spd(const Matrix& m) {
  if (!is_symmetric(m)) return false;
  Eigen::LLT<Matrix> llt(m);
  return llt.info() == Eigen::Success && min_eigenvalue(m) > 0.0;
}

/// Normwise backward error ||Mx - b|| / (||M|| ||x|| + ||b||).
inline double backward_error(const Matrix& m, const Vector& x, const Vector& b) {
  const double denom = m.norm() * x.norm() + b.norm();
  if (denom == 0.0) return 0.0;
  return (m * x - b).norm() / denom;
}

/// Solves M x = b for symmetric positive-definite M via Cholesky. No explicit
/// inverse is formed. Throws SolveFailed when the factorization breaks down or
/// the backward error exceeds `tol`.
inline Vector spd_solve(const Matrix& m, const Vector& b, double tol = kSolveResidualTol) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) {
    throw SolveFailed("Cholesky factorization failed: matrix is not positive definite");
  }
  Vector x = llt.solve(b);
  const double err = backward_error(m, x, b);
  if (!(err <= tol)) {
    throw SolveFailed("SPD solve residual " + std::to_string(err) + " exceeds tolerance " +
                      std::to_string(tol));
  }
  return x;
}

/// Σ^{-1} via column-by-column SPD solves, for reporting only (trace(Σ_c^{-1})).
inline Matrix spd_inverse_via_solves(const Matrix& m, double tol = kSolveResidualTol) {
  Matrix out(m.rows(), m.cols());
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    out.col(j) = spd_solve(m, Vector::Unit(m.rows(), j), tol);
  }
  return out;
}

inline double relative_frobenius(const Matrix& a, const Matrix& ref) {
  const double n = ref.norm();
  return n == 0.0 ? a.norm() : (a - ref).norm() / n;
}

}  // namespace roamtok

#endif  // ROAMTOK_LINALG_HPP
