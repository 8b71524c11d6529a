#pragma once

#include <Eigen/Dense>

#include "rgov/numkit/sym_matrix.hpp"

namespace rgov::numkit {

// Maximum real part over the spectrum of a general square matrix.
double spectral_abscissa(const Eigen::MatrixXd& a);

inline bool is_hurwitz(const Eigen::MatrixXd& a) {
  return spectral_abscissa(a) < 0.0;
}

// Solves (a + s I) Q + Q (a + s I)^T + rhs = 0 for a fixed a and any number
// of shifts s, reusing a single complex Schur factorization a = U T U^H.
class LyapunovSolver {
 public:
  explicit LyapunovSolver(const Eigen::MatrixXd& a);

  // Throws NotHurwitz when a + shift*I is not stable and NumericalFailure
  // when the relative residual reaches 1e-8.
  SymMatrix solve(const SymMatrix& rhs, double shift = 0.0) const;

  double abscissa() const { return abscissa_; }

 private:
  Eigen::MatrixXd a_;
  Eigen::MatrixXcd u_;
  Eigen::MatrixXcd t_;
  double abscissa_ = 0.0;
};

// Solves a*Q + Q*a^T + rhs = 0 for symmetric Q.
//
// Bartels-Stewart on the complex Schur form a = U T U^H: the transformed
// equation T Y + Y T^H = -U^H rhs U is triangular and solved by back
// substitution, then Q = U Y U^H. Throws NotHurwitz when a is not stable and
// NumericalFailure when the residual check fails.
SymMatrix solve_lyapunov(const Eigen::MatrixXd& a, const SymMatrix& rhs);

// Relative residual |a Q + Q a^T + rhs| / (|a||Q| + |rhs|), infinity norms.
double lyapunov_residual(const Eigen::MatrixXd& a, const SymMatrix& q,
                         const SymMatrix& rhs);

}  // namespace rgov::numkit
