#include "rgov/numkit/linalg.hpp"

#include <complex>
#include <limits>

#include <Eigen/Eigenvalues>

#include "rgov/errors.hpp"

namespace rgov::numkit {

namespace {

double inf_norm(const Eigen::MatrixXd& m) {
  return m.cwiseAbs().rowwise().sum().maxCoeff();
}

}  // namespace

double spectral_abscissa(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    throw InvalidArgument("spectral_abscissa needs a non-empty square matrix");
  }
  Eigen::EigenSolver<Eigen::MatrixXd> solver(a, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    throw NumericalFailure("Hessenberg-QR eigenvalue iteration did not converge");
  }
  return solver.eigenvalues().real().maxCoeff();
}

LyapunovSolver::LyapunovSolver(const Eigen::MatrixXd& a) : a_(a) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    throw InvalidArgument("LyapunovSolver needs a non-empty square matrix");
  }
  Eigen::ComplexSchur<Eigen::MatrixXd> schur(a);
  if (schur.info() != Eigen::Success) {
    throw NumericalFailure("solve_lyapunov: Schur decomposition failed");
  }
  u_ = schur.matrixU();
  t_ = schur.matrixT();
  abscissa_ = t_.diagonal().real().maxCoeff();
}

SymMatrix LyapunovSolver::solve(const SymMatrix& rhs, double shift) const {
  using Complex = std::complex<double>;
  const Eigen::Index n = a_.rows();
  if (rhs.dim() != n) throw InvalidArgument("solve_lyapunov: dimension mismatch");
  if (!(abscissa_ + shift < 0.0)) {
    throw NotHurwitz("solve_lyapunov: spectral abscissa " +
                     std::to_string(abscissa_ + shift) + " >= 0");
  }

  // T Y + Y T^H = C with C = -U^H rhs U; T upper triangular, T^H lower.
  const Eigen::MatrixXcd c = -(u_.adjoint() * rhs.matrix().cast<Complex>() * u_);
  Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, n);
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    for (Eigen::Index j = n - 1; j >= 0; --j) {
      Complex acc = c(i, j);
      for (Eigen::Index k = i + 1; k < n; ++k) acc -= t_(i, k) * y(k, j);
      for (Eigen::Index k = j + 1; k < n; ++k) acc -= y(i, k) * std::conj(t_(j, k));
      const Complex denom = t_(i, i) + std::conj(t_(j, j)) + 2.0 * shift;
      if (std::abs(denom) == 0.0) {
        throw NumericalFailure("solve_lyapunov: singular Sylvester operator");
      }
      y(i, j) = acc / denom;
    }
  }

  SymMatrix result((u_ * y * u_.adjoint()).real());
  const Eigen::MatrixXd shifted = a_ + shift * Eigen::MatrixXd::Identity(n, n);
  const double residual = lyapunov_residual(shifted, result, rhs);
  if (!(residual < 1e-8)) {
    throw NumericalFailure("solve_lyapunov: relative residual " + std::to_string(residual));
  }
  return result;
}

SymMatrix solve_lyapunov(const Eigen::MatrixXd& a, const SymMatrix& rhs) {
  if (a.rows() != a.cols() || rhs.dim() != a.rows()) {
    throw InvalidArgument("solve_lyapunov: dimension mismatch");
  }
  // The Hessenberg-QR abscissa is the stability authority; the Schur
  // diagonal agrees with it to rounding.
  const double abscissa = spectral_abscissa(a);
  if (!(abscissa < 0.0)) {
    throw NotHurwitz("solve_lyapunov: spectral abscissa " + std::to_string(abscissa) + " >= 0");
  }
  return LyapunovSolver(a).solve(rhs);
}

double lyapunov_residual(const Eigen::MatrixXd& a, const SymMatrix& q,
                         const SymMatrix& rhs) {
  const Eigen::MatrixXd r =
      a * q.matrix() + q.matrix() * a.transpose() + rhs.matrix();
  const double scale = inf_norm(a) * inf_norm(q.matrix()) + inf_norm(rhs.matrix());
  if (scale == 0.0) return inf_norm(r);
  return inf_norm(r) / scale;
}

}  // namespace rgov::numkit
