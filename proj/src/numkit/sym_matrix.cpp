#include "rgov/numkit/sym_matrix.hpp"

#include <cmath>

#include "rgov/errors.hpp"

namespace rgov::numkit {

SymMatrix::SymMatrix(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw InvalidArgument("SymMatrix requires a non-empty square matrix");
  }
  m_ = 0.5 * (m + m.transpose());
}

SymMatrix SymMatrix::identity(Eigen::Index dim) {
  return SymMatrix(Eigen::MatrixXd::Identity(dim, dim));
}

SymMatrix SymMatrix::diagonal(const Eigen::VectorXd& d) {
  return SymMatrix(Eigen::MatrixXd(d.asDiagonal()));
}

double SymMatrix::norm() const {
  return m_.cwiseAbs().rowwise().sum().maxCoeff();
}

bool SymMatrix::is_positive_definite() const {
  const double tau = 1e-10 * norm();
  return sym_eig(*this).values(0) > tau;
}

double SymMatrix::lambda_min() const { return sym_eig(*this).values(0); }

double SymMatrix::lambda_max() const {
  const auto e = sym_eig(*this);
  return e.values(e.values.size() - 1);
}

SymMatrix SymMatrix::sqrt() const {
  const auto e = sym_eig(*this);
  if (e.values(0) <= 0.0) {
    throw InvalidArgument("matrix square root needs a positive definite matrix");
  }
  const Eigen::VectorXd r = e.values.cwiseSqrt();
  return SymMatrix(e.vectors * r.asDiagonal() * e.vectors.transpose());
}

SymMatrix SymMatrix::inverse() const {
  Eigen::LLT<Eigen::MatrixXd> llt(m_);
  if (llt.info() != Eigen::Success) {
    throw NumericalFailure("inverse of a matrix that is not positive definite");
  }
  return SymMatrix(llt.solve(Eigen::MatrixXd::Identity(dim(), dim())));
}

double SymMatrix::quad(const Eigen::VectorXd& x) const {
  return x.dot(m_ * x);
}

SymEig sym_eig(const SymMatrix& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m.matrix());
  if (solver.info() != Eigen::Success) {
    throw NumericalFailure("symmetric eigensolver did not converge");
  }
  return {solver.eigenvalues(), solver.eigenvectors()};
}

}  // namespace rgov::numkit
