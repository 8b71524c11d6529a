#pragma once

#include <Eigen/Dense>

namespace rgov::numkit {

// Dense symmetric matrix. The stored entries are exactly symmetric: the
// constructor averages the input with its transpose.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(const Eigen::MatrixXd& m);

  static SymMatrix identity(Eigen::Index dim);
  static SymMatrix diagonal(const Eigen::VectorXd& d);

  Eigen::Index dim() const { return m_.rows(); }
  const Eigen::MatrixXd& matrix() const { return m_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

  // Largest absolute row sum; used to scale tolerances.
  double norm() const;

  // All eigenvalues above tau_pd = 1e-10 * norm().
  bool is_positive_definite() const;

  double lambda_min() const;
  double lambda_max() const;

  // Principal square root and inverse; both require positive definiteness.
  SymMatrix sqrt() const;
  SymMatrix inverse() const;

  // x^T M x
  double quad(const Eigen::VectorXd& x) const;

 private:
  Eigen::MatrixXd m_;
};

struct SymEig {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // orthonormal columns
};

SymEig sym_eig(const SymMatrix& m);

}  // namespace rgov::numkit
