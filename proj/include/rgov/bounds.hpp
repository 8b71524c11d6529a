#pragma once

#include <string_view>

#include <Eigen/Dense>

#include "rgov/linearization.hpp"
#include "rgov/numkit/linalg.hpp"
#include "rgov/numkit/sym_matrix.hpp"

namespace rgov {

// Reordered closed loop  z~' = Abar z~ + Bbar wbar,  y = Cbar z~,  |wbar| <= 1,
// with outputs measured in the quadratic norm |y|_S.
struct RelaxedLinearSystem {
  Eigen::MatrixXd a_bar;
  Eigen::MatrixXd b_bar;
  Eigen::MatrixXd c_bar;
  double gamma = 1.0;
  double delta_w = 1.0;
  numkit::SymMatrix s;

  Eigen::Index state_dim() const { return a_bar.rows(); }
  Eigen::Index output_dim() const { return c_bar.rows(); }

  // -2 * spectral abscissa of Abar: the exclusive upper end of the alpha range.
  double alpha_bar() const;

  // Dimensions agree, Abar Hurwitz, S positive definite.
  void validate() const;
};

// Abar = T (A - BK) T^T, Bbar = col(0, gamma * delta_w * I), Cbar = [I, 0].
RelaxedLinearSystem build_relaxed_system(const BrunovskyRealization& real,
                                         const LinearFeedbackGains& gains, double gamma,
                                         double delta_w, const numkit::SymMatrix& s);

// Explicit (Abar, Bbar, Cbar) for plants that are already linear.
RelaxedLinearSystem make_relaxed_system(Eigen::MatrixXd a_bar, Eigen::MatrixXd b_bar,
                                        Eigen::MatrixXd c_bar, const numkit::SymMatrix& s);

struct Ellipsoid {
  numkit::SymMatrix shape;
  Eigen::VectorXd center;
};

// (q - p)^T P (q - p) <= 1, boundary inclusive.
bool ellipsoid_contains(const Ellipsoid& e, const Eigen::VectorXd& q);

enum class BoundMethod { kSdp, kLyap };
std::string_view to_string(BoundMethod method);

struct PeakBound {
  double delta = 0.0;
  double alpha_star = 0.0;
  BoundMethod method = BoundMethod::kLyap;
  numkit::SymMatrix certificate;  // P for SDP, Q_alpha for LYAP
  Eigen::VectorXd initial_state;
  int evaluations = 0;
};

// Whether E(P, 0) is invariant at this alpha:
//   [[Abar^T P + P Abar + alpha P, P Bbar], [Bbar^T P, -alpha I]] <= 0
// up to 1e-7 relative to the block norm.
bool invariant_ellipsoid_check(const RelaxedLinearSystem& sys, const numkit::SymMatrix& p,
                               double alpha);

// Bound at one alpha. The SDP value is +inf when the program is infeasible;
// `certificate` receives the optimal P when non-null.
double sdp_bound_at(const RelaxedLinearSystem& sys, const Eigen::VectorXd& z0, double alpha,
                    numkit::SymMatrix* certificate = nullptr);

PeakBound peak_bound_sdp(const RelaxedLinearSystem& sys, const Eigen::VectorXd& z0);

// Lyapunov route with the Schur factorization of Abar computed once. Each
// evaluation solves (Abar + alpha/2 I) Q + Q (Abar + alpha/2 I)^T + Bbar Bbar^T / alpha = 0
// and returns lambda_max(S^1/2 Cbar Q Cbar^T S^1/2) * max(z0^T Q^-1 z0, 1).
class LyapunovBound {
 public:
  explicit LyapunovBound(const RelaxedLinearSystem& sys);

  double at(const Eigen::VectorXd& z0, double alpha, numkit::SymMatrix* q_out = nullptr) const;
  PeakBound minimize(const Eigen::VectorXd& z0) const;

  const RelaxedLinearSystem& system() const { return sys_; }

 private:
  RelaxedLinearSystem sys_;
  numkit::LyapunovSolver solver_;
  numkit::SymMatrix bbt_;
  Eigen::MatrixXd s_half_c_;
};

PeakBound peak_bound_lyap(const RelaxedLinearSystem& sys, const Eigen::VectorXd& z0);

PeakBound peak_bound(const RelaxedLinearSystem& sys, const Eigen::VectorXd& z0,
                     BoundMethod method);

}  // namespace rgov
