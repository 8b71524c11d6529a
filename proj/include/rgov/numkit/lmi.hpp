#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace rgov::numkit {

enum class LmiSense {
  kPsd,  // block >= 0
  kNsd,  // block <= 0
};

// Handle to a decision variable. Symmetric matrix variables of dimension d
// occupy d(d+1)/2 consecutive scalar coordinates (upper triangle, row major).
struct VarRef {
  Eigen::Index offset = 0;
  Eigen::Index dim = 1;
  bool symmetric = false;

  Eigen::Index size() const { return symmetric ? dim * (dim + 1) / 2 : 1; }
};

// One affine matrix constraint  F0 + sum_i x_i F_i  (sense) 0.
// Only the nonzero coefficient matrices are stored.
struct LmiBlock {
  std::string name;
  LmiSense sense = LmiSense::kPsd;
  Eigen::MatrixXd constant;
  std::vector<std::pair<Eigen::Index, Eigen::MatrixXd>> terms;

  Eigen::Index size() const { return constant.rows(); }
  Eigen::MatrixXd evaluate(const Eigen::VectorXd& x) const;
};

class LmiProblem {
 public:
  using LinearMap = std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>;

  VarRef add_scalar();
  VarRef add_symmetric(Eigen::Index dim);

  Eigen::Index num_scalars() const { return num_scalars_; }
  const std::vector<VarRef>& variables() const { return variables_; }

  // Matrix value of basis coordinate k (0 <= k < var.size()) of a variable.
  static Eigen::MatrixXd basis(const VarRef& var, Eigen::Index k);

  LmiBlock& add_block(std::string name, Eigen::Index size, LmiSense sense);

  // Appends the terms contributed by `var` through the linear map `map`,
  // evaluated on every basis element. Throws InvalidArgument when the map
  // is not linear on zero (map(0) != 0) or produces a wrongly sized result.
  void add_term(LmiBlock& block, const VarRef& var, const LinearMap& map);

  // Objective coefficient on a scalar variable (minimization).
  void set_objective(const VarRef& var, double weight);

  const std::vector<LmiBlock>& blocks() const { return blocks_; }
  const Eigen::VectorXd& objective() const { return objective_; }

  // Structural validation: square, symmetric, consistently sized blocks with
  // in-range coefficient indices. Throws InvalidArgument.
  void validate() const;

  Eigen::MatrixXd value(const VarRef& var, const Eigen::VectorXd& x) const;
  Eigen::VectorXd pack(const VarRef& var, const Eigen::MatrixXd& value,
                       Eigen::VectorXd x) const;

 private:
  Eigen::Index num_scalars_ = 0;
  std::vector<VarRef> variables_;
  std::vector<LmiBlock> blocks_;
  Eigen::VectorXd objective_;
};

struct LmiOptions {
  double rel_gap = 1e-8;
  double abs_gap = 1e-12;
  double feas_tol = 1e-7;
  double box = 1e6;  // |x_i| < box keeps the barrier problem bounded
  double mu = 20.0;
  int max_newton = 2000;
};

struct LmiSolution {
  double objective = 0.0;
  Eigen::VectorXd x;
  double gap = 0.0;
  int newton_steps = 0;
  bool used_phase1 = false;
};

// Log-det barrier interior point method. When `start` is given and strictly
// feasible Phase 1 is skipped; otherwise Phase 1 minimizes a common slack.
// The returned point is rechecked against every block (eigenvalues within
// feas_tol). Throws Infeasible or NumericalFailure.
LmiSolution solve_lmi(const LmiProblem& problem, const LmiOptions& options = {},
                      const std::optional<Eigen::VectorXd>& start = std::nullopt);

// Smallest eigenvalue of every block after sign normalization (>= 0 means
// satisfied). Used for post-hoc validation.
std::vector<double> block_margins(const LmiProblem& problem,
                                  const Eigen::VectorXd& x);

}  // namespace rgov::numkit
