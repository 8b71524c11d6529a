#include "rgov/numkit/lmi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rgov/errors.hpp"

namespace rgov::numkit {

Eigen::MatrixXd LmiBlock::evaluate(const Eigen::VectorXd& x) const {
  Eigen::MatrixXd m = constant;
  for (const auto& [index, coeff] : terms) m += x(index) * coeff;
  return m;
}

VarRef LmiProblem::add_scalar() {
  VarRef v{num_scalars_, 1, false};
  num_scalars_ += v.size();
  variables_.push_back(v);
  objective_.conservativeResize(num_scalars_);
  objective_.tail(v.size()).setZero();
  return v;
}

VarRef LmiProblem::add_symmetric(Eigen::Index dim) {
  if (dim < 1) throw InvalidArgument("symmetric variable needs dim >= 1");
  VarRef v{num_scalars_, dim, true};
  num_scalars_ += v.size();
  variables_.push_back(v);
  objective_.conservativeResize(num_scalars_);
  objective_.tail(v.size()).setZero();
  return v;
}

Eigen::MatrixXd LmiProblem::basis(const VarRef& var, Eigen::Index k) {
  if (!var.symmetric) return Eigen::MatrixXd::Ones(1, 1);
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(var.dim, var.dim);
  Eigen::Index idx = 0;
  for (Eigen::Index i = 0; i < var.dim; ++i) {
    for (Eigen::Index j = i; j < var.dim; ++j, ++idx) {
      if (idx == k) {
        e(i, j) = 1.0;
        e(j, i) = 1.0;
        return e;
      }
    }
  }
  throw InvalidArgument("basis index out of range");
}

LmiBlock& LmiProblem::add_block(std::string name, Eigen::Index size,
                                LmiSense sense) {
  if (size < 1) throw InvalidArgument("LMI block needs size >= 1");
  LmiBlock b;
  b.name = std::move(name);
  b.sense = sense;
  b.constant = Eigen::MatrixXd::Zero(size, size);
  blocks_.push_back(std::move(b));
  return blocks_.back();
}

void LmiProblem::add_term(LmiBlock& block, const VarRef& var,
                          const LinearMap& map) {
  const Eigen::MatrixXd zero_in = Eigen::MatrixXd::Zero(var.dim, var.dim);
  const Eigen::MatrixXd zero_out = map(zero_in);
  if (zero_out.rows() != block.size() || zero_out.cols() != block.size()) {
    throw InvalidArgument("term in block '" + block.name + "' has wrong size");
  }
  if (zero_out.cwiseAbs().maxCoeff() != 0.0) {
    throw InvalidArgument("term in block '" + block.name +
                          "' is not linear in its variable");
  }
  for (Eigen::Index k = 0; k < var.size(); ++k) {
    Eigen::MatrixXd coeff = map(basis(var, k));
    if (coeff.cwiseAbs().maxCoeff() == 0.0) continue;
    const Eigen::Index index = var.offset + k;
    auto it = std::find_if(block.terms.begin(), block.terms.end(),
                           [&](const auto& t) { return t.first == index; });
    if (it == block.terms.end()) {
      block.terms.emplace_back(index, std::move(coeff));
    } else {
      it->second += coeff;
    }
  }
}

void LmiProblem::set_objective(const VarRef& var, double weight) {
  if (var.symmetric) {
    throw InvalidArgument("objective weights are set on scalar variables");
  }
  objective_(var.offset) = weight;
}

void LmiProblem::validate() const {
  if (num_scalars_ == 0) throw InvalidArgument("LMI problem has no variables");
  if (blocks_.empty()) throw InvalidArgument("LMI problem has no blocks");
  auto check_sym = [](const Eigen::MatrixXd& m, const std::string& what) {
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
      throw InvalidArgument(what + " is not symmetric");
    }
  };
  for (const auto& b : blocks_) {
    const Eigen::Index n = b.size();
    if (b.constant.cols() != n) {
      throw InvalidArgument("block '" + b.name + "' is not square");
    }
    check_sym(b.constant, "constant of block '" + b.name + "'");
    for (const auto& [index, coeff] : b.terms) {
      if (index < 0 || index >= num_scalars_) {
        throw InvalidArgument("block '" + b.name + "' references unknown variable");
      }
      if (coeff.rows() != n || coeff.cols() != n) {
        throw InvalidArgument("coefficient in block '" + b.name + "' has wrong size");
      }
      check_sym(coeff, "coefficient in block '" + b.name + "'");
    }
  }
}

Eigen::MatrixXd LmiProblem::value(const VarRef& var,
                                  const Eigen::VectorXd& x) const {
  if (!var.symmetric) return Eigen::MatrixXd::Constant(1, 1, x(var.offset));
  Eigen::MatrixXd m(var.dim, var.dim);
  Eigen::Index idx = var.offset;
  for (Eigen::Index i = 0; i < var.dim; ++i) {
    for (Eigen::Index j = i; j < var.dim; ++j, ++idx) {
      m(i, j) = x(idx);
      m(j, i) = x(idx);
    }
  }
  return m;
}

Eigen::VectorXd LmiProblem::pack(const VarRef& var, const Eigen::MatrixXd& value,
                                 Eigen::VectorXd x) const {
  if (x.size() != num_scalars_) x = Eigen::VectorXd::Zero(num_scalars_);
  if (!var.symmetric) {
    x(var.offset) = value(0, 0);
    return x;
  }
  Eigen::Index idx = var.offset;
  for (Eigen::Index i = 0; i < var.dim; ++i) {
    for (Eigen::Index j = i; j < var.dim; ++j, ++idx) {
      x(idx) = 0.5 * (value(i, j) + value(j, i));
    }
  }
  return x;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Block in "F(y) >= 0" form with its coefficients packed side by side so the
// derivative computation is two matrix products per block.
struct PackedBlock {
  Eigen::Index size = 0;
  Eigen::MatrixXd constant;
  std::vector<Eigen::Index> index;
  Eigen::MatrixXd coeffs;  // size x (size * index.size())
};

PackedBlock pack_block(const LmiBlock& block, std::optional<Eigen::Index> slack) {
  const double sign = block.sense == LmiSense::kPsd ? 1.0 : -1.0;
  PackedBlock p;
  p.size = block.size();
  p.constant = sign * block.constant;
  const auto count = static_cast<Eigen::Index>(block.terms.size()) + (slack ? 1 : 0);
  p.coeffs.resize(p.size, p.size * count);
  Eigen::Index col = 0;
  for (const auto& [index, coeff] : block.terms) {
    p.index.push_back(index);
    p.coeffs.middleCols(col, p.size) = sign * coeff;
    col += p.size;
  }
  if (slack) {
    p.index.push_back(*slack);
    p.coeffs.middleCols(col, p.size).setIdentity();
  }
  return p;
}

class Barrier {
 public:
  Barrier(std::vector<PackedBlock> blocks, Eigen::VectorXd cost, double box)
      : blocks_(std::move(blocks)), cost_(std::move(cost)), box_(box) {
    constraint_count_ = 2.0 * static_cast<double>(cost_.size());
    for (const auto& b : blocks_) constraint_count_ += static_cast<double>(b.size);
  }

  Eigen::Index dim() const { return cost_.size(); }
  double constraint_count() const { return constraint_count_; }
  const Eigen::VectorXd& cost() const { return cost_; }

  Eigen::MatrixXd assemble(const PackedBlock& b, const Eigen::VectorXd& y) const {
    Eigen::MatrixXd m = b.constant;
    for (std::size_t i = 0; i < b.index.size(); ++i) {
      m += y(b.index[i]) * b.coeffs.middleCols(static_cast<Eigen::Index>(i) * b.size, b.size);
    }
    return m;
  }

  // Barrier part only (without the t * c^T y term), +inf when infeasible.
  double barrier(const Eigen::VectorXd& y) const {
    double f = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      const double lo = box_ + y(i);
      const double hi = box_ - y(i);
      if (!(lo > 0.0 && hi > 0.0)) return kInf;
      f -= std::log(lo) + std::log(hi);
    }
    for (const auto& b : blocks_) {
      Eigen::LLT<Eigen::MatrixXd> llt(assemble(b, y));
      if (llt.info() != Eigen::Success) return kInf;
      const Eigen::VectorXd d = llt.matrixLLT().diagonal();
      if (!(d.minCoeff() > 0.0)) return kInf;
      f -= 2.0 * d.array().log().sum();
    }
    return std::isfinite(f) ? f : kInf;
  }

  // Returns false if y is not strictly feasible.
  bool derivatives(double t, const Eigen::VectorXd& y, Eigen::VectorXd& grad,
                   Eigen::MatrixXd& hess) const {
    const Eigen::Index n = y.size();
    grad = t * cost_;
    hess = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double lo = box_ + y(i);
      const double hi = box_ - y(i);
      if (!(lo > 0.0 && hi > 0.0)) return false;
      grad(i) += 1.0 / hi - 1.0 / lo;
      hess(i, i) += 1.0 / (hi * hi) + 1.0 / (lo * lo);
    }
    for (const auto& b : blocks_) {
      Eigen::LLT<Eigen::MatrixXd> llt(assemble(b, y));
      if (llt.info() != Eigen::Success) return false;
      const Eigen::Index s = b.size;
      const auto p = static_cast<Eigen::Index>(b.index.size());
      const Eigen::MatrixXd linv =
          llt.matrixL().solve(Eigen::MatrixXd::Identity(s, s));
      // W_i = L^-1 F_i L^-T, assembled via Y = L^-1 [F_1 .. F_p].
      const Eigen::MatrixXd y_all = linv * b.coeffs;
      Eigen::MatrixXd z_all(s, s * p);
      for (Eigen::Index i = 0; i < p; ++i) {
        z_all.middleCols(i * s, s) = y_all.middleCols(i * s, s).transpose();
      }
      const Eigen::MatrixXd w_all = linv * z_all;
      Eigen::MatrixXd w(s * s, p);
      for (Eigen::Index i = 0; i < p; ++i) {
        const Eigen::MatrixXd wi = w_all.middleCols(i * s, s);
        w.col(i) = Eigen::Map<const Eigen::VectorXd>(wi.data(), s * s);
        grad(b.index[static_cast<std::size_t>(i)]) -= wi.trace();
      }
      const Eigen::MatrixXd h = w.transpose() * w;
      for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) {
          hess(b.index[static_cast<std::size_t>(i)],
               b.index[static_cast<std::size_t>(j)]) += h(i, j);
        }
      }
    }
    return true;
  }

 private:
  std::vector<PackedBlock> blocks_;
  Eigen::VectorXd cost_;
  double box_;
  double constraint_count_ = 0.0;
};

enum class CenterStatus { kCentered, kStopped, kStalled };

struct Centering {
  int steps = 0;
  CenterStatus status = CenterStatus::kCentered;
};

// Newton's method on the barrier at fixed t. `stop` is polled after each
// accepted step (Phase 1 uses it to exit as soon as the slack is negative).
template <typename Stop>
Centering center(const Barrier& barrier, double t, Eigen::VectorXd& y,
                 int budget, Stop stop) {
  Centering result;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
  double phi = barrier.barrier(y);
  while (result.steps < budget) {
    if (!barrier.derivatives(t, y, grad, hess)) {
      throw NumericalFailure("barrier iterate left the feasible region");
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
    Eigen::VectorXd step = -ldlt.solve(grad);
    if (ldlt.info() != Eigen::Success || !step.allFinite()) {
      const double reg = 1e-12 * std::max(1.0, hess.diagonal().maxCoeff());
      hess.diagonal().array() += reg;
      step = -hess.llt().solve(grad);
      if (!step.allFinite()) throw NumericalFailure("singular Newton system");
    }
    const double decrement = -grad.dot(step);
    if (decrement * 0.5 <= 1e-9) {
      result.status = CenterStatus::kCentered;
      return result;
    }
    // Compare increments rather than absolute values: t * c^T y dominates
    // the objective late in the schedule.
    const double slope = t * barrier.cost().dot(step);
    double tau = 1.0;
    double phi_new = barrier.barrier(y + tau * step);
    while (!(tau * slope + (phi_new - phi) <= -0.25 * tau * decrement)) {
      tau *= 0.5;
      if (tau < 1e-12) {
        result.status = CenterStatus::kStalled;
        return result;
      }
      phi_new = barrier.barrier(y + tau * step);
    }
    const Eigen::VectorXd move = tau * step;
    y += move;
    phi = phi_new;
    ++result.steps;
    if (move.lpNorm<Eigen::Infinity>() <= 1e-13 * (1.0 + y.lpNorm<Eigen::Infinity>())) {
      // Steps below rounding level: the iterate is as centered as it gets.
      result.status = CenterStatus::kStalled;
      return result;
    }
    if (stop(y)) {
      result.status = CenterStatus::kStopped;
      return result;
    }
  }
  throw NumericalFailure("Newton iteration budget exhausted");
}

double min_margin(const std::vector<PackedBlock>& blocks, const Barrier& barrier,
                  const Eigen::VectorXd& y) {
  double margin = kInf;
  for (const auto& b : blocks) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(barrier.assemble(b, y),
                                                      Eigen::EigenvaluesOnly);
    margin = std::min(margin, es.eigenvalues()(0));
  }
  return margin;
}

}  // namespace

std::vector<double> block_margins(const LmiProblem& problem,
                                  const Eigen::VectorXd& x) {
  std::vector<double> margins;
  for (const auto& b : problem.blocks()) {
    Eigen::MatrixXd m = b.evaluate(x);
    if (b.sense == LmiSense::kNsd) m = -m;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    margins.push_back(es.eigenvalues()(0));
  }
  return margins;
}

LmiSolution solve_lmi(const LmiProblem& problem, const LmiOptions& options,
                      const std::optional<Eigen::VectorXd>& start) {
  problem.validate();
  const Eigen::Index k = problem.num_scalars();
  LmiSolution solution;
  int budget = options.max_newton;

  std::vector<PackedBlock> blocks;
  for (const auto& b : problem.blocks()) blocks.push_back(pack_block(b, std::nullopt));
  Barrier phase2(blocks, problem.objective(), options.box);

  Eigen::VectorXd x = start.value_or(Eigen::VectorXd::Zero(k));
  if (x.size() != k) throw InvalidArgument("start point has wrong dimension");

  const bool start_ok = start.has_value() &&
                        std::isfinite(phase2.barrier(x)) &&
                        min_margin(blocks, phase2, x) > 0.0;
  if (!start_ok) {
    // Phase 1: minimize s subject to F_j(x) + s I >= 0.
    solution.used_phase1 = true;
    std::vector<PackedBlock> slacked;
    for (const auto& b : problem.blocks()) slacked.push_back(pack_block(b, k));
    Eigen::VectorXd cost = Eigen::VectorXd::Zero(k + 1);
    cost(k) = 1.0;
    Barrier phase1(slacked, cost, options.box);

    Eigen::VectorXd y(k + 1);
    y.head(k) = x.cwiseMax(-0.5 * options.box).cwiseMin(0.5 * options.box);
    y(k) = 0.0;
    const double violation = -min_margin(slacked, phase1, y);
    y(k) = std::max(0.0, violation) * 1.1 + 1.0;
    if (!(y(k) < options.box)) {
      throw NumericalFailure("Phase 1 start exceeds the variable box");
    }

    bool feasible = false;
    for (double t = 1.0;; t *= options.mu) {
      const auto c = center(phase1, t, y, budget, [&](const Eigen::VectorXd& v) {
        return v(k) < 0.0;
      });
      budget -= c.steps;
      solution.newton_steps += c.steps;
      if (y(k) < 0.0) {
        feasible = true;
        break;
      }
      const double gap = phase1.constraint_count() / t;
      if (y(k) - gap > 0.0) break;  // optimal slack is provably positive
      if (gap < 1e-13 || c.status == CenterStatus::kStalled) break;
    }
    if (!feasible) throw Infeasible("LMI constraints have no strictly feasible point");
    x = y.head(k);
  }

  // Phase 2 on a fixed t schedule so that reported objectives are comparable
  // across neighbouring problem instances.
  double t = 1.0;
  double last_objective = kInf;
  int stalls = 0;
  for (;; t *= options.mu) {
    const auto c = center(phase2, t, x, budget, [](const Eigen::VectorXd&) {
      return false;
    });
    budget -= c.steps;
    solution.newton_steps += c.steps;
    const double objective = phase2.cost().dot(x);
    const double gap = phase2.constraint_count() / t;
    if (gap <= options.rel_gap * std::abs(objective) + options.abs_gap) {
      solution.gap = gap;
      break;
    }
    if (c.status == CenterStatus::kStalled && t > 1e6) {
      // Centering hit rounding level. Raising t still moves the iterate
      // along the path, so only quit once that no longer pays off.
      if (++stalls > 3 || !(objective < last_objective - 1e-12 * std::abs(objective))) {
        solution.gap = gap;
        break;
      }
    }
    last_objective = objective;
  }

  solution.x = x;
  solution.objective = phase2.cost().dot(x);
  for (double m : block_margins(problem, x)) {
    if (m < -options.feas_tol) {
      throw NumericalFailure("returned point violates a constraint block by " +
                             std::to_string(-m));
    }
  }
  return solution;
}

}  // namespace rgov::numkit
