#include "rgov/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>

#include "rgov/errors.hpp"
#include "rgov/numkit/lmi.hpp"
#include "rgov/numkit/minimize.hpp"

namespace rgov {

using numkit::SymMatrix;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

numkit::ScalarBracket alpha_bracket(const RelaxedLinearSystem& sys) {
  const double ab = sys.alpha_bar();
  const double eps = 1e-6 * ab;
  return numkit::ScalarBracket(eps, ab - eps, 1e-8);
}

}  // namespace

double RelaxedLinearSystem::alpha_bar() const {
  return -2.0 * numkit::spectral_abscissa(a_bar);
}

void RelaxedLinearSystem::validate() const {
  const auto n = a_bar.rows();
  if (a_bar.cols() != n || n == 0) throw InvalidArgument("Abar must be square");
  if (b_bar.rows() != n) throw InvalidArgument("Bbar row count must match Abar");
  if (c_bar.cols() != n) throw InvalidArgument("Cbar column count must match Abar");
  if (s.dim() != c_bar.rows()) throw InvalidArgument("S must be m x m");
  if (!s.is_positive_definite()) throw InvalidArgument("S must be positive definite");
  const double abscissa = numkit::spectral_abscissa(a_bar);
  if (!(abscissa < 0.0)) {
    throw NotHurwitz("Abar has spectral abscissa " + std::to_string(abscissa));
  }
}

RelaxedLinearSystem build_relaxed_system(const BrunovskyRealization& real,
                                         const LinearFeedbackGains& gains, double gamma,
                                         double delta_w, const SymMatrix& s) {
  if (!(gamma > 0.0) || !(delta_w > 0.0)) {
    throw InvalidArgument("gamma and delta_w must be positive");
  }
  const auto n = real.A.rows();
  const auto m = real.B.cols();
  RelaxedLinearSystem sys;
  sys.a_bar = real.T * gains.closed_loop(real) * real.T.transpose();
  sys.b_bar = Eigen::MatrixXd::Zero(n, m);
  sys.b_bar.bottomRows(m) = gamma * delta_w * Eigen::MatrixXd::Identity(m, m);
  sys.c_bar = Eigen::MatrixXd::Zero(m, n);
  sys.c_bar.leftCols(m) = Eigen::MatrixXd::Identity(m, m);
  sys.gamma = gamma;
  sys.delta_w = delta_w;
  sys.s = s;
  sys.validate();
  return sys;
}

RelaxedLinearSystem make_relaxed_system(Eigen::MatrixXd a_bar, Eigen::MatrixXd b_bar,
                                        Eigen::MatrixXd c_bar, const SymMatrix& s) {
  RelaxedLinearSystem sys;
  sys.a_bar = std::move(a_bar);
  sys.b_bar = std::move(b_bar);
  sys.c_bar = std::move(c_bar);
  sys.s = s;
  sys.validate();
  return sys;
}

bool ellipsoid_contains(const Ellipsoid& e, const Eigen::VectorXd& q) {
  if (q.size() != e.center.size() || q.size() != e.shape.dim()) {
    throw InvalidArgument("ellipsoid_contains: dimension mismatch");
  }
  return e.shape.quad(q - e.center) <= 1.0;
}

std::string_view to_string(BoundMethod method) {
  return method == BoundMethod::kSdp ? "sdp" : "lyap";
}

bool invariant_ellipsoid_check(const RelaxedLinearSystem& sys, const SymMatrix& p,
                               double alpha) {
  const auto n = sys.state_dim();
  const auto k = sys.b_bar.cols();
  const Eigen::MatrixXd& pm = p.matrix();
  Eigen::MatrixXd block(n + k, n + k);
  block.topLeftCorner(n, n) = sys.a_bar.transpose() * pm + pm * sys.a_bar + alpha * pm;
  block.topRightCorner(n, k) = pm * sys.b_bar;
  block.bottomLeftCorner(k, n) = sys.b_bar.transpose() * pm;
  block.bottomRightCorner(k, k) = -alpha * Eigen::MatrixXd::Identity(k, k);
  const SymMatrix sym(block);
  return sym.lambda_max() <= 1e-7 * std::max(1.0, sym.norm());
}

namespace {

// Inner SDP of the bound at a fixed alpha, variables scaled by a strictly
// feasible start built from the shifted Lyapunov equation.
class SdpAtAlpha {
 public:
  explicit SdpAtAlpha(const RelaxedLinearSystem& sys)
      : sys_(sys),
        solver_(sys.a_bar),
        bbt_(sys.b_bar * sys.b_bar.transpose()),
        s_half_c_(sys.s.sqrt().matrix() * sys.c_bar) {}

  double operator()(const Eigen::VectorXd& z0, double alpha, SymMatrix* cert) const {
    const auto n = sys_.state_dim();
    const auto m = sys_.output_dim();
    const auto k = sys_.b_bar.cols();
    const bool has_z0 = z0.squaredNorm() > 0.0;

    // Start: P = Q^-1 / kappa where Q solves the shifted Lyapunov equation
    // with a small identity added, which leaves the invariance block strictly
    // negative definite.
    SymMatrix p_start;
    try {
      const Eigen::MatrixXd rhs = bbt_.matrix() / alpha;
      const double pad = 1e-3 * std::max(rhs.cwiseAbs().maxCoeff(), 1e-12);
      const SymMatrix q = solver_.solve(
          SymMatrix(rhs + pad * Eigen::MatrixXd::Identity(n, n)), 0.5 * alpha);
      Eigen::LLT<Eigen::MatrixXd> llt(q.matrix());
      if (llt.info() != Eigen::Success) return kInf;
      const Eigen::MatrixXd q_inv = llt.solve(Eigen::MatrixXd::Identity(n, n));
      double kappa = 1.0;
      if (has_z0) kappa = std::max(1.0, 1.05 * z0.dot(q_inv * z0));
      p_start = SymMatrix(q_inv / kappa);
    } catch (const NotHurwitz&) {
      return kInf;
    }
    const Eigen::MatrixXd p_inv = p_start.inverse().matrix();
    const double lam = SymMatrix(s_half_c_ * p_inv * s_half_c_.transpose()).lambda_max();
    const double delta_start = 1.1 * lam + 1e-12;

    // Variables are P = p_scale * P', delta = d_scale * delta'.
    const double p_scale = p_start.norm();
    const double d_scale = delta_start;

    numkit::LmiProblem prob;
    const auto pv = prob.add_symmetric(n);
    const auto dv = prob.add_scalar();

    auto& inv = prob.add_block("invariance", n + k, numkit::LmiSense::kNsd);
    inv.constant.bottomRightCorner(k, k) = -alpha * Eigen::MatrixXd::Identity(k, k);
    prob.add_term(inv, pv, [&](const Eigen::MatrixXd& pp) {
      const Eigen::MatrixXd pm = p_scale * pp;
      Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n + k, n + k);
      b.topLeftCorner(n, n) = sys_.a_bar.transpose() * pm + pm * sys_.a_bar + alpha * pm;
      b.topRightCorner(n, k) = pm * sys_.b_bar;
      b.bottomLeftCorner(k, n) = sys_.b_bar.transpose() * pm;
      return b;
    });

    auto& out = prob.add_block("output", n + m, numkit::LmiSense::kPsd);
    out.constant.topRightCorner(n, m) = s_half_c_.transpose();
    out.constant.bottomLeftCorner(m, n) = s_half_c_;
    prob.add_term(out, pv, [&](const Eigen::MatrixXd& pp) {
      Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n + m, n + m);
      b.topLeftCorner(n, n) = p_scale * pp;
      return b;
    });
    prob.add_term(out, dv, [&](const Eigen::MatrixXd& d) {
      Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n + m, n + m);
      b.bottomRightCorner(m, m) = d_scale * d(0, 0) * Eigen::MatrixXd::Identity(m, m);
      return b;
    });

    if (has_z0) {
      auto& init = prob.add_block("initial_state", 1, numkit::LmiSense::kPsd);
      init.constant(0, 0) = 1.0;
      prob.add_term(init, pv, [&](const Eigen::MatrixXd& pp) {
        return Eigen::MatrixXd::Constant(1, 1, -p_scale * z0.dot(pp * z0));
      });
    }
    prob.set_objective(dv, 1.0);

    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(prob.num_scalars());
    x0 = prob.pack(pv, p_start.matrix() / p_scale, x0);
    x0(dv.offset) = delta_start / d_scale;

    numkit::LmiSolution sol;
    try {
      sol = numkit::solve_lmi(prob, {}, x0);
    } catch (const Infeasible&) {
      return kInf;
    }
    double delta = d_scale * sol.objective;
    SymMatrix best = SymMatrix(p_scale * prob.value(pv, sol.x));

    // The unpadded Lyapunov solution sits on the boundary of the feasible
    // set. On degenerate instances the barrier iterate stalls slightly above
    // it, so keep whichever certificate is lower.
    if (const auto lyap = lyapunov_candidate(z0, alpha); lyap && lyap->first < delta) {
      delta = lyap->first;
      best = lyap->second;
    }
    if (cert) *cert = best;
    return delta;
  }

 private:
  // P = Q^-1 / kappa from the exact shifted Lyapunov equation, with its bound.
  std::optional<std::pair<double, SymMatrix>> lyapunov_candidate(const Eigen::VectorXd& z0,
                                                                 double alpha) const {
    SymMatrix q;
    try {
      q = solver_.solve(SymMatrix(bbt_.matrix() / alpha), 0.5 * alpha);
    } catch (const NotHurwitz&) {
      return std::nullopt;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(q.matrix());
    if (llt.info() != Eigen::Success) return std::nullopt;
    const double kappa = std::max(1.0, z0.dot(llt.solve(z0)));
    const SymMatrix p(llt.solve(Eigen::MatrixXd::Identity(q.dim(), q.dim())) / kappa);
    if (!invariant_ellipsoid_check(sys_, p, alpha)) return std::nullopt;
    const double lam = SymMatrix(s_half_c_ * q.matrix() * s_half_c_.transpose()).lambda_max();
    return std::make_pair(lam * kappa, p);
  }

  const RelaxedLinearSystem& sys_;
  numkit::LyapunovSolver solver_;
  SymMatrix bbt_;
  Eigen::MatrixXd s_half_c_;
};

}  // namespace

double sdp_bound_at(const RelaxedLinearSystem& sys, const Eigen::VectorXd& z0, double alpha,
                    SymMatrix* certificate) {
  if (z0.size() != sys.state_dim()) throw InvalidArgument("z0 dimension mismatch");
  if (!(alpha > 0.0)) return kInf;
  return SdpAtAlpha(sys)(z0, alpha, certificate);
}

PeakBound peak_bound_sdp(const RelaxedLinearSystem& sys, const Eigen::VectorXd& z0) {
  if (z0.size() != sys.state_dim()) throw InvalidArgument("z0 dimension mismatch");
  const SdpAtAlpha inner(sys);
  std::optional<NumericalFailure> first_failure;
  auto f = [&](double alpha) {
    try {
      return inner(z0, alpha, nullptr);
    } catch (const NumericalFailure& e) {
      if (!first_failure) first_failure = e;
      return kInf;
    }
  };
  numkit::ScalarMinimum best;
  try {
    best = numkit::minimize_scalar(f, alpha_bracket(sys));
  } catch (const NoFeasiblePoint&) {
    if (first_failure) throw *first_failure;
    throw;
  }
  PeakBound out;
  out.method = BoundMethod::kSdp;
  out.alpha_star = best.x;
  out.initial_state = z0;
  out.evaluations = best.evaluations;
  out.delta = inner(z0, best.x, &out.certificate);
  if (!std::isfinite(out.delta)) {
    throw NumericalFailure("SDP bound not reproducible at alpha*");
  }
  return out;
}

LyapunovBound::LyapunovBound(const RelaxedLinearSystem& sys)
    : sys_(sys),
      solver_(sys.a_bar),
      bbt_(sys.b_bar * sys.b_bar.transpose()),
      s_half_c_(sys.s.sqrt().matrix() * sys.c_bar) {
  sys_.validate();
}

double LyapunovBound::at(const Eigen::VectorXd& z0, double alpha, SymMatrix* q_out) const {
  if (z0.size() != sys_.state_dim()) throw InvalidArgument("z0 dimension mismatch");
  if (!(alpha > 0.0)) return kInf;
  SymMatrix q;
  try {
    q = solver_.solve(SymMatrix(bbt_.matrix() / alpha), 0.5 * alpha);
  } catch (const NotHurwitz&) {
    return kInf;
  }
  const double lam = SymMatrix(s_half_c_ * q.matrix() * s_half_c_.transpose()).lambda_max();
  double scale = 1.0;
  if (z0.squaredNorm() > 0.0) {
    Eigen::LLT<Eigen::MatrixXd> llt(q.matrix());
    if (llt.info() != Eigen::Success) return kInf;
    scale = std::max(1.0, z0.dot(llt.solve(z0)));
  }
  if (q_out) *q_out = q;
  return lam * scale;
}

PeakBound LyapunovBound::minimize(const Eigen::VectorXd& z0) const {
  auto f = [&](double alpha) {
    try {
      return at(z0, alpha);
    } catch (const NumericalFailure&) {
      return kInf;
    }
  };
  numkit::ScalarMinimum best;
  try {
    best = numkit::minimize_scalar(f, alpha_bracket(sys_));
  } catch (const NoFeasiblePoint& e) {
    // Unreachable for a Hurwitz Abar: report it as a numerical fault.
    throw NumericalFailure(std::string("Lyapunov bound infinite over the bracket: ") + e.what());
  }
  PeakBound out;
  out.method = BoundMethod::kLyap;
  out.alpha_star = best.x;
  out.initial_state = z0;
  out.evaluations = best.evaluations;
  out.delta = at(z0, best.x, &out.certificate);
  return out;
}

PeakBound peak_bound_lyap(const RelaxedLinearSystem& sys, const Eigen::VectorXd& z0) {
  return LyapunovBound(sys).minimize(z0);
}

PeakBound peak_bound(const RelaxedLinearSystem& sys, const Eigen::VectorXd& z0,
                     BoundMethod method) {
  return method == BoundMethod::kSdp ? peak_bound_sdp(sys, z0) : peak_bound_lyap(sys, z0);
}

}  // namespace rgov
