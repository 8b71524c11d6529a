#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "oracles.hpp"
#include "rgov/errors.hpp"
#include "rgov/numkit/linalg.hpp"
#include "rgov/numkit/lmi.hpp"
#include "rgov/numkit/minimize.hpp"
#include "rgov/numkit/sym_matrix.hpp"

using namespace rgov;
using namespace rgov::numkit;

TEST_CASE("SymMatrix symmetrizes its input") {
  Eigen::MatrixXd m(2, 2);
  m << 1, 2, 4, 3;
  const SymMatrix s(m);
  CHECK(s(0, 1) == s(1, 0));
  CHECK(s(0, 1) == doctest::Approx(3.0));
  CHECK_THROWS_AS(SymMatrix(Eigen::MatrixXd(2, 3)), InvalidArgument);
}

TEST_CASE("sym_eig on identity and diagonal matrices") {
  auto e = sym_eig(SymMatrix::identity(3));
  for (int i = 0; i < 3; ++i) CHECK(e.values(i) == doctest::Approx(1.0));

  e = sym_eig(SymMatrix::diagonal(Eigen::Vector2d(2.0, -1.0)));
  CHECK(e.values(0) == doctest::Approx(-1.0));
  CHECK(e.values(1) == doctest::Approx(2.0));
  CHECK(std::abs(e.vectors(1, 0)) == doctest::Approx(1.0));
  CHECK(std::abs(e.vectors(0, 1)) == doctest::Approx(1.0));
}

TEST_CASE("sym_eig reconstructs random symmetric matrices") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const SymMatrix m(oracle::random_matrix(rng, 6, 6));
    const auto e = sym_eig(m);
    const Eigen::MatrixXd back = e.vectors * e.values.asDiagonal() * e.vectors.transpose();
    CHECK((back - m.matrix()).cwiseAbs().maxCoeff() < 1e-9 * std::max(1.0, m.norm()));
    const Eigen::MatrixXd gram = e.vectors.transpose() * e.vectors;
    CHECK((gram - Eigen::MatrixXd::Identity(6, 6)).norm() < 1e-9);
    for (int i = 0; i + 1 < 6; ++i) CHECK(e.values(i) <= e.values(i + 1));
  }
}

TEST_CASE("positive definiteness and matrix square root") {
  CHECK(SymMatrix::diagonal(Eigen::Vector2d(1, 4)).is_positive_definite());
  CHECK_FALSE(SymMatrix::diagonal(Eigen::Vector2d(1, 0)).is_positive_definite());
  const auto r = SymMatrix::diagonal(Eigen::Vector2d(1, 4)).sqrt();
  CHECK(r(1, 1) == doctest::Approx(2.0));
  std::mt19937_64 rng(3);
  const SymMatrix p(oracle::random_psd(rng, 4) + Eigen::MatrixXd::Identity(4, 4));
  const auto root = p.sqrt();
  CHECK((root.matrix() * root.matrix() - p.matrix()).norm() < 1e-10 * p.norm());
}

TEST_CASE("spectral abscissa") {
  CHECK(spectral_abscissa(Eigen::Vector3d(-1, -3, -5).asDiagonal().toDenseMatrix()) ==
        doctest::Approx(-1.0));
  const Eigen::MatrixXd comp = oracle::companion({-1, -1, -3, -3, -5, -5});
  CHECK(spectral_abscissa(comp) == doctest::Approx(-1.0).epsilon(1e-6));
  Eigen::Matrix2d rot;
  rot << 0, 1, -1, 0;
  CHECK(std::abs(spectral_abscissa(rot)) < 1e-12);
  CHECK_FALSE(is_hurwitz(rot));
}

TEST_CASE("solve_lyapunov closed-form cases") {
  Eigen::MatrixXd a(1, 1);
  a << -1.0;
  auto q = solve_lyapunov(a, SymMatrix::identity(1));
  CHECK(q(0, 0) == doctest::Approx(0.5));

  q = solve_lyapunov(Eigen::Vector2d(-1, -2).asDiagonal().toDenseMatrix(),
                     SymMatrix::identity(2));
  CHECK(q(0, 0) == doctest::Approx(0.5));
  CHECK(q(1, 1) == doctest::Approx(0.25));
  CHECK(std::abs(q(0, 1)) < 1e-14);
}

TEST_CASE("solve_lyapunov rejects unstable matrices") {
  Eigen::MatrixXd a(2, 2);
  a << 0.1, 0, 0, -1;
  CHECK_THROWS_AS(solve_lyapunov(a, SymMatrix::identity(2)), NotHurwitz);
}

TEST_CASE("solve_lyapunov agrees with the Kronecker oracle") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index n = 1 + trial % 8;
    const Eigen::MatrixXd a = oracle::random_hurwitz(rng, n);
    const Eigen::MatrixXd rhs = oracle::random_psd(rng, n);
    const auto q = solve_lyapunov(a, SymMatrix(rhs));
    const Eigen::MatrixXd ref = oracle::lyapunov_kronecker(a, rhs);
    CHECK((q.matrix() - ref).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(lyapunov_residual(a, q, SymMatrix(rhs)) < 1e-8);
    CHECK(q.lambda_min() > -1e-9 * q.norm());
  }
}

TEST_CASE("LyapunovSolver handles shifted operators") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::Index n = 2 + trial % 5;
    const Eigen::MatrixXd a = oracle::random_hurwitz(rng, n, 1.0);
    const Eigen::MatrixXd rhs = oracle::random_psd(rng, n);
    const LyapunovSolver solver(a);
    for (double shift : {0.0, 0.3, 0.9}) {
      const Eigen::MatrixXd as = a + shift * Eigen::MatrixXd::Identity(n, n);
      const auto q = solver.solve(SymMatrix(rhs), shift);
      CHECK((q.matrix() - oracle::lyapunov_kronecker(as, rhs)).cwiseAbs().maxCoeff() < 1e-8);
    }
    CHECK_THROWS_AS(solver.solve(SymMatrix(rhs), 5.0 - solver.abscissa()), NotHurwitz);
  }
}

namespace {

// minimize delta subject to the scalar instance of the invariant-ellipsoid
// SDP: a = -1, b, c = 1 at a fixed alpha.
LmiProblem scalar_ellipsoid_sdp(double b, double alpha) {
  LmiProblem prob;
  const auto p = prob.add_symmetric(1);
  const auto delta = prob.add_scalar();
  auto& inv = prob.add_block("invariance", 2, LmiSense::kNsd);
  inv.constant(1, 1) = -alpha;
  prob.add_term(inv, p, [&](const Eigen::MatrixXd& pm) {
    Eigen::MatrixXd m(2, 2);
    m << (-2.0 + alpha) * pm(0, 0), pm(0, 0) * b, pm(0, 0) * b, 0.0;
    return m;
  });
  auto& out = prob.add_block("output", 2, LmiSense::kPsd);
  out.constant(0, 1) = out.constant(1, 0) = 1.0;
  prob.add_term(out, p, [](const Eigen::MatrixXd& pm) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2, 2);
    m(0, 0) = pm(0, 0);
    return m;
  });
  prob.add_term(out, delta, [](const Eigen::MatrixXd& d) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2, 2);
    m(1, 1) = d(0, 0);
    return m;
  });
  auto& pd = prob.add_block("p_positive", 1, LmiSense::kPsd);
  prob.add_term(pd, p, [](const Eigen::MatrixXd& pm) { return pm; });
  prob.set_objective(delta, 1.0);
  return prob;
}

}  // namespace

TEST_CASE("solve_lmi on a diagonal scalar LMI") {
  LmiProblem prob;
  const auto delta = prob.add_scalar();
  auto& b = prob.add_block("diag", 2, LmiSense::kPsd);
  b.constant = Eigen::Vector2d(-2.0, -3.0).asDiagonal();
  prob.add_term(b, delta, [](const Eigen::MatrixXd& d) {
    return Eigen::MatrixXd(d(0, 0) * Eigen::MatrixXd::Identity(2, 2));
  });
  prob.set_objective(delta, 1.0);
  const auto sol = solve_lmi(prob);
  CHECK(sol.objective == doctest::Approx(3.0).epsilon(1e-6));
  CHECK(sol.used_phase1);
}

TEST_CASE("solve_lmi matches the analytic scalar ellipsoid optimum") {
  for (double b : {0.5, 1.0, 2.0}) {
    for (double alpha : {0.3, 1.0, 1.7}) {
      const auto prob = scalar_ellipsoid_sdp(b, alpha);
      const auto sol = solve_lmi(prob);
      const double expected = b * b / (alpha * (2.0 - alpha));
      CHECK(sol.objective == doctest::Approx(expected).epsilon(1e-6));
      // Every block rechecked by eigenvalues.
      for (double m : block_margins(prob, sol.x)) CHECK(m >= -1e-7);
    }
  }
}

TEST_CASE("solve_lmi accepts a strictly feasible start and skips phase 1") {
  const auto prob = scalar_ellipsoid_sdp(1.0, 1.0);
  Eigen::VectorXd x0(2);
  x0 << 0.5, 4.0;
  const auto sol = solve_lmi(prob, {}, x0);
  CHECK_FALSE(sol.used_phase1);
  CHECK(sol.objective == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("solve_lmi reports infeasibility") {
  LmiProblem prob;
  const auto x = prob.add_scalar();
  auto& lo = prob.add_block("x>=1", 1, LmiSense::kPsd);
  lo.constant(0, 0) = -1.0;
  prob.add_term(lo, x, [](const Eigen::MatrixXd& v) { return v; });
  auto& hi = prob.add_block("x<=-1", 1, LmiSense::kNsd);
  hi.constant(0, 0) = 1.0;
  prob.add_term(hi, x, [](const Eigen::MatrixXd& v) { return v; });
  prob.set_objective(x, 1.0);
  CHECK_THROWS_AS(solve_lmi(prob), Infeasible);
}

TEST_CASE("LMI blocks must be affine and symmetric") {
  LmiProblem prob;
  const auto x = prob.add_scalar();
  auto& b = prob.add_block("bad", 1, LmiSense::kPsd);
  CHECK_THROWS_AS(prob.add_term(b, x, [](const Eigen::MatrixXd& v) {
    return Eigen::MatrixXd(v.array() + 1.0);
  }), InvalidArgument);
  auto& c = prob.add_block("asym", 2, LmiSense::kPsd);
  prob.add_term(c, x, [](const Eigen::MatrixXd& v) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2, 2);
    m(0, 1) = v(0, 0);
    return m;
  });
  CHECK_THROWS_AS(prob.validate(), InvalidArgument);
}

TEST_CASE("minimize_scalar on smooth and boundary-limited functions") {
  auto r = minimize_scalar([](double a) { return (a - 1.0) * (a - 1.0); },
                           ScalarBracket(0.0, 2.0));
  CHECK(r.x == doctest::Approx(1.0).epsilon(1e-6));

  r = minimize_scalar([](double a) { return 1.0 / (a * (2.0 - a)); },
                      ScalarBracket(1e-6, 2.0 - 1e-6));
  CHECK(r.x == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(r.fx == doctest::Approx(1.0).epsilon(1e-9));

  const double inf = std::numeric_limits<double>::infinity();
  r = minimize_scalar([&](double a) { return a > 1.5 ? inf : 1.0 / a; },
                      ScalarBracket(1e-6, 2.0));
  CHECK(r.x <= 1.5);
  CHECK(r.x > 1.5 - 1e-6);

  CHECK_THROWS_AS(minimize_scalar([&](double) { return inf; }, ScalarBracket(0, 1)),
                  NoFeasiblePoint);
}

TEST_CASE("minimize_scalar stays in its bracket and beats the grid") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    const double c1 = u(rng), c2 = u(rng), c3 = u(rng);
    auto f = [&](double x) { return std::sin(c1 * x) + c2 * x * x + c3 * x; };
    const double lo = u(rng);
    const double hi = lo + 0.5 + std::abs(u(rng));
    const auto r = minimize_scalar(f, ScalarBracket(lo, hi));
    CHECK(r.x >= lo);
    CHECK(r.x <= hi);
    double grid_min = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 64 * 16; ++i) grid_min = std::min(grid_min, f(lo + (hi - lo) * i / (64 * 16 - 1)));
    CHECK(r.fx <= grid_min + std::max(1e-6, 1e-4 * std::abs(r.fx)));
  }
}
