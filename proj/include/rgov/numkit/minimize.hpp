#pragma once

#include <functional>

namespace rgov::numkit {

struct ScalarBracket {
  double lo;
  double hi;
  double tol;

  ScalarBracket(double lo_, double hi_, double tol_ = 1e-8);
};

struct ScalarMinimum {
  double x;
  double fx;
  int evaluations;
};

// Global-ish minimization of f over [lo, hi]: a coarse uniform pre-scan
// locates the best sample, then Brent's method refines inside the
// neighbouring grid cell. f may return +inf to mark infeasible points.
// Throws NoFeasiblePoint if every sample is infinite. The result always lies
// inside the bracket.
ScalarMinimum minimize_scalar(const std::function<double(double)>& f,
                              const ScalarBracket& bracket, int scan_points = 64);

}  // namespace rgov::numkit
