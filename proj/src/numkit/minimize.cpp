#include "rgov/numkit/minimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "rgov/errors.hpp"

namespace rgov::numkit {

ScalarBracket::ScalarBracket(double lo_, double hi_, double tol_)
    : lo(lo_), hi(hi_), tol(tol_) {
  if (!(lo < hi)) throw InvalidArgument("ScalarBracket requires lo < hi");
  if (!(tol > 0.0)) throw InvalidArgument("ScalarBracket requires tol > 0");
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double safe_eval(const std::function<double(double)>& f, double x) {
  const double v = f(x);
  return std::isnan(v) ? kInf : v;
}

// Brent's method on [a, b] started from the known good point x.
ScalarMinimum brent(const std::function<double(double)>& f, double a, double b,
                    double x, double fx, double tol, int& evals) {
  constexpr double kGolden = 0.3819660112501051;
  double w = x, v = x, fw = fx, fv = fx;
  double d = 0.0, e = 0.0;
  for (int iter = 0; iter < 200; ++iter) {
    const double m = 0.5 * (a + b);
    const double tol1 = tol * std::abs(x) + 1e-12;
    const double tol2 = 2.0 * tol1;
    if (std::abs(x - m) <= tol2 - 0.5 * (b - a)) break;
    bool golden = true;
    if (std::abs(e) > tol1 && std::isfinite(fv) && std::isfinite(fw)) {
      double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::abs(q);
      const double e_prev = e;
      if (std::abs(p) < std::abs(0.5 * q * e_prev) && p > q * (a - x) &&
          p < q * (b - x)) {
        e = d;
        d = p / q;
        const double u = x + d;
        if (u - a < tol2 || b - u < tol2) d = (x < m) ? tol1 : -tol1;
        golden = false;
      }
    }
    if (golden) {
      e = (x < m) ? b - x : a - x;
      d = kGolden * e;
    }
    const double u = std::abs(d) >= tol1 ? x + d : x + (d > 0 ? tol1 : -tol1);
    const double fu = safe_eval(f, u);
    ++evals;
    if (fu <= fx) {
      if (u < x) b = x; else a = x;
      v = w; fv = fw;
      w = x; fw = fx;
      x = u; fx = fu;
    } else {
      if (u < x) a = u; else b = u;
      if (fu <= fw || w == x) {
        v = w; fv = fw;
        w = u; fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u; fv = fu;
      }
    }
  }
  return {x, fx, evals};
}

}  // namespace

ScalarMinimum minimize_scalar(const std::function<double(double)>& f,
                              const ScalarBracket& bracket, int scan_points) {
  scan_points = std::max(scan_points, 4);
  // Three quarters of the samples are uniform; the rest are log-spaced
  // towards the lower end, where bound functions tend to have narrow valleys.
  const int log_points = scan_points / 4;
  const int uniform_points = scan_points - log_points;
  const double width = bracket.hi - bracket.lo;
  std::vector<double> xs;
  for (int i = 0; i < uniform_points; ++i) {
    xs.push_back(bracket.lo + width * i / (uniform_points - 1));
  }
  const double first_cell = width / (uniform_points - 1);
  for (int i = 0; i < log_points; ++i) {
    const double s = static_cast<double>(i) / log_points;
    xs.push_back(bracket.lo + first_cell * std::pow(1e-4, 1.0 - s));
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

  int evals = 0;
  std::vector<double> fs(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    fs[i] = safe_eval(f, xs[i]);
    ++evals;
  }
  const auto best = static_cast<std::size_t>(
      std::min_element(fs.begin(), fs.end()) - fs.begin());
  if (!std::isfinite(fs[best])) {
    throw NoFeasiblePoint("objective is infinite at every sample of the bracket");
  }
  const double a = xs[best == 0 ? 0 : best - 1];
  const double b = xs[best + 1 < xs.size() ? best + 1 : best];
  ScalarMinimum result{xs[best], fs[best], evals};
  if (b > a) {
    result = brent(f, a, b, xs[best], fs[best], bracket.tol, evals);
  }
  result.x = std::clamp(result.x, bracket.lo, bracket.hi);
  result.evaluations = evals;
  return result;
}

}  // namespace rgov::numkit
