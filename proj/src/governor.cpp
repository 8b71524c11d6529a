#include "rgov/governor.hpp"

#include <algorithm>
#include <cmath>

#include "rgov/errors.hpp"

namespace rgov {

using numkit::SymMatrix;

Path::Path(std::vector<Eigen::VectorXd> waypoints) {
  if (waypoints.empty()) throw InvalidArgument("path needs at least one waypoint");
  const auto dim = waypoints.front().size();
  // Consecutive duplicates would create zero-length segments.
  for (auto& w : waypoints) {
    if (w.size() != dim) throw InvalidArgument("path waypoints differ in dimension");
    if (!w.allFinite()) throw InvalidArgument("path waypoint is not finite");
    if (waypoints_.empty() || (w - waypoints_.back()).norm() > 0.0) {
      waypoints_.push_back(std::move(w));
    }
  }
  cumulative_.push_back(0.0);
  for (std::size_t i = 1; i < waypoints_.size(); ++i) {
    cumulative_.push_back(cumulative_.back() + (waypoints_[i] - waypoints_[i - 1]).norm());
  }
  length_ = cumulative_.back();
}

double Path::sigma_begin(std::size_t i) const {
  return length_ > 0.0 ? cumulative_[i] / length_ : 0.0;
}

double Path::sigma_end(std::size_t i) const {
  return length_ > 0.0 ? cumulative_[i + 1] / length_ : 1.0;
}

Eigen::VectorXd Path::at(double sigma) const {
  if (waypoints_.empty()) throw InvalidArgument("empty path");
  if (waypoints_.size() == 1 || length_ == 0.0) return waypoints_.front();
  sigma = std::clamp(sigma, 0.0, 1.0);
  const double s = sigma * length_;
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), s);
  std::size_t i = static_cast<std::size_t>(it - cumulative_.begin());
  i = std::clamp<std::size_t>(i, 1, waypoints_.size() - 1) - 1;
  const double seg = cumulative_[i + 1] - cumulative_[i];
  const double tau = std::clamp((s - cumulative_[i]) / seg, 0.0, 1.0);
  return waypoints_[i] + tau * (waypoints_[i + 1] - waypoints_[i]);
}

void GovernorParams::validate() const {
  if (!(k_g >= 0.0) || !std::isfinite(k_g)) throw InvalidArgument("k_g must be >= 0");
  if (!(eps_e > 0.0)) throw InvalidArgument("eps_E must be > 0");
  if (!s.is_positive_definite()) throw InvalidArgument("S must be positive definite");
}

Eigen::VectorXd governor_error(const AugmentedState& s, const RelaxedLinearSystem& sys) {
  if (s.z_tilde.size() != sys.state_dim() || s.g.size() != sys.output_dim()) {
    throw InvalidArgument("augmented state dimensions do not match the system");
  }
  return s.z_tilde - sys.c_bar.transpose() * s.g;
}

FreeEnergy free_energy(const AugmentedState& s, double dist_sq_to_obstacles,
                       const RelaxedLinearSystem& sys, const GovernorParams& p) {
  if (!(dist_sq_to_obstacles >= 0.0)) {
    throw InvalidArgument("squared distance to obstacles must be >= 0");
  }
  const PeakBound b = peak_bound(sys, governor_error(s, sys), p.bound_method);
  return {free_energy(dist_sq_to_obstacles, b.delta, p.eps_e), b.delta, b.alpha_star};
}

SafeZone make_safe_zone(const Eigen::VectorXd& g, double delta_e, const SymMatrix& s) {
  return {g, std::max(0.0, delta_e), s};
}

namespace {

// Parameter interval [lo, hi] of tau in [0, 1] with |p + tau d - c|_S^2 <= r2,
// or an empty optional.
struct Interval {
  double lo = 1.0, hi = 0.0;
  bool empty() const { return lo > hi; }
};

Interval segment_in_zone(const Eigen::VectorXd& p, const Eigen::VectorXd& d,
                         const SafeZone& zone) {
  const Eigen::VectorXd e = p - zone.center;
  const Eigen::MatrixXd& s = zone.metric.matrix();
  const double a = d.dot(s * d);
  const double b = 2.0 * d.dot(s * e);
  const double c = e.dot(s * e) - zone.radius_sq;
  Interval out;
  if (a <= 0.0) {
    if (c <= 0.0) out = {0.0, 1.0};
    return out;
  }
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return out;
  const double root = std::sqrt(disc);
  // Stable roots of a tau^2 + b tau + c.
  const double q = -0.5 * (b + std::copysign(root, b));
  double t1 = q / a;
  double t2 = q != 0.0 ? c / q : t1;
  if (t1 > t2) std::swap(t1, t2);
  out.lo = std::max(0.0, t1);
  out.hi = std::min(1.0, t2);
  return out;
}

}  // namespace

Projection project_goal(const SafeZone& zone, const Path& path, double previous_sigma) {
  if (path.empty()) throw InvalidArgument("project_goal on an empty path");
  if (path.dim() != zone.center.size()) throw InvalidArgument("path/zone dimension mismatch");
  const auto& w = path.waypoints();
  if (w.size() == 1) {
    if (zone.contains(w.front())) return {w.front(), 1.0, false};
    return {zone.center, previous_sigma, true};
  }
  for (std::size_t i = path.segment_count(); i-- > 0;) {
    const Eigen::VectorXd d = w[i + 1] - w[i];
    const Interval iv = segment_in_zone(w[i], d, zone);
    if (iv.empty()) continue;
    double tau = iv.hi;
    Eigen::VectorXd point = w[i] + tau * d;
    // Rounding in the root can put the boundary point a hair outside.
    if (!zone.contains(point)) {
      const double width = iv.hi - iv.lo;
      for (int k = 0; k < 60 && !zone.contains(point); ++k) {
        tau = iv.hi - width * std::ldexp(1e-15, k);
        point = w[i] + std::max(tau, iv.lo) * d;
      }
      tau = std::max(tau, iv.lo);
      if (!zone.contains(point)) continue;
    }
    const double sigma =
        path.sigma_begin(i) + tau * (path.sigma_end(i) - path.sigma_begin(i));
    return {point, sigma, false};
  }
  return {zone.center, previous_sigma, true};
}

bool is_safe_state(const AugmentedState& s, double delta_e, const Path& path,
                   const SafeZone& zone) {
  (void)s;
  if (!(delta_e > 0.0)) return false;
  return !project_goal(zone, path).stalled;
}

bool in_goal_region(const Eigen::VectorXd& y, const Path& path, double eps, const SymMatrix& s) {
  if (!(eps >= 0.0)) throw InvalidArgument("goal region size must be >= 0");
  return s.quad(y - path.end()) <= eps;
}

bool check_path_clearance(const Path& path,
                          const std::function<double(const Eigen::VectorXd&)>& dist_s,
                          double delta_ult, double eps_e, const SymMatrix& s, double step) {
  if (!(step > 0.0)) throw InvalidArgument("clearance grid step must be > 0");
  const double required = std::sqrt(s.lambda_min() * (delta_ult + eps_e));
  const int samples = std::max(2, static_cast<int>(std::ceil(path.length() / step)) + 1);
  for (int i = 0; i < samples; ++i) {
    const double sigma = static_cast<double>(i) / (samples - 1);
    if (!(dist_s(path.at(sigma)) > required)) return false;
  }
  for (const auto& wp : path.waypoints()) {
    if (!(dist_s(wp) > required)) return false;
  }
  return true;
}

}  // namespace rgov
