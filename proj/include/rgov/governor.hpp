#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "rgov/bounds.hpp"
#include "rgov/numkit/sym_matrix.hpp"

namespace rgov {

// Piecewise-linear path r(sigma), sigma in [0, 1] proportional to arc length.
class Path {
 public:
  Path() = default;
  explicit Path(std::vector<Eigen::VectorXd> waypoints);

  const std::vector<Eigen::VectorXd>& waypoints() const { return waypoints_; }
  bool empty() const { return waypoints_.empty(); }
  Eigen::Index dim() const { return waypoints_.empty() ? 0 : waypoints_.front().size(); }
  double length() const { return length_; }
  std::size_t segment_count() const { return waypoints_.size() - 1; }

  Eigen::VectorXd at(double sigma) const;
  Eigen::VectorXd end() const { return waypoints_.back(); }

  // sigma range [lo, hi] covered by segment i.
  double sigma_begin(std::size_t i) const;
  double sigma_end(std::size_t i) const;

 private:
  std::vector<Eigen::VectorXd> waypoints_;
  std::vector<double> cumulative_;  // arc length at each waypoint
  double length_ = 0.0;
};

struct GovernorParams {
  double k_g = 1.0;
  double eps_e = 0.05;
  numkit::SymMatrix s = numkit::SymMatrix::identity(2);
  BoundMethod bound_method = BoundMethod::kLyap;

  void validate() const;
};

struct AugmentedState {
  Eigen::VectorXd z_tilde;
  Eigen::VectorXd g;
};

struct SafeZone {
  Eigen::VectorXd center;
  double radius_sq = 0.0;
  numkit::SymMatrix metric;

  bool contains(const Eigen::VectorXd& q) const {
    return metric.quad(q - center) <= radius_sq;
  }
};

struct FreeEnergy {
  double delta_e = 0.0;
  double bound = 0.0;  // peak bound of y - g from the current state
  double alpha_star = 0.0;
};

// z~ - Cbar^T g: the state error relative to the governor equilibrium.
Eigen::VectorXd governor_error(const AugmentedState& s, const RelaxedLinearSystem& sys);

// dE = d_S^2(g, O) - bound - eps_E with the bound computed by p.bound_method.
FreeEnergy free_energy(const AugmentedState& s, double dist_sq_to_obstacles,
                       const RelaxedLinearSystem& sys, const GovernorParams& p);

// Same formula with an externally computed bound.
inline double free_energy(double dist_sq_to_obstacles, double bound, double eps_e) {
  return dist_sq_to_obstacles - bound - eps_e;
}

SafeZone make_safe_zone(const Eigen::VectorXd& g, double delta_e, const numkit::SymMatrix& s);

struct Projection {
  Eigen::VectorXd g_bar;
  double sigma = 0.0;
  bool stalled = false;  // no path point inside the zone
};

// Furthest path point inside the zone, solved exactly per segment. When no
// point of the path lies in the zone the governor holds: g_bar = g and sigma
// keeps its previous value.
Projection project_goal(const SafeZone& zone, const Path& path, double previous_sigma = 0.0);

inline Eigen::VectorXd governor_control(const Eigen::VectorXd& g, const Eigen::VectorXd& g_bar,
                                        const GovernorParams& p) {
  return -p.k_g * (g - g_bar);
}

bool is_safe_state(const AugmentedState& s, double delta_e, const Path& path,
                   const SafeZone& zone);

bool in_goal_region(const Eigen::VectorXd& y, const Path& path, double eps,
                    const numkit::SymMatrix& s);

// min over a sigma grid with spacing <= `step` meters of d_S(r(sigma), O)
// must exceed sqrt(lambda_min(S) (delta_ult + eps_E)). `dist_s` returns the
// S-distance from a point to the obstacle set.
bool check_path_clearance(const Path& path,
                          const std::function<double(const Eigen::VectorXd&)>& dist_s,
                          double delta_ult, double eps_e, const numkit::SymMatrix& s,
                          double step);

}  // namespace rgov
