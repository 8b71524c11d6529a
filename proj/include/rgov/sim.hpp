#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rgov/bounds.hpp"
#include "rgov/linearization.hpp"
#include "rgov/scenario.hpp"

namespace rgov {

// Interval imposed on one state component after each integration step.
struct StateLimit {
  int index = -1;
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
};

struct PlantStep {
  Eigen::VectorXd x;
  bool clamped = false;  // some limit was applied
};

// Classical RK4 on x' = f(x) + G(x)(u + w) with u and w held over dt.
// Throws Diverged when the result is not finite.
PlantStep step_plant(const NonlinearPlant& plant, const Eigen::VectorXd& x,
                     const Eigen::VectorXd& u, const Eigen::VectorXd& w, double dt,
                     const std::vector<StateLimit>& limits = {});

// Speed floor v_min and steering stops +-max_steer for the Ackermann plant.
std::vector<StateLimit> ackermann_limits(const AckermannParams& params);

// Piecewise-constant disturbance: a fresh sample every hold_s seconds.
class DisturbanceSampler {
 public:
  DisturbanceSampler(const DisturbanceModel& model, int dim);

  // Sample in force at time t. Times must be requested in nondecreasing order.
  const Eigen::VectorXd& at(double t);

 private:
  void draw();

  DisturbanceModel model_;
  std::mt19937_64 rng_;
  std::int64_t slot_ = -1;
  Eigen::VectorXd current_;
};

// Unit direction scaled to the model's magnitude; the norm never exceeds
// delta_w.
Eigen::VectorXd sample_disturbance(const DisturbanceModel& model, int dim, std::mt19937_64& rng);

struct MonteCarloOptions {
  int trials = 1000;
  double horizon_s = 10.0;
  double dt_s = 0.01;
  DisturbanceModel model;  // magnitude is forced to 1 (normalized wbar)
  std::uint64_t seed = 1;
  int threads = 0;  // 0: hardware concurrency
};

struct MonteCarloResult {
  double sampled_peak = 0.0;
  std::vector<double> trial_peaks;
};

// Exact zero-order-hold propagation of z~' = Abar z~ + Bbar wbar from z0 with
// piecewise-constant |wbar| <= 1; each trial records max_t |Cbar z~(t)|_S^2
// over the sample instants. Trials run on worker threads with per-trial
// seeds, so the result depends only on the options.
MonteCarloResult monte_carlo_peak(const RelaxedLinearSystem& sys, const Eigen::VectorXd& z0,
                                  const MonteCarloOptions& options);

struct TraceFlags {
  bool stalled = false;
  bool envelope_violation = false;  // v^2/(l cos^2 delta) exceeded beta
  bool singular_clamp = false;      // speed floor or steering stop applied in the period
};

struct TraceRecord {
  double t = 0.0;
  Eigen::VectorXd x;
  Eigen::Vector2d y;
  Eigen::Vector2d g;
  Eigen::Vector2d g_bar;
  double sigma = 0.0;
  double delta_e = 0.0;
  double bound = 0.0;                // method used by the governor
  std::optional<double> bound_sdp;  // comparison value when enabled
  double alpha_star = 0.0;
  double dist_sq_obstacles = 0.0;    // d_S^2(g, O) from the occupancy grid
  double dist_sq_true = 0.0;         // d_S^2(g, O) against the ground-truth map
  double dist_sq_output = 0.0;       // d_S^2(g, y)
  bool governor_moved = false;
  TraceFlags flags;
};

struct Trace {
  std::string scenario;
  std::uint64_t seed = 0;
  BoundMethod method = BoundMethod::kLyap;
  double ultimate_bound = 0.0;
  double goal_eps = 0.0;
  double eps_e = 0.0;
  std::vector<TraceRecord> records;
};

// Header line {"schema": 1, ...} followed by one JSON object per record.
void write_ndjson(const Trace& trace, std::ostream& out);
// One column per record field; vectors are expanded into indexed columns.
void write_csv(const Trace& trace, std::ostream& out);

enum class Outcome { kGoalReached, kHorizon, kCollision, kDiverged };
std::string_view to_string(Outcome outcome);

struct RunResult {
  Trace trace;
  Outcome outcome = Outcome::kHorizon;
  std::string message;
  double final_time = 0.0;
  int replans = 0;
  int planning_failures = 0;
};

// Indices of records where the governor moved and the chain
// d_S^2(g, y) <= bound <= d_S^2(g, O) - eps_E fails (relative slack 1e-9).
std::vector<std::size_t> chain_violations(const Trace& trace);

// Plant, feedback linearization, governor, lidar, occupancy grid and planner
// in closed loop. Throws UnsafeStart when the initial state fails the static
// safety condition, PlanningFailed when no initial path exists and ConfigError
// for scenarios without a map. Collisions and divergence end the run and are
// reported through the outcome.
RunResult run_closed_loop(const Scenario& scn);

}  // namespace rgov
