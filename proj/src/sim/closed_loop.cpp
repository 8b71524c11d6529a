#include <cmath>
#include <sstream>

#include "rgov/errors.hpp"
#include "rgov/governor.hpp"
#include "rgov/sim.hpp"
#include "rgov/world.hpp"

namespace rgov {

namespace {

std::string describe(const Eigen::Vector2d& p) {
  std::ostringstream s;
  s << "(" << p.x() << ", " << p.y() << ")";
  return s.str();
}

}  // namespace

RunResult run_closed_loop(const Scenario& scn) {
  if (!scn.navigable()) throw ConfigError("scenario '" + scn.name + "' has no map to simulate");
  scn.validate();

  const auto plant = ackermann_plant(scn.ackermann);
  const auto real = brunovsky_realization(plant.relative_degree);
  const auto gains = scenario_gains(scn, real);
  const auto sys = build_relaxed_system(real, gains, bw_norm_bound(plant, scn.ackermann),
                                        scn.delta_w, scn.s);
  const LyapunovBound lyap(sys);
  auto bound_of = [&](const Eigen::VectorXd& e) {
    return scn.bound_method == BoundMethod::kLyap ? lyap.minimize(e) : peak_bound_sdp(sys, e);
  };

  GovernorParams gp;
  gp.k_g = scn.k_g;
  gp.eps_e = scn.eps_e;
  gp.s = scn.s;
  gp.bound_method = scn.bound_method;

  const double ultimate = bound_of(Eigen::VectorXd::Zero(sys.state_dim())).delta;
  const double goal_eps = ultimate / scn.s.lambda_min();
  const double res = scn.grid.resolution_m;
  PlanOptions plan_opts;
  plan_opts.inflation_radius = scn.grid.inflation_m.value_or(
      std::sqrt((ultimate + scn.eps_e) / scn.s.lambda_min()) + res);
  const double cap = std::sqrt(scn.s.lambda_min()) * scn.lidar.max_range;

  RunResult result;
  Trace& trace = result.trace;
  trace.scenario = scn.name;
  trace.seed = scn.seed;
  trace.method = scn.bound_method;
  trace.ultimate_bound = ultimate;
  trace.goal_eps = goal_eps;
  trace.eps_e = scn.eps_e;

  Eigen::VectorXd x = scn.initial_state;
  Eigen::Vector2d y = plant.output(x);
  Eigen::Vector2d g = y;
  OccupancyGrid grid = OccupancyGrid::for_workspace(scn.map.workspace, res);
  auto sense = [&] {
    const Pose2 pose{y, x(ack::kPsi)};
    update_grid(grid, pose, raycast(scn.map, pose, scn.lidar), scn.lidar.max_range);
  };
  auto dist_s = [&](const Eigen::Vector2d& q) { return dist_to_obstacles(grid, q, scn.s, cap); };
  const Eigen::MatrixXd ct = sys.c_bar.transpose();
  const Eigen::MatrixXd ref_map = real.T.transpose() * ct;  // z at the equilibrium col(g, 0)
  auto error_state = [&] { return Eigen::VectorXd(real.T * plant.coordinate_map(x) - ct * g); };

  sense();
  {
    const double bound0 = bound_of(error_state()).delta;
    const double d0 = dist_s(g);
    if (!(bound0 <= d0 * d0)) {
      std::ostringstream msg;
      msg << "initial peak bound " << bound0 << " exceeds d_S^2(g0, O) = " << d0 * d0;
      throw UnsafeStart(msg.str());
    }
  }
  Path path = plan_path(grid, g, scn.goal, plan_opts);
  double sigma = 0.0;

  const double tc = scn.timing.control_period_s;
  const double dt = scn.timing.dt_s;
  const int substeps = static_cast<int>(std::lround(tc / dt));
  const double horizon = scn.timing.horizon_s;
  double next_replan = scn.timing.replan_period_s;
  DisturbanceSampler disturbance(scn.disturbance, plant.input_dim);
  const auto limits = ackermann_limits(scn.ackermann);

  for (std::int64_t k = 0;; ++k) {
    const double t = static_cast<double>(k) * tc;
    y = plant.output(x);
    if (k > 0) sense();
    if (t >= next_replan - 1e-9) {
      try {
        path = plan_path(grid, g, scn.goal, plan_opts);
        sigma = 0.0;
        ++result.replans;
      } catch (const PlanningFailed&) {
        ++result.planning_failures;
      }
      next_replan += scn.timing.replan_period_s;
    }

    TraceRecord rec;
    rec.t = t;
    rec.x = x;
    rec.y = y;
    rec.g = g;
    const Eigen::VectorXd e = error_state();
    const PeakBound b = bound_of(e);
    const double d = dist_s(g);
    rec.bound = b.delta;
    rec.alpha_star = b.alpha_star;
    rec.dist_sq_obstacles = d * d;
    const double clearance = scn.map.clearance(g);
    rec.dist_sq_true = scn.s.lambda_min() * clearance * clearance;
    rec.dist_sq_output = scn.s.quad(y - g);
    if (scn.log_sdp) {
      try {
        rec.bound_sdp = peak_bound_sdp(sys, e).delta;
      } catch (const NumericalFailure&) {
        rec.bound_sdp.reset();
      }
    }
    rec.delta_e = free_energy(rec.dist_sq_obstacles, b.delta, scn.eps_e);
    const Projection proj = project_goal(make_safe_zone(g, rec.delta_e, scn.s), path, sigma);
    rec.g_bar = proj.g_bar;
    rec.sigma = proj.sigma;
    rec.flags.stalled = proj.stalled;
    sigma = proj.sigma;

    if (scn.s.quad(y - scn.goal) <= goal_eps) {
      rec.g_bar = g;
      trace.records.push_back(rec);
      result.outcome = Outcome::kGoalReached;
      result.final_time = t;
      break;
    }
    if (t >= horizon - 1e-9) {
      rec.g_bar = g;
      trace.records.push_back(rec);
      result.outcome = Outcome::kHorizon;
      result.final_time = t;
      break;
    }

    const Eigen::Vector2d g_next = g + tc * governor_control(g, proj.g_bar, gp);
    rec.governor_moved = (g_next - g).norm() > 0.0;
    g = g_next;

    bool stop = false;
    try {
      for (int i = 0; i < substeps; ++i) {
        const double ti = t + i * dt;
        const Eigen::VectorXd v_cmd = -gains.K() * (plant.coordinate_map(x) - ref_map * g);
        const Eigen::VectorXd u = feedback_linearize(plant, x, v_cmd);
        const PlantStep step = step_plant(plant, x, u, disturbance.at(ti), dt, limits);
        x = step.x;
        rec.flags.singular_clamp |= step.clamped;
        rec.flags.envelope_violation |=
            ackermann_profile_ratio(scn.ackermann, x) > scn.ackermann.beta;
        const Eigen::Vector2d yi = plant.output(x);
        if (scn.map.in_collision(yi)) {
          result.outcome = Outcome::kCollision;
          result.message = "collision at t = " + std::to_string(ti + dt) + " s, y = " + describe(yi);
          result.final_time = ti + dt;
          stop = true;
          break;
        }
      }
    } catch (const Diverged& err) {
      result.outcome = Outcome::kDiverged;
      result.message = err.what();
      stop = true;
    } catch (const SingularState& err) {
      result.outcome = Outcome::kDiverged;
      result.message = err.what();
      stop = true;
    }
    trace.records.push_back(rec);
    if (stop) {
      if (result.final_time == 0.0) result.final_time = t;
      break;
    }
  }
  return result;
}

}  // namespace rgov
