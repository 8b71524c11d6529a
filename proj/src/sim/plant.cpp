#include <algorithm>
#include <cmath>

#include "rgov/errors.hpp"
#include "rgov/sim.hpp"

namespace rgov {

PlantStep step_plant(const NonlinearPlant& plant, const Eigen::VectorXd& x,
                     const Eigen::VectorXd& u, const Eigen::VectorXd& w, double dt,
                     const std::vector<StateLimit>& limits) {
  if (!(dt > 0.0)) throw InvalidArgument("dt must be > 0");
  const Eigen::VectorXd input = u + w;
  const Eigen::VectorXd k1 = plant.dynamics(x, input);
  const Eigen::VectorXd k2 = plant.dynamics(x + 0.5 * dt * k1, input);
  const Eigen::VectorXd k3 = plant.dynamics(x + 0.5 * dt * k2, input);
  const Eigen::VectorXd k4 = plant.dynamics(x + dt * k3, input);
  PlantStep out{x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), false};
  if (!out.x.allFinite()) throw Diverged("plant state is no longer finite");
  for (const auto& lim : limits) {
    const double v = out.x(lim.index);
    if (v < lim.lo || v > lim.hi) {
      out.x(lim.index) = std::clamp(v, lim.lo, lim.hi);
      out.clamped = true;
    }
  }
  return out;
}

std::vector<StateLimit> ackermann_limits(const AckermannParams& params) {
  return {{ack::kV, params.v_min_mps, std::numeric_limits<double>::infinity()},
          {ack::kSteer, -params.max_steer_rad, params.max_steer_rad}};
}

Eigen::VectorXd sample_disturbance(const DisturbanceModel& model, int dim, std::mt19937_64& rng) {
  if (model.kind == DisturbanceKind::kZero || model.delta_w == 0.0) {
    return Eigen::VectorXd::Zero(dim);
  }
  std::normal_distribution<double> normal;
  Eigen::VectorXd d(dim);
  double n = 0.0;
  while (n < 1e-12) {
    for (int i = 0; i < dim; ++i) d(i) = normal(rng);
    n = d.norm();
  }
  double scale = model.delta_w / n;
  if (model.kind == DisturbanceKind::kUniform) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    scale *= std::pow(unit(rng), 1.0 / dim);
  }
  Eigen::VectorXd w = scale * d;
  // Rounding can leave the norm one ulp above the bound.
  while (w.norm() > model.delta_w) w *= 1.0 - 1e-15;
  return w;
}

DisturbanceSampler::DisturbanceSampler(const DisturbanceModel& model, int dim)
    : model_(model), rng_(model.seed), current_(Eigen::VectorXd::Zero(dim)) {
  model_.validate();
}

void DisturbanceSampler::draw() {
  current_ = sample_disturbance(model_, static_cast<int>(current_.size()), rng_);
}

const Eigen::VectorXd& DisturbanceSampler::at(double t) {
  // The small offset keeps exact multiples of the hold time in the new slot.
  const auto slot = static_cast<std::int64_t>(std::floor(t / model_.hold_s + 1e-9));
  while (slot_ < slot) {
    draw();
    ++slot_;
  }
  return current_;
}

}  // namespace rgov
