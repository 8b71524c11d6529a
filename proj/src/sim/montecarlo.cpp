#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include <unsupported/Eigen/MatrixFunctions>

#include "rgov/errors.hpp"
#include "rgov/sim.hpp"

namespace rgov {

MonteCarloResult monte_carlo_peak(const RelaxedLinearSystem& sys, const Eigen::VectorXd& z0,
                                  const MonteCarloOptions& options) {
  sys.validate();
  if (options.trials < 1) throw InvalidArgument("monte carlo needs at least one trial");
  if (!(options.horizon_s > 0.0) || !(options.dt_s > 0.0)) {
    throw InvalidArgument("monte carlo horizon and dt must be > 0");
  }
  if (z0.size() != sys.state_dim()) throw InvalidArgument("z0 dimension mismatch");
  DisturbanceModel model = options.model;
  model.delta_w = 1.0;
  model.validate();

  const Eigen::Index n = sys.state_dim();
  const Eigen::Index m = sys.b_bar.cols();
  Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(n + m, n + m);
  aug.topLeftCorner(n, n) = sys.a_bar * options.dt_s;
  aug.topRightCorner(n, m) = sys.b_bar * options.dt_s;
  const Eigen::MatrixXd e = aug.exp();
  const Eigen::MatrixXd phi = e.topLeftCorner(n, n);
  const Eigen::MatrixXd gam = e.topRightCorner(n, m);
  const Eigen::MatrixXd out = sys.s.sqrt().matrix() * sys.c_bar;
  const auto steps = static_cast<std::int64_t>(std::ceil(options.horizon_s / options.dt_s - 1e-9));

  MonteCarloResult result;
  result.trial_peaks.assign(static_cast<std::size_t>(options.trials), 0.0);

  auto run_trial = [&](int trial) {
    std::seed_seq seq{static_cast<std::uint32_t>(options.seed),
                      static_cast<std::uint32_t>(options.seed >> 32),
                      static_cast<std::uint32_t>(trial)};
    std::mt19937_64 rng(seq);
    Eigen::VectorXd z = z0;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(m);
    std::int64_t slot = -1;
    double peak = (out * z).squaredNorm();
    for (std::int64_t k = 0; k < steps; ++k) {
      const auto s = static_cast<std::int64_t>(
          std::floor(static_cast<double>(k) * options.dt_s / model.hold_s + 1e-9));
      while (slot < s) {
        w = sample_disturbance(model, static_cast<int>(m), rng);
        ++slot;
      }
      z = phi * z + gam * w;
      peak = std::max(peak, (out * z).squaredNorm());
    }
    if (!std::isfinite(peak)) throw NumericalFailure("monte carlo trajectory is not finite");
    result.trial_peaks[static_cast<std::size_t>(trial)] = peak;
  };

  int threads = options.threads > 0 ? options.threads
                                    : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::clamp(threads, 1, options.trials);
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    try {
      for (int t = next++; t < options.trials; t = next++) run_trial(t);
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!error) error = std::current_exception();
      next = options.trials;
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);
  result.sampled_peak = *std::max_element(result.trial_peaks.begin(), result.trial_peaks.end());
  return result;
}

}  // namespace rgov
