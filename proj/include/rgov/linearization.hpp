#pragma once

#include <complex>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace rgov {

// Control-affine plant  x' = f(x) + G(x)(u + w),  y = h(x), together with the
// closed-form pieces needed to feedback-linearize it:
//   y^(rho) = M(x) u + n(x),   z = Phi(x).
struct NonlinearPlant {
  using VecFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
  using MatFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

  std::string name;
  int state_dim = 0;
  int input_dim = 0;
  std::vector<int> relative_degree;

  VecFn drift;
  MatFn input_matrix;
  VecFn output;
  VecFn coordinate_map;
  MatFn decoupling;
  VecFn drift_term;

  // Returns a description of the violated condition when M(x) is singular.
  std::function<std::optional<std::string>(const Eigen::VectorXd&)> singular_reason;

  bool is_singular(const Eigen::VectorXd& x) const {
    return singular_reason && singular_reason(x).has_value();
  }

  Eigen::VectorXd dynamics(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
    return drift(x) + input_matrix(x) * u;
  }

  // Sum of relative degrees equals the state dimension, all callbacks set.
  void validate() const;
};

struct AckermannParams {
  double wheelbase_m = 1.0;
  double beta = 10.0;      // bound on v^2 / (l cos^2 delta)
  double v_min_mps = 0.1;       // speed floor used by the simulator
  double max_steer_rad = 1.2;   // steering stop used by the simulator

  void validate() const;
};

// State index layout of the Ackermann plant.
namespace ack {
inline constexpr int kX = 0, kY = 1, kPsi = 2, kSteer = 3, kV = 4, kA = 5;
}

NonlinearPlant ackermann_plant(const AckermannParams& params);

// v^2 / (l cos^2 delta): the quantity bounded by beta in the operating profile.
double ackermann_profile_ratio(const AckermannParams& params, const Eigen::VectorXd& x);

// u = M(x)^{-1} (v_cmd - n(x)). Throws SingularState inside the singular set.
Eigen::VectorXd feedback_linearize(const NonlinearPlant& plant, const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& v_cmd);

// Block-diagonal integrator chains z = (xi^1, ..., xi^m) and the permutation
// T with z_tilde = T z ordering states by derivative level, outputs first.
struct BrunovskyRealization {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  Eigen::MatrixXd C;
  Eigen::MatrixXd T;
  std::vector<int> block_sizes;

  // Offset of chain i inside z.
  int chain_offset(std::size_t i) const;
};

BrunovskyRealization brunovsky_realization(const std::vector<int>& rho);

// State feedback v = -K z that makes A - BK Hurwitz (checked on construction).
class LinearFeedbackGains {
 public:
  LinearFeedbackGains(Eigen::MatrixXd k, const BrunovskyRealization& real);

  const Eigen::MatrixXd& K() const { return k_; }
  Eigen::MatrixXd closed_loop(const BrunovskyRealization& real) const {
    return real.A - real.B * k_;
  }

 private:
  Eigen::MatrixXd k_;
};

// Gains that place the closed-loop poles of each integrator chain at the
// given roots. Complex roots must appear with their conjugates.
LinearFeedbackGains place_chain_poles(
    const BrunovskyRealization& real,
    const std::vector<std::vector<std::complex<double>>>& chain_poles);

// Splits a flat pole list evenly over the chains. Every chain of size r gets
// the same r poles: the list must be the per-chain set repeated m times (each
// distinct pole appearing a multiple of m times, in any order) or exactly r
// poles long, which are then reused for every chain.
std::vector<std::vector<std::complex<double>>> split_poles(
    const BrunovskyRealization& real, const std::vector<std::complex<double>>& poles);

// gamma with ||M(x)||_2 <= gamma over the operating profile: max(1, beta).
double bw_norm_bound(const NonlinearPlant& plant, const AckermannParams& params);

}  // namespace rgov
