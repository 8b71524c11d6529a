#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rgov/bounds.hpp"
#include "rgov/linearization.hpp"
#include "rgov/numkit/sym_matrix.hpp"
#include "rgov/world.hpp"

namespace rgov {

enum class DisturbanceKind { kZero, kExtremal, kUniform };
std::string_view to_string(DisturbanceKind kind);

struct DisturbanceModel {
  DisturbanceKind kind = DisturbanceKind::kExtremal;
  double hold_s = 0.1;
  double delta_w = 1.0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct TimingConfig {
  double dt_s = 0.001;
  double control_period_s = 0.02;
  double replan_period_s = 0.5;
  double horizon_s = 120.0;
};

struct GridConfig {
  double resolution_m = 0.2;
  // Unset: sqrt((delta_ult + eps_E) lambda_max(S^-1)) + resolution.
  std::optional<double> inflation_m;
};

struct MonteCarloConfig {
  int trials = 1000;
  double horizon_s = 10.0;
  double dt_s = 0.01;
  double hold_s = 0.5;
  DisturbanceKind kind = DisturbanceKind::kExtremal;
};

// Explicit relaxed system for scenarios that skip the plant.
struct LinearSpec {
  Eigen::MatrixXd a_bar;
  Eigen::MatrixXd b_bar;
  Eigen::MatrixXd c_bar;
};

struct Scenario {
  std::string name;

  // Relaxed system: either explicit matrices or the Ackermann plant with
  // poles / gains, delta_w and beta.
  std::optional<LinearSpec> linear;
  AckermannParams ackermann;
  std::vector<std::complex<double>> poles;
  std::optional<Eigen::MatrixXd> gains;
  double delta_w = 1.0;
  numkit::SymMatrix s = numkit::SymMatrix::identity(2);
  std::optional<Eigen::VectorXd> z0;

  // Governor.
  double k_g = 1.0;
  double eps_e = 0.05;
  BoundMethod bound_method = BoundMethod::kLyap;
  bool log_sdp = false;

  // Navigation. Present when the scenario names a map.
  std::optional<std::filesystem::path> map_file;
  GroundTruthMap map;
  Eigen::VectorXd initial_state;
  Eigen::Vector2d goal = Eigen::Vector2d::Zero();
  LidarSpec lidar;
  GridConfig grid;
  TimingConfig timing;
  DisturbanceModel disturbance;

  MonteCarloConfig montecarlo;
  std::uint64_t seed = 1;

  bool navigable() const { return map_file.has_value(); }

  // Throws ConfigError (or NotHurwitz for unstable gains) on the first broken
  // invariant.
  void validate() const;
};

// `overrides` are "dotted.key=value" strings applied to the JSON before it is
// interpreted; values are parsed as JSON and fall back to plain strings. A
// relative map path resolves against `base_dir`.
Scenario parse_scenario(const std::string& json_text, const std::filesystem::path& base_dir,
                        const std::vector<std::string>& overrides = {});
Scenario load_scenario(const std::filesystem::path& file,
                       const std::vector<std::string>& overrides = {});

// Sets the run seed and the disturbance seed together.
void set_seed(Scenario& scn, std::uint64_t seed);

RelaxedLinearSystem scenario_system(const Scenario& scn);

// Initial relaxed state for bound and Monte Carlo commands: the explicit z0
// when given, otherwise T Phi(x0) - Cbar^T y0 for navigation scenarios and
// zero for the rest.
Eigen::VectorXd scenario_z0(const Scenario& scn, const RelaxedLinearSystem& sys);

// Feedback gains for the Ackermann chains (explicit K or pole placement).
LinearFeedbackGains scenario_gains(const Scenario& scn, const BrunovskyRealization& real);

}  // namespace rgov
