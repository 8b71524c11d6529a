#include "rgov/scenario.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "rgov/errors.hpp"

namespace rgov {

using nlohmann::json;
using numkit::SymMatrix;

namespace {

[[noreturn]] void fail(const std::string& what) { throw ConfigError("scenario: " + what); }

double number(const json& j, const std::string& key) {
  if (!j.is_number()) fail("'" + key + "' must be a number");
  return j.get<double>();
}

double number_or(const json& obj, const std::string& key, double fallback) {
  return obj.contains(key) ? number(obj[key], key) : fallback;
}

void check_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
  if (!obj.is_object()) fail("'" + where + "' must be an object");
  for (const auto& [k, v] : obj.items()) {
    if (!allowed.count(k)) fail("unknown key '" + k + "' in " + where);
  }
}

Eigen::VectorXd vector_of(const json& j, const std::string& key) {
  if (!j.is_array()) fail("'" + key + "' must be an array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number(j[i], key);
  return v;
}

Eigen::MatrixXd matrix_of(const json& j, const std::string& key) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) fail("'" + key + "' must be a nested array");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      fail("'" + key + "' rows differ in length");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = number(row[static_cast<std::size_t>(c)], key);
  }
  return m;
}

// A nested array is a full matrix, a flat array its diagonal.
SymMatrix metric_of(const json& j) {
  if (j.is_array() && !j.empty() && j[0].is_number()) {
    return SymMatrix::diagonal(vector_of(j, "S"));
  }
  const Eigen::MatrixXd m = matrix_of(j, "S");
  if (m.rows() != m.cols()) fail("'S' must be square");
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + m.cwiseAbs().maxCoeff())) {
    fail("'S' must be symmetric");
  }
  return SymMatrix(m);
}

std::complex<double> pole_of(const json& j) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (j.is_array() && j.size() == 2) return {number(j[0], "poles"), number(j[1], "poles")};
  fail("each pole must be a number or a [re, im] pair");
}

DisturbanceKind kind_of(const json& j) {
  if (!j.is_string()) fail("disturbance kind must be a string");
  const auto s = j.get<std::string>();
  if (s == "zero") return DisturbanceKind::kZero;
  if (s == "extremal") return DisturbanceKind::kExtremal;
  if (s == "uniform") return DisturbanceKind::kUniform;
  fail("unknown disturbance kind '" + s + "' (zero, extremal, uniform)");
}

void apply_override(json& root, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) fail("override '" + spec + "' is not key=value");
  const std::string key = spec.substr(0, eq);
  const std::string text = spec.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }
  std::string pointer;
  std::stringstream parts(key);
  std::string part;
  while (std::getline(parts, part, '.')) {
    if (part.empty()) fail("override key '" + key + "' has an empty component");
    pointer += "/" + part;
  }
  try {
    root[json::json_pointer(pointer)] = value;
  } catch (const json::exception& e) {
    fail("cannot apply override '" + spec + "': " + e.what());
  }
}

}  // namespace

std::string_view to_string(DisturbanceKind kind) {
  switch (kind) {
    case DisturbanceKind::kZero: return "zero";
    case DisturbanceKind::kExtremal: return "extremal";
    case DisturbanceKind::kUniform: return "uniform";
  }
  return "unknown";
}

void DisturbanceModel::validate() const {
  if (!(hold_s > 0.0) || !std::isfinite(hold_s)) throw ConfigError("disturbance hold_s must be > 0");
  if (!(delta_w >= 0.0) || !std::isfinite(delta_w)) throw ConfigError("delta_w must be >= 0");
}

Scenario parse_scenario(const std::string& json_text, const std::filesystem::path& base_dir,
                        const std::vector<std::string>& overrides) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(e.what());
  }
  if (!root.is_object()) fail("top level must be an object");
  for (const auto& o : overrides) apply_override(root, o);
  check_keys(root, "scenario",
             {"name", "description", "system", "plant", "poles", "K", "delta_w", "S", "z0", "k_g",
              "eps_e", "bound_method", "log_sdp", "map", "initial_state", "goal_m", "lidar",
              "grid", "timing", "disturbance", "montecarlo", "seed"});

  Scenario scn;
  scn.name = root.value("name", std::string("unnamed"));

  if (root.contains("system")) {
    const auto& sys = root["system"];
    check_keys(sys, "system", {"a_bar", "b_bar", "c_bar"});
    if (!sys.contains("a_bar") || !sys.contains("b_bar") || !sys.contains("c_bar")) {
      fail("system needs a_bar, b_bar and c_bar");
    }
    scn.linear = LinearSpec{matrix_of(sys["a_bar"], "a_bar"), matrix_of(sys["b_bar"], "b_bar"),
                            matrix_of(sys["c_bar"], "c_bar")};
  }
  if (root.contains("plant")) {
    const auto& p = root["plant"];
    check_keys(p, "plant", {"name", "wheelbase_m", "beta", "v_min_mps", "max_steer_rad"});
    if (p.value("name", std::string("ackermann")) != "ackermann") {
      fail("only the 'ackermann' plant is available");
    }
    scn.ackermann.wheelbase_m = number_or(p, "wheelbase_m", scn.ackermann.wheelbase_m);
    scn.ackermann.beta = number_or(p, "beta", scn.ackermann.beta);
    scn.ackermann.v_min_mps = number_or(p, "v_min_mps", scn.ackermann.v_min_mps);
    scn.ackermann.max_steer_rad = number_or(p, "max_steer_rad", scn.ackermann.max_steer_rad);
  }
  if (root.contains("poles")) {
    if (!root["poles"].is_array()) fail("'poles' must be an array");
    for (const auto& p : root["poles"]) scn.poles.push_back(pole_of(p));
  }
  if (root.contains("K")) scn.gains = matrix_of(root["K"], "K");
  scn.delta_w = number_or(root, "delta_w", scn.delta_w);
  if (root.contains("S")) scn.s = metric_of(root["S"]);
  if (root.contains("z0")) scn.z0 = vector_of(root["z0"], "z0");
  scn.k_g = number_or(root, "k_g", scn.k_g);
  scn.eps_e = number_or(root, "eps_e", scn.eps_e);
  if (root.contains("bound_method")) {
    const auto m = root["bound_method"].get<std::string>();
    if (m == "lyap") scn.bound_method = BoundMethod::kLyap;
    else if (m == "sdp") scn.bound_method = BoundMethod::kSdp;
    else fail("bound_method must be 'lyap' or 'sdp'");
  }
  if (root.contains("log_sdp")) {
    if (!root["log_sdp"].is_boolean()) fail("'log_sdp' must be true or false");
    scn.log_sdp = root["log_sdp"].get<bool>();
  }
  if (root.contains("seed")) {
    if (!root["seed"].is_number_unsigned()) fail("'seed' must be a non-negative integer");
    scn.seed = root["seed"].get<std::uint64_t>();
  }

  if (root.contains("map")) {
    if (!root["map"].is_string()) fail("'map' must be a file path");
    std::filesystem::path map_path = root["map"].get<std::string>();
    if (map_path.is_relative()) map_path = base_dir / map_path;
    scn.map_file = map_path;
    scn.map = load_map(map_path);

    if (!root.contains("initial_state")) fail("navigation scenarios need 'initial_state'");
    const auto& x0 = root["initial_state"];
    check_keys(x0, "initial_state",
               {"x_m", "y_m", "heading_rad", "steer_rad", "speed_mps", "accel_mps2"});
    scn.initial_state = Eigen::VectorXd::Zero(6);
    scn.initial_state(ack::kX) = number_or(x0, "x_m", 0.0);
    scn.initial_state(ack::kY) = number_or(x0, "y_m", 0.0);
    scn.initial_state(ack::kPsi) = number_or(x0, "heading_rad", 0.0);
    scn.initial_state(ack::kSteer) = number_or(x0, "steer_rad", 0.0);
    scn.initial_state(ack::kV) = number_or(x0, "speed_mps", scn.ackermann.v_min_mps);
    scn.initial_state(ack::kA) = number_or(x0, "accel_mps2", 0.0);

    if (!root.contains("goal_m")) fail("navigation scenarios need 'goal_m'");
    const Eigen::VectorXd goal = vector_of(root["goal_m"], "goal_m");
    if (goal.size() != 2) fail("'goal_m' must be [x, y]");
    scn.goal = goal;

    if (root.contains("lidar")) {
      const auto& l = root["lidar"];
      check_keys(l, "lidar", {"num_beams", "max_range_m", "angular_span_rad"});
      scn.lidar.num_beams = static_cast<int>(number_or(l, "num_beams", scn.lidar.num_beams));
      scn.lidar.max_range = number_or(l, "max_range_m", scn.lidar.max_range);
      scn.lidar.angular_span = number_or(l, "angular_span_rad", scn.lidar.angular_span);
    }
    if (root.contains("grid")) {
      const auto& g = root["grid"];
      check_keys(g, "grid", {"resolution_m", "inflation_m"});
      scn.grid.resolution_m = number_or(g, "resolution_m", scn.grid.resolution_m);
      if (g.contains("inflation_m") && !g["inflation_m"].is_null()) {
        scn.grid.inflation_m = number(g["inflation_m"], "inflation_m");
      }
    }
    if (root.contains("timing")) {
      const auto& t = root["timing"];
      check_keys(t, "timing", {"dt_s", "control_period_s", "replan_period_s", "horizon_s"});
      scn.timing.dt_s = number_or(t, "dt_s", scn.timing.dt_s);
      scn.timing.control_period_s = number_or(t, "control_period_s", scn.timing.control_period_s);
      scn.timing.replan_period_s = number_or(t, "replan_period_s", scn.timing.replan_period_s);
      scn.timing.horizon_s = number_or(t, "horizon_s", scn.timing.horizon_s);
    }
  }
  if (root.contains("disturbance")) {
    const auto& d = root["disturbance"];
    check_keys(d, "disturbance", {"kind", "hold_s"});
    if (d.contains("kind")) scn.disturbance.kind = kind_of(d["kind"]);
    scn.disturbance.hold_s = number_or(d, "hold_s", scn.disturbance.hold_s);
  }
  if (root.contains("montecarlo")) {
    const auto& m = root["montecarlo"];
    check_keys(m, "montecarlo", {"trials", "horizon_s", "dt_s", "hold_s", "kind"});
    scn.montecarlo.trials = static_cast<int>(number_or(m, "trials", scn.montecarlo.trials));
    scn.montecarlo.horizon_s = number_or(m, "horizon_s", scn.montecarlo.horizon_s);
    scn.montecarlo.dt_s = number_or(m, "dt_s", scn.montecarlo.dt_s);
    scn.montecarlo.hold_s = number_or(m, "hold_s", scn.montecarlo.hold_s);
    if (m.contains("kind")) scn.montecarlo.kind = kind_of(m["kind"]);
  }
  scn.disturbance.delta_w = scn.delta_w;
  scn.disturbance.seed = scn.seed;
  scn.validate();
  return scn;
}

Scenario load_scenario(const std::filesystem::path& file, const std::vector<std::string>& overrides) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open scenario file " + file.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), file.parent_path(), overrides);
}

void set_seed(Scenario& scn, std::uint64_t seed) {
  scn.seed = seed;
  scn.disturbance.seed = seed;
}

LinearFeedbackGains scenario_gains(const Scenario& scn, const BrunovskyRealization& real) {
  if (scn.gains) return LinearFeedbackGains(*scn.gains, real);
  if (scn.poles.empty()) fail("the plant needs 'poles' or 'K'");
  return place_chain_poles(real, split_poles(real, scn.poles));
}

RelaxedLinearSystem scenario_system(const Scenario& scn) {
  if (scn.linear) {
    return make_relaxed_system(scn.linear->a_bar, scn.linear->b_bar, scn.linear->c_bar, scn.s);
  }
  const auto plant = ackermann_plant(scn.ackermann);
  const auto real = brunovsky_realization(plant.relative_degree);
  const auto gains = scenario_gains(scn, real);
  return build_relaxed_system(real, gains, bw_norm_bound(plant, scn.ackermann), scn.delta_w,
                              scn.s);
}

Eigen::VectorXd scenario_z0(const Scenario& scn, const RelaxedLinearSystem& sys) {
  if (scn.z0) return *scn.z0;
  if (scn.navigable() && !scn.linear) {
    const auto plant = ackermann_plant(scn.ackermann);
    const auto real = brunovsky_realization(plant.relative_degree);
    const Eigen::VectorXd y0 = plant.output(scn.initial_state);
    return real.T * plant.coordinate_map(scn.initial_state) - sys.c_bar.transpose() * y0;
  }
  return Eigen::VectorXd::Zero(sys.state_dim());
}

void Scenario::validate() const {
  if (!(eps_e > 0.0) || !std::isfinite(eps_e)) fail("eps_e must be > 0");
  if (!(k_g >= 0.0) || !std::isfinite(k_g)) fail("k_g must be >= 0");
  if (!s.is_positive_definite()) fail("S must be positive definite");

  if (linear) {
    if (navigable()) fail("a linear 'system' cannot drive a navigation run");
  } else {
    ackermann.validate();
    if (!(delta_w > 0.0) || !std::isfinite(delta_w)) fail("delta_w must be > 0");
    if (s.dim() != 2) fail("S must be 2 x 2 for the Ackermann plant");
  }
  // Builds the system: checks dimensions, Hurwitz gains and S.
  const auto sys = scenario_system(*this);
  if (z0 && z0->size() != sys.state_dim()) {
    fail("z0 has " + std::to_string(z0->size()) + " entries, the system has " +
         std::to_string(sys.state_dim()) + " states");
  }

  if (montecarlo.trials < 1) fail("montecarlo.trials must be >= 1");
  if (!(montecarlo.horizon_s > 0.0) || !(montecarlo.dt_s > 0.0) || !(montecarlo.hold_s > 0.0)) {
    fail("montecarlo horizon_s, dt_s and hold_s must be > 0");
  }
  disturbance.validate();

  if (!navigable()) return;
  map.validate();
  lidar.validate();
  if (initial_state.size() != 6 || !initial_state.allFinite()) fail("initial_state is invalid");
  const Eigen::Vector2d p0(initial_state(ack::kX), initial_state(ack::kY));
  if (map.in_collision(p0)) fail("initial position is not in free space");
  if (map.in_collision(goal)) fail("goal is not in free space");
  if (initial_state(ack::kV) < ackermann.v_min_mps) fail("initial speed is below v_min_mps");
  if (std::abs(initial_state(ack::kSteer)) > ackermann.max_steer_rad) {
    fail("initial steering exceeds max_steer_rad");
  }
  if (!(grid.resolution_m > 0.0)) fail("grid.resolution_m must be > 0");
  if (grid.inflation_m && !(*grid.inflation_m >= 0.0)) fail("grid.inflation_m must be >= 0");

  const auto& t = timing;
  if (!(t.dt_s > 0.0)) fail("timing.dt_s must be > 0");
  if (!(t.dt_s <= t.control_period_s && t.control_period_s <= t.replan_period_s)) {
    fail("timing must satisfy dt_s <= control_period_s <= replan_period_s");
  }
  const double ratio = t.control_period_s / t.dt_s;
  if (std::abs(ratio - std::round(ratio)) > 1e-6 * ratio) {
    fail("control_period_s must be a whole multiple of dt_s");
  }
  if (!(t.horizon_s >= 0.0) || !std::isfinite(t.horizon_s)) fail("timing.horizon_s must be >= 0");
  if (!(k_g * t.control_period_s < 1.0)) fail("k_g * control_period_s must be < 1");
}

}  // namespace rgov
