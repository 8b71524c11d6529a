#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "rgov/errors.hpp"
#include "rgov/world.hpp"

namespace rgov {

namespace {

Eigen::Vector2d read_point(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw ConfigError(std::string("map: '") + what + "' must be a [x, y] pair");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

Rect read_rect(const nlohmann::json& j, const char* what) {
  if (!j.is_object() || !j.contains("min") || !j.contains("max")) {
    throw ConfigError(std::string("map: '") + what + "' needs min and max corners");
  }
  return {read_point(j["min"], "min"), read_point(j["max"], "max")};
}

// Entry distance of the ray p + t d into the box, or +inf.
double slab_entry(const Rect& r, const Eigen::Vector2d& p, const Eigen::Vector2d& d) {
  double t0 = 0.0;
  double t1 = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 2; ++k) {
    if (d(k) == 0.0) {
      if (p(k) < r.min(k) || p(k) > r.max(k)) return std::numeric_limits<double>::infinity();
      continue;
    }
    double a = (r.min(k) - p(k)) / d(k);
    double b = (r.max(k) - p(k)) / d(k);
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
  }
  return t0 <= t1 ? t0 : std::numeric_limits<double>::infinity();
}

// Exit distance of the ray from the workspace box (p inside).
double slab_exit(const Rect& r, const Eigen::Vector2d& p, const Eigen::Vector2d& d) {
  double t = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 2; ++k) {
    if (d(k) > 0.0) t = std::min(t, (r.max(k) - p(k)) / d(k));
    if (d(k) < 0.0) t = std::min(t, (r.min(k) - p(k)) / d(k));
  }
  return t;
}

double rect_distance(const Rect& r, const Eigen::Vector2d& p) {
  const double dx = std::max({r.min.x() - p.x(), 0.0, p.x() - r.max.x()});
  const double dy = std::max({r.min.y() - p.y(), 0.0, p.y() - r.max.y()});
  return std::hypot(dx, dy);
}

}  // namespace

void GroundTruthMap::validate() const {
  auto ok = [](const Rect& r) {
    return r.min.allFinite() && r.max.allFinite() && r.min.x() < r.max.x() &&
           r.min.y() < r.max.y();
  };
  if (!ok(workspace)) throw ConfigError("map: workspace must have min < max");
  for (const auto& o : obstacles) {
    if (!ok(o)) throw ConfigError("map: obstacle must have min < max");
    if (!workspace.contains(o.min) || !workspace.contains(o.max)) {
      throw ConfigError("map: obstacle extends outside the workspace");
    }
  }
}

bool GroundTruthMap::in_workspace(const Eigen::Vector2d& p) const {
  return p.x() > workspace.min.x() && p.x() < workspace.max.x() &&
         p.y() > workspace.min.y() && p.y() < workspace.max.y();
}

bool GroundTruthMap::in_collision(const Eigen::Vector2d& p) const {
  if (!in_workspace(p)) return true;
  for (const auto& o : obstacles) {
    if (o.contains(p)) return true;
  }
  return false;
}

double GroundTruthMap::clearance(const Eigen::Vector2d& p) const {
  if (in_collision(p)) return 0.0;
  double d = std::min({p.x() - workspace.min.x(), workspace.max.x() - p.x(),
                       p.y() - workspace.min.y(), workspace.max.y() - p.y()});
  for (const auto& o : obstacles) d = std::min(d, rect_distance(o, p));
  return d;
}

GroundTruthMap parse_map(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("map: ") + e.what());
  }
  if (!j.contains("workspace")) throw ConfigError("map: missing 'workspace'");
  GroundTruthMap map;
  map.workspace = read_rect(j["workspace"], "workspace");
  if (j.contains("obstacles")) {
    if (!j["obstacles"].is_array()) throw ConfigError("map: 'obstacles' must be an array");
    for (const auto& o : j["obstacles"]) map.obstacles.push_back(read_rect(o, "obstacle"));
  }
  map.validate();
  return map;
}

GroundTruthMap load_map(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open map file " + file.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_map(buf.str());
}

void LidarSpec::validate() const {
  if (num_beams < 1) throw InvalidArgument("lidar needs at least one beam");
  if (!(max_range > 0.0)) throw InvalidArgument("lidar max_range must be > 0");
  if (!(angular_span > 0.0) || angular_span > 2.0 * M_PI + 1e-12) {
    throw InvalidArgument("lidar angular_span must be in (0, 2 pi]");
  }
}

std::vector<Beam> raycast(const GroundTruthMap& map, const Pose2& pose, const LidarSpec& spec) {
  spec.validate();
  if (map.in_collision(pose.position)) {
    throw PoseInObstacle("lidar pose (" + std::to_string(pose.position.x()) + ", " +
                         std::to_string(pose.position.y()) + ") is not in free space");
  }
  const bool full = spec.angular_span >= 2.0 * M_PI - 1e-12;
  const double step = spec.num_beams == 1 ? 0.0
                      : full             ? spec.angular_span / spec.num_beams
                                         : spec.angular_span / (spec.num_beams - 1);
  const double first = spec.num_beams == 1 ? 0.0 : -0.5 * spec.angular_span;
  std::vector<Beam> beams;
  beams.reserve(static_cast<std::size_t>(spec.num_beams));
  for (int i = 0; i < spec.num_beams; ++i) {
    const double angle = pose.heading + first + i * step;
    const Eigen::Vector2d d(std::cos(angle), std::sin(angle));
    double t = slab_exit(map.workspace, pose.position, d);
    for (const auto& o : map.obstacles) t = std::min(t, slab_entry(o, pose.position, d));
    beams.push_back({angle, std::min(t, spec.max_range)});
  }
  return beams;
}

}  // namespace rgov
