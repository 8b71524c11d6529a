#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rgov/governor.hpp"
#include "rgov/numkit/sym_matrix.hpp"

namespace rgov {

struct Rect {
  Eigen::Vector2d min;
  Eigen::Vector2d max;

  bool contains(const Eigen::Vector2d& p) const {
    return p.x() >= min.x() && p.x() <= max.x() && p.y() >= min.y() && p.y() <= max.y();
  }
};

// Axis-aligned rectangular obstacles inside a rectangular workspace.
struct GroundTruthMap {
  Rect workspace;
  std::vector<Rect> obstacles;

  void validate() const;
  bool in_workspace(const Eigen::Vector2d& p) const;
  // Inside an obstacle (closed) or outside the workspace.
  bool in_collision(const Eigen::Vector2d& p) const;
  // Euclidean distance to the nearest obstacle or workspace boundary.
  double clearance(const Eigen::Vector2d& p) const;
};

GroundTruthMap parse_map(const std::string& json_text);
GroundTruthMap load_map(const std::filesystem::path& file);

struct LidarSpec {
  int num_beams = 360;
  double max_range = 30.0;
  double angular_span = 2.0 * M_PI;

  void validate() const;
};

struct Pose2 {
  Eigen::Vector2d position;
  double heading = 0.0;
};

struct Beam {
  double angle;  // world frame
  double range;
};

// Slab-method ray casting against the rectangles and the workspace boundary.
// Throws PoseInObstacle when the pose is inside an obstacle or outside the
// workspace.
std::vector<Beam> raycast(const GroundTruthMap& map, const Pose2& pose, const LidarSpec& spec);

enum class Cell : std::uint8_t { kUnknown = 0, kFree = 1, kOccupied = 2 };

struct CellIndex {
  int x = 0;
  int y = 0;
  bool operator==(const CellIndex&) const = default;
};

class OccupancyGrid {
 public:
  OccupancyGrid(Eigen::Vector2d origin, double resolution, int width, int height);

  // Grid covering the workspace plus a one-cell ring outside it. The ring is
  // OCCUPIED: leaving the workspace counts as a collision.
  static OccupancyGrid for_workspace(const Rect& workspace, double resolution);

  double resolution() const { return resolution_; }
  const Eigen::Vector2d& origin() const { return origin_; }
  int width() const { return width_; }
  int height() const { return height_; }

  bool in_bounds(const CellIndex& c) const {
    return c.x >= 0 && c.y >= 0 && c.x < width_ && c.y < height_;
  }
  CellIndex index_of(const Eigen::Vector2d& p) const;
  Eigen::Vector2d center(const CellIndex& c) const;

  Cell at(const CellIndex& c) const { return cells_[flat(c)]; }
  void set(const CellIndex& c, Cell v) { cells_[flat(c)] = v; }
  std::size_t flat(const CellIndex& c) const {
    return static_cast<std::size_t>(c.y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(c.x);
  }
  const std::vector<Cell>& cells() const { return cells_; }
  std::size_t count(Cell v) const;

 private:
  Eigen::Vector2d origin_;
  double resolution_;
  int width_;
  int height_;
  std::vector<Cell> cells_;
};

// Cells crossed by each beam become FREE; the endpoint cell becomes
// OCCUPIED when the beam hit something before max_range. OCCUPIED is sticky.
void update_grid(OccupancyGrid& grid, const Pose2& pose, const std::vector<Beam>& beams,
                 double max_range);

// Lower bound on d_S(q, O): nearest OCCUPIED or UNKNOWN cell center in the S
// norm, minus half a cell (in the S norm), clipped to [0, cap].
double dist_to_obstacles(const OccupancyGrid& grid, const Eigen::Vector2d& q,
                         const numkit::SymMatrix& s, double cap);

// Blocked mask: cells whose center lies closer than `radius` to the center of
// a seed cell (exact Euclidean distance transform). Seeds are OCCUPIED cells
// and, when `unknown_blocks`, UNKNOWN cells.
std::vector<std::uint8_t> inflate(const OccupancyGrid& grid, double radius, bool unknown_blocks);

// 8-connected A* with the octile heuristic on a blocked mask, unit cell
// spacing. Diagonal moves may not cut blocked corners. Returns the cell
// sequence and its cost, or nullopt when the goal is unreachable.
struct GridPath {
  std::vector<CellIndex> cells;
  double cost = 0.0;
};
std::optional<GridPath> grid_astar(const std::vector<std::uint8_t>& blocked, int width,
                                   int height, CellIndex start, CellIndex goal);

struct PlanOptions {
  double inflation_radius = 0.5;
  // Try UNKNOWN-as-blocked first; fall back to UNKNOWN-as-free when the goal
  // lies in unexplored space.
  bool optimistic_fallback = true;
};

// A* on the inflated grid, greedy line-of-sight shortcutting, first and last
// waypoints replaced by the exact start and goal. Throws PlanningFailed.
Path plan_path(const OccupancyGrid& grid, const Eigen::Vector2d& start,
               const Eigen::Vector2d& goal, const PlanOptions& options);

// Binary PGM (occupied 0, unknown 128, free 255) plus a JSON sidecar with the
// grid geometry, written next to it as <file>.json.
void write_pgm(const OccupancyGrid& grid, const std::filesystem::path& file);

}  // namespace rgov
