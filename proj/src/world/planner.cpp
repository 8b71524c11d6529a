#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <queue>
#include <tuple>

#include "rgov/errors.hpp"
#include "rgov/world.hpp"

namespace rgov {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;

double octile(int dx, int dy) {
  dx = std::abs(dx);
  dy = std::abs(dy);
  return std::max(dx, dy) + (kSqrt2 - 1.0) * std::min(dx, dy);
}

struct Mask {
  const std::vector<std::uint8_t>& blocked;
  int width, height;

  bool inside(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
  bool free(int x, int y) const {
    return inside(x, y) && blocked[static_cast<std::size_t>(y) * width + x] == 0;
  }
};

// Every cell the segment a-b passes through, in cell units, must be free.
// When the segment crosses a grid vertex exactly, both cells sharing that
// vertex with the current one are checked.
bool line_of_sight(const Mask& m, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  int x = static_cast<int>(std::floor(a.x()));
  int y = static_cast<int>(std::floor(a.y()));
  const int xe = static_cast<int>(std::floor(b.x()));
  const int ye = static_cast<int>(std::floor(b.y()));
  const Eigen::Vector2d d = b - a;
  const int sx = d.x() > 0 ? 1 : -1;
  const int sy = d.y() > 0 ? 1 : -1;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const double tdx = d.x() != 0.0 ? std::abs(1.0 / d.x()) : kInf;
  const double tdy = d.y() != 0.0 ? std::abs(1.0 / d.y()) : kInf;
  double tx = d.x() != 0.0 ? ((sx > 0 ? x + 1 - a.x() : a.x() - x) * tdx) : kInf;
  double ty = d.y() != 0.0 ? ((sy > 0 ? y + 1 - a.y() : a.y() - y) * tdy) : kInf;
  if (!m.free(x, y)) return false;
  for (int guard = 0; guard < 4 * (m.width + m.height); ++guard) {
    if (x == xe && y == ye) return true;
    const double t = std::min(tx, ty);
    if (t > 1.0) return true;
    if (std::abs(tx - ty) <= 1e-12) {
      if (!m.free(x + sx, y) || !m.free(x, y + sy)) return false;
      x += sx;
      y += sy;
      tx += tdx;
      ty += tdy;
    } else if (tx < ty) {
      x += sx;
      tx += tdx;
    } else {
      y += sy;
      ty += tdy;
    }
    if (!m.free(x, y)) return false;
  }
  return true;
}

std::optional<CellIndex> nearest_free(const Mask& m, CellIndex from) {
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(m.width) * m.height, 0);
  std::deque<CellIndex> queue;
  if (!m.inside(from.x, from.y)) return std::nullopt;
  queue.push_back(from);
  seen[static_cast<std::size_t>(from.y) * m.width + from.x] = 1;
  while (!queue.empty()) {
    const CellIndex c = queue.front();
    queue.pop_front();
    if (m.free(c.x, c.y)) return c;
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int nx = c.x + dx, ny = c.y + dy;
        if (!m.inside(nx, ny)) continue;
        auto& s = seen[static_cast<std::size_t>(ny) * m.width + nx];
        if (s) continue;
        s = 1;
        queue.push_back({nx, ny});
      }
    }
  }
  return std::nullopt;
}

std::optional<std::vector<Eigen::VectorXd>> plan_once(const OccupancyGrid& grid,
                                                      const Eigen::Vector2d& start,
                                                      const Eigen::Vector2d& goal,
                                                      double radius, bool unknown_blocks) {
  const auto blocked = inflate(grid, radius, unknown_blocks);
  const Mask m{blocked, grid.width(), grid.height()};
  const CellIndex gc = grid.index_of(goal);
  if (!m.free(gc.x, gc.y)) return std::nullopt;
  const CellIndex sc = grid.index_of(start);
  const bool start_free = m.free(sc.x, sc.y);
  const auto from = start_free ? std::optional<CellIndex>(sc) : nearest_free(m, sc);
  if (!from) return std::nullopt;
  const auto cells = grid_astar(blocked, grid.width(), grid.height(), *from, gc);
  if (!cells) return std::nullopt;

  // Points in cell units: cell centers with the exact endpoints substituted.
  const double res = grid.resolution();
  auto to_cell_units = [&](const Eigen::Vector2d& p) -> Eigen::Vector2d {
    return (p - grid.origin()) / res;
  };
  std::vector<Eigen::Vector2d> pts;
  if (!start_free) pts.push_back(to_cell_units(start));
  for (const auto& c : cells->cells) pts.emplace_back(c.x + 0.5, c.y + 0.5);
  if (start_free) pts.front() = to_cell_units(start);
  pts.back() = to_cell_units(goal);

  std::vector<Eigen::Vector2d> smooth;
  std::size_t i = 0;
  if (!start_free) {
    smooth.push_back(pts[0]);
    i = 1;
  }
  smooth.push_back(pts[i]);
  while (i + 1 < pts.size()) {
    std::size_t j = i + 1;
    while (j + 1 < pts.size() && line_of_sight(m, pts[i], pts[j + 1])) ++j;
    smooth.push_back(pts[j]);
    i = j;
  }

  std::vector<Eigen::VectorXd> out;
  out.reserve(smooth.size());
  for (const auto& p : smooth) out.emplace_back(grid.origin() + res * p);
  out.front() = start;
  out.back() = goal;
  return out;
}

}  // namespace

std::optional<GridPath> grid_astar(const std::vector<std::uint8_t>& blocked, int width,
                                   int height, CellIndex start, CellIndex goal) {
  if (width <= 0 || height <= 0 ||
      blocked.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw InvalidArgument("blocked mask does not match the grid size");
  }
  const Mask m{blocked, width, height};
  if (!m.free(start.x, start.y) || !m.free(goal.x, goal.y)) return std::nullopt;

  const std::size_t n = blocked.size();
  auto flat = [width](int x, int y) { return static_cast<std::size_t>(y) * width + x; };
  std::vector<double> g(n, std::numeric_limits<double>::infinity());
  std::vector<std::int64_t> parent(n, -1);
  std::vector<std::uint8_t> closed(n, 0);

  using Entry = std::tuple<double, double, std::size_t>;  // f, h, index
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  const std::size_t s = flat(start.x, start.y), t = flat(goal.x, goal.y);
  g[s] = 0.0;
  const double h0 = octile(goal.x - start.x, goal.y - start.y);
  open.emplace(h0, h0, s);

  while (!open.empty()) {
    const auto [f, h, idx] = open.top();
    open.pop();
    if (closed[idx]) continue;
    closed[idx] = 1;
    if (idx == t) break;
    const int x = static_cast<int>(idx % width), y = static_cast<int>(idx / width);
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        const int nx = x + dx, ny = y + dy;
        if (!m.free(nx, ny)) continue;
        if (dx != 0 && dy != 0 && (!m.free(x + dx, y) || !m.free(x, y + dy))) continue;
        const std::size_t ni = flat(nx, ny);
        if (closed[ni]) continue;
        const double cand = g[idx] + (dx != 0 && dy != 0 ? kSqrt2 : 1.0);
        if (cand < g[ni]) {
          g[ni] = cand;
          parent[ni] = static_cast<std::int64_t>(idx);
          const double hn = octile(goal.x - nx, goal.y - ny);
          open.emplace(cand + hn, hn, ni);
        }
      }
    }
  }
  if (!closed[t]) return std::nullopt;

  GridPath path;
  path.cost = g[t];
  for (std::int64_t i = static_cast<std::int64_t>(t); i >= 0; i = parent[i]) {
    path.cells.push_back({static_cast<int>(i % width), static_cast<int>(i / width)});
  }
  std::reverse(path.cells.begin(), path.cells.end());
  return path;
}

Path plan_path(const OccupancyGrid& grid, const Eigen::Vector2d& start, const Eigen::Vector2d& goal,
               const PlanOptions& options) {
  if (!(options.inflation_radius >= 0.0)) throw InvalidArgument("inflation radius must be >= 0");
  if (!grid.in_bounds(grid.index_of(start)) || !grid.in_bounds(grid.index_of(goal))) {
    throw PlanningFailed("start or goal lies outside the grid");
  }
  auto pts = plan_once(grid, start, goal, options.inflation_radius, true);
  if (!pts && options.optimistic_fallback) {
    pts = plan_once(grid, start, goal, options.inflation_radius, false);
  }
  if (!pts) {
    throw PlanningFailed("no path from (" + std::to_string(start.x()) + ", " +
                         std::to_string(start.y()) + ") to (" + std::to_string(goal.x()) + ", " +
                         std::to_string(goal.y()) + ")");
  }
  return Path(std::move(*pts));
}

}  // namespace rgov
