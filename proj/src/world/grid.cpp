#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "rgov/errors.hpp"
#include "rgov/world.hpp"

namespace rgov {

OccupancyGrid::OccupancyGrid(Eigen::Vector2d origin, double resolution, int width, int height)
    : origin_(std::move(origin)), resolution_(resolution), width_(width), height_(height) {
  if (!(resolution > 0.0)) throw InvalidArgument("grid resolution must be > 0");
  if (width <= 0 || height <= 0) throw InvalidArgument("grid must have cells");
  cells_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height),
                Cell::kUnknown);
}

OccupancyGrid OccupancyGrid::for_workspace(const Rect& workspace, double resolution) {
  const Eigen::Vector2d size = workspace.max - workspace.min;
  const int w = static_cast<int>(std::ceil(size.x() / resolution - 1e-9)) + 2;
  const int h = static_cast<int>(std::ceil(size.y() / resolution - 1e-9)) + 2;
  OccupancyGrid grid(workspace.min - Eigen::Vector2d::Constant(resolution), resolution, w, h);
  for (int x = 0; x < w; ++x) {
    grid.set({x, 0}, Cell::kOccupied);
    grid.set({x, h - 1}, Cell::kOccupied);
  }
  for (int y = 0; y < h; ++y) {
    grid.set({0, y}, Cell::kOccupied);
    grid.set({w - 1, y}, Cell::kOccupied);
  }
  return grid;
}

CellIndex OccupancyGrid::index_of(const Eigen::Vector2d& p) const {
  const Eigen::Vector2d q = (p - origin_) / resolution_;
  return {static_cast<int>(std::floor(q.x())), static_cast<int>(std::floor(q.y()))};
}

Eigen::Vector2d OccupancyGrid::center(const CellIndex& c) const {
  return origin_ + resolution_ * Eigen::Vector2d(c.x + 0.5, c.y + 0.5);
}

std::size_t OccupancyGrid::count(Cell v) const {
  return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), v));
}

void update_grid(OccupancyGrid& grid, const Pose2& pose, const std::vector<Beam>& beams,
                 double max_range) {
  const double res = grid.resolution();
  const Eigen::Vector2d a = (pose.position - grid.origin()) / res;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  for (const auto& beam : beams) {
    const bool hit = beam.range < max_range;
    // Nudge along the beam so a hit on a cell boundary lands in the far cell.
    const Eigen::Vector2d d =
        (beam.range + 1e-9) / res * Eigen::Vector2d(std::cos(beam.angle), std::sin(beam.angle));
    const CellIndex last = grid.index_of(pose.position + res * d);

    // Walk every cell the segment a -> a + d crosses.
    int x = static_cast<int>(std::floor(a.x()));
    int y = static_cast<int>(std::floor(a.y()));
    const int sx = d.x() > 0 ? 1 : -1, sy = d.y() > 0 ? 1 : -1;
    const double tdx = d.x() != 0.0 ? std::abs(1.0 / d.x()) : kInf;
    const double tdy = d.y() != 0.0 ? std::abs(1.0 / d.y()) : kInf;
    double tx = d.x() != 0.0 ? (sx > 0 ? x + 1 - a.x() : a.x() - x) * tdx : kInf;
    double ty = d.y() != 0.0 ? (sy > 0 ? y + 1 - a.y() : a.y() - y) * tdy : kInf;
    while (true) {
      const CellIndex c{x, y};
      const bool at_end = c == last || std::min(tx, ty) > 1.0;
      if (grid.in_bounds(c)) {
        if (at_end && hit) {
          grid.set(c, Cell::kOccupied);
        } else if (grid.at(c) != Cell::kOccupied) {
          grid.set(c, Cell::kFree);
        }
      }
      if (at_end) break;
      if (tx < ty) {
        x += sx;
        tx += tdx;
      } else {
        y += sy;
        ty += tdy;
      }
    }
  }
}

double dist_to_obstacles(const OccupancyGrid& grid, const Eigen::Vector2d& q,
                         const numkit::SymMatrix& s, double cap) {
  const double res = grid.resolution();
  const double half = 0.5 * res * std::sqrt(s.lambda_max());
  const double lmin = std::sqrt(s.lambda_min());
  const CellIndex c0 = grid.index_of(q);
  const Eigen::Matrix2d& sm = s.matrix();

  double best = std::numeric_limits<double>::infinity();
  auto visit = [&](int x, int y) {
    const CellIndex c{x, y};
    if (!grid.in_bounds(c) || grid.at(c) == Cell::kFree) return;
    const Eigen::Vector2d d = grid.center(c) - q;
    best = std::min(best, std::sqrt(d.dot(sm * d)));
  };
  const int max_ring = std::max(grid.width(), grid.height());
  for (int r = 0; r <= max_ring; ++r) {
    // Every center on ring r is at least (r - 1/2) cells away from q.
    const double lower = lmin * std::max(0.0, (r - 0.5) * res);
    if (lower >= best || lower - half >= cap) break;
    if (r == 0) {
      visit(c0.x, c0.y);
      continue;
    }
    for (int k = -r; k <= r; ++k) {
      visit(c0.x + k, c0.y - r);
      visit(c0.x + k, c0.y + r);
    }
    for (int k = -r + 1; k <= r - 1; ++k) {
      visit(c0.x - r, c0.y + k);
      visit(c0.x + r, c0.y + k);
    }
  }
  return std::clamp(best - half, 0.0, cap);
}

namespace {

// Squared distance transform of a sampled function (Felzenszwalb-Huttenlocher).
void distance_transform_1d(const std::vector<double>& f, std::vector<double>& d,
                           std::vector<int>& v, std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (int q = 1; q < n; ++q) {
    double s;
    while (true) {
      const int p = v[k];
      s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * q - 2.0 * p);
      if (s > z[k] || k == 0) break;
      --k;
    }
    if (s <= z[k]) {
      // k == 0 and the new parabola dominates everywhere.
      v[0] = q;
      z[0] = -std::numeric_limits<double>::infinity();
      z[1] = std::numeric_limits<double>::infinity();
      continue;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double diff = q - v[k];
    d[q] = diff * diff + f[v[k]];
  }
}

}  // namespace

std::vector<std::uint8_t> inflate(const OccupancyGrid& grid, double radius, bool unknown_blocks) {
  const int w = grid.width(), h = grid.height();
  constexpr double kFar = 1e20;
  std::vector<double> dist(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Cell c = grid.at({x, y});
      const bool seed = c == Cell::kOccupied || (unknown_blocks && c == Cell::kUnknown);
      dist[grid.flat({x, y})] = seed ? 0.0 : kFar;
    }
  }
  const int n = std::max(w, h);
  std::vector<double> f(n), d(n), z(n + 1);
  std::vector<int> v(n);
  // Columns, then rows.
  f.resize(h);
  d.resize(h);
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) f[y] = dist[grid.flat({x, y})];
    distance_transform_1d(f, d, v, z);
    for (int y = 0; y < h; ++y) dist[grid.flat({x, y})] = d[y];
  }
  f.resize(w);
  d.resize(w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) f[x] = dist[grid.flat({x, y})];
    distance_transform_1d(f, d, v, z);
    for (int x = 0; x < w; ++x) dist[grid.flat({x, y})] = d[x];
  }
  const double r_cells_sq = (radius / grid.resolution()) * (radius / grid.resolution());
  std::vector<std::uint8_t> blocked(dist.size());
  for (std::size_t i = 0; i < dist.size(); ++i) {
    blocked[i] = (dist[i] == 0.0 || dist[i] < r_cells_sq) ? 1 : 0;
  }
  return blocked;
}

void write_pgm(const OccupancyGrid& grid, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + file.string());
  out << "P5\n" << grid.width() << " " << grid.height() << "\n255\n";
  // PGM rows run top to bottom; grid rows run bottom to top.
  for (int y = grid.height() - 1; y >= 0; --y) {
    for (int x = 0; x < grid.width(); ++x) {
      const Cell c = grid.at({x, y});
      const unsigned char px = c == Cell::kOccupied ? 0 : c == Cell::kUnknown ? 128 : 255;
      out.put(static_cast<char>(px));
    }
  }
  nlohmann::json meta = {
      {"resolution_m", grid.resolution()},
      {"origin_m", {grid.origin().x(), grid.origin().y()}},
      {"width", grid.width()},
      {"height", grid.height()},
      {"encoding", {{"occupied", 0}, {"unknown", 128}, {"free", 255}}},
  };
  std::ofstream side(file.string() + ".json");
  if (!side) throw ConfigError("cannot write " + file.string() + ".json");
  side << meta.dump(2) << "\n";
}

}  // namespace rgov
