#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <json.hpp>

#include "oracles.hpp"
#include "rgov/errors.hpp"
#include "rgov/world.hpp"

using namespace rgov;
using numkit::SymMatrix;

namespace {

GroundTruthMap wall_map() {
  GroundTruthMap map;
  map.workspace = {Eigen::Vector2d(-50, -50), Eigen::Vector2d(50, 50)};
  map.obstacles.push_back({Eigen::Vector2d(5, -20), Eigen::Vector2d(6, 20)});
  return map;
}

LidarSpec single_beam(double range = 30.0) { return {1, range, 2.0 * M_PI}; }

// All cells FREE, centers on the lattice -10 + k/2 in both axes.
OccupancyGrid free_grid() {
  OccupancyGrid grid(Eigen::Vector2d(-10.25, -10.25), 0.5, 41, 41);
  for (int y = 0; y < grid.height(); ++y)
    for (int x = 0; x < grid.width(); ++x) grid.set({x, y}, Cell::kFree);
  return grid;
}

OccupancyGrid open_workspace(const Rect& ws, double res) {
  OccupancyGrid grid = OccupancyGrid::for_workspace(ws, res);
  for (int y = 1; y + 1 < grid.height(); ++y)
    for (int x = 1; x + 1 < grid.width(); ++x) grid.set({x, y}, Cell::kFree);
  return grid;
}

void block_box(OccupancyGrid& grid, const Eigen::Vector2d& lo, const Eigen::Vector2d& hi) {
  for (int y = 0; y < grid.height(); ++y) {
    for (int x = 0; x < grid.width(); ++x) {
      const Eigen::Vector2d c = grid.center({x, y});
      if (c.x() >= lo.x() && c.x() <= hi.x() && c.y() >= lo.y() && c.y() <= hi.y()) {
        grid.set({x, y}, Cell::kOccupied);
      }
    }
  }
}

double polyline_length(const Path& p) { return p.length(); }

// Smallest center-to-center distance from q's cell center to any OCCUPIED cell.
double nearest_occupied_center(const OccupancyGrid& grid, const CellIndex& q) {
  double best = std::numeric_limits<double>::infinity();
  for (int y = 0; y < grid.height(); ++y)
    for (int x = 0; x < grid.width(); ++x)
      if (grid.at({x, y}) == Cell::kOccupied)
        best = std::min(best, (grid.center({x, y}) - grid.center(q)).norm());
  return best;
}

}  // namespace

TEST_CASE("raycast examples") {
  const auto map = wall_map();
  auto beams = raycast(map, {Eigen::Vector2d(0, 0), 0.0}, single_beam());
  REQUIRE(beams.size() == 1);
  CHECK(beams[0].range == doctest::Approx(5.0).epsilon(1e-14));
  CHECK(beams[0].angle == 0.0);

  beams = raycast(map, {Eigen::Vector2d(0, 0), M_PI / 4}, single_beam());
  CHECK(beams[0].range == doctest::Approx(5.0 * std::sqrt(2.0)).epsilon(1e-12));

  GroundTruthMap empty;
  empty.workspace = {Eigen::Vector2d(-100, -100), Eigen::Vector2d(100, 100)};
  beams = raycast(empty, {Eigen::Vector2d(0, 0), 0.3}, LidarSpec{});
  REQUIRE(beams.size() == 360);
  for (const auto& b : beams) CHECK(b.range == 30.0);
  CHECK(beams[1].angle - beams[0].angle == doctest::Approx(2.0 * M_PI / 360));

  // The workspace boundary stops beams too.
  beams = raycast(map, {Eigen::Vector2d(0, 0), M_PI}, single_beam(100.0));
  CHECK(beams[0].range == doctest::Approx(50.0));

  CHECK_THROWS_AS(raycast(map, {Eigen::Vector2d(5.5, 0), 0.0}, single_beam()), PoseInObstacle);
  CHECK_THROWS_AS(raycast(map, {Eigen::Vector2d(60, 0), 0.0}, single_beam()), PoseInObstacle);
  CHECK_THROWS_AS(raycast(map, {Eigen::Vector2d(0, 0), 0.0}, LidarSpec{0, 30.0, 1.0}),
                  InvalidArgument);
}

TEST_CASE("raycast ranges never undercut the true clearance") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-18.0, 18.0), size(0.5, 4.0);
  int poses = 0;
  for (int trial = 0; trial < 40; ++trial) {
    GroundTruthMap map;
    map.workspace = {Eigen::Vector2d(-20, -20), Eigen::Vector2d(20, 20)};
    for (int k = 0; k < 8; ++k) {
      const Eigen::Vector2d lo(u(rng), u(rng));
      const Eigen::Vector2d hi = (lo + Eigen::Vector2d(size(rng), size(rng)))
                                     .cwiseMin(Eigen::Vector2d(19.9, 19.9));
      map.obstacles.push_back({lo, hi});
    }
    const LidarSpec spec{180, 30.0, 2.0 * M_PI};
    for (int k = 0; k < 10; ++k) {
      const Eigen::Vector2d p(u(rng), u(rng));
      if (map.in_collision(p)) continue;
      ++poses;
      const auto beams = raycast(map, {p, u(rng)}, spec);
      double min_range = std::numeric_limits<double>::infinity();
      for (const auto& b : beams) min_range = std::min(min_range, b.range);
      const double clearance = map.clearance(p);
      CHECK(min_range >= clearance - 1e-9);
      // Each hit point lies on an obstacle or on the boundary.
      for (const auto& b : beams) {
        if (b.range >= spec.max_range) continue;
        const Eigen::Vector2d hit = p + b.range * Eigen::Vector2d(std::cos(b.angle), std::sin(b.angle));
        CHECK(map.clearance(hit) <= 1e-9);
      }
    }
  }
  CHECK(poses > 100);
}

TEST_CASE("map parsing") {
  const auto map = parse_map(R"({"workspace": {"min": [0, 0], "max": [10, 5]},
                                  "obstacles": [{"min": [2, 1], "max": [3, 4]}]})");
  CHECK(map.obstacles.size() == 1);
  CHECK(map.in_collision(Eigen::Vector2d(2.5, 2)));
  CHECK_FALSE(map.in_collision(Eigen::Vector2d(1, 1)));
  CHECK(map.clearance(Eigen::Vector2d(1, 2.5)) == doctest::Approx(1.0));
  CHECK_THROWS_AS(parse_map("{"), ConfigError);
  CHECK_THROWS_AS(parse_map(R"({"obstacles": []})"), ConfigError);
  CHECK_THROWS_AS(parse_map(R"({"workspace": {"min": [0, 0], "max": [0, 5]}})"), ConfigError);
  CHECK_THROWS_AS(parse_map(R"({"workspace": {"min": [0, 0], "max": [10, 5]},
                                "obstacles": [{"min": [8, 1], "max": [12, 2]}]})"),
                  ConfigError);
}

TEST_CASE("update_grid examples") {
  OccupancyGrid grid(Eigen::Vector2d(-10, -10), 0.5, 40, 40);
  const Pose2 pose{Eigen::Vector2d(0, 0), 0.0};
  update_grid(grid, pose, {{0.0, 5.0}}, 30.0);
  CHECK(grid.count(Cell::kFree) == 10);
  CHECK(grid.count(Cell::kOccupied) == 1);
  for (int x = 20; x < 30; ++x) CHECK(grid.at({x, 20}) == Cell::kFree);
  CHECK(grid.at({30, 20}) == Cell::kOccupied);

  SUBCASE("miss leaves no occupied endpoint") {
    OccupancyGrid g2(Eigen::Vector2d(-10, -10), 0.5, 40, 40);
    update_grid(g2, pose, {{0.0, 8.0}}, 8.0);
    CHECK(g2.count(Cell::kOccupied) == 0);
    CHECK(g2.count(Cell::kFree) == 17);
  }

  SUBCASE("a second pose sees the same wall cell; occupied is sticky") {
    const Pose2 other{Eigen::Vector2d(0, 1), 0.0};
    // Oblique beam hitting the wall face at (5, 0.25).
    const double ang = std::atan2(-0.75, 5.0);
    update_grid(grid, other, {{ang, std::hypot(5.0, 0.75)}}, 30.0);
    CHECK(grid.at({30, 20}) == Cell::kOccupied);
    CHECK(grid.count(Cell::kOccupied) == 1);
    // A longer beam through the wall cell does not clear it.
    update_grid(grid, pose, {{0.0, 8.0}}, 30.0);
    CHECK(grid.at({30, 20}) == Cell::kOccupied);
    CHECK(grid.count(Cell::kOccupied) == 2);
  }
}

TEST_CASE("occupied set only grows under repeated scans") {
  const auto map = wall_map();
  auto grid = OccupancyGrid::for_workspace(map.workspace, 0.25);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  std::vector<Cell> prev = grid.cells();
  for (int k = 0; k < 30; ++k) {
    const Pose2 pose{Eigen::Vector2d(u(rng), u(rng)), u(rng)};
    if (map.in_collision(pose.position)) continue;
    update_grid(grid, pose, raycast(map, pose, LidarSpec{}), 30.0);
    for (std::size_t i = 0; i < prev.size(); ++i) {
      if (prev[i] == Cell::kOccupied) REQUIRE(grid.cells()[i] == Cell::kOccupied);
    }
    prev = grid.cells();
  }
  CHECK(grid.count(Cell::kOccupied) > 100);
}

TEST_CASE("for_workspace pads with an occupied ring") {
  const Rect ws{Eigen::Vector2d(0, 0), Eigen::Vector2d(10, 4)};
  const auto grid = OccupancyGrid::for_workspace(ws, 0.5);
  CHECK(grid.width() == 22);
  CHECK(grid.height() == 10);
  CHECK(grid.count(Cell::kOccupied) == 2 * 22 + 2 * 8);
  CHECK(grid.index_of(Eigen::Vector2d(0.1, 0.1)) == CellIndex{1, 1});
  CHECK((grid.center({1, 1}) - Eigen::Vector2d(0.25, 0.25)).norm() < 1e-12);
}

TEST_CASE("dist_to_obstacles examples") {
  const SymMatrix id = SymMatrix::identity(2);
  auto grid = free_grid();
  grid.set(grid.index_of(Eigen::Vector2d(5, 0)), Cell::kOccupied);
  CHECK(dist_to_obstacles(grid, Eigen::Vector2d(0, 0), id, 30.0) ==
        doctest::Approx(5.0 - 0.25));
  // Capped by the sensing range.
  CHECK(dist_to_obstacles(grid, Eigen::Vector2d(0, 0), id, 2.0) == 2.0);
  CHECK(dist_to_obstacles(free_grid(), Eigen::Vector2d(0, 0), id, 30.0) == 30.0);

  SUBCASE("weighted metric") {
    auto g = free_grid();
    g.set(g.index_of(Eigen::Vector2d(0, 3)), Cell::kOccupied);
    g.set(g.index_of(Eigen::Vector2d(4, 0)), Cell::kOccupied);
    const SymMatrix s = SymMatrix::diagonal(Eigen::Vector2d(1, 4));
    // Brute force over the two centers: 6 and 4.
    const double brute = std::min(std::sqrt(s.quad(Eigen::Vector2d(0, 3))),
                                  std::sqrt(s.quad(Eigen::Vector2d(4, 0))));
    CHECK(brute == doctest::Approx(4.0));
    CHECK(dist_to_obstacles(g, Eigen::Vector2d(0, 0), s, 30.0) ==
          doctest::Approx(brute - 0.25 * 2.0));
  }

  SUBCASE("unknown space beyond an observed disk binds") {
    GroundTruthMap empty;
    empty.workspace = {Eigen::Vector2d(-20, -20), Eigen::Vector2d(20, 20)};
    const double radius = 3.0, res = 0.1;
    auto g = OccupancyGrid::for_workspace(empty.workspace, res);
    const Pose2 pose{Eigen::Vector2d(0.05, 0.05), 0.0};
    update_grid(g, pose, raycast(empty, pose, {720, radius, 2.0 * M_PI}), radius);
    const double d = dist_to_obstacles(g, pose.position, id, 30.0);
    // Equal to the observed radius up to the cell discretization.
    CHECK(std::abs(d - radius) <= res);
  }

  SUBCASE("matches brute force on random grids") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-9.0, 9.0);
    std::bernoulli_distribution occ(0.02), unk(0.02);
    for (int trial = 0; trial < 30; ++trial) {
      auto g = free_grid();
      for (int y = 0; y < g.height(); ++y)
        for (int x = 0; x < g.width(); ++x) {
          if (occ(rng)) g.set({x, y}, Cell::kOccupied);
          else if (unk(rng)) g.set({x, y}, Cell::kUnknown);
        }
      Eigen::Matrix2d a = oracle::random_matrix(rng, 2, 2);
      const SymMatrix s(a * a.transpose() + 0.2 * Eigen::Matrix2d::Identity());
      const Eigen::Vector2d q(u(rng), u(rng));
      double brute = std::numeric_limits<double>::infinity();
      for (int y = 0; y < g.height(); ++y)
        for (int x = 0; x < g.width(); ++x)
          if (g.at({x, y}) != Cell::kFree)
            brute = std::min(brute, std::sqrt(s.quad(g.center({x, y}) - q)));
      const double expected =
          std::clamp(brute - 0.25 * std::sqrt(s.lambda_max()), 0.0, 30.0);
      CHECK(dist_to_obstacles(g, q, s, 30.0) == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("inflate uses exact center distances") {
  auto grid = free_grid();
  const CellIndex c = grid.index_of(Eigen::Vector2d(0, 0));
  grid.set(c, Cell::kOccupied);
  const auto blocked = inflate(grid, 1.0, true);
  for (int y = 0; y < grid.height(); ++y) {
    for (int x = 0; x < grid.width(); ++x) {
      const double d = (grid.center({x, y}) - grid.center(c)).norm();
      CHECK(static_cast<bool>(blocked[grid.flat({x, y})]) == (d < 1.0 - 1e-12));
    }
  }
  grid.set({0, 0}, Cell::kUnknown);
  CHECK(inflate(grid, 0.0, true)[grid.flat({0, 0})] == 1);
  CHECK(inflate(grid, 0.0, false)[grid.flat({0, 0})] == 0);
}

TEST_CASE("grid_astar matches Dijkstra on random grids") {
  std::mt19937_64 rng(11);
  std::bernoulli_distribution wall(0.3);
  std::uniform_int_distribution<int> coord(0, 63);
  int reachable = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::uint8_t> blocked(64 * 64);
    for (auto& b : blocked) b = wall(rng) ? 1 : 0;
    CellIndex s{coord(rng), coord(rng)}, g{coord(rng), coord(rng)};
    blocked[s.y * 64 + s.x] = 0;
    blocked[g.y * 64 + g.x] = 0;
    const double ref = oracle::grid_dijkstra(blocked, 64, 64, s.x, s.y, g.x, g.y);
    const auto path = grid_astar(blocked, 64, 64, s, g);
    if (!std::isfinite(ref)) {
      CHECK_FALSE(path.has_value());
      continue;
    }
    ++reachable;
    REQUIRE(path.has_value());
    CHECK(path->cost == doctest::Approx(ref).epsilon(1e-12));
    CHECK(path->cells.front() == s);
    CHECK(path->cells.back() == g);
    double sum = 0.0;
    for (std::size_t i = 1; i < path->cells.size(); ++i) {
      const auto& a = path->cells[i - 1];
      const auto& b = path->cells[i];
      const int dx = b.x - a.x, dy = b.y - a.y;
      REQUIRE(std::max(std::abs(dx), std::abs(dy)) == 1);
      CHECK(blocked[b.y * 64 + b.x] == 0);
      if (dx != 0 && dy != 0) {
        CHECK(blocked[a.y * 64 + b.x] == 0);
        CHECK(blocked[b.y * 64 + a.x] == 0);
      }
      sum += (dx != 0 && dy != 0) ? std::sqrt(2.0) : 1.0;
    }
    CHECK(sum == doctest::Approx(path->cost));
  }
  CHECK(reachable > 50);
}

TEST_CASE("plan_path examples") {
  const Rect ws{Eigen::Vector2d(-5, -5), Eigen::Vector2d(15, 5)};
  PlanOptions opt;
  opt.inflation_radius = 0.5;

  auto grid = open_workspace(ws, 0.2);
  const Path straight = plan_path(grid, Eigen::Vector2d(0, 0), Eigen::Vector2d(10, 0), opt);
  CHECK(straight.waypoints().size() == 2);
  CHECK(straight.length() == doctest::Approx(10.0));
  CHECK((straight.at(0.0) - Eigen::Vector2d(0, 0)).norm() == 0.0);
  CHECK((straight.at(1.0) - Eigen::Vector2d(10, 0)).norm() == 0.0);

  SUBCASE("goal inside an inflated obstacle") {
    auto g = grid;
    g.set(g.index_of(Eigen::Vector2d(10.3, 0.0)), Cell::kOccupied);
    CHECK_THROWS_AS(plan_path(g, Eigen::Vector2d(0, 0), Eigen::Vector2d(10, 0), opt),
                    PlanningFailed);
  }

  SUBCASE("wall with one gap against Dijkstra") {
    auto g = grid;
    block_box(g, Eigen::Vector2d(4.9, -5), Eigen::Vector2d(5.1, 1.5));
    block_box(g, Eigen::Vector2d(4.9, 3.0), Eigen::Vector2d(5.1, 5));
    const Eigen::Vector2d start(0.1, -3.0), goal(10.1, -3.0);
    const Path p = plan_path(g, start, goal, opt);
    const auto blocked = inflate(g, opt.inflation_radius, true);
    const CellIndex sc = g.index_of(start), gc = g.index_of(goal);
    const double ref =
        g.resolution() * oracle::grid_dijkstra(blocked, g.width(), g.height(), sc.x, sc.y,
                                               gc.x, gc.y);
    REQUIRE(std::isfinite(ref));
    CHECK(polyline_length(p) <= ref + std::sqrt(2.0) * g.resolution());
    CHECK(polyline_length(p) > (goal - start).norm() + 1.0);
    // The path has to pass through the gap.
    bool through_gap = false;
    for (int i = 0; i <= 2000; ++i) {
      const Eigen::VectorXd q = p.at(i / 2000.0);
      if (std::abs(q(0) - 5.0) < 0.05 && q(1) > 1.5 && q(1) < 3.0) through_gap = true;
    }
    CHECK(through_gap);
  }

  SUBCASE("goal in unexplored space uses the optimistic fallback") {
    auto g = OccupancyGrid::for_workspace(ws, 0.2);
    block_box(g, Eigen::Vector2d(-4.9, -4.9), Eigen::Vector2d(-4.8, -4.8));
    for (int y = 1; y + 1 < g.height(); ++y)
      for (int x = 1; x + 1 < g.width(); ++x)
        if (g.center({x, y}).x() < 3.0 && g.at({x, y}) != Cell::kOccupied)
          g.set({x, y}, Cell::kFree);
    PlanOptions strict = opt;
    strict.optimistic_fallback = false;
    CHECK_THROWS_AS(plan_path(g, Eigen::Vector2d(0, 0), Eigen::Vector2d(10, 0), strict),
                    PlanningFailed);
    const Path p = plan_path(g, Eigen::Vector2d(0, 0), Eigen::Vector2d(10, 0), opt);
    CHECK(p.length() == doctest::Approx(10.0));
  }

  SUBCASE("start inside the inflated zone is joined to the nearest free cell") {
    auto g = grid;
    g.set(g.index_of(Eigen::Vector2d(0.0, 0.45)), Cell::kOccupied);
    const Path p = plan_path(g, Eigen::Vector2d(0, 0.1), Eigen::Vector2d(10, 0), opt);
    CHECK((p.at(0.0) - Eigen::Vector2d(0, 0.1)).norm() == 0.0);
    CHECK((p.at(1.0) - Eigen::Vector2d(10, 0)).norm() == 0.0);
    CHECK(p.waypoints().size() >= 3);
  }
}

TEST_CASE("planned paths keep the inflation radius from occupied cells") {
  const Rect ws{Eigen::Vector2d(0, 0), Eigen::Vector2d(12, 12)};
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.5, 11.5), size(0.3, 2.0);
  int planned = 0;
  for (int trial = 0; trial < 40; ++trial) {
    auto grid = open_workspace(ws, 0.2);
    for (int k = 0; k < 6; ++k) {
      const Eigen::Vector2d lo(u(rng), u(rng));
      block_box(grid, lo, lo + Eigen::Vector2d(size(rng), size(rng)));
    }
    PlanOptions opt;
    opt.inflation_radius = 0.6;
    const auto blocked = inflate(grid, opt.inflation_radius, true);
    const Eigen::Vector2d start(u(rng), u(rng)), goal(u(rng), u(rng));
    if (blocked[grid.flat(grid.index_of(start))] || blocked[grid.flat(grid.index_of(goal))])
      continue;
    Path path({start});
    try {
      path = plan_path(grid, start, goal, opt);
    } catch (const PlanningFailed&) {
      CHECK_FALSE(std::isfinite(oracle::grid_dijkstra(
          blocked, grid.width(), grid.height(), grid.index_of(start).x,
          grid.index_of(start).y, grid.index_of(goal).x, grid.index_of(goal).y)));
      continue;
    }
    ++planned;
    const int samples = static_cast<int>(path.length() / 0.01) + 2;
    for (int i = 0; i <= samples; ++i) {
      const CellIndex c = grid.index_of(path.at(static_cast<double>(i) / samples));
      REQUIRE(nearest_occupied_center(grid, c) >= opt.inflation_radius - 1e-9);
    }
  }
  CHECK(planned > 15);
}

TEST_CASE("write_pgm emits image and sidecar") {
  auto grid = free_grid();
  grid.set({0, 0}, Cell::kOccupied);
  grid.set({1, 0}, Cell::kUnknown);
  const auto dir = std::filesystem::temp_directory_path() / "rgov_world_test";
  std::filesystem::create_directories(dir);
  const auto file = dir / "grid.pgm";
  write_pgm(grid, file);
  std::ifstream in(file, std::ios::binary);
  std::string magic;
  int w = 0, h = 0, maxv = 0;
  in >> magic >> w >> h >> maxv;
  in.get();
  CHECK(magic == "P5");
  CHECK(w == 41);
  CHECK(h == 41);
  CHECK(maxv == 255);
  std::vector<unsigned char> px(41 * 41);
  in.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(px.size()));
  CHECK(in.gcount() == 41 * 41);
  // Grid row 0 is the last image row.
  CHECK(px[40 * 41 + 0] == 0);
  CHECK(px[40 * 41 + 1] == 128);
  CHECK(px[0] == 255);
  std::ifstream side(file.string() + ".json");
  const auto meta = nlohmann::json::parse(side);
  CHECK(meta["resolution_m"].get<double>() == 0.5);
  CHECK(meta["origin_m"][0].get<double>() == -10.25);
  std::filesystem::remove_all(dir);
}
