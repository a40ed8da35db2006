#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "flowmap/flow.hpp"
#include "flowmap/geom.hpp"

namespace fixtures {

using flowmap::flow::FlowLine;
using flowmap::geom::LineString;
using flowmap::geom::Point;
using flowmap::geom::Trajectory;

inline constexpr std::uint64_t kGridSeed = 20240611;
inline constexpr double kGridSpacing = 100.0;
inline constexpr int kRouteEdges = 10;

// Straight 10-edge route along a grid row, every vertex jittered.
inline std::vector<LineString> jittered_routes(int count = 200, double sigma = 1.5,
                                               std::uint64_t seed = kGridSeed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  std::vector<LineString> routes;
  routes.reserve(count);
  for (int r = 0; r < count; ++r) {
    std::vector<Point> pts;
    for (int i = 0; i <= kRouteEdges; ++i) {
      const double x = kGridSpacing * i + noise(rng);
      const double y = noise(rng);
      pts.push_back({x, y});
    }
    routes.emplace_back(std::move(pts));
  }
  return routes;
}

// Every edge of an nx-by-ny node grid as its own line.
inline std::vector<FlowLine> grid_network(int nx = 11, int ny = 11, double spacing = kGridSpacing) {
  std::vector<FlowLine> lines;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const Point p{spacing * i, spacing * j};
      if (i + 1 < nx) lines.push_back({1, LineString({p, {spacing * (i + 1), spacing * j}})});
      if (j + 1 < ny) lines.push_back({1, LineString({p, {spacing * i, spacing * (j + 1)}})});
    }
  return lines;
}

// Monotone staircase of `edges` grid edges starting at `start`, turning
// according to the bits of `pattern`.
inline LineString staircase(Point start, unsigned pattern, int edges = kRouteEdges,
                            double spacing = kGridSpacing) {
  std::vector<Point> pts{start};
  Point p = start;
  for (int e = 0; e < edges; ++e) {
    if ((pattern >> e) & 1u)
      p.y += spacing;
    else
      p.x += spacing;
    pts.push_back(p);
  }
  return LineString(std::move(pts));
}

// Points every `step` metres along the route with Gaussian noise.
inline Trajectory noisy_trace(const LineString& route, double sigma, double step, std::mt19937_64& rng,
                              std::string id) {
  std::normal_distribution<double> noise(0.0, sigma);
  Trajectory t{std::move(id), {}, {}};
  for (const Point& p : flowmap::geom::densify(route.points(), step))
    t.points.push_back({p.x + noise(rng), p.y + noise(rng)});
  return t;
}

}  // namespace fixtures
