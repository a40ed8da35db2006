#include "flowmap/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "flowmap/error.hpp"
#include "flowmap/parallel.hpp"

namespace flowmap::cluster {

using geom::Point;

namespace {

class DisjointSet {
 public:
  explicit DisjointSet(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::size_t find(std::size_t i) {
    while (parent_[i] != i) {
      parent_[i] = parent_[parent_[i]];
      i = parent_[i];
    }
    return i;
  }

  // Keeps the smaller index as root.
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a > b) std::swap(a, b);
    parent_[b] = a;
  }

 private:
  std::vector<std::size_t> parent_;
};

// Relabels arbitrary group ids to 0..count-1 in order of first appearance.
ClusterLabels relabel(const std::vector<std::size_t>& group) {
  ClusterLabels out;
  out.labels.resize(group.size());
  std::unordered_map<std::size_t, std::size_t> seen;
  for (std::size_t i = 0; i < group.size(); ++i) {
    auto [it, inserted] = seen.try_emplace(group[i], seen.size());
    out.labels[i] = it->second;
  }
  out.count = seen.size();
  return out;
}

ClusterLabels single_linkage_cut(std::span<const Point> points, double height) {
  const std::size_t n = points.size();
  DisjointSet sets(n);
  if (height <= 0.0) {
    std::unordered_map<geom::PointKey, std::size_t, geom::PointKeyHash> first;
    for (std::size_t i = 0; i < n; ++i) {
      auto [it, inserted] = first.try_emplace(geom::key_of(points[i]), i);
      if (!inserted) sets.unite(it->second, i);
    }
  } else {
    // Grid with cell size equal to the cut height; only neighbouring cells
    // can hold points within the cut distance.
    std::unordered_map<geom::PointKey, std::vector<std::size_t>, geom::PointKeyHash> grid;
    auto cell_of = [height](Point p) {
      return geom::PointKey{static_cast<std::int64_t>(std::floor(p.x / height)),
                            static_cast<std::int64_t>(std::floor(p.y / height))};
    };
    for (std::size_t i = 0; i < n; ++i) grid[cell_of(points[i])].push_back(i);
    for (std::size_t i = 0; i < n; ++i) {
      const geom::PointKey c = cell_of(points[i]);
      for (std::int64_t dx = -1; dx <= 1; ++dx) {
        for (std::int64_t dy = -1; dy <= 1; ++dy) {
          auto it = grid.find({c.x + dx, c.y + dy});
          if (it == grid.end()) continue;
          for (std::size_t j : it->second) {
            if (j <= i) continue;
            if (geom::distance(points[i], points[j]) <= height) sets.unite(i, j);
          }
        }
      }
    }
  }
  std::vector<std::size_t> group(n);
  for (std::size_t i = 0; i < n; ++i) group[i] = sets.find(i);
  return relabel(group);
}

// Agglomerative complete linkage over distinct points. Cluster identity is
// the smallest member index, so the (distance, i, j) ordering below is the
// documented tie-break.
std::vector<std::size_t> complete_linkage_roots(std::span<const Point> pts, double height) {
  const std::size_t n = pts.size();
  if (n > kMaxCompleteLinkagePoints)
    throw Error("complete linkage sub-problem of " + std::to_string(n) +
                " points exceeds the limit of " + std::to_string(kMaxCompleteLinkagePoints));
  std::vector<std::size_t> root(n);
  std::iota(root.begin(), root.end(), 0);
  if (n < 2) return root;

  // Full square matrix; sub-problems are local neighbourhoods.
  std::vector<double> dist(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      dist[i * n + j] = dist[j * n + i] = geom::distance(pts[i], pts[j]);

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<bool> active(n, true);
  std::vector<std::size_t> nn(n, n);
  std::vector<double> nn_dist(n, inf);

  auto refresh = [&](std::size_t i) {
    nn[i] = n;
    nn_dist[i] = inf;
    for (std::size_t j = i + 1; j < n; ++j) {
      if (!active[j]) continue;
      if (dist[i * n + j] < nn_dist[i]) {
        nn_dist[i] = dist[i * n + j];
        nn[i] = j;
      }
    }
  };
  for (std::size_t i = 0; i < n; ++i) refresh(i);

  for (;;) {
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i] || nn[i] == n) continue;
      if (best == n || nn_dist[i] < nn_dist[best]) best = i;
    }
    if (best == n || nn_dist[best] > height) break;
    const std::size_t i = best;
    const std::size_t j = nn[i];
    for (std::size_t k = 0; k < n; ++k) {
      if (!active[k] || k == i || k == j) continue;
      const double d = std::max(dist[i * n + k], dist[j * n + k]);
      dist[i * n + k] = dist[k * n + i] = d;
    }
    active[j] = false;
    root[j] = i;
    refresh(i);
    for (std::size_t k = 0; k < j; ++k) {
      if (!active[k] || k == i) continue;
      if (nn[k] == i || nn[k] == j) refresh(k);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = i;
    while (root[r] != r) r = root[r];
    root[i] = r;
  }
  return root;
}

ClusterLabels complete_linkage_cut(std::span<const Point> points, double height) {
  // Coincident points merge first at height zero, so clustering the distinct
  // points gives the same partition.
  std::vector<Point> distinct;
  std::vector<std::size_t> slot(points.size());
  std::unordered_map<geom::PointKey, std::size_t, geom::PointKeyHash> index;
  for (std::size_t i = 0; i < points.size(); ++i) {
    auto [it, inserted] = index.try_emplace(geom::key_of(points[i]), distinct.size());
    if (inserted) distinct.push_back(points[i]);
    slot[i] = it->second;
  }
  const std::vector<std::size_t> root = complete_linkage_roots(distinct, height);
  std::vector<std::size_t> group(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) group[i] = root[slot[i]];
  return relabel(group);
}

}  // namespace

ClusterLabels hclust_cut(std::span<const Point> points, Linkage linkage, double height) {
  if (points.empty()) throw Error("cannot cluster an empty point set");
  if (height < 0.0 || std::isnan(height)) throw Error("cut height must be non-negative");
  return linkage == Linkage::single ? single_linkage_cut(points, height)
                                    : complete_linkage_cut(points, height);
}

ClusterLabels nested_two_pass(std::span<const Point> points, double height, unsigned threads) {
  const ClusterLabels single = hclust_cut(points, Linkage::single, height);
  std::vector<std::vector<std::size_t>> members(single.count);
  for (std::size_t i = 0; i < points.size(); ++i) members[single.labels[i]].push_back(i);

  std::vector<ClusterLabels> inner(single.count);
  parallel_for(single.count, threads, [&](std::size_t c) {
    std::vector<Point> sub;
    sub.reserve(members[c].size());
    for (std::size_t i : members[c]) sub.push_back(points[i]);
    inner[c] = hclust_cut(sub, Linkage::complete, height);
  });

  // Compose (single label, complete label) into one id, then renumber.
  std::vector<std::size_t> offset(single.count + 1, 0);
  for (std::size_t c = 0; c < single.count; ++c) offset[c + 1] = offset[c] + inner[c].count;
  std::vector<std::size_t> group(points.size());
  for (std::size_t c = 0; c < single.count; ++c)
    for (std::size_t k = 0; k < members[c].size(); ++k)
      group[members[c][k]] = offset[c] + inner[c].labels[k];
  return relabel(group);
}

}  // namespace flowmap::cluster
