#include "flowmap/netgraph.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <queue>
#include <unordered_set>

#include "flowmap/error.hpp"

namespace flowmap::netgraph {

using flow::FlowLine;
using geom::LineString;
using geom::Point;
using geom::PointKey;

NetworkGraph::NetworkGraph(std::span<const FlowLine> lines) {
  edges_.reserve(lines.size());
  for (const FlowLine& fl : lines) {
    const std::size_t from = intern(fl.line.front());
    const std::size_t to = intern(fl.line.back());
    const std::size_t id = edges_.size();
    edges_.push_back({from, to, fl});
    adjacency_[from].push_back(id);
    adjacency_[to].push_back(id);
  }
}

std::size_t NetworkGraph::intern(Point p) {
  auto [it, inserted] = index_.try_emplace(geom::key_of(p), nodes_.size());
  if (inserted) {
    nodes_.push_back(p);
    adjacency_.emplace_back();
  }
  return it->second;
}

std::size_t NetworkGraph::find_node(Point p) const {
  auto it = index_.find(geom::key_of(p));
  return it == index_.end() ? nodes_.size() : it->second;
}

namespace {

constexpr double kNodingTolerance = 1e-6;

struct SegmentRef {
  std::size_t line;
  std::size_t index;
  Point a, b;
  geom::BBox box;
};

struct Insertion {
  double t;
  Point p;
};

class SegmentGrid {
 public:
  SegmentGrid(const std::vector<SegmentRef>& segs, double cell) : cell_(cell) {
    for (std::size_t s = 0; s < segs.size(); ++s) {
      const auto [x0, y0, x1, y1] = range(segs[s].box);
      for (std::int64_t x = x0; x <= x1; ++x)
        for (std::int64_t y = y0; y <= y1; ++y) cells_[{x, y}].push_back(s);
    }
  }

  std::array<std::int64_t, 4> range(const geom::BBox& b) const {
    return {cell(b.min_x), cell(b.min_y), cell(b.max_x), cell(b.max_y)};
  }
  const std::map<PointKey, std::vector<std::size_t>>& cells() const { return cells_; }

 private:
  std::int64_t cell(double v) const { return static_cast<std::int64_t>(std::floor(v / cell_)); }

  double cell_;
  std::map<PointKey, std::vector<std::size_t>> cells_;
};

// Inserts into `b` every endpoint of `a` lying on the interior of `b`.
bool endpoint_contacts(const SegmentRef& a, const SegmentRef& b, std::vector<Insertion>& into_b) {
  bool found = false;
  const PointKey kb0 = geom::key_of(b.a), kb1 = geom::key_of(b.b);
  for (const Point e : {a.a, a.b}) {
    const PointKey ke = geom::key_of(e);
    if (ke == kb0 || ke == kb1) continue;
    double t = 0.0;
    const Point c = geom::closest_on_segment(e, b.a, b.b, &t);
    if (geom::distance(c, e) <= kNodingTolerance) {
      into_b.push_back({t, e});
      found = true;
    }
  }
  return found;
}

std::vector<LineString> node_lines(const std::vector<LineString>& lines) {
  std::vector<SegmentRef> segs;
  double total = 0.0;
  for (std::size_t l = 0; l < lines.size(); ++l) {
    const auto& pts = lines[l].points();
    for (std::size_t i = 1; i < pts.size(); ++i) {
      const Point a = pts[i - 1], b = pts[i];
      const std::array<Point, 2> ends{a, b};
      segs.push_back({l, i - 1, a, b, geom::bbox_of(ends).expanded(kNodingTolerance)});
      total += geom::distance(a, b);
    }
  }
  if (segs.empty()) return lines;
  const double cell = std::clamp(total / static_cast<double>(segs.size()), 1.0, 500.0);
  const SegmentGrid grid(segs, cell);

  std::vector<std::vector<Insertion>> inserts(segs.size());
  for (const auto& [cell_key, members] : grid.cells()) {
    for (std::size_t i = 0; i < members.size(); ++i) {
      for (std::size_t j = i + 1; j < members.size(); ++j) {
        const SegmentRef& s1 = segs[members[i]];
        const SegmentRef& s2 = segs[members[j]];
        if (!s1.box.intersects(s2.box)) continue;
        // Visit each pair once: in the lowest cell shared by both boxes.
        const auto r1 = grid.range(s1.box);
        const auto r2 = grid.range(s2.box);
        if (cell_key.x != std::max(r1[0], r2[0]) || cell_key.y != std::max(r1[1], r2[1]))
          continue;

        bool touched = endpoint_contacts(s1, s2, inserts[members[j]]);
        touched = endpoint_contacts(s2, s1, inserts[members[i]]) || touched;
        if (touched) continue;

        const PointKey k1a = geom::key_of(s1.a), k1b = geom::key_of(s1.b);
        const PointKey k2a = geom::key_of(s2.a), k2b = geom::key_of(s2.b);
        if (k1a == k2a || k1a == k2b || k1b == k2a || k1b == k2b) continue;
        const Point r = s1.b - s1.a, s = s2.b - s2.a;
        const double o1 = geom::cross(r, s2.a - s1.a), o2 = geom::cross(r, s2.b - s1.a);
        const double o3 = geom::cross(s, s1.a - s2.a), o4 = geom::cross(s, s1.b - s2.a);
        if (!((o1 < 0 && o2 > 0) || (o1 > 0 && o2 < 0))) continue;
        if (!((o3 < 0 && o4 > 0) || (o3 > 0 && o4 < 0))) continue;
        const auto hits = geom::intersect_segments(s1.a, s1.b, s2.a, s2.b);
        if (hits.empty()) continue;
        const Point p = geom::snap(hits.front().point);
        const PointKey kp = geom::key_of(p);
        if (kp != k1a && kp != k1b) inserts[members[i]].push_back({hits.front().t, p});
        if (kp != k2a && kp != k2b) inserts[members[j]].push_back({hits.front().u, p});
      }
    }
  }

  std::vector<std::vector<Point>> rebuilt(lines.size());
  for (std::size_t s = 0; s < segs.size(); ++s) {
    auto& out = rebuilt[segs[s].line];
    if (out.empty()) out.push_back(segs[s].a);
    auto& ins = inserts[s];
    std::sort(ins.begin(), ins.end(), [](const Insertion& x, const Insertion& y) {
      if (x.t != y.t) return x.t < y.t;
      return geom::key_of(x.p) < geom::key_of(y.p);
    });
    for (const Insertion& in : ins) out.push_back(in.p);
    out.push_back(segs[s].b);
  }
  std::vector<LineString> result;
  result.reserve(lines.size());
  for (auto& pts : rebuilt) result.push_back(*LineString::try_make(std::move(pts)));
  return result;
}

}  // namespace

std::vector<FlowLine> split_nodes(std::span<const FlowLine> lines, SplitMode mode) {
  std::vector<LineString> geoms;
  std::vector<std::int64_t> flows;
  for (const FlowLine& fl : lines) {
    std::vector<Point> pts;
    for (const Point& p : fl.line.points()) pts.push_back(geom::snap(p));
    if (auto line = LineString::try_make(std::move(pts))) {
      geoms.push_back(std::move(*line));
      flows.push_back(fl.flow);
    }
  }
  if (mode == SplitMode::unary) geoms = node_lines(geoms);

  std::unordered_map<PointKey, std::size_t, geom::PointKeyHash> count;
  for (const LineString& g : geoms)
    for (const Point& p : g.points()) ++count[geom::key_of(p)];

  std::vector<FlowLine> out;
  for (std::size_t l = 0; l < geoms.size(); ++l) {
    const auto& pts = geoms[l].points();
    std::vector<Point> piece{pts[0]};
    for (std::size_t i = 1; i < pts.size(); ++i) {
      piece.push_back(pts[i]);
      const bool last = i + 1 == pts.size();
      if (last || count[geom::key_of(pts[i])] >= 2) {
        out.push_back({flows[l], LineString(piece)});
        piece.assign(1, pts[i]);
      }
    }
  }
  return out;
}

std::vector<KEdgePath> k_edge_paths(const NetworkGraph& g, int k) {
  if (k < 1 || k > kMaxPathEdges)
    throw Error("k must be in 1.." + std::to_string(kMaxPathEdges));

  auto finish = [&](KEdgePath& path) {
    std::vector<std::int64_t> flows;
    std::vector<double> lengths;
    path.length = 0.0;
    for (std::size_t e : path.edges) {
      const double len = g.edge(e).line.length();
      flows.push_back(g.edge(e).line.flow);
      lengths.push_back(len);
      path.length += len;
    }
    path.flow = flow::weighted_mean_flow(flows, lengths);
  };

  std::vector<KEdgePath> out;
  if (k == 1) {
    for (std::size_t e = 0; e < g.edge_count(); ++e) {
      KEdgePath p{{e}, {g.edge(e).from, g.edge(e).to}};
      finish(p);
      out.push_back(std::move(p));
    }
    return out;
  }

  using Key = std::array<std::size_t, kMaxPathEdges>;
  struct KeyHash {
    std::size_t operator()(const Key& key) const noexcept {
      std::size_t h = 1469598103934665603ULL;
      for (std::size_t v : key) h = (h ^ v) * 1099511628211ULL;
      return h;
    }
  };
  std::unordered_set<Key, KeyHash> seen;
  const auto depth = static_cast<std::size_t>(k);

  std::vector<std::size_t> edges, nodes;
  auto emit = [&] {
    Key fwd, rev;
    fwd.fill(std::numeric_limits<std::size_t>::max());
    rev = fwd;
    for (std::size_t i = 0; i < depth; ++i) {
      fwd[i] = edges[i];
      rev[i] = edges[depth - 1 - i];
    }
    const bool reverse = rev < fwd;
    if (!seen.insert(reverse ? rev : fwd).second) return;
    if (seen.size() > kMaxEnumeratedPaths)
      throw Error("k-edge path enumeration exceeds " + std::to_string(kMaxEnumeratedPaths) +
                  " paths");
    KEdgePath p;
    p.edges = edges;
    p.nodes = nodes;
    if (reverse) {
      std::reverse(p.edges.begin(), p.edges.end());
      std::reverse(p.nodes.begin(), p.nodes.end());
    }
    finish(p);
    out.push_back(std::move(p));
  };

  auto extend = [&](auto&& self) -> void {
    if (edges.size() == depth) {
      emit();
      return;
    }
    const std::size_t at = nodes.back();
    const auto& around = g.incident(at);
    for (std::size_t i = 0; i < around.size(); ++i) {
      const std::size_t e = around[i];
      // A self-loop is listed twice; take it once.
      if (i > 0 && around[i - 1] == e) continue;
      if (std::find(edges.begin(), edges.end(), e) != edges.end()) continue;
      edges.push_back(e);
      nodes.push_back(g.other_end(e, at));
      self(self);
      edges.pop_back();
      nodes.pop_back();
    }
  };
  for (std::size_t s = 0; s < g.node_count(); ++s) {
    nodes.assign(1, s);
    edges.clear();
    extend(extend);
  }
  return out;
}

LineString path_geometry(const NetworkGraph& g, const KEdgePath& path) {
  std::vector<Point> pts;
  for (std::size_t i = 0; i < path.edges.size(); ++i) {
    const auto& edge = g.edge(path.edges[i]);
    const auto& src = edge.line.line.points();
    const bool forward = edge.from == path.nodes[i];
    const std::size_t skip = pts.empty() ? 0 : 1;
    if (forward) {
      pts.insert(pts.end(), src.begin() + static_cast<std::ptrdiff_t>(skip), src.end());
    } else {
      pts.insert(pts.end(), src.rbegin() + static_cast<std::ptrdiff_t>(skip), src.rend());
    }
  }
  auto line = LineString::try_make(std::move(pts));
  if (!line) throw GeometryError("degenerate path geometry");
  return *line;
}

std::vector<std::size_t> shortest_node_path(const NetworkGraph& g, std::size_t a, std::size_t b,
                                            std::vector<std::size_t>* edge_ids) {
  const std::size_t n = g.node_count();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(n, inf);
  std::vector<std::size_t> prev(n, n), prev_edge(n, g.edge_count());
  std::vector<bool> settled(n, false);

  auto chain_keys = [&](std::size_t v) {
    std::vector<PointKey> keys;
    for (std::size_t u = v; u != n; u = prev[u]) keys.push_back(geom::key_of(g.node(u)));
    std::reverse(keys.begin(), keys.end());
    return keys;
  };

  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  dist[a] = 0.0;
  queue.push({0.0, a});
  while (!queue.empty()) {
    const auto [d, u] = queue.top();
    queue.pop();
    if (settled[u]) continue;
    settled[u] = true;
    if (u == b) break;
    for (std::size_t e : g.incident(u)) {
      const std::size_t v = g.other_end(e, u);
      if (settled[v]) continue;
      const double nd = d + g.edge(e).line.length();
      const double tol = 1e-9 * std::max(1.0, nd);
      if (nd < dist[v] - tol) {
        dist[v] = nd;
        prev[v] = u;
        prev_edge[v] = e;
        queue.push({nd, v});
      } else if (std::abs(nd - dist[v]) <= tol && prev[v] != u) {
        std::vector<PointKey> mine = chain_keys(u);
        mine.push_back(geom::key_of(g.node(v)));
        if (mine < chain_keys(v)) {
          prev[v] = u;
          prev_edge[v] = e;
        }
      }
    }
  }
  if (!settled[b]) return {};
  std::vector<std::size_t> path;
  std::vector<std::size_t> used;
  for (std::size_t v = b; v != n; v = prev[v]) {
    path.push_back(v);
    if (v != a) used.push_back(prev_edge[v]);
  }
  std::reverse(path.begin(), path.end());
  std::reverse(used.begin(), used.end());
  if (edge_ids) *edge_ids = std::move(used);
  return path;
}

LineString shortest_path(const NetworkGraph& g, Point a, Point b) {
  const std::size_t na = g.find_node(a);
  const std::size_t nb = g.find_node(b);
  if (na == g.node_count() || nb == g.node_count())
    throw Error("shortest path endpoints must be graph nodes");
  if (na == nb) throw Error("shortest path between identical nodes is degenerate");
  std::vector<std::size_t> edge_ids;
  const std::vector<std::size_t> nodes = shortest_node_path(g, na, nb, &edge_ids);
  if (nodes.empty()) throw Error("shortest path endpoints are disconnected");
  KEdgePath path{edge_ids, nodes};
  return path_geometry(g, path);
}

std::vector<KEdgePath> greedy_disjoint(std::span<const KEdgePath> paths) {
  std::unordered_set<std::size_t> used;
  std::vector<KEdgePath> kept;
  for (const KEdgePath& p : paths) {
    const bool clash =
        std::any_of(p.edges.begin(), p.edges.end(), [&](std::size_t e) { return used.count(e); });
    if (clash) continue;
    used.insert(p.edges.begin(), p.edges.end());
    kept.push_back(p);
  }
  return kept;
}

void sort_by_priority(std::vector<KEdgePath>& paths) {
  std::stable_sort(paths.begin(), paths.end(), [](const KEdgePath& a, const KEdgePath& b) {
    if (a.flow != b.flow) return a.flow > b.flow;
    if (a.length != b.length) return a.length > b.length;
    return a.edges < b.edges;
  });
}

}  // namespace flowmap::netgraph
