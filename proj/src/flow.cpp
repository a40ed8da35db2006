#include "flowmap/flow.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "flowmap/error.hpp"

namespace flowmap::flow {

using geom::LineString;
using geom::Point;
using geom::PointKey;

namespace {

Point point_of(PointKey k) {
  return {static_cast<double>(k.x) * geom::kGridStep, static_cast<double>(k.y) * geom::kGridStep};
}

std::vector<PointKey> keys_of(const LineString& line) {
  std::vector<PointKey> keys;
  keys.reserve(line.size());
  for (const Point& p : line.points()) keys.push_back(geom::key_of(p));
  return keys;
}

struct GraphEdge {
  PointKey a, b;
};

struct ChainStep {
  std::size_t edge;
  bool forward;
};

using Chain = std::vector<ChainStep>;
using Incidence = std::map<PointKey, std::vector<std::size_t>>;

Incidence incidence_of(const std::vector<GraphEdge>& edges) {
  Incidence inc;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    inc[edges[e].a].push_back(e);
    inc[edges[e].b].push_back(e);
  }
  return inc;
}

// Decomposes edges into maximal chains whose interior nodes are not breaks.
// Chains start at break nodes in key order; what remains are pure cycles,
// started from their first unvisited edge.
template <typename IsBreak>
std::vector<Chain> build_chains(const std::vector<GraphEdge>& edges, const Incidence& inc,
                                IsBreak is_break) {
  std::vector<bool> visited(edges.size(), false);
  std::vector<Chain> chains;

  auto walk = [&](PointKey start, std::size_t edge) {
    Chain chain;
    PointKey cur = start;
    for (;;) {
      visited[edge] = true;
      const bool forward = edges[edge].a == cur;
      chain.push_back({edge, forward});
      const PointKey next = forward ? edges[edge].b : edges[edge].a;
      if (next == start && !is_break(next)) break;  // closed cycle
      if (is_break(next)) break;
      const auto& around = inc.at(next);
      const std::size_t other = around[0] == edge ? around[1] : around[0];
      if (visited[other]) break;
      cur = next;
      edge = other;
    }
    chains.push_back(std::move(chain));
  };

  for (const auto& [node, around] : inc) {
    if (!is_break(node)) continue;
    for (std::size_t e : around)
      if (!visited[e]) walk(node, e);
  }
  for (std::size_t e = 0; e < edges.size(); ++e)
    if (!visited[e]) walk(edges[e].a, e);
  return chains;
}

struct SortKey {
  std::int64_t flow;
  double length;
  std::vector<PointKey> keys;
};

}  // namespace

LineString canonical(const LineString& line) {
  const auto& pts = line.points();
  const PointKey first = geom::key_of(pts.front());
  const PointKey last = geom::key_of(pts.back());
  if (first != last) return last < first ? line.reversed() : line;
  if (pts.size() > 2 && geom::key_of(pts[pts.size() - 2]) < geom::key_of(pts[1]))
    return line.reversed();
  return line;
}

FlowMap FlowMap::from_lines(std::vector<FlowLine> lines) {
  std::map<std::vector<PointKey>, std::size_t> seen;
  std::vector<FlowLine> merged;
  std::vector<SortKey> sort_keys;
  merged.reserve(lines.size());
  for (FlowLine& fl : lines) {
    if (fl.flow < 1) throw InvariantError("flow line with flow < 1");
    LineString line = canonical(fl.line);
    std::vector<PointKey> keys = keys_of(line);
    auto [it, inserted] = seen.try_emplace(keys, merged.size());
    if (!inserted) {
      merged[it->second].flow += fl.flow;
      continue;
    }
    sort_keys.push_back({0, line.length(), std::move(keys)});
    merged.push_back({fl.flow, std::move(line)});
  }
  for (std::size_t i = 0; i < merged.size(); ++i) sort_keys[i].flow = merged[i].flow;

  std::vector<std::size_t> order(merged.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    const SortKey& a = sort_keys[i];
    const SortKey& b = sort_keys[j];
    if (a.flow != b.flow) return a.flow > b.flow;
    if (a.length != b.length) return a.length > b.length;
    return a.keys < b.keys;
  });
  FlowMap map;
  map.lines_.reserve(merged.size());
  for (std::size_t i : order) map.lines_.push_back(std::move(merged[i]));
  return map;
}

std::int64_t weighted_mean_flow(std::span<const std::int64_t> flows,
                                std::span<const double> lengths) {
  if (flows.empty() || flows.size() != lengths.size())
    throw Error("weighted mean needs one length per flow");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < flows.size(); ++i) {
    num += static_cast<double>(flows[i]) * lengths[i];
    den += lengths[i];
  }
  if (!(den > 0.0)) throw Error("weighted mean over zero total length");
  // Half-up rounding; the small offset absorbs summation noise at .5.
  const auto rounded = static_cast<std::int64_t>(std::floor(num / den + 0.5 + 1e-9));
  return std::max<std::int64_t>(1, rounded);
}

std::int64_t weighted_mean_flow(std::span<const FlowLine> parts) {
  std::vector<std::int64_t> flows;
  std::vector<double> lengths;
  for (const FlowLine& p : parts) {
    flows.push_back(p.flow);
    lengths.push_back(p.length());
  }
  return weighted_mean_flow(flows, lengths);
}

Point AtomicSegment::pa() const { return point_of(a); }
Point AtomicSegment::pb() const { return point_of(b); }

std::vector<AtomicSegment> atomic_segments(std::span<const FlowLine> lines) {
  std::map<std::pair<PointKey, PointKey>, std::int64_t> sums;
  for (const FlowLine& fl : lines) {
    const auto& pts = fl.line.points();
    PointKey prev = geom::key_of(pts[0]);
    for (std::size_t i = 1; i < pts.size(); ++i) {
      const PointKey cur = geom::key_of(pts[i]);
      if (cur == prev) continue;
      sums[std::minmax(prev, cur)] += fl.flow;
      prev = cur;
    }
  }
  std::vector<AtomicSegment> out;
  out.reserve(sums.size());
  for (const auto& [ab, f] : sums) out.push_back({ab.first, ab.second, f});
  return out;
}

FlowMap overline(std::span<const FlowLine> input) {
  const std::vector<AtomicSegment> segs = atomic_segments(input);
  std::vector<GraphEdge> edges;
  edges.reserve(segs.size());
  for (const AtomicSegment& s : segs) edges.push_back({s.a, s.b});
  const Incidence inc = incidence_of(edges);

  auto is_break = [&](PointKey node) {
    const auto& around = inc.at(node);
    return around.size() != 2 || segs[around[0]].flow != segs[around[1]].flow;
  };

  std::vector<FlowLine> out;
  for (const Chain& chain : build_chains(edges, inc, is_break)) {
    std::vector<Point> pts;
    pts.reserve(chain.size() + 1);
    const ChainStep& first = chain.front();
    pts.push_back(first.forward ? segs[first.edge].pa() : segs[first.edge].pb());
    for (const ChainStep& step : chain)
      pts.push_back(step.forward ? segs[step.edge].pb() : segs[step.edge].pa());
    out.push_back({segs[first.edge].flow, LineString(std::move(pts))});
  }
  return FlowMap::from_lines(std::move(out));
}

FlowMap prune_once(const FlowMap& map, std::int64_t f_min) {
  const auto& lines = map.lines();
  std::vector<GraphEdge> edges;
  edges.reserve(lines.size());
  for (const FlowLine& fl : lines)
    edges.push_back({geom::key_of(fl.line.front()), geom::key_of(fl.line.back())});
  Incidence inc = incidence_of(edges);

  // (a) pseudo nodes: join the lines meeting at every degree-2 node.
  auto is_pseudo_break = [&](PointKey node) {
    const auto& around = inc.at(node);
    return around.size() != 2 || around[0] == around[1];
  };
  std::vector<FlowLine> joined;
  for (const Chain& chain : build_chains(edges, inc, is_pseudo_break)) {
    if (chain.size() == 1) {
      joined.push_back(lines[chain.front().edge]);
      continue;
    }
    std::vector<Point> pts;
    std::vector<FlowLine> parts;
    for (const ChainStep& step : chain) {
      const FlowLine& part = lines[step.edge];
      parts.push_back(part);
      const auto& src = part.line.points();
      if (step.forward) {
        pts.insert(pts.end(), src.begin() + (pts.empty() ? 0 : 1), src.end());
      } else {
        pts.insert(pts.end(), src.rbegin() + (pts.empty() ? 0 : 1), src.rend());
      }
    }
    auto line = LineString::try_make(std::move(pts));
    if (!line) throw InvariantError("pseudo-node contraction produced a degenerate line");
    joined.push_back({weighted_mean_flow(parts), std::move(*line)});
  }

  // (b) low-flow self-loops.
  std::vector<FlowLine> kept;
  for (FlowLine& fl : joined)
    if (!(fl.line.is_closed() && fl.flow <= f_min)) kept.push_back(std::move(fl));

  // (c) low-flow leaf edges: exactly one endpoint of degree one.
  std::map<PointKey, std::size_t> degree;
  for (const FlowLine& fl : kept) {
    ++degree[geom::key_of(fl.line.front())];
    ++degree[geom::key_of(fl.line.back())];
  }
  std::vector<FlowLine> out;
  for (FlowLine& fl : kept) {
    const std::size_t da = degree[geom::key_of(fl.line.front())];
    const std::size_t db = degree[geom::key_of(fl.line.back())];
    const bool leaf = (da == 1) != (db == 1);
    if (leaf && fl.flow <= f_min) continue;
    out.push_back(std::move(fl));
  }
  return FlowMap::from_lines(std::move(out));
}

FlowMap prune(const FlowMap& map, std::int64_t f_min, int max_iter, PruneReport* report) {
  if (f_min < 0) throw Error("f_min must be non-negative");
  FlowMap current = map;
  PruneReport local;
  while (local.iterations < max_iter) {
    FlowMap next = prune_once(current, f_min);
    ++local.iterations;
    local.segment_counts.push_back(next.size());
    const bool same = next == current;
    current = std::move(next);
    if (same) {
      local.converged = true;
      break;
    }
  }
  if (report) *report = std::move(local);
  return current;
}

}  // namespace flowmap::flow
