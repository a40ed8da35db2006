#include "flowmap/align.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <unordered_map>

#include "flowmap/cluster.hpp"
#include "flowmap/error.hpp"
#include "flowmap/parallel.hpp"
#include "flowmap/spatial.hpp"

namespace flowmap::align {

using geom::LineString;
using geom::Point;
using geom::PointKey;
using netgraph::KEdgePath;
using netgraph::NetworkGraph;

namespace {

// Projections closer than this to an existing vertex reuse it.
constexpr double kVertexReuse = 2e-6;
// Point-on-line tolerance for contacts.
constexpr double kTouchTolerance = 1e-6;

struct SnapCluster {
  std::vector<std::size_t> members;  // boundary point ids
  Point center;
};

Point weighted_center(const std::vector<std::size_t>& members, std::span<const Point> pts,
                      std::span<const double> weights) {
  double sx = 0.0, sy = 0.0, sw = 0.0;
  for (std::size_t m : members) {
    sx += weights[m] * pts[m].x;
    sy += weights[m] * pts[m].y;
    sw += weights[m];
  }
  return geom::snap({sx / sw, sy / sw});
}

// Nearest point to `c` (approximately) that keeps every member within eps,
// by repeated projection onto the member discs. Empty when the members do not
// fit in one eps disc.
std::optional<Point> constrained_center(const std::vector<std::size_t>& members, std::span<const Point> pts,
                                        Point c, double eps) {
  const double target = eps * (1.0 - 1e-9) - 2e-6;
  for (int it = 0; it < 500; ++it) {
    bool moved = false;
    for (std::size_t m : members) {
      const double d = geom::distance(pts[m], c);
      if (d <= target) continue;
      c = c + ((d - target) / d) * (pts[m] - c);
      moved = true;
    }
    if (!moved) break;
  }
  c = geom::snap(c);
  for (std::size_t m : members)
    if (geom::distance(pts[m], c) > eps) return std::nullopt;
  return c;
}

// Resolves every pair of centres lying within eps of each other, so that a
// second snap sees only isolated centres. The pair is merged when the merged
// centre keeps every member within eps; otherwise the members too far from it
// are split off (farthest first) into clusters of coincident points. When the
// weighted centroid is out of reach of some member but the members still fit
// in one eps disc, the centre is pulled into that disc instead.
void consolidate(std::vector<SnapCluster>& clusters, std::span<const Point> pts,
                 std::span<const double> weights, double eps) {
  const std::size_t max_rounds = 8 * (clusters.size() + 1);
  for (std::size_t round = 0; round < max_rounds; ++round) {
    BoxGrid grid(eps);
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      const Point p = clusters[c].center;
      grid.insert(c, {p.x, p.y, p.x, p.y});
    }
    struct Pair {
      double d;
      std::size_t a, b;
    };
    std::vector<Pair> pairs;
    for (std::size_t a = 0; a < clusters.size(); ++a) {
      const Point p = clusters[a].center;
      for (std::size_t b : grid.query(geom::BBox{p.x, p.y, p.x, p.y}.expanded(eps))) {
        if (b <= a) continue;
        const double d = geom::distance(p, clusters[b].center);
        if (d <= eps) pairs.push_back({d, a, b});
      }
    }
    if (pairs.empty()) return;
    std::sort(pairs.begin(), pairs.end(), [](const Pair& x, const Pair& y) {
      if (x.d != y.d) return x.d < y.d;
      if (x.a != y.a) return x.a < y.a;
      return x.b < y.b;
    });
    std::vector<bool> touched(clusters.size(), false);
    std::vector<SnapCluster> split_off;
    for (const Pair& pr : pairs) {
      if (touched[pr.a] || touched[pr.b]) continue;
      touched[pr.a] = touched[pr.b] = true;
      std::vector<std::size_t> all = clusters[pr.a].members;
      all.insert(all.end(), clusters[pr.b].members.begin(), clusters[pr.b].members.end());
      std::sort(all.begin(), all.end());
      Point c = weighted_center(all, pts, weights);
      std::vector<std::size_t> evicted;
      for (;;) {
        auto far = std::max_element(all.begin(), all.end(), [&](std::size_t x, std::size_t y) {
          return geom::distance(pts[x], c) < geom::distance(pts[y], c);
        });
        if (geom::distance(pts[*far], c) <= eps) break;
        if (auto inside = constrained_center(all, pts, c, eps)) {
          c = *inside;
          break;
        }
        evicted.push_back(*far);
        all.erase(far);
        c = weighted_center(all, pts, weights);
      }
      clusters[pr.a].members = std::move(all);
      clusters[pr.a].center = c;
      clusters[pr.b].members.clear();
      std::map<PointKey, std::vector<std::size_t>> at;
      for (std::size_t m : evicted) at[geom::key_of(pts[m])].push_back(m);
      for (auto& [key, members] : at) {
        std::sort(members.begin(), members.end());
        split_off.push_back({members, geom::snap(pts[members.front()])});
      }
    }
    std::erase_if(clusters, [](const SnapCluster& c) { return c.members.empty(); });
    for (SnapCluster& c : split_off) clusters.push_back(std::move(c));
  }
}

}  // namespace

std::vector<std::vector<Point>> snapped_vertices(const FlowMap& map, double eps_s, unsigned threads) {
  if (!(eps_s > 0.0)) throw Error("snap tolerance must be positive");
  const auto& lines = map.lines();
  std::vector<Point> pts;
  std::vector<double> weights;
  pts.reserve(2 * lines.size());
  for (const FlowLine& fl : lines) {
    pts.push_back(fl.line.front());
    pts.push_back(fl.line.back());
    weights.push_back(static_cast<double>(fl.flow));
    weights.push_back(static_cast<double>(fl.flow));
  }
  const cluster::ClusterLabels labels = cluster::nested_two_pass(pts, eps_s, threads);
  std::vector<SnapCluster> clusters(labels.count);
  for (std::size_t i = 0; i < pts.size(); ++i) clusters[labels.labels[i]].members.push_back(i);
  for (SnapCluster& c : clusters) c.center = weighted_center(c.members, pts, weights);
  consolidate(clusters, pts, weights, eps_s);

  std::vector<std::size_t> owner(pts.size());
  for (std::size_t c = 0; c < clusters.size(); ++c)
    for (std::size_t m : clusters[c].members) owner[m] = c;

  std::vector<std::vector<Point>> out;
  out.reserve(lines.size());
  for (std::size_t l = 0; l < lines.size(); ++l) {
    const Point cs = clusters[owner[2 * l]].center;
    const Point ce = clusters[owner[2 * l + 1]].center;
    std::vector<Point> moved = lines[l].line.points();
    for (std::size_t i = 1; i + 1 < moved.size(); ++i) {
      const double ds = geom::distance(moved[i], cs);
      const double de = geom::distance(moved[i], ce);
      if (ds <= eps_s && ds <= de) {
        moved[i] = cs;
      } else if (de <= eps_s) {
        moved[i] = ce;
      }
    }
    moved.front() = cs;
    moved.back() = ce;
    out.push_back(std::move(moved));
  }
  return out;
}

FlowMap snap_nodes(const FlowMap& map, double eps_s, unsigned threads) {
  if (map.empty()) return map;
  std::vector<std::vector<Point>> moved = snapped_vertices(map, eps_s, threads);
  std::vector<FlowLine> out;
  out.reserve(moved.size());
  for (std::size_t l = 0; l < moved.size(); ++l)
    if (auto line = LineString::try_make(std::move(moved[l]))) out.push_back({map[l].flow, std::move(*line)});
  return FlowMap::from_lines(std::move(out));
}

bool is_blend_candidate(const FlowLine& ref, const FlowLine& cand, double eps) {
  if (cand.flow > ref.flow) return false;
  if (!ref.line.bbox().expanded(eps).contains(cand.line.bbox())) return false;
  return geom::buffer_flat(ref.line, eps).contains(cand.line);
}

BlendResult line_blend(const LineString& reference, std::span<const FlowLine> candidates) {
  const auto& ref = reference.points();
  struct Insert {
    double along;
    Point p;
  };
  std::vector<std::vector<Insert>> inserts(ref.size() - 1);
  // Target point for every candidate vertex, in candidate order.
  std::vector<std::vector<Point>> targets(candidates.size());

  for (std::size_t c = 0; c < candidates.size(); ++c) {
    for (const Point& v : candidates[c].line.points()) {
      const geom::LinePosition pos = geom::project_onto(reference, v);
      const Point a = ref[pos.segment], b = ref[pos.segment + 1];
      Point p = geom::snap(pos.point);
      if (geom::distance(p, a) <= kVertexReuse) {
        p = a;
      } else if (geom::distance(p, b) <= kVertexReuse) {
        p = b;
      } else {
        inserts[pos.segment].push_back({geom::distance(a, p), p});
      }
      targets[c].push_back(p);
    }
  }

  std::vector<Point> refined;
  std::vector<std::size_t> anchors;
  anchors.reserve(ref.size());
  // Inserted points that were merged into a neighbour map onto it.
  std::unordered_map<PointKey, Point, geom::PointKeyHash> remap;
  for (std::size_t i = 0; i + 1 < ref.size(); ++i) {
    anchors.push_back(refined.size());
    refined.push_back(ref[i]);
    auto& ins = inserts[i];
    std::sort(ins.begin(), ins.end(), [](const Insert& x, const Insert& y) {
      if (x.along != y.along) return x.along < y.along;
      return geom::key_of(x.p) < geom::key_of(y.p);
    });
    for (const Insert& in : ins) {
      const Point last = refined.back();
      if (geom::distance(last, in.p) <= kVertexReuse) {
        if (!geom::same_point(last, in.p)) remap.emplace(geom::key_of(in.p), last);
        continue;
      }
      if (geom::distance(ref[i + 1], in.p) <= kVertexReuse) {
        remap.emplace(geom::key_of(in.p), ref[i + 1]);
        continue;
      }
      refined.push_back(in.p);
    }
  }
  anchors.push_back(refined.size());
  refined.push_back(ref.back());
  BlendResult result{LineString(refined), {}, {}, std::move(anchors)};

  std::vector<FlowLine> pieces;
  pieces.reserve(refined.size() - 1);
  for (std::size_t i = 0; i + 1 < refined.size(); ++i)
    pieces.push_back({1, LineString({refined[i], refined[i + 1]})});
  const NetworkGraph graph(pieces);

  auto resolve = [&](Point p) {
    auto it = remap.find(geom::key_of(p));
    return it == remap.end() ? p : it->second;
  };
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const Point s = resolve(targets[c].front());
    const Point e = resolve(targets[c].back());
    if (geom::same_point(s, e)) {
      result.dropped.push_back(c);
      continue;
    }
    result.candidates.push_back({candidates[c].flow, netgraph::shortest_path(graph, s, e)});
  }
  return result;
}

namespace {

// Inserts p into the reference edge closest to it unless a vertex is already
// within reuse distance; returns the point the contact should move to.
Point attach_to_reference(std::vector<FlowLine>& reference, Point p) {
  std::size_t best_edge = 0;
  geom::LinePosition best;
  best.distance = std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e < reference.size(); ++e) {
    const geom::LinePosition pos = geom::project_onto(reference[e].line, p);
    if (pos.distance < best.distance - 1e-12) {
      best = pos;
      best_edge = e;
    }
  }
  auto pts = reference[best_edge].line.points();
  const Point target = geom::snap(best.point);
  const Point a = pts[best.segment], b = pts[best.segment + 1];
  if (geom::distance(target, a) <= kVertexReuse) return a;
  if (geom::distance(target, b) <= kVertexReuse) return b;
  pts.insert(pts.begin() + static_cast<std::ptrdiff_t>(best.segment) + 1, target);
  reference[best_edge].line = LineString(std::move(pts));
  return target;
}

std::vector<Point> boundary_points(std::span<const FlowLine> lines) {
  std::vector<Point> out;
  std::vector<PointKey> seen;
  for (const FlowLine& fl : lines) {
    for (const Point p : {fl.line.front(), fl.line.back()}) {
      const PointKey k = geom::key_of(p);
      if (std::find(seen.begin(), seen.end(), k) != seen.end()) continue;
      seen.push_back(k);
      out.push_back(p);
    }
  }
  return out;
}

// Moves every contact of one touching line; nullopt if it degenerates.
std::optional<FlowLine> snap_one(std::vector<FlowLine>& reference, std::span<const Point> contacts,
                                 FlowLine touching, double eps_s) {
  const Point start = reference.front().line.front();
  const Point end = reference.back().line.back();
  for (const Point& b : contacts) {
    if (geom::distance_to_line(touching.line, b) > kTouchTolerance) continue;
    const double ds = geom::distance(b, start);
    const double de = geom::distance(b, end);
    Point target;
    if (ds <= eps_s && ds <= de) {
      target = start;
    } else if (de <= eps_s && de <= ds) {
      target = end;
    } else {
      target = attach_to_reference(reference, b);
    }
    std::vector<Point> pts = touching.line.points();
    const PointKey kb = geom::key_of(b);
    bool replaced = false;
    for (Point& v : pts) {
      if (geom::key_of(v) == kb || geom::distance(v, b) <= kTouchTolerance) {
        v = target;
        replaced = true;
      }
    }
    if (!replaced) {
      const geom::LinePosition pos = geom::project_onto(touching.line, b);
      pts.insert(pts.begin() + static_cast<std::ptrdiff_t>(pos.segment) + 1, target);
    }
    auto line = LineString::try_make(std::move(pts));
    if (!line) return std::nullopt;
    touching.line = std::move(*line);
  }
  return touching;
}

}  // namespace

std::vector<FlowLine> snap_cand_touch(std::vector<FlowLine>& reference,
                                      std::span<const FlowLine> candidates,
                                      std::span<const FlowLine> touching, double eps_s) {
  if (reference.empty()) throw Error("empty reference");
  const std::vector<Point> contacts = boundary_points(candidates);
  std::vector<FlowLine> out;
  for (const FlowLine& t : touching)
    if (auto snapped = snap_one(reference, contacts, t, eps_s)) out.push_back(std::move(*snapped));
  return out;
}

std::vector<BlendGroup> blend_priority(const FlowMap& map, int k, double eps) {
  if (!(eps > 0.0)) throw Error("blend tolerance must be positive");
  const auto& lines = map.lines();
  const NetworkGraph graph(lines);
  std::vector<KEdgePath> paths = netgraph::k_edge_paths(graph, k);
  netgraph::sort_by_priority(paths);
  if (k > 1) paths = netgraph::greedy_disjoint(paths);

  BoxGrid index(std::max(4.0 * eps, 25.0));
  for (std::size_t i = 0; i < lines.size(); ++i) index.insert(i, lines[i].line.bbox());

  enum class Role { none, reference, candidate, touching };
  std::vector<Role> role(lines.size(), Role::none);
  std::vector<BlendGroup> groups;

  for (const KEdgePath& path : paths) {
    const bool free = std::all_of(path.edges.begin(), path.edges.end(),
                                  [&](std::size_t e) { return role[e] == Role::none; });
    if (!free) continue;
    const FlowLine ref{path.flow, netgraph::path_geometry(graph, path)};
    const geom::FlatCapBuffer buffer = geom::buffer_flat(ref.line, eps);
    const geom::BBox box = buffer.bbox();

    BlendGroup group;
    for (std::size_t i : index.query(box)) {
      if (role[i] != Role::none) continue;
      if (std::find(path.edges.begin(), path.edges.end(), i) != path.edges.end()) continue;
      const FlowLine& cand = lines[i];
      if (cand.flow > ref.flow || !box.contains(cand.line.bbox())) continue;
      if (!buffer.contains(cand.line)) continue;
      group.candidate_ids.push_back(i);
    }
    if (group.candidate_ids.empty()) continue;

    for (std::size_t e : path.edges) role[e] = Role::reference;
    for (std::size_t i : group.candidate_ids) role[i] = Role::candidate;

    const PointKey ref_start = geom::key_of(ref.line.front());
    const PointKey ref_end = geom::key_of(ref.line.back());
    std::vector<Point> contacts;
    for (std::size_t i : group.candidate_ids) {
      for (const Point p : {lines[i].line.front(), lines[i].line.back()}) {
        const PointKey kp = geom::key_of(p);
        // Contacts at the reference ends never move.
        if (kp == ref_start || kp == ref_end) continue;
        contacts.push_back(p);
      }
    }
    for (const Point& p : contacts) {
      const geom::BBox pb = geom::BBox{p.x, p.y, p.x, p.y}.expanded(kTouchTolerance);
      for (std::size_t i : index.query(pb)) {
        if (role[i] != Role::none && role[i] != Role::touching) continue;
        if (geom::distance_to_line(lines[i].line, p) > kTouchTolerance) continue;
        if (std::find(group.touching_ids.begin(), group.touching_ids.end(), i) !=
            group.touching_ids.end())
          continue;
        group.touching_ids.push_back(i);
        role[i] = Role::touching;
      }
    }
    std::sort(group.touching_ids.begin(), group.touching_ids.end());

    group.reference = path;
    for (std::size_t j = 0; j < path.edges.size(); ++j) {
      const auto& edge = graph.edge(path.edges[j]);
      FlowLine oriented = edge.line;
      if (edge.from != path.nodes[j]) oriented.line = oriented.line.reversed();
      group.reference_edges.push_back(std::move(oriented));
    }
    for (std::size_t i : group.candidate_ids) group.candidates.push_back(lines[i]);
    for (std::size_t i : group.touching_ids) group.touching.push_back(lines[i]);
    groups.push_back(std::move(group));
  }
  return groups;
}

namespace {

struct GroupOutcome {
  std::vector<FlowLine> reference;          // aggregated reference edges
  std::vector<FlowLine> kept;               // dropped candidates, carried over
  std::vector<FlowLine> blended_candidates; // original geometry of the blended ones
};

GroupOutcome blend_group(const BlendGroup& group) {
  LineString ref_geom = group.reference_edges.front().line;
  if (group.reference_edges.size() > 1) {
    std::vector<Point> pts;
    for (const FlowLine& e : group.reference_edges) {
      const auto& src = e.line.points();
      pts.insert(pts.end(), src.begin() + (pts.empty() ? 0 : 1), src.end());
    }
    ref_geom = LineString(std::move(pts));
  }
  const BlendResult blended = line_blend(ref_geom, group.candidates);

  // Vertex index where each reference edge starts in the unrefined geometry.
  std::vector<std::size_t> bounds{0};
  for (const FlowLine& e : group.reference_edges) bounds.push_back(bounds.back() + e.line.size() - 1);

  std::vector<FlowLine> refined_edges;
  const auto& rp = blended.reference.points();
  for (std::size_t j = 0; j < group.reference_edges.size(); ++j) {
    const std::size_t lo = blended.anchors[bounds[j]];
    const std::size_t hi = blended.anchors[bounds[j + 1]];
    std::vector<Point> sub(rp.begin() + static_cast<std::ptrdiff_t>(lo),
                           rp.begin() + static_cast<std::ptrdiff_t>(hi) + 1);
    refined_edges.push_back({group.reference_edges[j].flow, LineString(std::move(sub))});
  }

  std::vector<FlowLine> all = refined_edges;
  all.insert(all.end(), blended.candidates.begin(), blended.candidates.end());
  std::map<std::pair<PointKey, PointKey>, std::int64_t> sums;
  for (const flow::AtomicSegment& s : flow::atomic_segments(all)) sums[{s.a, s.b}] = s.flow;

  GroupOutcome out;
  for (FlowLine& edge : refined_edges) {
    std::vector<std::int64_t> flows;
    std::vector<double> lengths;
    const auto& pts = edge.line.points();
    for (std::size_t i = 1; i < pts.size(); ++i) {
      flows.push_back(sums.at(std::minmax(geom::key_of(pts[i - 1]), geom::key_of(pts[i]))));
      lengths.push_back(geom::distance(pts[i - 1], pts[i]));
    }
    edge.flow = flow::weighted_mean_flow(flows, lengths);
    out.reference.push_back(std::move(edge));
  }
  std::vector<bool> dropped(group.candidates.size(), false);
  for (std::size_t d : blended.dropped) dropped[d] = true;
  for (std::size_t c = 0; c < group.candidates.size(); ++c)
    (dropped[c] ? out.kept : out.blended_candidates).push_back(group.candidates[c]);
  return out;
}

}  // namespace

FlowMap lineblend_pass(const FlowMap& map, int k, double eps, double eps_s, unsigned threads) {
  const auto& lines = map.lines();
  const std::vector<BlendGroup> groups = blend_priority(map, k, eps);

  std::vector<bool> assigned(lines.size(), false);
  for (const BlendGroup& g : groups) {
    for (std::size_t e : g.reference.edges) assigned[e] = true;
    for (std::size_t i : g.candidate_ids) assigned[i] = true;
    for (std::size_t i : g.touching_ids) assigned[i] = true;
  }

  std::vector<GroupOutcome> outcomes(groups.size());
  parallel_for(groups.size(), threads, [&](std::size_t g) { outcomes[g] = blend_group(groups[g]); });

  // Touching lines may be shared between groups; snap in group order.
  std::map<std::size_t, std::optional<FlowLine>> touched;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const std::vector<Point> contacts = boundary_points(outcomes[g].blended_candidates);
    for (std::size_t i : groups[g].touching_ids) {
      auto [it, inserted] = touched.try_emplace(i, lines[i]);
      if (!it->second) continue;
      it->second = snap_one(outcomes[g].reference, contacts, *it->second, eps_s);
    }
  }

  std::vector<FlowLine> out;
  for (std::size_t i = 0; i < lines.size(); ++i)
    if (!assigned[i]) out.push_back(lines[i]);
  for (GroupOutcome& o : outcomes) {
    out.insert(out.end(), o.reference.begin(), o.reference.end());
    out.insert(out.end(), o.kept.begin(), o.kept.end());
  }
  for (auto& [i, fl] : touched)
    if (fl) out.push_back(std::move(*fl));
  return FlowMap::from_lines(std::move(out));
}

FlowMap overline_lineblend(const FlowMap& map, netgraph::SplitMode mode, int k, double eps,
                           double eps_s, unsigned threads) {
  FlowMap split = FlowMap::from_lines(netgraph::split_nodes(map.lines(), mode));
  FlowMap snapped = snap_nodes(split, eps_s, threads);
  return lineblend_pass(snapped, k, eps, eps_s, threads);
}

std::vector<StageConfig> PipelineConfig::default_stages() {
  using netgraph::SplitMode;
  return {
      {SplitMode::subdivision, {1, 2}, 4.0, 4.0},
      {SplitMode::unary, {1, 2}, 4.0, 4.0},
      {SplitMode::unary, {1, 2, 3, 4}, 5.0, 5.0},
      {SplitMode::unary, {1, 2, 3, 4}, 5.0, 5.0},
  };
}

void PipelineConfig::validate() const {
  if (stages.empty()) throw Error("pipeline needs at least one stage");
  if (!(eps_d > 0.0)) throw Error("simplify tolerance must be positive");
  if (j_max < 1) throw Error("j_max must be at least 1");
  if (f_min < 0) throw Error("f_min must be non-negative");
  for (const StageConfig& s : stages) {
    if (!(s.eps > 0.0) || !(s.eps_s > 0.0)) throw Error("stage tolerances must be positive");
    if (s.k_list.empty()) throw Error("stage needs at least one k");
    for (int k : s.k_list)
      if (k < 1 || k > netgraph::kMaxPathEdges) throw Error("k must be in 1..4");
  }
}

PipelineResult overline_pipeline(std::span<const LineString> routes, const PipelineConfig& cfg,
                                 unsigned threads) {
  cfg.validate();
  if (routes.empty()) throw Error("no routes to aggregate");
  PipelineResult result;

  std::vector<FlowLine> initial;
  initial.reserve(routes.size());
  for (const LineString& r : routes) initial.push_back({1, r.snapped()});
  FlowMap current = flow::overline(initial);
  std::vector<FlowLine> simplified;
  for (FlowLine& fl : netgraph::split_nodes(current.lines(), cfg.stages.front().split))
    simplified.push_back({fl.flow, geom::simplify(fl.line, cfg.eps_d)});
  current = flow::overline(simplified);
  result.maps.push_back(current);
  result.log.push_back({0, 0, "prepare", 1, true, {current.size()}});

  for (std::size_t s = 0; s < cfg.stages.size(); ++s) {
    const StageConfig& stage = cfg.stages[s];
    for (int k : stage.k_list) {
      IterationLog entry{s + 1, k, "blend", 0, false, {}};
      std::optional<FlowMap> prev;
      while (entry.iterations < cfg.j_max && (!prev || *prev != current)) {
        prev = current;
        ++entry.iterations;
        current = flow::overline(
            overline_lineblend(current, stage.split, k, stage.eps, stage.eps_s, threads));
        entry.segment_counts.push_back(current.size());
      }
      entry.fixed_point = prev && *prev == current;
      result.log.push_back(std::move(entry));
    }
    flow::PruneReport report;
    current = flow::prune(current, cfg.f_min, cfg.j_max, &report);
    result.log.push_back(
        {s + 1, 0, "prune", report.iterations, report.converged, report.segment_counts});
    result.maps.push_back(current);
  }
  return result;
}

}  // namespace flowmap::align
