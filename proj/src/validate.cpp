#include "flowmap/validate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iterator>
#include <map>

#include "flowmap/cluster.hpp"
#include "flowmap/error.hpp"
#include "flowmap/parallel.hpp"
#include "flowmap/spatial.hpp"

namespace flowmap::validate {

using geom::LineString;
using geom::Point;

std::vector<TransectError> proxy_flows(std::span<const LineString> routes, const flow::FlowMap& map,
                                       double eps_t, double delta_t, unsigned threads) {
  if (map.empty()) throw Error("cannot validate an empty flow map");
  if (!(eps_t > 0.0) || !(delta_t > 0.0)) throw Error("transect sizes must be positive");

  struct SegmentRef {
    std::size_t route;
    Point a, b;
  };
  std::vector<SegmentRef> segs;
  BoxGrid index(std::max(4.0 * eps_t, 20.0));
  for (std::size_t r = 0; r < routes.size(); ++r) {
    const auto& pts = routes[r].points();
    for (std::size_t i = 1; i < pts.size(); ++i) {
      const std::array<Point, 2> ends{pts[i - 1], pts[i]};
      index.insert(segs.size(), geom::bbox_of(ends));
      segs.push_back({r, pts[i - 1], pts[i]});
    }
  }

  const auto& lines = map.lines();
  std::vector<std::vector<TransectError>> per_line(lines.size());
  parallel_for(lines.size(), threads, [&](std::size_t l) {
    std::vector<TransectError>& out = per_line[l];
    const std::vector<geom::Transect> ts = geom::transects(lines[l].line, eps_t, delta_t);
    double total = 0.0;
    for (std::size_t t = 0; t < ts.size(); ++t) {
      const Point a = ts[t].segment.front(), b = ts[t].segment.back();
      // Contacts per route as intervals along the transect; touching or
      // overlapping intervals are one crossing.
      std::map<std::size_t, std::vector<std::pair<double, double>>> contacts;
      const double len = geom::distance(a, b);
      for (std::size_t s : index.query(ts[t].segment.bbox())) {
        const auto hs = geom::intersect_segments(a, b, segs[s].a, segs[s].b);
        if (hs.empty()) continue;
        double lo = hs.front().t, hi = lo;
        for (const geom::SegmentHit& h : hs) lo = std::min(lo, h.t), hi = std::max(hi, h.t);
        contacts[segs[s].route].push_back({lo * len, hi * len});
      }
      std::int64_t crossings = 0;
      for (auto& [route, iv] : contacts) {
        std::sort(iv.begin(), iv.end());
        double reach = -1.0;
        for (const auto& [lo, hi] : iv) {
          if (lo > reach + geom::kGridStep) ++crossings;
          reach = std::max(reach, hi);
        }
      }
      total += static_cast<double>(crossings);
      out.push_back({l, t, ts[t], crossings, lines[l].flow});
    }
    const double mean = total / static_cast<double>(ts.size());
    for (TransectError& rec : out) {
      rec.proxy = mean;
      rec.err = std::abs(static_cast<double>(rec.flow) - mean);
      rec.rerr = rec.err / static_cast<double>(rec.flow);
    }
  });

  std::vector<TransectError> all;
  for (auto& v : per_line) std::move(v.begin(), v.end(), std::back_inserter(all));
  return all;
}

std::vector<HexBin> hexbin(std::span<const TransectError> errors, double width_err,
                           double width_rerr) {
  if (!(width_err > 0.0) || !(width_rerr > 0.0)) throw Error("bin widths must be positive");
  // Two offset rectangular lattices; each point goes to the nearer centre
  // under the hexagonal metric.
  std::map<std::pair<double, double>, std::size_t> counts;
  for (const TransectError& e : errors) {
    const double x = e.err / width_err;
    const double y = e.rerr / width_rerr;
    const double ix1 = std::round(x), iy1 = std::round(y);
    const double ix2 = std::floor(x), iy2 = std::floor(y);
    const double d1 = (x - ix1) * (x - ix1) + 3.0 * (y - iy1) * (y - iy1);
    const double d2 = (x - ix2 - 0.5) * (x - ix2 - 0.5) + 3.0 * (y - iy2 - 0.5) * (y - iy2 - 0.5);
    const std::pair<double, double> centre =
        d1 <= d2 ? std::pair{iy1 * width_rerr, ix1 * width_err}
                 : std::pair{(iy2 + 0.5) * width_rerr, (ix2 + 0.5) * width_err};
    ++counts[centre];
  }
  std::vector<HexBin> out;
  out.reserve(counts.size());
  for (const auto& [c, n] : counts) out.push_back({c.second, c.first, n});
  return out;
}

ErrorSummary error_summary(std::span<const TransectError> errors, double err_cut, double rerr_cut) {
  if (errors.empty()) throw Error("no transect errors to summarise");
  ErrorSummary s;
  s.err_cut = err_cut;
  s.rerr_cut = rerr_cut;
  s.transects = errors.size();
  for (const TransectError& e : errors) {
    const bool big = e.err > err_cut;
    const bool rel = e.rerr > rerr_cut;
    if (e.err == 0.0) ++s.zero;
    if (big) ++s.over_err;
    if (rel) ++s.over_rerr;
    if (big && rel) ++s.over_both;
  }
  s.bins = hexbin(errors);
  return s;
}

DesireResult desire_lines(std::span<const geom::Trajectory> trajectories, double cutoff,
                          unsigned threads) {
  if (!(cutoff > 0.0)) throw Error("desire line cutoff must be positive");
  DesireResult result;
  if (trajectories.empty()) return result;
  std::vector<Point> ends;
  ends.reserve(2 * trajectories.size());
  for (const geom::Trajectory& g : trajectories) {
    if (g.points.empty()) throw InputError("trajectory " + g.id + " has no points");
    ends.push_back(g.points.front());
    ends.push_back(g.points.back());
  }
  const cluster::ClusterLabels labels = cluster::nested_two_pass(ends, cutoff, threads);
  std::vector<double> sx(labels.count, 0.0), sy(labels.count, 0.0);
  std::vector<std::size_t> n(labels.count, 0);
  for (std::size_t i = 0; i < ends.size(); ++i) {
    sx[labels.labels[i]] += ends[i].x;
    sy[labels.labels[i]] += ends[i].y;
    ++n[labels.labels[i]];
  }
  for (std::size_t c = 0; c < labels.count; ++c)
    result.hubs.push_back(geom::snap({sx[c] / static_cast<double>(n[c]), sy[c] / static_cast<double>(n[c])}));

  std::map<std::pair<std::size_t, std::size_t>, std::int64_t> pairs;
  for (std::size_t t = 0; t < trajectories.size(); ++t) {
    const std::size_t a = labels.labels[2 * t], b = labels.labels[2 * t + 1];
    ++pairs[std::minmax(a, b)];
  }
  for (const auto& [ab, count] : pairs)
    result.lines.push_back({result.hubs[ab.first], result.hubs[ab.second], ab.first, ab.second, count});
  std::stable_sort(result.lines.begin(), result.lines.end(),
                   [](const DesireLine& x, const DesireLine& y) { return x.flow > y.flow; });
  return result;
}

}  // namespace flowmap::validate
