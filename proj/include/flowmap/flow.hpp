#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flowmap/geom.hpp"

namespace flowmap::flow {

/// A road segment linestring carrying an integer traffic flow (>= 1).
struct FlowLine {
  std::int64_t flow = 1;
  geom::LineString line;

  double length() const { return line.length(); }
  friend bool operator==(const FlowLine&, const FlowLine&) = default;
};

/// Ordered collection of flow lines: descending flow, then descending
/// length, then vertex keys. Lines are stored in canonical orientation and
/// exact duplicates (up to reversal) are merged by summing flows.
class FlowMap {
 public:
  FlowMap() = default;
  static FlowMap from_lines(std::vector<FlowLine> lines);

  const std::vector<FlowLine>& lines() const { return lines_; }
  std::size_t size() const { return lines_.size(); }
  bool empty() const { return lines_.empty(); }
  auto begin() const { return lines_.begin(); }
  auto end() const { return lines_.end(); }
  const FlowLine& operator[](std::size_t i) const { return lines_[i]; }

  friend bool operator==(const FlowMap&, const FlowMap&) = default;

 private:
  std::vector<FlowLine> lines_;
};

// Canonical orientation: open lines start at the smaller vertex key.
geom::LineString canonical(const geom::LineString& line);

/// Rounded (half up) length-weighted mean flow, at least 1.
std::int64_t weighted_mean_flow(std::span<const FlowLine> parts);
std::int64_t weighted_mean_flow(std::span<const std::int64_t> flows,
                                std::span<const double> lengths);

/// Vertex-to-vertex segment with its endpoints in key order.
struct AtomicSegment {
  geom::PointKey a, b;
  std::int64_t flow = 0;

  geom::Point pa() const;
  geom::Point pb() const;
  double length() const { return geom::distance(pa(), pb()); }
};

/// Splits lines into atomic segments (vertices snapped to the grid) and sums
/// the flows of equal segments. Sorted by (a, b).
std::vector<AtomicSegment> atomic_segments(std::span<const FlowLine> lines);

/// Exact-overlap aggregation: sums flows over equal atomic segments and
/// re-joins maximal runs of equal flow between nodes of degree != 2.
FlowMap overline(std::span<const FlowLine> input);
inline FlowMap overline(const FlowMap& map) { return overline(map.lines()); }

struct PruneReport {
  int iterations = 0;
  bool converged = false;
  std::vector<std::size_t> segment_counts;  // after each iteration
};

/// One pruning round: contract degree-2 chains into single lines with their
/// weighted mean flow, then drop self-loops and leaf edges with flow <= f_min.
FlowMap prune_once(const FlowMap& map, std::int64_t f_min);

/// Repeats prune_once until a fixed point or max_iter rounds.
FlowMap prune(const FlowMap& map, std::int64_t f_min, int max_iter, PruneReport* report = nullptr);

}  // namespace flowmap::flow
