#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "flowmap/flow.hpp"
#include "flowmap/geom.hpp"

namespace flowmap::netgraph {

enum class SplitMode {
  subdivision,  // split only at vertices shared between lines
  unary,        // full noding: also insert crossing points first
};

/// Undirected multigraph over flow lines. Nodes are line boundary points,
/// identified on the quantization grid.
class NetworkGraph {
 public:
  struct Edge {
    std::size_t from = 0;
    std::size_t to = 0;
    flow::FlowLine line;  // oriented from `from` to `to`
  };

  NetworkGraph() = default;
  explicit NetworkGraph(std::span<const flow::FlowLine> lines);

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  const geom::Point& node(std::size_t i) const { return nodes_[i]; }
  const Edge& edge(std::size_t e) const { return edges_[e]; }
  const std::vector<Edge>& edges() const { return edges_; }
  // Incident edge ids; a self-loop appears twice.
  const std::vector<std::size_t>& incident(std::size_t node) const { return adjacency_[node]; }
  std::size_t degree(std::size_t node) const { return adjacency_[node].size(); }
  // Node id at a point, or node_count() when absent.
  std::size_t find_node(geom::Point p) const;
  std::size_t other_end(std::size_t edge, std::size_t node) const {
    return edges_[edge].from == node ? edges_[edge].to : edges_[edge].from;
  }

 private:
  std::size_t intern(geom::Point p);

  std::vector<geom::Point> nodes_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> adjacency_;
  std::unordered_map<geom::PointKey, std::size_t, geom::PointKeyHash> index_;
};

/// Connected edge-simple path of k edges.
struct KEdgePath {
  std::vector<std::size_t> edges;
  std::vector<std::size_t> nodes;  // edges.size() + 1 node ids in traversal order
  std::int64_t flow = 1;           // length-weighted mean of the edge flows
  double length = 0.0;
};

inline constexpr int kMaxPathEdges = 4;
inline constexpr std::size_t kMaxEnumeratedPaths = 2'000'000;

/// Splits lines at interior vertices shared with any other line (or repeated
/// within the same line). Unary mode first inserts all segment crossings,
/// touch points and overlap ends as vertices. Flows are inherited.
std::vector<flow::FlowLine> split_nodes(std::span<const flow::FlowLine> lines, SplitMode mode);

/// All undirected edge-simple k-edge paths, deduplicated under reversal.
/// For k == 1 the edges themselves.
std::vector<KEdgePath> k_edge_paths(const NetworkGraph& g, int k);

/// Geometry of a path, concatenated in traversal order.
geom::LineString path_geometry(const NetworkGraph& g, const KEdgePath& path);

/// Minimum-length path between two nodes as one linestring. Equal lengths
/// resolve to the lexicographically smaller node key sequence.
geom::LineString shortest_path(const NetworkGraph& g, geom::Point a, geom::Point b);

/// Node ids of a shortest path (inclusive); empty when disconnected.
std::vector<std::size_t> shortest_node_path(const NetworkGraph& g, std::size_t a, std::size_t b,
                                            std::vector<std::size_t>* edge_ids = nullptr);

/// Greedy scan keeping every path that shares no edge with those kept so far.
/// Input must already be in priority order.
std::vector<KEdgePath> greedy_disjoint(std::span<const KEdgePath> paths);

/// Priority order: descending flow, then descending length, then edge ids.
void sort_by_priority(std::vector<KEdgePath>& paths);

}  // namespace flowmap::netgraph
