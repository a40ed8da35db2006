#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flowmap/flow.hpp"
#include "flowmap/geom.hpp"
#include "flowmap/netgraph.hpp"

namespace flowmap::align {

using flow::FlowLine;
using flow::FlowMap;

/// Clusters line boundary points (nested two-pass at eps_s), moves them to
/// their flow-weighted cluster centroid and pulls interior points of member
/// lines within eps_s onto the same centroid.
FlowMap snap_nodes(const FlowMap& map, double eps_s, unsigned threads = 1);

/// The moved vertices of every input line, index aligned with `map`, before
/// degenerate lines are dropped and the result is canonicalized.
std::vector<std::vector<geom::Point>> snapped_vertices(const FlowMap& map, double eps_s,
                                                       unsigned threads = 1);

/// cand fully inside the flat-cap buffer of ref, and flow(cand) <= flow(ref).
bool is_blend_candidate(const FlowLine& ref, const FlowLine& cand, double eps);

struct BlendResult {
  geom::LineString reference;            // refined reference
  std::vector<FlowLine> candidates;      // blended, in input order minus dropped
  std::vector<std::size_t> dropped;      // inputs collapsing to a single node
  std::vector<std::size_t> anchors;      // refined vertex index of each input vertex of ref
};

/// Projects every candidate vertex onto the reference, inserts the projections
/// as reference vertices and re-routes each candidate along the refined
/// reference between its projected ends.
BlendResult line_blend(const geom::LineString& reference, std::span<const FlowLine> candidates);

/// Reconnects touching lines after blending. Each contact (a candidate boundary
/// point on the touching line) moves to the nearer reference end when within
/// eps_s, otherwise to the closest point of the reference, which is then
/// inserted into the reference if needed. `reference` is the ordered list of
/// reference edges from Start to End.
std::vector<FlowLine> snap_cand_touch(std::vector<FlowLine>& reference,
                                      std::span<const FlowLine> candidates,
                                      std::span<const FlowLine> touching, double eps_s);

struct BlendGroup {
  netgraph::KEdgePath reference;  // edge ids index the input map
  std::vector<FlowLine> reference_edges;  // oriented along the path
  std::vector<FlowLine> candidates;
  std::vector<FlowLine> touching;
  std::vector<std::size_t> candidate_ids;
  std::vector<std::size_t> touching_ids;
};

/// Reference/candidate/touching assignment in priority order. Every line of
/// the map takes at most one role.
std::vector<BlendGroup> blend_priority(const FlowMap& map, int k, double eps);

/// Blending for one k: priority, blend per group, per-edge aggregation, touch
/// snapping and collation. No splitting or snapping beforehand.
FlowMap lineblend_pass(const FlowMap& map, int k, double eps, double eps_s, unsigned threads = 1);

FlowMap overline_lineblend(const FlowMap& map, netgraph::SplitMode mode, int k, double eps,
                           double eps_s, unsigned threads = 1);

struct StageConfig {
  netgraph::SplitMode split = netgraph::SplitMode::unary;
  std::vector<int> k_list{1, 2};
  double eps = 4.0;
  double eps_s = 4.0;
};

struct PipelineConfig {
  std::vector<StageConfig> stages = default_stages();
  double eps_d = 1.0;
  int j_max = 20;
  std::int64_t f_min = 1;

  static std::vector<StageConfig> default_stages();
  void validate() const;
};

struct IterationLog {
  std::size_t stage = 0;  // 0 is the preparation stage
  int k = 0;              // 0 for preparation and pruning
  std::string step;       // "prepare", "blend" or "prune"
  int iterations = 0;
  bool fixed_point = false;
  std::vector<std::size_t> segment_counts;
};

struct PipelineResult {
  std::vector<FlowMap> maps;  // after preparation and after each stage
  std::vector<IterationLog> log;
};

PipelineResult overline_pipeline(std::span<const geom::LineString> routes, const PipelineConfig& cfg,
                                 unsigned threads = 1);

}  // namespace flowmap::align
