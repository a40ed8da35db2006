#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "flowmap/geom.hpp"

namespace flowmap::cluster {

enum class Linkage { single, complete };

struct ClusterLabels {
  std::vector<std::size_t> labels;  // one per input point, contiguous 0..count-1
  std::size_t count = 0;
};

// Largest complete-linkage sub-problem (distinct points) accepted.
inline constexpr std::size_t kMaxCompleteLinkagePoints = 50000;

/// Agglomerative clustering cut at `height`: merges at a height <= `height`
/// are kept. Labels are numbered in order of first appearance. Equal-height
/// merges are resolved by the smallest (min-index, max-index) member pair.
ClusterLabels hclust_cut(std::span<const geom::Point> points, Linkage linkage, double height);

/// Single linkage cut, then a complete linkage cut inside every single
/// linkage cluster, renumbered into one label set. Every resulting cluster
/// has diameter <= height.
ClusterLabels nested_two_pass(std::span<const geom::Point> points, double height,
                              unsigned threads = 1);

}  // namespace flowmap::cluster
