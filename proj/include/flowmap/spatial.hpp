#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <unordered_map>
#include <vector>

#include "flowmap/geom.hpp"

namespace flowmap {

// Uniform grid over bounding boxes. Queries return ids in ascending order.
class BoxGrid {
 public:
  explicit BoxGrid(double cell) : cell_(cell > 0 ? cell : 1.0) {}

  void insert(std::size_t id, const geom::BBox& box) {
    for_cells(box, [&](geom::PointKey c) { cells_[c].push_back(id); });
  }

  std::vector<std::size_t> query(const geom::BBox& box) const {
    std::vector<std::size_t> out;
    for_cells(box, [&](geom::PointKey c) {
      auto it = cells_.find(c);
      if (it != cells_.end()) out.insert(out.end(), it->second.begin(), it->second.end());
    });
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

 private:
  template <typename Fn>
  void for_cells(const geom::BBox& box, Fn fn) const {
    const auto x0 = cell(box.min_x), x1 = cell(box.max_x);
    const auto y0 = cell(box.min_y), y1 = cell(box.max_y);
    for (auto x = x0; x <= x1; ++x)
      for (auto y = y0; y <= y1; ++y) fn({x, y});
  }
  std::int64_t cell(double v) const { return static_cast<std::int64_t>(std::floor(v / cell_)); }

  double cell_;
  std::unordered_map<geom::PointKey, std::vector<std::size_t>, geom::PointKeyHash> cells_;
};

}  // namespace flowmap
