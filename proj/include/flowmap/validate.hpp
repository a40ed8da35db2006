#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "flowmap/flow.hpp"
#include "flowmap/geom.hpp"

namespace flowmap::validate {

inline constexpr double kDefaultTransectHalfWidth = 5.0;
inline constexpr double kDefaultTransectSpacing = 50.0;

struct TransectError {
  std::size_t line = 0;      // index into the flow map
  std::size_t index = 0;     // transect number along the line
  geom::Transect transect;
  std::int64_t crossings = 0;  // separate contacts with the routes
  std::int64_t flow = 0;       // estimated flow of the line
  double proxy = 0.0;          // mean crossings over the line's transects
  double err = 0.0;
  double rerr = 0.0;
};

/// Counts route crossings on transects of every flow line and compares the
/// per-line mean with the line's flow. One record per transect.
std::vector<TransectError> proxy_flows(std::span<const geom::LineString> routes,
                                       const flow::FlowMap& map, double eps_t, double delta_t,
                                       unsigned threads = 1);

struct HexBin {
  double err = 0.0;   // bin centre
  double rerr = 0.0;
  std::size_t count = 0;
};

inline constexpr double kHexWidthErr = 1.0;
inline constexpr double kHexWidthRerr = 0.05;

struct ErrorSummary {
  std::size_t transects = 0;
  std::size_t zero = 0;
  std::size_t over_err = 0;
  std::size_t over_rerr = 0;
  std::size_t over_both = 0;
  double err_cut = 4.0;
  double rerr_cut = 0.1;
  std::vector<HexBin> bins;  // sorted by (rerr, err)

  double share(std::size_t n) const {
    return transects ? static_cast<double>(n) / static_cast<double>(transects) : 0.0;
  }
};

ErrorSummary error_summary(std::span<const TransectError> errors, double err_cut = 4.0,
                           double rerr_cut = 0.1);

/// Hexagonal bins over (Err, RErr) at the given bin widths.
std::vector<HexBin> hexbin(std::span<const TransectError> errors, double width_err = kHexWidthErr,
                           double width_rerr = kHexWidthRerr);

inline constexpr double kDefaultDesireCutoff = 5000.0;

struct DesireLine {
  geom::Point from;
  geom::Point to;  // equal to `from` for same-hub markers
  std::size_t hub_from = 0;
  std::size_t hub_to = 0;
  std::int64_t flow = 0;

  bool is_marker() const { return hub_from == hub_to; }
};

struct DesireResult {
  std::vector<geom::Point> hubs;
  std::vector<DesireLine> lines;  // descending flow, then hub ids
};

/// Clusters trajectory start and end points into hubs and counts the
/// trajectories per unordered hub pair.
DesireResult desire_lines(std::span<const geom::Trajectory> trajectories, double cutoff,
                          unsigned threads = 1);

}  // namespace flowmap::validate
