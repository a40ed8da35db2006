#pragma once

#include <chrono>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "flowmap/geom.hpp"
#include "flowmap/netgraph.hpp"
#include "flowmap/projection.hpp"

namespace flowmap::match {

using geom::LineString;
using geom::Point;
using geom::Trajectory;

/// Map matching (trace -> route) and route finding (waypoints -> route).
/// Both return nullopt when the backend finds no route; unreachable
/// backends throw BackendError. Implementations must be thread safe.
class MatchBackend {
 public:
  virtual ~MatchBackend() = default;
  virtual std::string kind() const = 0;
  virtual std::optional<LineString> match(const Trajectory& g) = 0;
  virtual std::optional<LineString> route(std::span<const Point> waypoints) = 0;
};

inline constexpr double kMaxSnapDistance = 500.0;

/// Offline backend over an in-memory network: points snap to the nearest
/// node and consecutive nodes are joined by shortest paths.
class SyntheticBackend : public MatchBackend {
 public:
  explicit SyntheticBackend(netgraph::NetworkGraph net);

  std::string kind() const override { return "synthetic"; }
  std::optional<LineString> match(const Trajectory& g) override;
  std::optional<LineString> route(std::span<const Point> waypoints) override;
  const netgraph::NetworkGraph& network() const { return net_; }

 private:
  std::optional<std::size_t> nearest_node(Point p) const;
  std::optional<LineString> connect(std::span<const Point> pts) const;

  netgraph::NetworkGraph net_;
  double cell_ = 100.0;
  std::unordered_map<geom::PointKey, std::vector<std::size_t>, geom::PointKeyHash> grid_;
};

struct HttpOptions {
  std::chrono::seconds timeout{30};
  int retries = 3;
  std::chrono::milliseconds backoff{500};  // doubled after every failed attempt
  std::string costing = "auto";
};

/// Client for a Valhalla-compatible service: POST {base}/trace_route and
/// POST {base}/route, geometry as 6-digit encoded polylines.
class HttpBackend : public MatchBackend {
 public:
  HttpBackend(std::string base_url, geom::Projection projection, HttpOptions options = {});

  std::string kind() const override { return "http"; }
  std::optional<LineString> match(const Trajectory& g) override;
  std::optional<LineString> route(std::span<const Point> waypoints) override;

 private:
  std::optional<LineString> post(const std::string& endpoint, const std::string& body) const;

  std::string host_;  // scheme://host:port
  std::string prefix_;
  geom::Projection projection_;
  HttpOptions options_;
};

// Environment variable overriding the configured base address.
inline constexpr const char* kBackendUrlEnv = "FLOWMAP_BACKEND_URL";

/// Base address from the environment override, else the configured value.
std::string resolve_backend_url(const std::string& configured);

/// Start, end and n_w - 2 evenly spaced interior vertices of the route.
std::vector<Point> sample_waypoints(const LineString& route, int n_w);

inline const std::vector<int> kDefaultWaypointCounts{3, 13, 23, 33, 43, 63, 83};

struct Candidate {
  int n_w = 0;
  LineString route;
  double dtw = 0.0;
};

struct RouteMatch {
  std::string id;
  std::optional<LineString> route;
  int n_w = 0;
  double dtw = 0.0;
  double hausdorff = 0.0;
  double length_ratio = 0.0;
  bool accepted = false;
  std::string reason;  // empty when accepted
};

/// Matches a trajectory, re-routes it through every waypoint count and keeps
/// the candidate with the smallest DTW against the trajectory points.
/// `candidates` receives all scored candidates when given.
RouteMatch st_route(const Trajectory& g, MatchBackend& backend, std::span<const int> n_w_list,
                    std::vector<Candidate>* candidates = nullptr);

inline constexpr double kDefaultMaxHausdorff = 100.0;
inline constexpr double kDefaultMaxLengthRatio = 1.1;
inline constexpr double kMinTrajectoryLength = 100.0;

bool quality_filter(const RouteMatch& m, double h_max = kDefaultMaxHausdorff,
                    double r_max = kDefaultMaxLengthRatio);

struct MatchSettings {
  std::vector<int> n_w_list = kDefaultWaypointCounts;
  double h_max = kDefaultMaxHausdorff;
  double r_max = kDefaultMaxLengthRatio;
  double min_length = kMinTrajectoryLength;
};

/// st_route plus length pre-filter and quality filter over a batch, run on
/// up to `threads` workers. Output order follows the input.
std::vector<RouteMatch> match_all(std::span<const Trajectory> trajectories, MatchBackend& backend,
                                  const MatchSettings& settings, unsigned threads = 1);

std::optional<LineString> synthetic_match(const Trajectory& g, const netgraph::NetworkGraph& net);

}  // namespace flowmap::match
