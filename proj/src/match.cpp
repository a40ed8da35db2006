#include "flowmap/match.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "flowmap/error.hpp"
#include "flowmap/parallel.hpp"

namespace flowmap::match {

using nlohmann::json;

SyntheticBackend::SyntheticBackend(netgraph::NetworkGraph net) : net_(std::move(net)) {
  if (net_.node_count() == 0) throw InputError("synthetic network has no edges");
  for (std::size_t n = 0; n < net_.node_count(); ++n) {
    const Point p = net_.node(n);
    grid_[{static_cast<std::int64_t>(std::floor(p.x / cell_)),
           static_cast<std::int64_t>(std::floor(p.y / cell_))}]
        .push_back(n);
  }
}

std::optional<std::size_t> SyntheticBackend::nearest_node(Point p) const {
  const auto cx = static_cast<std::int64_t>(std::floor(p.x / cell_));
  const auto cy = static_cast<std::int64_t>(std::floor(p.y / cell_));
  const auto reach = static_cast<std::int64_t>(std::ceil(kMaxSnapDistance / cell_));
  std::optional<std::size_t> best;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::int64_t dx = -reach; dx <= reach; ++dx) {
    for (std::int64_t dy = -reach; dy <= reach; ++dy) {
      auto it = grid_.find({cx + dx, cy + dy});
      if (it == grid_.end()) continue;
      for (std::size_t n : it->second) {
        const double d = geom::distance(p, net_.node(n));
        if (d < best_d || (d == best_d && best && n < *best)) {
          best_d = d;
          best = n;
        }
      }
    }
  }
  if (!best || best_d > kMaxSnapDistance) return std::nullopt;
  return best;
}

std::optional<LineString> SyntheticBackend::connect(std::span<const Point> pts) const {
  std::vector<std::size_t> nodes;
  for (const Point& p : pts) {
    const auto n = nearest_node(p);
    if (!n) return std::nullopt;
    if (nodes.empty() || nodes.back() != *n) nodes.push_back(*n);
  }
  if (nodes.size() < 2) return std::nullopt;

  std::vector<Point> path{net_.node(nodes.front())};
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    std::vector<std::size_t> edges;
    const auto hops = netgraph::shortest_node_path(net_, nodes[i - 1], nodes[i], &edges);
    if (hops.empty()) return std::nullopt;
    for (std::size_t j = 0; j < edges.size(); ++j) {
      const auto& edge = net_.edge(edges[j]);
      const auto& src = edge.line.line.points();
      if (edge.from == hops[j]) {
        path.insert(path.end(), src.begin() + 1, src.end());
      } else {
        path.insert(path.end(), src.rbegin() + 1, src.rend());
      }
    }
  }

  // Drop immediate backtracks X, Y, X -> X.
  std::vector<Point> clean;
  for (const Point& p : path) {
    if (!clean.empty() && geom::same_point(clean.back(), p)) continue;
    if (clean.size() >= 2 && geom::same_point(clean[clean.size() - 2], p)) {
      clean.pop_back();
      continue;
    }
    clean.push_back(p);
  }
  return LineString::try_make(std::move(clean));
}

std::optional<LineString> SyntheticBackend::match(const Trajectory& g) { return connect(g.points); }

std::optional<LineString> SyntheticBackend::route(std::span<const Point> waypoints) {
  return connect(waypoints);
}

std::optional<LineString> synthetic_match(const Trajectory& g, const netgraph::NetworkGraph& net) {
  SyntheticBackend backend(net);
  return backend.match(g);
}

HttpBackend::HttpBackend(std::string base_url, geom::Projection projection, HttpOptions options)
    : projection_(projection), options_(std::move(options)) {
  const auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos || base_url.compare(0, scheme_end, "http") != 0)
    throw InputError("backend URL must start with http://: " + base_url);
  const auto path_start = base_url.find('/', scheme_end + 3);
  host_ = base_url.substr(0, path_start);
  prefix_ = path_start == std::string::npos ? "" : base_url.substr(path_start);
  while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
}

std::optional<LineString> HttpBackend::post(const std::string& endpoint,
                                            const std::string& body) const {
  const std::string path = prefix_ + endpoint;
  auto delay = options_.backoff;
  std::string last_error;
  for (int attempt = 0; attempt <= options_.retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
    httplib::Client client(host_);
    client.set_connection_timeout(options_.timeout);
    client.set_read_timeout(options_.timeout);
    client.set_write_timeout(options_.timeout);
    spdlog::debug("POST {}{} {}", host_, path, body);
    const auto res = client.Post(path, body, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      spdlog::debug("request failed: {}", last_error);
      continue;
    }
    spdlog::debug("response {} {}", res->status, res->body);
    if (res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) return std::nullopt;  // no route for this input

    json doc;
    try {
      doc = json::parse(res->body);
    } catch (const json::exception& e) {
      throw BackendError(std::string("malformed backend response: ") + e.what());
    }
    const auto trip = doc.find("trip");
    if (trip == doc.end() || !trip->contains("legs")) return std::nullopt;
    std::vector<Point> pts;
    for (const auto& leg : (*trip)["legs"]) {
      for (const geom::LonLat& ll : geom::decode_polyline(leg.value("shape", ""), 6)) {
        const Point p = geom::snap(projection_.forward(ll));
        if (pts.empty() || !geom::same_point(pts.back(), p)) pts.push_back(p);
      }
    }
    return LineString::try_make(std::move(pts));
  }
  throw BackendError("backend " + host_ + path + " unreachable after " +
                     std::to_string(options_.retries + 1) + " attempts: " + last_error);
}

namespace {

json locations(std::span<const Point> pts, const geom::Projection& proj) {
  json out = json::array();
  for (const Point& p : pts) {
    const geom::LonLat ll = proj.inverse(p);
    out.push_back({{"lat", ll.lat}, {"lon", ll.lon}});
  }
  return out;
}

}  // namespace

std::optional<LineString> HttpBackend::match(const Trajectory& g) {
  const json body = {{"shape", locations(g.points, projection_)},
                     {"costing", options_.costing},
                     {"shape_match", "map_snap"}};
  return post("/trace_route", body.dump());
}

std::optional<LineString> HttpBackend::route(std::span<const Point> waypoints) {
  const json body = {{"locations", locations(waypoints, projection_)},
                     {"costing", options_.costing}};
  return post("/route", body.dump());
}

std::string resolve_backend_url(const std::string& configured) {
  if (const char* env = std::getenv(kBackendUrlEnv); env && *env) return env;
  return configured;
}

std::vector<Point> sample_waypoints(const LineString& route, int n_w) {
  if (n_w < 2) throw Error("at least two waypoints are required");
  const auto& pts = route.points();
  std::vector<Point> out{pts.front()};
  const std::size_t interior = pts.size() - 2;  // vertices 1 .. size-2
  const auto wanted = static_cast<std::size_t>(n_w - 2);
  if (interior > 0 && wanted > 0) {
    std::size_t last = 0;
    for (std::size_t j = 0; j < wanted; ++j) {
      const std::size_t idx = 1 + (2 * j + 1) * interior / (2 * wanted);
      if (idx == last) continue;
      out.push_back(pts[idx]);
      last = idx;
    }
  }
  out.push_back(pts.back());
  return out;
}

RouteMatch st_route(const Trajectory& g, MatchBackend& backend, std::span<const int> n_w_list,
                    std::vector<Candidate>* candidates) {
  if (n_w_list.empty()) throw Error("waypoint count list is empty");
  g.validate();
  RouteMatch result;
  result.id = g.id;
  const std::optional<LineString> matched = backend.match(g);
  if (!matched) {
    result.reason = "unmatched";
    return result;
  }
  std::vector<Candidate> scored;
  for (int n_w : n_w_list) {
    if (n_w < 2) throw Error("waypoint counts must be at least 2");
    const std::vector<Point> wps = sample_waypoints(*matched, n_w);
    std::optional<LineString> r = backend.route(wps);
    if (!r) continue;
    const double d = geom::dtw_normalized(r->points(), g.points);
    scored.push_back({n_w, std::move(*r), d});
  }
  if (scored.empty()) {
    result.reason = "no route";
    if (candidates) candidates->clear();
    return result;
  }
  const auto best = std::min_element(scored.begin(), scored.end(),
                                     [](const Candidate& a, const Candidate& b) { return a.dtw < b.dtw; });
  result.route = best->route;
  result.n_w = best->n_w;
  result.dtw = best->dtw;
  result.hausdorff = geom::hausdorff(result.route->points(), g.points);
  result.length_ratio = result.route->length() / g.length();
  result.accepted = quality_filter(result);
  if (!result.accepted) result.reason = "quality";
  if (candidates) *candidates = std::move(scored);
  return result;
}

bool quality_filter(const RouteMatch& m, double h_max, double r_max) {
  return m.route.has_value() && m.hausdorff < h_max && m.length_ratio < r_max;
}

std::vector<RouteMatch> match_all(std::span<const Trajectory> trajectories, MatchBackend& backend,
                                  const MatchSettings& settings, unsigned threads) {
  std::vector<RouteMatch> out(trajectories.size());
  parallel_for(trajectories.size(), threads, [&](std::size_t i) {
    const Trajectory& g = trajectories[i];
    try {
      g.validate();
    } catch (const GeometryError& e) {
      out[i].id = g.id;
      out[i].reason = std::string("invalid: ") + e.what();
      return;
    }
    if (g.length() <= settings.min_length) {
      out[i].id = g.id;
      out[i].reason = "short";
      return;
    }
    RouteMatch m = st_route(g, backend, settings.n_w_list);
    if (m.route) m.accepted = quality_filter(m, settings.h_max, settings.r_max);
    m.reason = m.accepted ? "" : (m.route ? "quality" : m.reason);
    out[i] = std::move(m);
  });
  return out;
}

}  // namespace flowmap::match
