#include <doctest.h>

#include <httplib.h>

#include <json.hpp>
#include <random>
#include <thread>

#include "fixtures.hpp"
#include "flowmap/error.hpp"
#include "flowmap/match.hpp"
#include "flowmap/projection.hpp"

using namespace flowmap;
using geom::LineString;
using geom::LonLat;
using geom::Point;
using geom::Trajectory;

namespace {

match::SyntheticBackend grid_backend() {
  return match::SyntheticBackend(
      netgraph::NetworkGraph(netgraph::split_nodes(fixtures::grid_network(), netgraph::SplitMode::subdivision)));
}

Trajectory on_vertices(const LineString& route, std::string id = "t") {
  return {std::move(id), route.points(), {}};
}

}  // namespace

TEST_CASE("projection round trip") {
  const geom::Projection proj(LonLat{9.73, 52.37});
  CHECK(proj.forward({9.73, 52.37}).x == doctest::Approx(0.0).epsilon(1e-9));
  for (double dx : {-0.05, 0.0, 0.031}) {
    for (double dy : {-0.02, 0.0, 0.04}) {
      const LonLat ll{9.73 + dx, 52.37 + dy};
      const LonLat back = proj.inverse(proj.forward(ll));
      CHECK(back.lon == doctest::Approx(ll.lon).epsilon(1e-11));
      CHECK(back.lat == doctest::Approx(ll.lat).epsilon(1e-11));
    }
  }
  // One degree of latitude is about 111.2 km.
  CHECK(proj.forward({9.73, 53.37}).y == doctest::Approx(111195.0).epsilon(1e-3));
  const auto centred = geom::Projection::centred_on({{1, 2}, {3, 4}});
  CHECK(centred.origin().lon == 2.0);
  CHECK(centred.origin().lat == 3.0);
}

TEST_CASE("encoded polylines") {
  const std::vector<LonLat> pts{{-120.2, 38.5}, {-120.95, 40.7}, {-126.453, 43.252}};
  CHECK(geom::encode_polyline(pts, 5) == "_p~iF~ps|U_ulLnnqC_mqNvxq`@");
  const auto decoded = geom::decode_polyline("_p~iF~ps|U_ulLnnqC_mqNvxq`@", 5);
  REQUIRE(decoded.size() == 3);
  CHECK(decoded[2].lon == doctest::Approx(-126.453));
  CHECK(decoded[2].lat == doctest::Approx(43.252));
  const std::vector<LonLat> fine{{9.123456, 52.654321}, {9.123457, 52.654300}};
  const auto again = geom::decode_polyline(geom::encode_polyline(fine));
  CHECK(again[1].lon == doctest::Approx(9.123457).epsilon(1e-12));
  CHECK_THROWS_AS(geom::decode_polyline("_p~iF~ps|U_"), BackendError);
}

TEST_CASE("waypoint sampling") {
  const LineString route = fixtures::staircase({0, 0}, 0x0aa);
  const auto three = match::sample_waypoints(route, 3);
  REQUIRE(three.size() == 3);
  CHECK(three.front() == route.front());
  CHECK(three.back() == route.back());
  CHECK(three[1] == route.points()[5]);
  const auto many = match::sample_waypoints(route, 83);
  CHECK(many.size() == route.size());
  CHECK(match::sample_waypoints(route, 13) == match::sample_waypoints(route, 13));
  CHECK(match::sample_waypoints(route, 2).size() == 2);
  CHECK_THROWS(match::sample_waypoints(route, 1));
}

TEST_CASE("synthetic backend follows the network") {
  auto backend = grid_backend();
  const LineString route = fixtures::staircase({0, 0}, 0x0f0);
  const auto clean = backend.match(on_vertices(route));
  REQUIRE(clean);
  CHECK(*clean == route);

  std::mt19937_64 rng(61);
  const Trajectory noisy = fixtures::noisy_trace(route, 2.0, 10.0, rng, "n");
  const auto jittered = backend.match(noisy);
  REQUIRE(jittered);
  CHECK(*jittered == route);

  const Trajectory stuck{"s", {{1, 1}, {2, -1}, {-3, 2}}, {}};
  CHECK_FALSE(backend.match(stuck));
  const Trajectory far{"f", {{5000, 5000}, {6000, 5000}}, {}};
  CHECK_FALSE(backend.match(far));
}

TEST_CASE("st_route on an exact trajectory") {
  auto backend = grid_backend();
  const LineString route = fixtures::staircase({100, 0}, 0x155);
  const auto m = match::st_route(on_vertices(route), backend, match::kDefaultWaypointCounts);
  REQUIRE(m.route);
  CHECK(m.dtw == 0.0);
  CHECK(m.hausdorff == 0.0);
  CHECK(m.length_ratio == doctest::Approx(1.0));
  CHECK(m.accepted);
  CHECK(match::quality_filter(m));
}

TEST_CASE("st_route picks the minimum DTW candidate") {
  auto backend = grid_backend();
  std::mt19937_64 rng(62);
  for (unsigned pattern : {0x013u, 0x0c7u, 0x1e1u, 0x2aau}) {
    const LineString route = fixtures::staircase({0, 0}, pattern);
    const Trajectory g = fixtures::noisy_trace(route, 10.0, 12.0, rng, "p");
    std::vector<match::Candidate> cands;
    const auto m = match::st_route(g, backend, match::kDefaultWaypointCounts, &cands);
    REQUIRE(m.route);
    CHECK(cands.size() == match::kDefaultWaypointCounts.size());
    for (const auto& c : cands) {
      CHECK(c.dtw == geom::dtw_normalized(c.route.points(), g.points));
      CHECK(m.dtw <= c.dtw);
    }
  }
}

TEST_CASE("quality filter thresholds are strict") {
  match::RouteMatch m;
  m.route = LineString({{0, 0}, {1, 0}});
  auto accept = [&](double h, double r) {
    m.hausdorff = h;
    m.length_ratio = r;
    return match::quality_filter(m);
  };
  CHECK(accept(0.0, 1.0));
  CHECK_FALSE(accept(100.0, 1.0));
  CHECK_FALSE(accept(50.0, 1.2));
  CHECK_FALSE(accept(50.0, 1.1));
  // Monotone: lowering either value never turns accept into reject.
  for (double h = 0; h < 120; h += 7.5)
    for (double r = 1.0; r < 1.2; r += 0.01)
      if (accept(h, r)) CHECK((accept(h / 2, r) && accept(h, 1.0 + (r - 1.0) / 2)));
  m.route.reset();
  CHECK_FALSE(accept(0.0, 1.0));
}

TEST_CASE("match_all reasons and order") {
  auto backend = grid_backend();
  std::vector<Trajectory> trajs;
  for (unsigned p = 0; p < 6; ++p) trajs.push_back(on_vertices(fixtures::staircase({0, 0}, p * 41u), "ok" + std::to_string(p)));
  trajs.push_back({"short", {{0, 0}, {50, 0}}, {}});
  trajs.push_back({"invalid", {{0, 0}}, {}});
  trajs.push_back({"far", {{5000, 5000}, {6000, 5000}}, {}});
  for (unsigned threads : {1u, 3u}) {
    const auto out = match::match_all(trajs, backend, {}, threads);
    REQUIRE(out.size() == trajs.size());
    for (std::size_t i = 0; i < 6; ++i) {
      CHECK(out[i].id == trajs[i].id);
      CHECK(out[i].accepted);
      CHECK(out[i].dtw == 0.0);
    }
    CHECK(out[6].reason == "short");
    CHECK(out[7].reason.rfind("invalid", 0) == 0);
    CHECK(out[8].reason == "unmatched");
  }
}

TEST_CASE("backend url from the environment wins") {
  ::unsetenv(match::kBackendUrlEnv);
  CHECK(match::resolve_backend_url("http://a:1") == "http://a:1");
  ::setenv(match::kBackendUrlEnv, "http://b:2", 1);
  CHECK(match::resolve_backend_url("http://a:1") == "http://b:2");
  ::unsetenv(match::kBackendUrlEnv);
}

TEST_CASE("http backend against a local service") {
  using nlohmann::json;
  const geom::Projection proj(LonLat{9.7, 52.4});
  httplib::Server server;
  int failures_left = 1;
  auto echo = [&](const char* key) {
    return [&, key](const httplib::Request& req, httplib::Response& res) {
      const json body = json::parse(req.body);
      if (body.value("costing", "") != "auto") {
        res.status = 400;
        return;
      }
      std::vector<LonLat> pts;
      for (const json& loc : body.at(key)) pts.push_back({loc.at("lon").get<double>(), loc.at("lat").get<double>()});
      const json reply = {{"trip", {{"legs", json::array({{{"shape", geom::encode_polyline(pts)}}})}}}};
      res.set_content(reply.dump(), "application/json");
    };
  };
  server.Post("/v1/trace_route", echo("shape"));
  server.Post("/v1/route", echo("locations"));
  server.Post("/flaky/route", [&](const httplib::Request& req, httplib::Response& res) {
    if (failures_left-- > 0) {
      res.status = 503;
      return;
    }
    echo("locations")(req, res);
  });
  server.Post("/down/route", [](const httplib::Request&, httplib::Response& res) { res.status = 500; });
  server.Post("/none/route", [](const httplib::Request&, httplib::Response& res) { res.status = 400; });
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread worker([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  match::HttpOptions fast;
  fast.retries = 2;
  fast.backoff = std::chrono::milliseconds(1);
  const std::string base = "http://127.0.0.1:" + std::to_string(port);

  match::HttpBackend backend(base + "/v1/", proj, fast);
  const Trajectory g{"h", {{0, 0}, {120, 0}, {120, 80}}, {}};
  const auto matched = backend.match(g);
  REQUIRE(matched);
  REQUIRE(matched->size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(geom::distance(matched->points()[i], g.points[i]) < 0.2);
  const std::vector<Point> wps{{0, 0}, {120, 80}};
  CHECK(backend.route(wps).has_value());

  CHECK(match::HttpBackend(base + "/flaky", proj, fast).route(wps).has_value());
  CHECK_THROWS_AS(match::HttpBackend(base + "/down", proj, fast).route(wps), BackendError);
  CHECK_FALSE(match::HttpBackend(base + "/none", proj, fast).route(wps).has_value());
  CHECK_THROWS_AS(match::HttpBackend("https://example.org", proj, fast), InputError);

  server.stop();
  worker.join();
  match::HttpOptions once = fast;
  once.retries = 0;
  CHECK_THROWS_AS(match::HttpBackend(base, proj, once).route(wps), BackendError);
}
