// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "fixtures.hpp"
#include "flowmap/align.hpp"
#include "flowmap/cli.hpp"
#include "flowmap/cluster.hpp"
#include "flowmap/flow.hpp"
#include "flowmap/io.hpp"
#include "flowmap/match.hpp"
#include "flowmap/netgraph.hpp"
#include "flowmap/validate.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace flowmap;
using flow::FlowLine;
using flow::FlowMap;
using geom::LineString;
using geom::Point;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* name, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (secs >= budget_s) {
    out.ok = false;
    out.detail += (out.detail.empty() ? "" : "; ") + std::string("over time budget");
  }
  if (!out.ok) ++failures;
  std::printf("%s [%d] %s (%.3f s / %.0f s)%s%s\n", out.ok ? "PASS" : "FAIL", id, name, secs, budget_s,
              out.detail.empty() ? "" : ": ", out.detail.c_str());
  std::fflush(stdout);
}

std::string describe(const FlowMap& m) {
  std::ostringstream s;
  for (const FlowLine& fl : m) {
    s << "(" << fl.flow << ":";
    for (const Point& p : fl.line.points()) s << " " << p.x << "," << p.y;
    s << ")";
  }
  return s.str();
}

bool same_geometry(const LineString& line, std::vector<Point> expected) {
  if (line.size() != expected.size()) return false;
  const bool forward = geom::same_point(line.front(), expected.front());
  if (!forward) std::reverse(expected.begin(), expected.end());
  for (std::size_t i = 0; i < expected.size(); ++i)
    if (geom::key_of(line.points()[i]) != geom::key_of(expected[i])) return false;
  return true;
}

Outcome figure4() {
  const Point a{0, 0}, b{50, 0}, c{100, 0}, d{90, 2};
  const FlowMap in = FlowMap::from_lines({{7, LineString({a, b, c})}, {2, LineString({a, d})}});
  const FlowMap out = align::overline_lineblend(in, netgraph::SplitMode::subdivision, 1, 4.0, 4.0);
  const bool ok = out.size() == 1 && out[0].flow == 9 && same_geometry(out[0].line, {a, b, {90, 0}, c});
  return {ok, ok ? "" : describe(out)};
}

Outcome figure5() {
  const Point a{0, 0}, b{50, 0}, c{100, 0}, d{97, 2}, e{110, 30};
  const FlowMap in = FlowMap::from_lines(
      {{7, LineString({a, b, c})}, {2, LineString({a, d})}, {5, LineString({d, e})}});
  const FlowMap out = align::lineblend_pass(in, 1, 4.0, 4.0);
  bool ok = out.size() == 2;
  if (ok) {
    const FlowLine& main = out[0].flow == 9 ? out[0] : out[1];
    const FlowLine& touch = out[0].flow == 9 ? out[1] : out[0];
    ok = main.flow == 9 && touch.flow == 5 && same_geometry(main.line, {a, b, {97, 0}, c}) &&
         same_geometry(touch.line, {c, e});
  }
  return {ok, ok ? "" : describe(out)};
}

Outcome grid_convergence() {
  const std::vector<LineString> routes = fixtures::jittered_routes();
  const align::PipelineConfig cfg;
  const align::PipelineResult res = align::overline_pipeline(routes, cfg, 1);
  const FlowMap& final_map = res.maps.back();
  const std::size_t truth = 1;  // one straight row of the grid, pseudo nodes removed
  std::ostringstream why;
  bool ok = true;
  if (final_map.size() != truth) {
    ok = false;
    why << "final segments " << final_map.size() << " (expected " << truth << ")";
  }
  for (const align::IterationLog& l : res.log)
    if (l.step == "blend" && (!l.fixed_point || l.iterations >= cfg.j_max)) {
      ok = false;
      why << "; stage " << l.stage << " k=" << l.k << " no fixed point below j_max";
    }
  const auto errors = validate::proxy_flows(routes, final_map, 5.0, 50.0);
  std::size_t nonzero = 0;
  for (const auto& e : errors) nonzero += e.err != 0.0;
  if (nonzero) {
    ok = false;
    why << "; " << nonzero << " of " << errors.size() << " transects with Err > 0";
  }
  return {ok, why.str()};
}

Outcome clustering() {
  std::mt19937_64 rng(4);
  const double eps_s = 4.0;
  int compared = 0;
  for (int set = 0; set < 50; ++set) {
    const int n = std::uniform_int_distribution<int>(1, 200)(rng);
    const double extent = std::uniform_real_distribution<double>(10.0, 120.0)(rng);
    std::uniform_real_distribution<double> u(0.0, extent);
    std::vector<Point> pts;
    for (int i = 0; i < n; ++i) pts.push_back({u(rng), u(rng)});
    const auto nested = oracle::partition_of(cluster::nested_two_pass(pts, eps_s));
    for (const auto& c : nested)
      if (oracle::diameter(pts, c) > eps_s) return {false, "cluster diameter above eps_S in set " + std::to_string(set)};
    // Compare with one-pass complete linkage whenever every single linkage
    // cluster is a union of whole complete linkage clusters.
    const auto single = oracle::agglomerate(pts, false, eps_s);
    const auto complete = oracle::agglomerate(pts, true, eps_s);
    std::vector<std::size_t> single_of(pts.size());
    for (std::size_t s = 0; s < single.size(); ++s)
      for (std::size_t i : single[s]) single_of[i] = s;
    bool nested_in_single = true;
    for (const auto& c : complete)
      for (std::size_t i : c) nested_in_single &= single_of[i] == single_of[c.front()];
    if (!nested_in_single) continue;
    ++compared;
    if (nested != complete) return {false, "differs from complete linkage in set " + std::to_string(set)};
  }
  return {true, std::to_string(compared) + " of 50 sets compared with complete linkage"};
}

Outcome dtw() {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> len(1, 8);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  double worst = 0.0;
  for (int pair = 0; pair < 100; ++pair) {
    std::vector<Point> a(len(rng)), b(len(rng));
    for (Point& p : a) p = {u(rng), u(rng)};
    for (Point& p : b) p = {u(rng), u(rng)};
    const double got = geom::dtw_normalized(a, b);
    const double want = oracle::dtw_exhaustive(a, b);
    const double rel = std::abs(got - want) / std::max(std::abs(want), 1e-300);
    worst = std::max(worst, want == 0.0 ? std::abs(got) : rel);
  }
  std::ostringstream s;
  s << "max relative error " << worst;
  return {worst <= 1e-9, s.str()};
}

// Random simple walks on a small lattice; lines overlap only along whole
// lattice edges and meet only at lattice vertices.
std::vector<FlowLine> lattice_lines(std::mt19937_64& rng, int count) {
  const int size = 6;
  const double spacing = 10.0;
  std::uniform_int_distribution<int> coord(0, size - 1), steps(1, 8), flow(1, 20), dir(0, 3);
  const int dx[] = {1, -1, 0, 0}, dy[] = {0, 0, 1, -1};
  std::vector<FlowLine> lines;
  while (static_cast<int>(lines.size()) < count) {
    int x = coord(rng), y = coord(rng);
    std::vector<std::pair<int, int>> path{{x, y}};
    const int want = steps(rng);
    for (int tries = 0; static_cast<int>(path.size()) <= want && tries < 40; ++tries) {
      const int d = dir(rng);
      const int nx = x + dx[d], ny = y + dy[d];
      if (nx < 0 || ny < 0 || nx >= size || ny >= size) continue;
      if (std::find(path.begin(), path.end(), std::pair{nx, ny}) != path.end()) continue;
      x = nx;
      y = ny;
      path.push_back({x, y});
    }
    if (path.size() < 2) continue;
    std::vector<Point> pts;
    for (auto [px, py] : path) pts.push_back({spacing * px, spacing * py});
    lines.push_back({flow(rng), LineString(std::move(pts))});
  }
  return lines;
}

double atomic_flow_length(std::span<const FlowLine> lines) {
  double total = 0.0;
  for (const flow::AtomicSegment& s : flow::atomic_segments(lines))
    total += static_cast<double>(s.flow) * s.length();
  return total;
}

Outcome conservation() {
  std::mt19937_64 rng(6);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::vector<FlowLine> in = lattice_lines(rng, 2 + trial % 12);
    const FlowMap out = flow::overline(in);
    const double before = atomic_flow_length(in);
    const double after = atomic_flow_length(out.lines());
    worst = std::max(worst, std::abs(before - after) / before);
    if (std::abs(oracle::flow_length(in) - before) > 1e-9 * before)
      return {false, "atomic segments lose length in trial " + std::to_string(trial)};
    if (std::abs(oracle::flow_length(out.lines()) - after) > 1e-9 * after)
      return {false, "output lines disagree with their atomic segments in trial " + std::to_string(trial)};
    if (flow::overline(out) != out) return {false, "overline not idempotent in trial " + std::to_string(trial)};
  }
  std::ostringstream s;
  s << "max relative drift " << worst;
  return {worst <= 1e-9, s.str()};
}

Outcome route_selection() {
  const auto net_lines = netgraph::split_nodes(fixtures::grid_network(), netgraph::SplitMode::subdivision);
  match::SyntheticBackend backend{netgraph::NetworkGraph(net_lines)};
  std::mt19937_64 rng(7);
  int checked = 0;
  for (unsigned pattern = 0; pattern < 20; ++pattern) {
    const LineString truth = fixtures::staircase({0, 0}, (pattern * 37u) & 0x1f5u);
    const geom::Trajectory g = fixtures::noisy_trace(truth, 8.0, 15.0, rng, "t" + std::to_string(pattern));
    std::vector<match::Candidate> candidates;
    const match::RouteMatch m = match::st_route(g, backend, match::kDefaultWaypointCounts, &candidates);
    if (!m.route) return {false, "no route for trace " + g.id};
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      const double d = geom::dtw_normalized(candidates[c].route.points(), g.points);
      if (d != candidates[c].dtw) return {false, "candidate score mismatch for " + g.id};
      if (d < best) {
        best = d;
        arg = c;
      }
    }
    if (m.dtw != best || !(*m.route == candidates[arg].route))
      return {false, "selected route is not the DTW minimum for " + g.id};
    ++checked;
  }
  match::RouteMatch probe;
  probe.route = LineString({{0, 0}, {1, 0}});
  auto verdict = [&](double h, double r) {
    probe.hausdorff = h;
    probe.length_ratio = r;
    return match::quality_filter(probe);
  };
  if (verdict(100.0, 1.0) || verdict(50.0, 1.1) || verdict(100.0, 1.1))
    return {false, "boundary values accepted"};
  if (!verdict(std::nextafter(100.0, 0.0), std::nextafter(1.1, 0.0)))
    return {false, "values just inside the thresholds rejected"};
  return {true, std::to_string(checked) + " traces"};
}

std::vector<FlowLine> random_flow_map(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 150.0), jitter(-3.0, 3.0), side(-8.0, 8.0);
  std::uniform_int_distribution<int> hubs(2, 8), flow(1, 30), interior(0, 3);
  std::vector<Point> centres(hubs(rng));
  for (Point& c : centres) c = {u(rng), u(rng)};
  std::uniform_int_distribution<std::size_t> pick(0, centres.size() - 1);
  std::vector<FlowLine> lines;
  const int count = std::uniform_int_distribution<int>(1, 25)(rng);
  while (static_cast<int>(lines.size()) < count) {
    const Point a = centres[pick(rng)], b = centres[pick(rng)];
    std::vector<Point> pts{{a.x + jitter(rng), a.y + jitter(rng)}};
    const int k = interior(rng);
    for (int i = 1; i <= k; ++i) {
      const double t = static_cast<double>(i) / (k + 1);
      pts.push_back({a.x + t * (b.x - a.x) + side(rng), a.y + t * (b.y - a.y) + side(rng)});
    }
    pts.push_back({b.x + jitter(rng), b.y + jitter(rng)});
    for (Point& p : pts) p = geom::snap(p);
    if (auto line = LineString::try_make(std::move(pts))) lines.push_back({flow(rng), std::move(*line)});
  }
  return lines;
}

Outcome snap_bound() {
  std::mt19937_64 rng(8);
  const double eps_s = 4.0;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const FlowMap map = FlowMap::from_lines(random_flow_map(rng));
    const auto moved = align::snapped_vertices(map, eps_s);
    for (std::size_t l = 0; l < map.size(); ++l)
      for (std::size_t i = 0; i < moved[l].size(); ++i)
        worst = std::max(worst, geom::distance(map[l].line.points()[i], moved[l][i]));
    if (worst > eps_s) {
      std::ostringstream s;
      s << "displacement " << worst << " in trial " << trial;
      return {false, s.str()};
    }
    const FlowMap once = align::snap_nodes(map, eps_s);
    if (align::snap_nodes(once, eps_s) != once) return {false, "not idempotent in trial " + std::to_string(trial)};
  }
  std::ostringstream s;
  s << "max displacement " << worst;
  return {true, s.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / ("flowmap_determinism_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  const geom::Projection proj(geom::LonLat{9.7, 52.4});
  std::vector<nlohmann::json> features;
  for (const LineString& r : fixtures::jittered_routes())
    features.push_back(io::feature(io::line_geometry(r, proj), nlohmann::json::object()));
  io::write_json(dir / "routes.geojson", io::feature_collection(std::move(features)));

  cli::RunConfig cfg;
  cfg.threads = 1;
  if (cli::cmd_aggregate(dir / "routes.geojson", dir / "t1", cfg) != cli::kOk) return {false, "aggregate failed"};
  cfg.threads = 4;
  if (cli::cmd_aggregate(dir / "routes.geojson", dir / "t4", cfg) != cli::kOk) return {false, "aggregate failed"};
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(dir / "t1")) {
    const fs::path other = dir / "t4" / entry.path().filename();
    if (!fs::exists(other) || slurp(entry.path()) != slurp(other))
      return {false, entry.path().filename().string() + " differs"};
    ++files;
  }
  const std::size_t other_files =
      static_cast<std::size_t>(std::distance(fs::directory_iterator(dir / "t4"), fs::directory_iterator{}));
  fs::remove_all(dir);
  if (files == 0 || files != other_files) return {false, "output file sets differ"};
  return {true, std::to_string(files) + " files identical"};
}

}  // namespace

int main() {
  criterion(1, "single candidate blends into reference", 1.0, figure4);
  criterion(2, "touching line follows the blended reference", 1.0, figure5);
  criterion(3, "synthetic grid converges to ground truth", 60.0, grid_convergence);
  criterion(4, "nested two-pass clustering", 10.0, clustering);
  criterion(5, "DTW matches exhaustive warping paths", 5.0, dtw);
  criterion(6, "overline conserves flow and is idempotent", 10.0, conservation);
  criterion(7, "route selection and quality thresholds", 10.0, route_selection);
  criterion(8, "snap displacement bound and idempotence", 10.0, snap_bound);
  criterion(9, "aggregate output independent of thread count", 120.0, determinism);
  std::printf("%d of 9 criteria failed\n", failures);
  return failures ? 1 : 0;
}
