#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "flowmap/align.hpp"
#include "flowmap/error.hpp"

using namespace flowmap;
using flow::FlowLine;
using flow::FlowMap;
using geom::LineString;
using geom::Point;

namespace {

const Point A{0, 0}, B{50, 0}, C{100, 0};

bool on_line(const LineString& line, Point p) { return geom::distance_to_line(line, p) <= 1e-6; }

}  // namespace

TEST_CASE("snap_nodes examples") {
  const FlowMap equal = FlowMap::from_lines({{1, LineString({{0, 0}, {50, 0}})}, {1, LineString({{0, 3}, {-50, 3}})}});
  for (const FlowLine& fl : align::snap_nodes(equal, 4.0))
    CHECK((geom::same_point(fl.line.front(), {0, 1.5}) || geom::same_point(fl.line.back(), {0, 1.5})));

  const FlowMap weighted = FlowMap::from_lines({{3, LineString({{0, 0}, {50, 0}})}, {1, LineString({{0, 3}, {-50, 3}})}});
  for (const FlowLine& fl : align::snap_nodes(weighted, 4.0))
    CHECK((geom::same_point(fl.line.front(), {0, 0.75}) || geom::same_point(fl.line.back(), {0, 0.75})));

  CHECK(align::snap_nodes(equal, 2.0) == equal);
  CHECK_THROWS(align::snap_nodes(equal, 0.0));
}

TEST_CASE("snap_nodes pulls interior points onto the centroid") {
  const FlowMap m = FlowMap::from_lines({{1, LineString({{0, 0}, {1, 1}, {50, 0}})}, {1, LineString({{0, 2}, {-50, 3}})}});
  const auto moved = align::snapped_vertices(m, 4.0);
  for (const auto& pts : moved)
    for (const Point& p : pts) CHECK_FALSE(geom::same_point(p, {1, 1}));
}

TEST_CASE("snap_nodes bound and idempotence on random maps") {
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> u(0.0, 60.0), j(-2.5, 2.5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Point> hubs(4);
    for (Point& h : hubs) h = {u(rng), u(rng)};
    std::vector<FlowLine> lines;
    for (int i = 0; i < 10; ++i) {
      const Point a = hubs[i % 4], b = hubs[(i * 3 + 1) % 4];
      if (auto l = LineString::try_make({geom::snap({a.x + j(rng), a.y + j(rng)}), geom::snap({b.x + j(rng), b.y + j(rng)})}))
        lines.push_back({1 + i % 5, *l});
    }
    const FlowMap map = FlowMap::from_lines(lines);
    const auto moved = align::snapped_vertices(map, 4.0);
    for (std::size_t l = 0; l < map.size(); ++l)
      for (std::size_t i = 0; i < moved[l].size(); ++i) CHECK(geom::distance(map[l].line.points()[i], moved[l][i]) <= 4.0);
    const FlowMap once = align::snap_nodes(map, 4.0);
    CHECK(align::snap_nodes(once, 4.0) == once);
  }
}

TEST_CASE("blend candidate test") {
  const FlowLine ref{7, LineString({A, B, C})};
  CHECK(align::is_blend_candidate(ref, {2, LineString({A, {90, 2}})}, 4.0));
  CHECK_FALSE(align::is_blend_candidate(ref, {2, LineString({{97, 2}, {110, 30}})}, 4.0));
  CHECK_FALSE(align::is_blend_candidate(ref, {2, LineString({{0, 5}, {100, 5}})}, 4.0));
  CHECK_FALSE(align::is_blend_candidate(ref, {8, LineString({A, {90, 2}})}, 4.0));
}

TEST_CASE("line_blend on a single candidate") {
  const std::vector<FlowLine> cands{{2, LineString({A, {90, 2}})}};
  const auto res = align::line_blend(LineString({A, B, C}), cands);
  CHECK(res.reference == LineString({A, B, {90, 0}, C}));
  REQUIRE(res.candidates.size() == 1);
  CHECK(res.candidates[0].flow == 2);
  CHECK(res.candidates[0].line == LineString({A, B, {90, 0}}));
  CHECK(res.anchors == std::vector<std::size_t>{0, 1, 3});
}

TEST_CASE("line_blend of the reference itself is the identity") {
  const LineString ref({A, B, C});
  const auto res = align::line_blend(ref, std::vector<FlowLine>{{3, ref}});
  CHECK(res.reference == ref);
  CHECK(res.candidates[0].line == ref);
}

TEST_CASE("blended candidates lie on the blended reference") {
  std::mt19937_64 rng(52);
  std::normal_distribution<double> n(0.0, 0.8);
  const LineString ref({{0, 0}, {40, 5}, {90, -3}, {140, 10}});
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<FlowLine> cands;
    for (int c = 0; c < 3; ++c) {
      std::vector<Point> pts;
      for (const Point& p : ref.points()) pts.push_back(geom::snap({p.x + n(rng), p.y + n(rng)}));
      cands.push_back({1, LineString(pts)});
    }
    const auto res = align::line_blend(ref, cands);
    for (const FlowLine& fl : res.candidates)
      for (const Point& p : fl.line.points()) CHECK(on_line(res.reference, p));
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(res.reference.points()[res.anchors[i]] == ref.points()[i]);
  }
}

TEST_CASE("snap_cand_touch") {
  SUBCASE("contact near the reference end moves onto it") {
    std::vector<FlowLine> ref{{7, LineString({A, B, C})}};
    const std::vector<FlowLine> cands{{2, LineString({A, {97, 2}})}};
    const std::vector<FlowLine> touch{{5, LineString({{97, 2}, {110, 30}})}};
    const auto out = align::snap_cand_touch(ref, cands, touch, 4.0);
    REQUIRE(out.size() == 1);
    CHECK(out[0].line == LineString({C, {110, 30}}));
    CHECK(ref[0].line == LineString({A, B, C}));
  }
  SUBCASE("contact on the reference stays") {
    std::vector<FlowLine> ref{{7, LineString({A, B, C})}};
    const std::vector<FlowLine> cands{{2, LineString({A, B})}};
    const std::vector<FlowLine> touch{{5, LineString({B, {50, 40}})}};
    const auto out = align::snap_cand_touch(ref, cands, touch, 4.0);
    CHECK(out[0].line == touch[0].line);
  }
  SUBCASE("contact far from both ends goes to the perpendicular foot") {
    std::vector<FlowLine> ref{{7, LineString({A, B, C})}};
    const std::vector<FlowLine> cands{{2, LineString({A, {30, 3}})}};
    const std::vector<FlowLine> touch{{5, LineString({{30, 3}, {30, 40}})}};
    const auto out = align::snap_cand_touch(ref, cands, touch, 4.0);
    CHECK(out[0].line == LineString({{30, 0}, {30, 40}}));
    CHECK(ref[0].line == LineString({A, {30, 0}, B, C}));
  }
}

TEST_CASE("blend_priority") {
  const FlowMap two = FlowMap::from_lines({{5, LineString({{0, 0}, {100, 0}})}, {2, LineString({{0, 1}, {100, 1}})}});
  auto groups = align::blend_priority(two, 1, 4.0);
  REQUIRE(groups.size() == 1);
  CHECK(groups[0].reference_edges[0].flow == 5);
  CHECK(groups[0].candidates.size() == 1);
  CHECK(groups[0].candidates[0].flow == 2);

  const FlowMap lengths = FlowMap::from_lines({{3, LineString({{0, 1}, {60, 1}})}, {3, LineString({{0, 0}, {100, 0}})}});
  groups = align::blend_priority(lengths, 1, 4.0);
  REQUIRE(groups.size() == 1);
  CHECK(groups[0].reference_edges[0].line.length() == doctest::Approx(100.0));

  const FlowMap apart = FlowMap::from_lines({{5, LineString({{0, 0}, {100, 0}})}, {2, LineString({{0, 50}, {100, 50}})}});
  CHECK(align::blend_priority(apart, 1, 4.0).empty());
}

TEST_CASE("blend_priority roles are exclusive") {
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<FlowLine> lines;
    for (const LineString& r : fixtures::jittered_routes(12, 1.0, 100 + trial)) lines.push_back({1 + static_cast<int>(lines.size()) % 4, r});
    const FlowMap map = align::snap_nodes(FlowMap::from_lines(netgraph::split_nodes(lines, netgraph::SplitMode::subdivision)), 4.0);
    for (int k = 1; k <= 2; ++k) {
      std::vector<int> role(map.size(), 0);
      for (const auto& g : align::blend_priority(map, k, 4.0)) {
        for (std::size_t e : g.reference.edges) CHECK(role[e]++ == 0);
        for (std::size_t c : g.candidate_ids) CHECK(role[c]++ == 0);
      }
    }
  }
}

TEST_CASE("overline_lineblend on the single candidate layout") {
  const FlowMap in = FlowMap::from_lines({{7, LineString({A, B, C})}, {2, LineString({A, {90, 2}})}});
  const FlowMap out = align::overline_lineblend(in, netgraph::SplitMode::subdivision, 1, 4.0, 4.0);
  REQUIRE(out.size() == 1);
  CHECK(out[0].flow == 9);
  CHECK(out[0].line == flow::canonical(LineString({A, B, {90, 0}, C})));
}

TEST_CASE("lineblend_pass keeps the touching line connected") {
  const FlowMap in = FlowMap::from_lines(
      {{7, LineString({A, B, C})}, {2, LineString({A, {97, 2}})}, {5, LineString({{97, 2}, {110, 30}})}});
  const FlowMap out = align::lineblend_pass(in, 1, 4.0, 4.0);
  REQUIRE(out.size() == 2);
  CHECK(out[0].flow == 9);
  CHECK(out[0].line == flow::canonical(LineString({A, B, {97, 0}, C})));
  CHECK(out[1].flow == 5);
  CHECK(out[1].line == flow::canonical(LineString({C, {110, 30}})));
}

TEST_CASE("without blend groups the result is the snapped, split map") {
  const FlowMap in = FlowMap::from_lines({{3, LineString({{0, 0}, {100, 0}})}, {2, LineString({{0, 2}, {0, 80}})}});
  const auto split = netgraph::split_nodes(in.lines(), netgraph::SplitMode::unary);
  const FlowMap expected = align::snap_nodes(FlowMap::from_lines(split), 4.0);
  CHECK(align::overline_lineblend(in, netgraph::SplitMode::unary, 1, 4.0, 4.0) == expected);
}

TEST_CASE("pipeline on a single route") {
  const LineString route({{0, 0}, {100, 0}, {100, 100}, {250, 100}});
  const std::vector<LineString> routes{route};
  const auto res = align::overline_pipeline(routes, align::PipelineConfig{});
  REQUIRE(res.maps.size() == 5);
  for (const FlowMap& m : res.maps) {
    REQUIRE(m.size() == 1);
    CHECK(m[0].flow == 1);
    CHECK(m[0].line == flow::canonical(route));
  }
  for (const auto& entry : res.log) CHECK(entry.fixed_point);
}

TEST_CASE("pipeline log and termination") {
  const auto routes = fixtures::jittered_routes(30, 1.0, 7);
  align::PipelineConfig cfg;
  cfg.j_max = 3;
  const auto res = align::overline_pipeline(routes, cfg);
  CHECK(res.maps.size() == cfg.stages.size() + 1);
  for (const auto& entry : res.log) {
    CHECK(entry.iterations >= 1);
    CHECK(entry.iterations <= cfg.j_max);
    CHECK(entry.segment_counts.size() == static_cast<std::size_t>(entry.iterations));
    if (!entry.fixed_point) CHECK(entry.iterations == cfg.j_max);
    if (entry.step == "prune")
      for (std::size_t i = 1; i < entry.segment_counts.size(); ++i)
        CHECK(entry.segment_counts[i] <= entry.segment_counts[i - 1]);
  }
}

TEST_CASE("pipeline configuration checks") {
  align::PipelineConfig cfg;
  cfg.j_max = 0;
  CHECK_THROWS(cfg.validate());
  cfg = {};
  cfg.stages[0].k_list = {5};
  CHECK_THROWS(cfg.validate());
  CHECK_THROWS(align::overline_pipeline(std::vector<LineString>{}, align::PipelineConfig{}));
}
