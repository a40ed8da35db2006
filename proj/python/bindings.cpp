#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <utility>
#include <vector>

#include "flowmap/align.hpp"
#include "flowmap/cli.hpp"
#include "flowmap/error.hpp"
#include "flowmap/flow.hpp"
#include "flowmap/geom.hpp"
#include "flowmap/match.hpp"
#include "flowmap/netgraph.hpp"
#include "flowmap/validate.hpp"

namespace py = pybind11;
using namespace flowmap;
using geom::LineString;
using geom::Point;

namespace {

using Coords = std::vector<std::pair<double, double>>;
using PyFlowLine = std::pair<std::int64_t, Coords>;

std::vector<Point> points_of(const Coords& coords) {
  std::vector<Point> pts;
  pts.reserve(coords.size());
  for (const auto& [x, y] : coords) pts.push_back(geom::snap({x, y}));
  return pts;
}

LineString line_of(const Coords& coords) {
  auto line = LineString::try_make(points_of(coords));
  if (!line) throw GeometryError("line with fewer than two distinct points");
  return *line;
}

Coords coords_of(std::span<const Point> pts) {
  Coords out;
  out.reserve(pts.size());
  for (const Point& p : pts) out.emplace_back(p.x, p.y);
  return out;
}

Coords coords_of(const LineString& line) { return coords_of(line.points()); }

std::vector<LineString> lines_of(const std::vector<Coords>& lines) {
  std::vector<LineString> out;
  out.reserve(lines.size());
  for (const Coords& c : lines) out.push_back(line_of(c));
  return out;
}

flow::FlowMap map_of(const std::vector<PyFlowLine>& lines) {
  std::vector<flow::FlowLine> out;
  out.reserve(lines.size());
  for (const auto& [f, c] : lines) out.push_back({f, line_of(c)});
  return flow::FlowMap::from_lines(std::move(out));
}

std::vector<PyFlowLine> py_map(const flow::FlowMap& map) {
  std::vector<PyFlowLine> out;
  out.reserve(map.size());
  for (const flow::FlowLine& fl : map) out.emplace_back(fl.flow, coords_of(fl.line));
  return out;
}

std::vector<geom::Trajectory> trajectories_of(const std::vector<Coords>& trajs) {
  std::vector<geom::Trajectory> out;
  out.reserve(trajs.size());
  for (std::size_t i = 0; i < trajs.size(); ++i) out.push_back({std::to_string(i), points_of(trajs[i]), {}});
  return out;
}

// Settings travel as JSON text in the command-line config layout.
cli::RunConfig config_of(const std::string& json_text) {
  nlohmann::json patch;
  try {
    patch = json_text.empty() ? nlohmann::json::object() : nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("bad config JSON: ") + e.what());
  }
  nlohmann::json doc = cli::to_json(cli::RunConfig{});
  doc.merge_patch(patch);
  return cli::config_from_json(doc);
}

py::dict aggregate(const std::vector<Coords>& routes, const std::string& config, unsigned threads) {
  const cli::RunConfig cfg = config_of(config);
  const std::vector<LineString> lines = lines_of(routes);
  align::PipelineResult result;
  {
    py::gil_scoped_release release;
    result = align::overline_pipeline(lines, cfg.pipeline, threads);
  }
  py::list maps, log;
  for (const flow::FlowMap& m : result.maps) maps.append(py_map(m));
  for (const align::IterationLog& it : result.log) {
    py::dict d;
    d["stage"] = it.stage;
    d["k"] = it.k;
    d["step"] = it.step;
    d["iterations"] = it.iterations;
    d["fixed_point"] = it.fixed_point;
    d["segment_counts"] = it.segment_counts;
    log.append(d);
  }
  py::dict out;
  out["maps"] = maps;
  out["log"] = log;
  return out;
}

py::list match_synthetic(const std::vector<Coords>& trajectories, const std::vector<Coords>& network,
                         const std::string& config, unsigned threads) {
  const cli::RunConfig cfg = config_of(config);
  std::vector<flow::FlowLine> net;
  for (const Coords& c : network) net.push_back({1, line_of(c)});
  match::SyntheticBackend backend(
      netgraph::NetworkGraph(netgraph::split_nodes(net, netgraph::SplitMode::subdivision)));
  const std::vector<geom::Trajectory> trajs = trajectories_of(trajectories);
  std::vector<match::RouteMatch> matches;
  {
    py::gil_scoped_release release;
    matches = match::match_all(trajs, backend, cfg.match, threads);
  }
  py::list out;
  for (const match::RouteMatch& m : matches) {
    py::dict d;
    d["id"] = m.id;
    d["route"] = m.route ? py::cast(coords_of(*m.route)) : py::none();
    d["n_w"] = m.n_w;
    d["dtw"] = m.dtw;
    d["hausdorff"] = m.hausdorff;
    d["length_ratio"] = m.length_ratio;
    d["accepted"] = m.accepted;
    d["reason"] = m.reason;
    out.append(d);
  }
  return out;
}

py::list proxy_flows(const std::vector<Coords>& routes, const std::vector<PyFlowLine>& map, double eps_t,
                     double delta_t, unsigned threads) {
  const std::vector<LineString> lines = lines_of(routes);
  const flow::FlowMap fm = map_of(map);
  py::list out;
  for (const validate::TransectError& e : validate::proxy_flows(lines, fm, eps_t, delta_t, threads)) {
    py::dict d;
    d["line"] = e.line;
    d["transect"] = e.index;
    d["anchor"] = e.transect.anchor;
    d["segment"] = coords_of(e.transect.segment);
    d["flow"] = e.flow;
    d["crossings"] = e.crossings;
    d["proxy_flow"] = e.proxy;
    d["err"] = e.err;
    d["rerr"] = e.rerr;
    out.append(d);
  }
  return out;
}

py::dict desire_lines(const std::vector<Coords>& trajectories, double cutoff, unsigned threads) {
  const validate::DesireResult r = validate::desire_lines(trajectories_of(trajectories), cutoff, threads);
  py::list lines;
  for (const validate::DesireLine& l : r.lines) {
    py::dict d;
    d["from"] = std::pair{l.from.x, l.from.y};
    d["to"] = std::pair{l.to.x, l.to.y};
    d["hub_from"] = l.hub_from;
    d["hub_to"] = l.hub_to;
    d["flow"] = l.flow;
    lines.append(d);
  }
  py::dict out;
  out["hubs"] = coords_of(r.hubs);
  out["lines"] = lines;
  return out;
}

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "flowmap");
  std::vector<char*> argv;
  for (std::string& a : args) argv.push_back(a.data());
  py::gil_scoped_release release;
  return cli::run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

PYBIND11_MODULE(_flowmap, m) {
  m.doc() = "Aligned traffic flow maps from GPS trajectories";

  static py::exception<Error> error(m, "Error");
  py::register_exception<GeometryError>(m, "GeometryError", error.ptr());
  py::register_exception<InputError>(m, "InputError", error.ptr());
  py::register_exception<BackendError>(m, "BackendError", error.ptr());
  py::register_exception<InvariantError>(m, "InvariantError", error.ptr());

  m.def("dtw", [](const Coords& a, const Coords& b) { return geom::dtw_normalized(points_of(a), points_of(b)); },
        py::arg("a"), py::arg("b"));
  m.def("hausdorff", [](const Coords& a, const Coords& b) { return geom::hausdorff(points_of(a), points_of(b)); },
        py::arg("a"), py::arg("b"));
  m.def("simplify", [](const Coords& line, double eps_d) { return coords_of(geom::simplify(line_of(line), eps_d)); },
        py::arg("line"), py::arg("eps_d"));

  m.def("overline", [](const std::vector<PyFlowLine>& map) { return py_map(flow::overline(map_of(map))); },
        py::arg("flow_map"));
  m.def("prune",
        [](const std::vector<PyFlowLine>& map, std::int64_t f_min, int max_iter) {
          return py_map(flow::prune(map_of(map), f_min, max_iter));
        },
        py::arg("flow_map"), py::arg("f_min") = 1, py::arg("max_iter") = 20);
  m.def("snap_nodes",
        [](const std::vector<PyFlowLine>& map, double eps_s, unsigned threads) {
          return py_map(align::snap_nodes(map_of(map), eps_s, threads));
        },
        py::arg("flow_map"), py::arg("eps_s"), py::arg("threads") = 1);
  m.def("lineblend_pass",
        [](const std::vector<PyFlowLine>& map, int k, double eps, double eps_s, unsigned threads) {
          return py_map(align::lineblend_pass(map_of(map), k, eps, eps_s, threads));
        },
        py::arg("flow_map"), py::arg("k"), py::arg("eps"), py::arg("eps_s"), py::arg("threads") = 1);

  m.def("default_config", [] { return cli::to_json(cli::RunConfig{}).dump(); });
  m.def("aggregate", &aggregate, py::arg("routes"), py::arg("config") = "", py::arg("threads") = 1);
  m.def("match_synthetic", &match_synthetic, py::arg("trajectories"), py::arg("network"), py::arg("config") = "",
        py::arg("threads") = 1);
  m.def("proxy_flows", &proxy_flows, py::arg("routes"), py::arg("flow_map"), py::arg("eps_t") = 5.0,
        py::arg("delta_t") = 50.0, py::arg("threads") = 1);
  m.def("desire_lines", &desire_lines, py::arg("trajectories"), py::arg("cutoff") = 5000.0, py::arg("threads") = 1);
  m.def("run_cli", &run_cli, py::arg("args"));
}
