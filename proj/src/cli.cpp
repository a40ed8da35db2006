#include "flowmap/cli.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <fstream>
#include <sstream>

#include "flowmap/error.hpp"
#include "flowmap/io.hpp"
#include "flowmap/validate.hpp"

namespace flowmap::cli {

using nlohmann::json;
using netgraph::SplitMode;

namespace {

std::string split_name(SplitMode m) { return m == SplitMode::unary ? "unary" : "subdivision"; }

SplitMode split_from(const std::string& s) {
  if (s == "unary") return SplitMode::unary;
  if (s == "subdivision") return SplitMode::subdivision;
  throw InputError("unknown split mode '" + s + "' (expected subdivision or unary)");
}

template <typename T>
T get(const json& obj, const char* key) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InputError(std::string("config field '") + key + "': " + e.what());
  }
}

}  // namespace

void RunConfig::validate() const {
  if (match.n_w_list.empty()) throw InputError("match.n_w must not be empty");
  for (int n : match.n_w_list)
    if (n < 2) throw InputError("match.n_w values must be at least 2");
  if (!(match.h_max > 0) || !(match.r_max > 0) || match.min_length < 0)
    throw InputError("match thresholds must be positive");
  try {
    pipeline.validate();
  } catch (const InputError&) {
    throw;
  } catch (const Error& e) {
    throw InputError(std::string("aggregate: ") + e.what());
  }
  if (!(eps_t > 0) || !(delta_t > 0)) throw InputError("transect sizes must be positive");
  if (err_cut < 0 || rerr_cut < 0) throw InputError("error cuts must be non-negative");
  if (!(desire_cutoff > 0)) throw InputError("desire cutoff must be positive");
  if (threads < 1) throw InputError("threads must be at least 1");
}

json to_json(const RunConfig& cfg) {
  json stages = json::array();
  for (const align::StageConfig& s : cfg.pipeline.stages)
    stages.push_back({{"split", split_name(s.split)}, {"k", s.k_list}, {"eps", s.eps}, {"eps_s", s.eps_s}});
  json origin = "auto";
  if (cfg.origin) origin = {cfg.origin->lon, cfg.origin->lat};
  return {
      {"projection", {{"origin", origin}}},
      {"match",
       {{"backend", cfg.backend},
        {"n_w", cfg.match.n_w_list},
        {"h_max", cfg.match.h_max},
        {"r_max", cfg.match.r_max},
        {"min_length", cfg.match.min_length}}},
      {"aggregate",
       {{"stages", stages},
        {"eps_d", cfg.pipeline.eps_d},
        {"j_max", cfg.pipeline.j_max},
        {"f_min", cfg.pipeline.f_min}}},
      {"validate",
       {{"eps_t", cfg.eps_t}, {"delta_t", cfg.delta_t}, {"err_cut", cfg.err_cut}, {"rerr_cut", cfg.rerr_cut}}},
      {"desire", {{"cutoff", cfg.desire_cutoff}}},
      {"threads", cfg.threads},
      {"seed", cfg.seed},
  };
}

RunConfig config_from_json(const json& doc) {
  RunConfig cfg;
  try {
    const json& proj = doc.at("projection");
    const json& origin = proj.at("origin");
    if (origin.is_string()) {
      if (origin.get<std::string>() != "auto") throw InputError("projection.origin must be \"auto\" or [lon, lat]");
    } else if (origin.is_array() && origin.size() == 2) {
      cfg.origin = geom::LonLat{origin[0].get<double>(), origin[1].get<double>()};
    } else {
      throw InputError("projection.origin must be \"auto\" or [lon, lat]");
    }
    const json& m = doc.at("match");
    cfg.backend = get<std::string>(m, "backend");
    cfg.match.n_w_list = get<std::vector<int>>(m, "n_w");
    cfg.match.h_max = get<double>(m, "h_max");
    cfg.match.r_max = get<double>(m, "r_max");
    cfg.match.min_length = get<double>(m, "min_length");
    const json& a = doc.at("aggregate");
    cfg.pipeline.stages.clear();
    for (const json& s : a.at("stages"))
      cfg.pipeline.stages.push_back({split_from(get<std::string>(s, "split")), get<std::vector<int>>(s, "k"),
                                     get<double>(s, "eps"), get<double>(s, "eps_s")});
    cfg.pipeline.eps_d = get<double>(a, "eps_d");
    cfg.pipeline.j_max = get<int>(a, "j_max");
    cfg.pipeline.f_min = get<std::int64_t>(a, "f_min");
    const json& v = doc.at("validate");
    cfg.eps_t = get<double>(v, "eps_t");
    cfg.delta_t = get<double>(v, "delta_t");
    cfg.err_cut = get<double>(v, "err_cut");
    cfg.rerr_cut = get<double>(v, "rerr_cut");
    cfg.desire_cutoff = get<double>(doc.at("desire"), "cutoff");
    const auto threads = get<std::int64_t>(doc, "threads");
    if (threads < 1) throw InputError("threads must be at least 1");
    cfg.threads = static_cast<unsigned>(threads);
    cfg.seed = get<std::uint64_t>(doc, "seed");
  } catch (const json::exception& e) {
    throw InputError(std::string("invalid config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::optional<fs::path>& file, const std::vector<std::string>& sets) {
  json doc = to_json(RunConfig{});
  if (file) {
    const json patch = io::read_json(*file);
    if (!patch.is_object()) throw InputError(file->string() + ": config must be a JSON object");
    doc.merge_patch(patch);
  }
  for (const std::string& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw InputError("override must look like key.path=value: " + s);
    std::string pointer;
    std::stringstream keys(s.substr(0, eq));
    for (std::string part; std::getline(keys, part, '.');) pointer += "/" + part;
    const std::string raw = s.substr(eq + 1);
    json value;
    try {
      value = json::parse(raw);
    } catch (const json::exception&) {
      value = raw;
    }
    try {
      const json::json_pointer ptr(pointer);
      if (!doc.contains(ptr)) throw InputError("unknown config field " + s.substr(0, eq));
      doc[ptr] = value;
    } catch (const json::exception& e) {
      throw InputError("bad override " + s + ": " + e.what());
    }
  }
  return config_from_json(doc);
}

namespace {

geom::Projection projection_for(const RunConfig& cfg, const std::vector<geom::LonLat>& coords) {
  if (cfg.origin) return geom::Projection(*cfg.origin);
  return geom::Projection::centred_on(coords);
}

json origin_json(const geom::Projection& proj) { return {proj.origin().lon, proj.origin().lat}; }

// Echo of the configuration that affects results (execution settings left out).
json result_config(const RunConfig& cfg) {
  json doc = to_json(cfg);
  doc.erase("threads");
  return doc;
}

std::unique_ptr<match::MatchBackend> make_backend(const RunConfig& cfg, const geom::Projection& proj) {
  const std::string synthetic = "synthetic:";
  if (cfg.backend.rfind(synthetic, 0) == 0) {
    const fs::path net_path = cfg.backend.substr(synthetic.size());
    std::vector<flow::FlowLine> lines;
    for (const io::RawLine& raw : io::read_lines(net_path)) lines.push_back({1, io::project(raw.coords, proj)});
    if (lines.empty()) throw InputError(net_path.string() + " has no network lines");
    const auto split = netgraph::split_nodes(lines, SplitMode::subdivision);
    return std::make_unique<match::SyntheticBackend>(netgraph::NetworkGraph(split));
  }
  const std::string url = match::resolve_backend_url(cfg.backend);
  if (url.empty())
    throw InputError("no backend configured; use --backend URL|synthetic:PATH or " +
                     std::string(match::kBackendUrlEnv));
  return std::make_unique<match::HttpBackend>(url, proj);
}

std::string fmt_double(double v) {
  std::ostringstream s;
  s.precision(10);
  s << v;
  return s.str();
}

}  // namespace

int cmd_match(const fs::path& trajectories, const fs::path& out, const RunConfig& cfg) {
  const std::vector<io::RawTrajectory> raws = io::read_trajectories(trajectories);
  if (raws.empty()) throw InputError(trajectories.string() + " contains no trajectories");
  const geom::Projection proj = projection_for(cfg, io::all_coords(raws));
  std::vector<geom::Trajectory> trajs;
  trajs.reserve(raws.size());
  for (const io::RawTrajectory& r : raws) trajs.push_back(io::project(r, proj));

  const auto backend = make_backend(cfg, proj);
  spdlog::info("matching {} trajectories with the {} backend", trajs.size(), backend->kind());
  const std::vector<match::RouteMatch> results = match::match_all(trajs, *backend, cfg.match, cfg.threads);

  std::vector<json> features;
  std::string rejects = "id,reason,hausdorff,length_ratio\n";
  std::size_t accepted = 0;
  for (const match::RouteMatch& m : results) {
    if (m.accepted) {
      ++accepted;
      features.push_back(io::feature(io::line_geometry(*m.route, proj),
                                     {{"id", m.id},
                                      {"n_w", m.n_w},
                                      {"dtw", m.dtw},
                                      {"hausdorff", m.hausdorff},
                                      {"length_ratio", m.length_ratio}}));
    } else {
      rejects += io::csv_field(m.id) + "," + m.reason + "," +
                 (m.route ? fmt_double(m.hausdorff) + "," + fmt_double(m.length_ratio) : ",") + "\n";
    }
  }
  io::write_json(out / "routes.geojson", io::feature_collection(std::move(features)));
  io::write_text(out / "rejects.csv", rejects);
  io::write_json(out / "match_report.json",
                 {{"input", trajectories.string()},
                  {"trajectories", results.size()},
                  {"accepted", accepted},
                  {"rejected", results.size() - accepted},
                  {"projection_origin", origin_json(proj)},
                  {"config", result_config(cfg)}},
                 2);
  spdlog::info("{} of {} trajectories accepted", accepted, results.size());
  if (accepted == 0) {
    spdlog::error("no trajectory produced an accepted route");
    return kInputError;
  }
  return kOk;
}

int cmd_aggregate(const fs::path& routes_path, const fs::path& out, const RunConfig& cfg) {
  const std::vector<io::RawLine> raws = io::read_lines(routes_path);
  if (raws.empty()) throw InputError(routes_path.string() + " contains no routes");
  const geom::Projection proj = projection_for(cfg, io::all_coords(raws));
  std::vector<geom::LineString> routes;
  routes.reserve(raws.size());
  for (const io::RawLine& r : raws) routes.push_back(io::project(r.coords, proj));

  spdlog::info("aggregating {} routes over {} stages", routes.size(), cfg.pipeline.stages.size());
  const align::PipelineResult result = align::overline_pipeline(routes, cfg.pipeline, cfg.threads);

  json stages = json::array();
  for (std::size_t i = 0; i < result.maps.size(); ++i) {
    const std::string name = "flowmap" + std::to_string(i) + ".geojson";
    io::write_json(out / name, io::flowmap_geojson(result.maps[i], proj));
    stages.push_back({{"stage", i}, {"file", name}, {"segments", result.maps[i].size()}});
    spdlog::info("stage {}: {} segments", i, result.maps[i].size());
  }
  json log = json::array();
  for (const align::IterationLog& l : result.log) {
    log.push_back({{"stage", l.stage},
                   {"k", l.k},
                   {"step", l.step},
                   {"iterations", l.iterations},
                   {"exit", l.fixed_point ? "fixed_point" : "j_max"},
                   {"segment_counts", l.segment_counts}});
    if (!l.fixed_point) spdlog::warn("stage {} {} k={} stopped at j_max", l.stage, l.step, l.k);
  }
  io::write_json(out / "run_manifest.json",
                 {{"command", "aggregate"},
                  {"input", routes_path.string()},
                  {"routes", routes.size()},
                  {"projection_origin", origin_json(proj)},
                  {"config", result_config(cfg)},
                  {"stages", stages},
                  {"log", log}},
                 2);
  return kOk;
}

int cmd_validate(const fs::path& routes_path, const fs::path& flowmap_path, const fs::path& out,
                 const RunConfig& cfg) {
  const std::vector<io::RawLine> raws = io::read_lines(routes_path);
  if (raws.empty()) throw InputError(routes_path.string() + " contains no routes");
  const geom::Projection proj = projection_for(cfg, io::all_coords(raws));
  std::vector<geom::LineString> routes;
  for (const io::RawLine& r : raws) routes.push_back(io::project(r.coords, proj));
  const flow::FlowMap map = io::read_flowmap(flowmap_path, proj);
  if (map.empty()) throw InputError(flowmap_path.string() + " contains no flow lines");

  const auto errors = validate::proxy_flows(routes, map, cfg.eps_t, cfg.delta_t, cfg.threads);
  const validate::ErrorSummary summary = validate::error_summary(errors, cfg.err_cut, cfg.rerr_cut);

  std::vector<json> features;
  std::string csv = "line_id,transect,anchor,flow,crossings,proxy_flow,err,rerr\n";
  for (const validate::TransectError& e : errors) {
    features.push_back(io::feature(io::line_geometry(e.transect.segment, proj),
                                   {{"line_id", e.line},
                                    {"transect", e.index},
                                    {"anchor", e.transect.anchor},
                                    {"crossings", e.crossings}}));
    csv += std::to_string(e.line) + "," + std::to_string(e.index) + "," + fmt_double(e.transect.anchor) + "," +
           std::to_string(e.flow) + "," + std::to_string(e.crossings) + "," + fmt_double(e.proxy) + "," +
           fmt_double(e.err) + "," + fmt_double(e.rerr) + "\n";
  }
  io::write_json(out / "transects.geojson", io::feature_collection(std::move(features)));
  io::write_text(out / "transect_errors.csv", csv);
  std::string bins = "err,rerr,count\n";
  for (const validate::HexBin& b : summary.bins)
    bins += fmt_double(b.err) + "," + fmt_double(b.rerr) + "," + std::to_string(b.count) + "\n";
  io::write_text(out / "hexbin.csv", bins);

  auto share = [&](std::size_t n) { return summary.share(n); };
  io::write_json(out / "summary.json",
                 {{"transects", summary.transects},
                  {"flow_lines", map.size()},
                  {"routes", routes.size()},
                  {"zero_error", {{"count", summary.zero}, {"share", share(summary.zero)}}},
                  {"err_over_cut", {{"cut", summary.err_cut}, {"count", summary.over_err}, {"share", share(summary.over_err)}}},
                  {"rerr_over_cut",
                   {{"cut", summary.rerr_cut}, {"count", summary.over_rerr}, {"share", share(summary.over_rerr)}}},
                  {"both_over_cut", {{"count", summary.over_both}, {"share", share(summary.over_both)}}},
                  {"projection_origin", origin_json(proj)},
                  {"config", result_config(cfg)}},
                 2);
  spdlog::info("{} transects, {:.1f}% with zero error", summary.transects, 100.0 * share(summary.zero));
  return kOk;
}

int cmd_desire(const fs::path& trajectories, const fs::path& out, const RunConfig& cfg) {
  const std::vector<io::RawTrajectory> raws = io::read_trajectories(trajectories);
  if (raws.empty()) throw InputError(trajectories.string() + " contains no trajectories");
  const geom::Projection proj = projection_for(cfg, io::all_coords(raws));
  std::vector<geom::Trajectory> trajs;
  for (const io::RawTrajectory& r : raws) {
    if (r.coords.empty()) throw InputError("trajectory " + r.id + " has no points");
    trajs.push_back(io::project(r, proj));
  }
  const validate::DesireResult result = validate::desire_lines(trajs, cfg.desire_cutoff, cfg.threads);

  std::vector<json> lines;
  for (const validate::DesireLine& d : result.lines) {
    json props = {{"flow", d.flow}, {"hub_from", d.hub_from}, {"hub_to", d.hub_to}, {"same_hub", d.is_marker()}};
    json geometry = d.is_marker() ? io::point_geometry(d.from, proj)
                                  : io::line_geometry(geom::LineString({d.from, d.to}), proj);
    lines.push_back(io::feature(std::move(geometry), std::move(props)));
  }
  std::vector<json> hubs;
  for (std::size_t h = 0; h < result.hubs.size(); ++h)
    hubs.push_back(io::feature(io::point_geometry(result.hubs[h], proj), {{"hub", h}}));
  io::write_json(out / "desire_lines.geojson", io::feature_collection(std::move(lines)));
  io::write_json(out / "hubs.geojson", io::feature_collection(std::move(hubs)));
  spdlog::info("{} hubs, {} desire features", result.hubs.size(), result.lines.size());
  return kOk;
}

int run(int argc, char** argv) {
  CLI::App app{"Traffic flow maps from GPS trajectories"};
  app.require_subcommand(1);
  app.fallthrough();
  std::optional<std::string> config_file;
  std::string out_dir = "out";
  std::vector<std::string> sets;
  std::optional<unsigned> threads;
  std::optional<std::string> backend;
  std::optional<std::string> origin;
  std::string log_level = "info";
  app.add_option("--config", config_file, "JSON config file");
  app.add_option("--out", out_dir, "Output directory")->capture_default_str();
  app.add_option("--set", sets, "Override a config field, e.g. aggregate.j_max=10");
  app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--backend", backend, "Backend: http://host:port or synthetic:NETWORK.geojson");
  app.add_option("--origin", origin, "Projection origin as lon,lat (default: data centre)");
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off")->capture_default_str();

  std::string in_a, in_b;
  auto* match_cmd = app.add_subcommand("match", "Map-match trajectories into routes");
  match_cmd->add_option("trajectories", in_a, "Trajectory CSV or GeoJSON")->required();
  auto* agg_cmd = app.add_subcommand("aggregate", "Aggregate routes into aligned flow maps");
  agg_cmd->add_option("routes", in_a, "Routes GeoJSON")->required();
  auto* val_cmd = app.add_subcommand("validate", "Transect validation of a flow map");
  val_cmd->add_option("routes", in_a, "Routes GeoJSON")->required();
  val_cmd->add_option("flowmap", in_b, "Flow map GeoJSON")->required();
  auto* des_cmd = app.add_subcommand("desire", "Origin-destination desire lines");
  des_cmd->add_option("trajectories", in_a, "Trajectory CSV or GeoJSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }

  auto logger = spdlog::get("flowmap");
  if (!logger) logger = spdlog::stderr_color_mt("flowmap");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (threads) sets.push_back("threads=" + std::to_string(*threads));
    if (backend) sets.push_back("match.backend=" + json(*backend).dump());
    if (origin) {
      const auto comma = origin->find(',');
      if (comma == std::string::npos) throw InputError("--origin expects lon,lat");
      sets.push_back("projection.origin=[" + *origin + "]");
    }
    const RunConfig cfg = load_config(config_file ? std::optional<fs::path>(*config_file) : std::nullopt, sets);
    const fs::path out(out_dir);
    if (match_cmd->parsed()) return cmd_match(in_a, out, cfg);
    if (agg_cmd->parsed()) return cmd_aggregate(in_a, out, cfg);
    if (val_cmd->parsed()) return cmd_validate(in_a, in_b, out, cfg);
    return cmd_desire(in_a, out, cfg);
  } catch (const InputError& e) {
    spdlog::error("{}", e.what());
    return kInputError;
  } catch (const GeometryError& e) {
    spdlog::error("invalid geometry: {}", e.what());
    return kInputError;
  } catch (const BackendError& e) {
    spdlog::error("backend: {}", e.what());
    return kBackendError;
  } catch (const std::filesystem::filesystem_error& e) {
    spdlog::error("{}", e.what());
    return kInputError;
  } catch (const std::exception& e) {
    spdlog::error("internal error: {}", e.what());
    return kInvariantError;
  }
}

}  // namespace flowmap::cli
