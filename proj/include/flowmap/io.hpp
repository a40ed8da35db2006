#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowmap/flow.hpp"
#include "flowmap/geom.hpp"
#include "flowmap/projection.hpp"

namespace flowmap::io {

namespace fs = std::filesystem;
using nlohmann::json;

struct RawTrajectory {
  std::string id;
  std::vector<geom::LonLat> coords;
  std::vector<double> timestamps;  // empty or one per coordinate
};

/// CSV (traj_id,seq,lon,lat[,t]) or GeoJSON (LineString / MultiPoint per
/// feature, "id" property). Format chosen by extension.
std::vector<RawTrajectory> read_trajectories(const fs::path& path);

struct RawLine {
  std::string id;
  std::vector<geom::LonLat> coords;
  std::optional<std::int64_t> flow;
};

/// LineString and MultiLineString features (one entry per part).
std::vector<RawLine> read_lines(const fs::path& path);

std::vector<geom::LonLat> all_coords(const std::vector<RawTrajectory>& trajs);
std::vector<geom::LonLat> all_coords(const std::vector<RawLine>& lines);

geom::Trajectory project(const RawTrajectory& t, const geom::Projection& proj);
geom::LineString project(const std::vector<geom::LonLat>& coords, const geom::Projection& proj);

json line_geometry(const geom::LineString& line, const geom::Projection& proj);
json point_geometry(geom::Point p, const geom::Projection& proj);
json feature(json geometry, json properties);
json feature_collection(std::vector<json> features);

json flowmap_geojson(const flow::FlowMap& map, const geom::Projection& proj);
flow::FlowMap read_flowmap(const fs::path& path, const geom::Projection& proj);

/// Writes JSON with a trailing newline; creates parent directories.
void write_json(const fs::path& path, const json& doc, int indent = -1);
void write_text(const fs::path& path, const std::string& text);
json read_json(const fs::path& path);

/// Minimal CSV field quoting for ids.
std::string csv_field(const std::string& s);

}  // namespace flowmap::io
