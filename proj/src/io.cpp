#include "flowmap/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "flowmap/error.hpp"

namespace flowmap::io {

using geom::LonLat;

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  while (begin < end && *begin == ' ') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr == begin) throw InputError("not a number '" + s + "' at " + where);
  return v;
}

std::vector<RawTrajectory> read_csv_trajectories(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw InputError(path.string() + " is empty");
  const std::vector<std::string> header = split_csv(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[lower(header[i])] = i;
  for (const char* need : {"traj_id", "seq", "lon", "lat"})
    if (!col.count(need)) throw InputError(path.string() + ": missing column " + need);
  const bool has_t = col.count("t") > 0;

  struct Row {
    double seq, lon, lat, t;
  };
  std::vector<std::string> order;
  std::map<std::string, std::vector<Row>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> f = split_csv(line);
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (f.size() < header.size()) throw InputError("too few fields at " + where);
    const std::string& id = f[col["traj_id"]];
    if (!rows.count(id)) order.push_back(id);
    rows[id].push_back({parse_double(f[col["seq"]], where), parse_double(f[col["lon"]], where),
                        parse_double(f[col["lat"]], where),
                        has_t ? parse_double(f[col["t"]], where) : 0.0});
  }
  std::vector<RawTrajectory> out;
  for (const std::string& id : order) {
    auto& r = rows[id];
    std::stable_sort(r.begin(), r.end(), [](const Row& a, const Row& b) { return a.seq < b.seq; });
    RawTrajectory t{id, {}, {}};
    for (const Row& row : r) {
      t.coords.push_back({row.lon, row.lat});
      if (has_t) t.timestamps.push_back(row.t);
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<LonLat> coords_of(const json& arr) {
  std::vector<LonLat> out;
  for (const json& c : arr) {
    if (!c.is_array() || c.size() < 2) throw InputError("malformed GeoJSON position");
    out.push_back({c[0].get<double>(), c[1].get<double>()});
  }
  return out;
}

std::string feature_id(const json& f, std::size_t index) {
  const json props = f.value("properties", json::object());
  for (const json* src : {&props, &f}) {
    if (!src->is_object()) continue;
    auto it = src->find("id");
    if (it == src->end()) continue;
    if (it->is_string()) return it->get<std::string>();
    if (it->is_number()) return it->dump();
  }
  return std::to_string(index);
}

const json& features_of(const json& doc, const fs::path& path) {
  if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" || !doc.contains("features"))
    throw InputError(path.string() + " is not a GeoJSON FeatureCollection");
  return doc["features"];
}

}  // namespace

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::vector<RawTrajectory> read_trajectories(const fs::path& path) {
  const std::string ext = lower(path.extension().string());
  if (ext == ".csv") return read_csv_trajectories(path);
  const json doc = read_json(path);
  std::vector<RawTrajectory> out;
  std::size_t index = 0;
  for (const json& f : features_of(doc, path)) {
    const json& geom = f.at("geometry");
    const std::string type = geom.value("type", "");
    if (type != "LineString" && type != "MultiPoint")
      throw InputError(path.string() + ": unsupported trajectory geometry " + type);
    RawTrajectory t{feature_id(f, index++), coords_of(geom.at("coordinates")), {}};
    const json props = f.value("properties", json::object());
    if (props.is_object() && props.contains("t") && props["t"].is_array())
      t.timestamps = props["t"].get<std::vector<double>>();
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<RawLine> read_lines(const fs::path& path) {
  const json doc = read_json(path);
  std::vector<RawLine> out;
  std::size_t index = 0;
  try {
    for (const json& f : features_of(doc, path)) {
      const std::string id = feature_id(f, index++);
      const json& geom = f.at("geometry");
      const std::string type = geom.value("type", "");
      std::optional<std::int64_t> flow;
      const json props = f.value("properties", json::object());
      if (props.is_object() && props.contains("flow") && props["flow"].is_number())
        flow = props["flow"].get<std::int64_t>();
      if (type == "LineString") {
        out.push_back({id, coords_of(geom.at("coordinates")), flow});
      } else if (type == "MultiLineString") {
        for (const json& part : geom.at("coordinates")) out.push_back({id, coords_of(part), flow});
      } else {
        throw InputError(path.string() + ": unsupported line geometry " + type);
      }
    }
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  return out;
}

std::vector<LonLat> all_coords(const std::vector<RawTrajectory>& trajs) {
  std::vector<LonLat> out;
  for (const auto& t : trajs) out.insert(out.end(), t.coords.begin(), t.coords.end());
  return out;
}

std::vector<LonLat> all_coords(const std::vector<RawLine>& lines) {
  std::vector<LonLat> out;
  for (const auto& l : lines) out.insert(out.end(), l.coords.begin(), l.coords.end());
  return out;
}

geom::Trajectory project(const RawTrajectory& t, const geom::Projection& proj) {
  geom::Trajectory g{t.id, {}, t.timestamps};
  g.points.reserve(t.coords.size());
  for (const LonLat& c : t.coords) g.points.push_back(geom::snap(proj.forward(c)));
  return g;
}

geom::LineString project(const std::vector<LonLat>& coords, const geom::Projection& proj) {
  std::vector<geom::Point> pts;
  pts.reserve(coords.size());
  for (const LonLat& c : coords) pts.push_back(geom::snap(proj.forward(c)));
  auto line = geom::LineString::try_make(std::move(pts));
  if (!line) throw InputError("line with fewer than two distinct points");
  return *line;
}

json line_geometry(const geom::LineString& line, const geom::Projection& proj) {
  json coords = json::array();
  for (const geom::Point& p : line.points()) {
    const LonLat ll = proj.inverse(p);
    coords.push_back({ll.lon, ll.lat});
  }
  return {{"type", "LineString"}, {"coordinates", std::move(coords)}};
}

json point_geometry(geom::Point p, const geom::Projection& proj) {
  const LonLat ll = proj.inverse(p);
  return {{"type", "Point"}, {"coordinates", {ll.lon, ll.lat}}};
}

json feature(json geometry, json properties) {
  return {{"type", "Feature"}, {"properties", std::move(properties)}, {"geometry", std::move(geometry)}};
}

json feature_collection(std::vector<json> features) {
  return {{"type", "FeatureCollection"}, {"features", std::move(features)}};
}

json flowmap_geojson(const flow::FlowMap& map, const geom::Projection& proj) {
  std::vector<json> features;
  features.reserve(map.size());
  for (std::size_t i = 0; i < map.size(); ++i)
    features.push_back(feature(line_geometry(map[i].line, proj),
                               {{"id", std::to_string(i)}, {"flow", map[i].flow}}));
  return feature_collection(std::move(features));
}

flow::FlowMap read_flowmap(const fs::path& path, const geom::Projection& proj) {
  std::vector<flow::FlowLine> lines;
  for (const RawLine& raw : read_lines(path)) {
    if (!raw.flow) throw InputError(path.string() + ": feature " + raw.id + " has no flow");
    if (*raw.flow < 1) throw InputError(path.string() + ": feature " + raw.id + " has flow < 1");
    lines.push_back({*raw.flow, project(raw.coords, proj)});
  }
  return flow::FlowMap::from_lines(std::move(lines));
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const json& doc, int indent) {
  write_text(path, doc.dump(indent) + "\n");
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace flowmap::io
