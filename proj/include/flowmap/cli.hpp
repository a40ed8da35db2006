#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowmap/align.hpp"
#include "flowmap/match.hpp"
#include "flowmap/projection.hpp"

namespace flowmap::cli {

namespace fs = std::filesystem;

enum ExitCode : int {
  kOk = 0,
  kInputError = 2,
  kBackendError = 3,
  kInvariantError = 4,
};

struct RunConfig {
  std::optional<geom::LonLat> origin;  // nullopt: centre of the input data
  std::string backend;                 // http URL or synthetic:PATH
  match::MatchSettings match;
  align::PipelineConfig pipeline;
  double eps_t = 5.0;
  double delta_t = 50.0;
  double err_cut = 4.0;
  double rerr_cut = 0.1;
  double desire_cutoff = 5000.0;
  unsigned threads = 1;
  std::uint64_t seed = 0;  // reserved; every algorithm is deterministic

  void validate() const;
};

nlohmann::json to_json(const RunConfig& cfg);
RunConfig config_from_json(const nlohmann::json& doc);

/// Defaults, then the config file (merge patch), then `key.path=value`
/// overrides whose value is parsed as JSON when possible.
RunConfig load_config(const std::optional<fs::path>& file, const std::vector<std::string>& sets);

int cmd_match(const fs::path& trajectories, const fs::path& out, const RunConfig& cfg);
int cmd_aggregate(const fs::path& routes, const fs::path& out, const RunConfig& cfg);
int cmd_validate(const fs::path& routes, const fs::path& flowmap, const fs::path& out,
                 const RunConfig& cfg);
int cmd_desire(const fs::path& trajectories, const fs::path& out, const RunConfig& cfg);

/// Command-line entry point; returns the process exit code.
int run(int argc, char** argv);

}  // namespace flowmap::cli
