#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tcm/experiments.hpp"

namespace tcm {

// Where the corpus comes from: a generated synthetic task or JSONL files.
struct DatasetConfig {
  std::string kind = "synthetic";
  SyntheticSpec synthetic;  // kind == "synthetic"
  std::filesystem::path data;  // kind == "jsonl": the labeled pool
  std::optional<std::filesystem::path> valid;
  std::filesystem::path test;
  std::filesystem::path mapping;
};

// One experiment as read from a JSON config file. Unknown keys anywhere are
// schema errors naming the offending dotted path, so typos fail loudly
// instead of silently running defaults.
struct RunConfig {
  std::string protocol = "episode";  // episode | class_sweep | description_sweep
  DatasetConfig dataset;
  ProtocolConfig run;
  std::vector<std::size_t> class_counts;  // class_sweep
  std::uint64_t subset_seed = 0;          // class_sweep
  std::vector<MappingMode> sweep_modes;   // description_sweep
  std::vector<std::size_t> sweep_ks;      // description_sweep
  std::filesystem::path output_dir = "runs";
};

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

// Canonical echo with every effective field explicit; parsing it back yields
// the same configuration.
nlohmann::json run_config_to_json(const RunConfig& cfg);

Dataset load_dataset(const DatasetConfig& cfg);

}  // namespace tcm
