#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "tcm/tensor.hpp"

namespace tcm {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

// Binary parameter checkpoint: a version header, a JSON metadata blob, then
// name -> shape + little-endian float payload for every parameter. The
// metadata carries whatever the caller needs to validate shapes on load
// (encoder configuration, vocabulary, label set, fingerprints).
void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& metadata,
                     const std::vector<NamedTensor>& params);

struct Checkpoint {
  nlohmann::json metadata;
  std::vector<NamedTensor> params;

  const Tensor* find(const std::string& name) const;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace tcm
