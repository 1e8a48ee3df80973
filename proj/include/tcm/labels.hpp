#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tcm/text.hpp"

namespace tcm {

// How a label becomes the piece of text the encoder sees: its class name,
// a written definition, or one same-class example.
enum class MappingMode { kName, kDefinition, kSample };

MappingMode parse_mapping_mode(const std::string& name);
std::string mapping_mode_name(MappingMode mode);

struct LabelEntry {
  std::string name;
  std::string definition;
  std::optional<std::string> sample;
};

// Per-label texts, keyed by the dataset's label strings.
using LabelMapping = std::map<std::string, LabelEntry>;

// JSON object: label -> {"name": str, "definition": str, "sample": optional str}.
LabelMapping load_label_mapping(const std::filesystem::path& path);
void save_label_mapping(const std::filesystem::path& path, const LabelMapping& mapping);

// The ordered label space of one run. The ordering is fixed at construction
// and defines logit/score column order everywhere downstream.
class LabelSet {
 public:
  LabelSet() = default;
  LabelSet(std::vector<std::string> labels, std::vector<std::string> texts, MappingMode mode);

  const std::vector<std::string>& labels() const { return labels_; }
  const std::vector<std::string>& texts() const { return texts_; }
  MappingMode mode() const { return mode_; }
  std::size_t size() const { return labels_.size(); }
  std::size_t index_of(const std::string& label) const;
  // Stable digest of (mode, labels, texts); cache-staleness key.
  std::uint64_t fingerprint() const;

 private:
  std::vector<std::string> labels_;
  std::vector<std::string> texts_;
  MappingMode mode_ = MappingMode::kName;
};

// Resolves each label to its mapped text. Sample mode prefers the mapping
// file's "sample" entry and otherwise draws one of the label's examples in
// `train` with a stream derived from `seed`.
LabelSet build_label_set(const std::vector<std::string>& labels, const LabelMapping& mapping,
                         MappingMode mode, const std::vector<Example>& train,
                         std::uint64_t seed);

}  // namespace tcm
