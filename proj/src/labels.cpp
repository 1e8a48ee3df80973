#include "tcm/labels.hpp"

#include <fstream>

#include <json.hpp>

#include "tcm/errors.hpp"
#include "tcm/rng.hpp"

namespace tcm {

MappingMode parse_mapping_mode(const std::string& name) {
  if (name == "name") return MappingMode::kName;
  if (name == "definition") return MappingMode::kDefinition;
  if (name == "sample") return MappingMode::kSample;
  throw ConfigError("unknown mapping mode '" + name + "' (name|definition|sample)");
}

std::string mapping_mode_name(MappingMode mode) {
  switch (mode) {
    case MappingMode::kName: return "name";
    case MappingMode::kDefinition: return "definition";
    case MappingMode::kSample: return "sample";
  }
  throw ContractError("unhandled mapping mode");
}

LabelMapping load_label_mapping(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  nlohmann::json doc;
  try {
    is >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(path.string() + ": malformed JSON: " + e.what());
  }
  if (!doc.is_object()) throw SchemaError(path.string() + ": expected a top-level object");
  LabelMapping mapping;
  for (const auto& [label, entry] : doc.items()) {
    if (!entry.is_object()) {
      throw SchemaError(path.string() + ": entry for '" + label + "' must be an object");
    }
    LabelEntry le;
    for (const auto& [key, value] : entry.items()) {
      if (key != "name" && key != "definition" && key != "sample") {
        throw SchemaError(path.string() + ": entry for '" + label + "' has unknown key \"" +
                          key + "\"");
      }
      if (!value.is_string()) {
        throw SchemaError(path.string() + ": '" + label + "." + key + "' must be a string");
      }
    }
    if (!entry.contains("name")) {
      throw SchemaError(path.string() + ": entry for '" + label + "' is missing \"name\"");
    }
    le.name = entry["name"].get<std::string>();
    if (entry.contains("definition")) le.definition = entry["definition"].get<std::string>();
    if (entry.contains("sample")) le.sample = entry["sample"].get<std::string>();
    mapping.emplace(label, std::move(le));
  }
  return mapping;
}

void save_label_mapping(const std::filesystem::path& path, const LabelMapping& mapping) {
  nlohmann::json doc = nlohmann::json::object();
  for (const auto& [label, entry] : mapping) {
    nlohmann::json e{{"name", entry.name}, {"definition", entry.definition}};
    if (entry.sample) e["sample"] = *entry.sample;
    doc[label] = std::move(e);
  }
  std::ofstream os(path);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << doc.dump(2) << "\n";
  if (!os) throw IoError("write failed for " + path.string());
}

LabelSet::LabelSet(std::vector<std::string> labels, std::vector<std::string> texts,
                   MappingMode mode)
    : labels_(std::move(labels)), texts_(std::move(texts)), mode_(mode) {
  if (labels_.size() != texts_.size()) {
    throw ContractError("label set: " + std::to_string(labels_.size()) + " labels vs " +
                        std::to_string(texts_.size()) + " texts");
  }
  for (std::size_t i = 0; i < texts_.size(); ++i) {
    if (texts_[i].empty()) {
      throw SchemaError("label '" + labels_[i] + "' maps to an empty text");
    }
  }
}

std::size_t LabelSet::index_of(const std::string& label) const {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] == label) return i;
  }
  throw IndexError("label '" + label + "' not in the label set");
}

std::uint64_t LabelSet::fingerprint() const {
  std::uint64_t h = fnv1a64(mapping_mode_name(mode_));
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    h = mix64(h, fnv1a64(labels_[i]));
    h = mix64(h, fnv1a64(texts_[i]));
  }
  return h;
}

LabelSet build_label_set(const std::vector<std::string>& labels, const LabelMapping& mapping,
                         MappingMode mode, const std::vector<Example>& train,
                         std::uint64_t seed) {
  std::vector<std::string> texts;
  texts.reserve(labels.size());
  const Rng root = Rng(seed).fork("label_sample");
  for (const std::string& label : labels) {
    auto it = mapping.find(label);
    if (it == mapping.end()) {
      throw SchemaError("label '" + label + "' missing from the mapping file");
    }
    const LabelEntry& entry = it->second;
    switch (mode) {
      case MappingMode::kName:
        texts.push_back(entry.name);
        break;
      case MappingMode::kDefinition:
        if (entry.definition.empty()) {
          throw SchemaError("label '" + label + "' has no definition for definition mode");
        }
        texts.push_back(entry.definition);
        break;
      case MappingMode::kSample: {
        if (entry.sample) {
          texts.push_back(*entry.sample);
          break;
        }
        std::vector<const Example*> own;
        for (const Example& ex : train) {
          if (ex.label == label) own.push_back(&ex);
        }
        if (own.empty()) {
          throw SchemaError("label '" + label +
                            "' has no sample in the mapping file and no training example");
        }
        Rng rng = root.fork(label);
        texts.push_back(own[rng.below(own.size())]->text);
        break;
      }
    }
  }
  return LabelSet(labels, std::move(texts), mode);
}

}  // namespace tcm
