#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tcm/model.hpp"
#include "tcm/synthetic.hpp"

namespace tcm {

// A corpus to run protocols over: a labeled pool that episodes sample from,
// a held-out test split, and the label mapping for description texts. The
// valid split is only consulted in full-pool mode (k absent); episodic runs
// carve validation shots out of the pool instead.
struct Dataset {
  std::vector<Example> pool;
  std::vector<Example> valid;
  std::vector<Example> test;
  LabelMapping mapping;
};

// Everything a protocol needs besides the data. `encoder.vocab_size` and
// `encoder.seed` are filled per run; `options.seed` is replaced by the run
// seed so every arm sharing a seed list sees identical episodes and batches.
struct ProtocolConfig {
  Method method = Method::kTcm;
  MappingMode mode = MappingMode::kDefinition;
  std::optional<std::size_t> k = 5;  // nullopt: train on the full pool
  std::vector<std::uint64_t> seeds = {0};
  EncoderConfig encoder;
  TcmHyper hyper;
  TrainOptions options;
  std::size_t eval_batch = 32;
};

struct SeedResult {
  std::uint64_t seed = 0;
  double test_macro_f1 = 0;
  double test_accuracy = 0;
  double best_valid_macro_f1 = 0;
  Real final_train_loss = Real(0);
  std::size_t param_count = 0;
  // Largest between-label similarity of the trained label matrix; absent for
  // the task-head baseline, which has none.
  std::optional<Real> max_off_diag_label_sim;

  nlohmann::json to_json() const;
};

struct RunResult {
  std::string name;
  std::vector<SeedResult> seeds;
  double mean_macro_f1 = 0;
  // Sample standard deviation; absent with fewer than two seeds.
  std::optional<double> std_macro_f1;

  nlohmann::json to_json() const;
};

RunResult summarize(std::string name, std::vector<SeedResult> seeds);

// Vocabulary visible to one run: episode train texts plus the active label
// texts, nothing from validation or test.
Vocab build_run_vocab(const std::vector<Example>& train, const LabelSet& ls);

// Train on one seeded episode and score the held-out test split.
// The trained model is returned through `out_model` when non-null (the last
// seed's model, e.g. for similarity reports).
SeedResult run_seed(const Dataset& data, const ProtocolConfig& cfg, std::uint64_t seed,
                    TrainedModel* out_model = nullptr);

RunResult run_protocol(std::string name, const Dataset& data, const ProtocolConfig& cfg);

// The dataset restricted to `keep` classes (pool, test and mapping filtered;
// first-appearance order preserved).
Dataset restrict_classes(const Dataset& data, const std::vector<std::string>& keep);

// A seeded uniform subset of the pool's classes, order preserved.
std::vector<std::string> sample_class_subset(const Dataset& data, std::size_t count,
                                             std::uint64_t subset_seed);

struct ClassCountResult {
  std::size_t num_classes = 0;
  std::vector<std::string> classes;
  RunResult matching;
  RunResult task_head;

  nlohmann::json to_json() const;
};

// Matching vs task head over growing label spaces. Every count draws its
// class subset from `subset_seed` alone, so both arms and any rerun see the
// same reduced task.
std::vector<ClassCountResult> class_number_sweep(const Dataset& data, const ProtocolConfig& base,
                                                 const std::vector<std::size_t>& counts,
                                                 std::uint64_t subset_seed);

struct DescriptionPoint {
  MappingMode mode = MappingMode::kName;
  std::size_t k = 0;
  RunResult result;

  nlohmann::json to_json() const;
};

// Grid over description modes and shot counts for one method.
std::vector<DescriptionPoint> description_sweep(const Dataset& data, const ProtocolConfig& base,
                                                const std::vector<MappingMode>& modes,
                                                const std::vector<std::size_t>& ks);

struct SimilarityReport {
  std::vector<std::string> labels;
  std::vector<std::vector<Real>> matrix;  // pairwise label-embedding dots
  Real max_off_diagonal = Real(0);

  nlohmann::json to_json() const;
  // Labels as header row and leading column.
  std::string to_csv() const;
};

SimilarityReport similarity_report(const TrainedModel& model);

}  // namespace tcm
