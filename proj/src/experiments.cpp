#include "tcm/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "tcm/errors.hpp"

namespace tcm {

namespace {

nlohmann::json optional_to_json(const std::optional<Real>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

nlohmann::json SeedResult::to_json() const {
  return {{"seed", seed},
          {"test_macro_f1", test_macro_f1},
          {"test_accuracy", test_accuracy},
          {"best_valid_macro_f1", best_valid_macro_f1},
          {"final_train_loss", final_train_loss},
          {"param_count", param_count},
          {"max_off_diag_label_sim", optional_to_json(max_off_diag_label_sim)}};
}

nlohmann::json RunResult::to_json() const {
  nlohmann::json per_seed = nlohmann::json::array();
  for (const SeedResult& s : seeds) per_seed.push_back(s.to_json());
  return {{"name", name},
          {"mean_macro_f1", mean_macro_f1},
          {"std_macro_f1", std_macro_f1 ? nlohmann::json(*std_macro_f1) : nlohmann::json(nullptr)},
          {"seeds", per_seed}};
}

RunResult summarize(std::string name, std::vector<SeedResult> seeds) {
  if (seeds.empty()) throw InputError("cannot summarize a run with no seed results");
  RunResult out;
  out.name = std::move(name);
  out.seeds = std::move(seeds);
  double sum = 0;
  for (const SeedResult& s : out.seeds) sum += s.test_macro_f1;
  out.mean_macro_f1 = sum / double(out.seeds.size());
  if (out.seeds.size() >= 2) {
    double sq = 0;
    for (const SeedResult& s : out.seeds) {
      const double d = s.test_macro_f1 - out.mean_macro_f1;
      sq += d * d;
    }
    out.std_macro_f1 = std::sqrt(sq / double(out.seeds.size() - 1));
  }
  return out;
}

Vocab build_run_vocab(const std::vector<Example>& train, const LabelSet& ls) {
  std::vector<Example> corpus = train;
  for (const std::string& text : ls.texts()) corpus.push_back({text, std::string()});
  return build_vocab(corpus, 1, std::size_t(1) << 16);
}

SeedResult run_seed(const Dataset& data, const ProtocolConfig& cfg, std::uint64_t seed,
                    TrainedModel* out_model) {
  if (data.pool.empty()) throw InputError("dataset pool is empty");
  if (data.test.empty()) throw InputError("dataset test split is empty");

  Episode ep;
  if (cfg.k) {
    ep = sample_episode(data.pool, *cfg.k, seed);
  } else {
    // Full-pool mode: no episode sampling, explicit validation split.
    if (data.valid.empty())
      throw ConfigError("training on the full pool requires a validation split");
    ep.k = 0;
    ep.seed = seed;
    ep.classes = class_order(data.pool);
    ep.train = data.pool;
    ep.valid = data.valid;
  }

  LabelSet ls = build_label_set(ep.classes, data.mapping, cfg.mode, ep.train, seed);
  Vocab vocab = build_run_vocab(ep.train, ls);

  EncoderConfig ecfg = cfg.encoder;
  ecfg.vocab_size = vocab.size();
  ecfg.seed = mix64(seed, fnv1a64("encoder_init"));
  TrainOptions opt = cfg.options;
  opt.seed = seed;

  TrainedModel model = train_model(cfg.method, ecfg, vocab, ls, ep, cfg.hyper, opt);

  SeedResult r;
  r.seed = seed;
  Confusion c = evaluate(model, data.test, cfg.eval_batch);
  r.test_macro_f1 = macro_f1(c);
  r.test_accuracy = accuracy(c);
  for (const EpochStat& s : model.history)
    r.best_valid_macro_f1 = std::max(r.best_valid_macro_f1, s.valid_macro_f1);
  r.final_train_loss = model.history.back().train_loss;
  r.param_count = model.param_count();
  if (cfg.method != Method::kTaskHead)
    r.max_off_diag_label_sim = similarity_report(model).max_off_diagonal;
  if (out_model != nullptr) *out_model = std::move(model);
  return r;
}

RunResult run_protocol(std::string name, const Dataset& data, const ProtocolConfig& cfg) {
  if (cfg.seeds.empty()) throw ConfigError("protocol needs at least one seed");
  std::vector<SeedResult> results;
  results.reserve(cfg.seeds.size());
  for (std::uint64_t seed : cfg.seeds) results.push_back(run_seed(data, cfg, seed));
  return summarize(std::move(name), std::move(results));
}

Dataset restrict_classes(const Dataset& data, const std::vector<std::string>& keep) {
  std::unordered_set<std::string> wanted(keep.begin(), keep.end());
  const std::vector<std::string> present = class_order(data.pool);
  for (const std::string& label : keep) {
    if (std::find(present.begin(), present.end(), label) == present.end())
      throw ConfigError("class '" + label + "' is not in the pool");
  }
  Dataset out;
  for (const Example& ex : data.pool)
    if (wanted.count(ex.label)) out.pool.push_back(ex);
  for (const Example& ex : data.test)
    if (wanted.count(ex.label)) out.test.push_back(ex);
  for (const Example& ex : data.valid)
    if (wanted.count(ex.label)) out.valid.push_back(ex);
  for (const auto& [label, entry] : data.mapping)
    if (wanted.count(label)) out.mapping.emplace(label, entry);
  return out;
}

std::vector<std::string> sample_class_subset(const Dataset& data, std::size_t count,
                                             std::uint64_t subset_seed) {
  const std::vector<std::string> classes = class_order(data.pool);
  if (count == 0) throw ConfigError("class subset must keep at least one class");
  if (count > classes.size())
    throw ConfigError("requested " + std::to_string(count) + " classes, pool has " +
                      std::to_string(classes.size()));
  std::vector<std::size_t> idx(classes.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng = Rng(subset_seed).fork("class_subset").fork(count);
  rng.shuffle(idx);
  idx.resize(count);
  std::sort(idx.begin(), idx.end());  // keep pool order within the subset
  std::vector<std::string> out;
  out.reserve(count);
  for (std::size_t i : idx) out.push_back(classes[i]);
  return out;
}

nlohmann::json ClassCountResult::to_json() const {
  return {{"num_classes", num_classes},
          {"classes", classes},
          {"matching", matching.to_json()},
          {"task_head", task_head.to_json()}};
}

std::vector<ClassCountResult> class_number_sweep(const Dataset& data, const ProtocolConfig& base,
                                                 const std::vector<std::size_t>& counts,
                                                 std::uint64_t subset_seed) {
  if (counts.empty()) throw ConfigError("class sweep needs at least one class count");
  std::vector<ClassCountResult> out;
  out.reserve(counts.size());
  for (std::size_t count : counts) {
    ClassCountResult point;
    point.num_classes = count;
    point.classes = sample_class_subset(data, count, subset_seed);
    const Dataset reduced = restrict_classes(data, point.classes);
    ProtocolConfig cfg = base;
    cfg.method = Method::kTcm;
    point.matching = run_protocol("tcm/" + std::to_string(count) + "_classes", reduced, cfg);
    cfg.method = Method::kTaskHead;
    point.task_head =
        run_protocol("task_head/" + std::to_string(count) + "_classes", reduced, cfg);
    out.push_back(std::move(point));
  }
  return out;
}

nlohmann::json DescriptionPoint::to_json() const {
  return {{"mode", mapping_mode_name(mode)}, {"k", k}, {"result", result.to_json()}};
}

std::vector<DescriptionPoint> description_sweep(const Dataset& data, const ProtocolConfig& base,
                                                const std::vector<MappingMode>& modes,
                                                const std::vector<std::size_t>& ks) {
  if (modes.empty()) throw ConfigError("description sweep needs at least one mapping mode");
  if (ks.empty()) throw ConfigError("description sweep needs at least one shot count");
  std::vector<DescriptionPoint> out;
  out.reserve(modes.size() * ks.size());
  for (MappingMode mode : modes) {
    for (std::size_t k : ks) {
      DescriptionPoint point;
      point.mode = mode;
      point.k = k;
      ProtocolConfig cfg = base;
      cfg.mode = mode;
      cfg.k = k;
      point.result = run_protocol(mapping_mode_name(mode) + "/k" + std::to_string(k), data, cfg);
      out.push_back(std::move(point));
    }
  }
  return out;
}

nlohmann::json SimilarityReport::to_json() const {
  return {{"labels", labels}, {"matrix", matrix}, {"max_off_diagonal", max_off_diagonal}};
}

std::string SimilarityReport::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "label";
  for (const std::string& l : labels) os << ',' << csv_field(l);
  os << '\n';
  for (std::size_t i = 0; i < labels.size(); ++i) {
    os << csv_field(labels[i]);
    for (std::size_t j = 0; j < labels.size(); ++j) os << ',' << matrix[i][j];
    os << '\n';
  }
  return os.str();
}

SimilarityReport similarity_report(const TrainedModel& model) {
  Tensor L = model.label_matrix();
  const std::size_t y = L.dim(0);
  const std::size_t d = L.dim(1);
  auto v = L.values();
  SimilarityReport rep;
  rep.labels = model.label_set.labels();
  rep.matrix.assign(y, std::vector<Real>(y, Real(0)));
  bool any_pair = false;
  for (std::size_t a = 0; a < y; ++a) {
    for (std::size_t b = 0; b < y; ++b) {
      Real dot = Real(0);
      for (std::size_t j = 0; j < d; ++j) dot += v[a * d + j] * v[b * d + j];
      rep.matrix[a][b] = dot;
      if (a != b && (!any_pair || dot > rep.max_off_diagonal)) {
        rep.max_off_diagonal = dot;
        any_pair = true;
      }
    }
  }
  return rep;
}

}  // namespace tcm
