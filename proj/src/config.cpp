#include "tcm/config.hpp"

#include <fstream>
#include <set>

#include "tcm/errors.hpp"

namespace tcm {

namespace {

// Accepts both unsigned-typed and signed-typed JSON integers, as long as the
// value is non-negative; programmatic builders often produce the signed kind.
bool is_nonneg_int(const nlohmann::json& v) {
  return v.is_number_unsigned() ||
         (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

// Tracks which keys of one JSON object were consumed and reports leftovers
// (and type mismatches) with their dotted path.
class ObjectParser {
 public:
  ObjectParser(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw SchemaError(path_ + " must be a JSON object");
  }

  std::string key_path(const char* key) const { return path_ + "." + key; }

  const nlohmann::json* find(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  template <typename T>
  void read_unsigned(const char* key, T& out) {
    if (const nlohmann::json* v = find(key)) {
      if (!is_nonneg_int(*v))
        throw SchemaError(key_path(key) + " must be a non-negative integer");
      out = v->get<T>();
    }
  }

  void read_real(const char* key, Real& out) {
    if (const nlohmann::json* v = find(key)) {
      if (!v->is_number()) throw SchemaError(key_path(key) + " must be a number");
      out = v->get<Real>();
    }
  }

  void read_bool(const char* key, bool& out) {
    if (const nlohmann::json* v = find(key)) {
      if (!v->is_boolean()) throw SchemaError(key_path(key) + " must be a boolean");
      out = v->get<bool>();
    }
  }

  void read_string(const char* key, std::string& out) {
    if (const nlohmann::json* v = find(key)) {
      if (!v->is_string()) throw SchemaError(key_path(key) + " must be a string");
      out = v->get<std::string>();
    }
  }

  template <typename T>
  std::vector<T> unsigned_array(const char* key, const nlohmann::json& v) {
    if (!v.is_array()) throw SchemaError(key_path(key) + " must be an array");
    std::vector<T> out;
    for (const auto& elem : v) {
      if (!is_nonneg_int(elem))
        throw SchemaError(key_path(key) + " must hold non-negative integers");
      out.push_back(elem.get<T>());
    }
    return out;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key()))
        throw SchemaError("unknown config key '" + path_ + "." + it.key() + "'");
    }
  }

 private:
  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

DatasetConfig parse_dataset(const nlohmann::json& j) {
  ObjectParser p(j, "dataset");
  DatasetConfig cfg;
  p.read_string("kind", cfg.kind);
  if (cfg.kind == "synthetic") {
    SyntheticSpec& s = cfg.synthetic;
    p.read_unsigned("classes", s.classes);
    p.read_unsigned("per_class", s.per_class);
    p.read_unsigned("test_per_class", s.test_per_class);
    p.read_unsigned("vocab_size", s.vocab_size);
    p.read_unsigned("signal_tokens_per_class", s.signal_tokens_per_class);
    p.read_unsigned("signal_tokens_per_example", s.signal_tokens_per_example);
    p.read_bool("disjoint_test_signal", s.disjoint_test_signal);
    p.read_unsigned("noise_len", s.noise_len);
    p.read_unsigned("shared_signal_tokens", s.shared_signal_tokens);
    p.read_unsigned("seed", s.seed);
  } else if (cfg.kind == "jsonl") {
    std::string data, test, mapping, valid;
    p.read_string("data", data);
    p.read_string("test", test);
    p.read_string("mapping", mapping);
    p.read_string("valid", valid);
    if (data.empty()) throw SchemaError("dataset.data is required for jsonl datasets");
    if (test.empty()) throw SchemaError("dataset.test is required for jsonl datasets");
    if (mapping.empty()) throw SchemaError("dataset.mapping is required for jsonl datasets");
    cfg.data = data;
    cfg.test = test;
    cfg.mapping = mapping;
    if (!valid.empty()) cfg.valid = valid;
  } else {
    throw SchemaError("dataset.kind must be 'synthetic' or 'jsonl', got '" + cfg.kind + "'");
  }
  p.finish();
  return cfg;
}

EncoderConfig parse_encoder(const nlohmann::json& j) {
  ObjectParser p(j, "encoder");
  EncoderConfig cfg;  // vocab_size and seed are derived per run, not config keys
  p.read_unsigned("max_len", cfg.max_len);
  p.read_unsigned("embed_dim", cfg.embed_dim);
  p.read_unsigned("num_layers", cfg.num_layers);
  p.read_unsigned("num_heads", cfg.num_heads);
  p.read_unsigned("ffn_dim", cfg.ffn_dim);
  p.read_unsigned("repr_dim", cfg.repr_dim);
  p.read_real("dropout", cfg.dropout);
  p.finish();
  return cfg;
}

TcmHyper parse_hyper(const nlohmann::json& j) {
  ObjectParser p(j, "hyper");
  TcmHyper h;
  p.read_real("tau", h.tau);
  p.read_real("delta", h.delta);
  p.read_real("alpha", h.alpha);
  p.finish();
  h.validate();
  return h;
}

AdamWConfig parse_optim(const nlohmann::json& j) {
  ObjectParser p(j, "optim");
  AdamWConfig cfg;
  p.read_real("lr", cfg.lr);
  p.read_real("beta1", cfg.beta1);
  p.read_real("beta2", cfg.beta2);
  p.read_real("eps", cfg.eps);
  p.read_real("weight_decay", cfg.weight_decay);
  p.finish();
  cfg.validate();
  return cfg;
}

}  // namespace

RunConfig parse_run_config(const nlohmann::json& j) {
  ObjectParser p(j, "config");
  RunConfig cfg;

  p.read_string("protocol", cfg.protocol);
  if (cfg.protocol != "episode" && cfg.protocol != "class_sweep" &&
      cfg.protocol != "description_sweep") {
    throw SchemaError("config.protocol must be 'episode', 'class_sweep' or "
                      "'description_sweep', got '" +
                      cfg.protocol + "'");
  }

  const nlohmann::json* dataset = p.find("dataset");
  if (dataset == nullptr) throw SchemaError("config.dataset is required");
  cfg.dataset = parse_dataset(*dataset);

  if (const nlohmann::json* v = p.find("method")) {
    if (!v->is_string()) throw SchemaError("config.method must be a string");
    try {
      cfg.run.method = parse_method(v->get<std::string>());
    } catch (const ConfigError& e) {
      throw SchemaError(std::string("config.method: ") + e.what());
    }
  }
  if (const nlohmann::json* v = p.find("mode")) {
    if (!v->is_string()) throw SchemaError("config.mode must be a string");
    try {
      cfg.run.mode = parse_mapping_mode(v->get<std::string>());
    } catch (const ConfigError& e) {
      throw SchemaError(std::string("config.mode: ") + e.what());
    }
  }
  if (const nlohmann::json* v = p.find("k")) {
    if (v->is_string() && v->get<std::string>() == "full") {
      cfg.run.k.reset();
    } else if (is_nonneg_int(*v) && v->get<std::size_t>() > 0) {
      cfg.run.k = v->get<std::size_t>();
    } else {
      throw SchemaError("config.k must be a positive integer or \"full\"");
    }
  }
  if (const nlohmann::json* v = p.find("seeds"))
    cfg.run.seeds = p.unsigned_array<std::uint64_t>("seeds", *v);
  if (cfg.run.seeds.empty()) throw SchemaError("config.seeds must not be empty");

  if (const nlohmann::json* v = p.find("encoder")) cfg.run.encoder = parse_encoder(*v);
  if (const nlohmann::json* v = p.find("hyper")) cfg.run.hyper = parse_hyper(*v);
  if (const nlohmann::json* v = p.find("optim")) cfg.run.options.optim = parse_optim(*v);
  p.read_unsigned("batch_size", cfg.run.options.batch_size);
  p.read_unsigned("epochs", cfg.run.options.epochs);
  p.read_unsigned("eval_batch", cfg.run.eval_batch);

  if (const nlohmann::json* v = p.find("class_counts"))
    cfg.class_counts = p.unsigned_array<std::size_t>("class_counts", *v);
  p.read_unsigned("subset_seed", cfg.subset_seed);
  if (const nlohmann::json* v = p.find("sweep_modes")) {
    if (!v->is_array()) throw SchemaError("config.sweep_modes must be an array");
    cfg.sweep_modes.clear();
    for (const auto& elem : *v) {
      if (!elem.is_string()) throw SchemaError("config.sweep_modes must hold strings");
      try {
        cfg.sweep_modes.push_back(parse_mapping_mode(elem.get<std::string>()));
      } catch (const ConfigError& e) {
        throw SchemaError(std::string("config.sweep_modes: ") + e.what());
      }
    }
  }
  if (const nlohmann::json* v = p.find("sweep_ks"))
    cfg.sweep_ks = p.unsigned_array<std::size_t>("sweep_ks", *v);

  std::string out;
  p.read_string("output_dir", out);
  if (!out.empty()) cfg.output_dir = out;

  p.finish();

  if (cfg.run.options.batch_size == 0) throw SchemaError("config.batch_size must be positive");
  if (cfg.run.options.epochs == 0) throw SchemaError("config.epochs must be positive");
  if (!cfg.run.k) {
    if (cfg.dataset.kind != "jsonl" || !cfg.dataset.valid)
      throw SchemaError("k = \"full\" requires a jsonl dataset with a valid split");
    if (cfg.protocol != "episode")
      throw SchemaError("k = \"full\" only makes sense with the episode protocol");
  }
  if (cfg.protocol == "class_sweep" && cfg.class_counts.empty())
    throw SchemaError("config.class_counts is required for the class_sweep protocol");
  if (cfg.protocol == "description_sweep" && (cfg.sweep_modes.empty() || cfg.sweep_ks.empty()))
    throw SchemaError(
        "config.sweep_modes and config.sweep_ks are required for the description_sweep protocol");
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
  return parse_run_config(j);
}

nlohmann::json run_config_to_json(const RunConfig& cfg) {
  nlohmann::json dataset;
  dataset["kind"] = cfg.dataset.kind;
  if (cfg.dataset.kind == "synthetic") {
    const SyntheticSpec& s = cfg.dataset.synthetic;
    dataset["classes"] = s.classes;
    dataset["per_class"] = s.per_class;
    dataset["test_per_class"] = s.test_per_class;
    dataset["vocab_size"] = s.vocab_size;
    dataset["signal_tokens_per_class"] = s.signal_tokens_per_class;
    dataset["signal_tokens_per_example"] = s.signal_tokens_per_example;
    dataset["disjoint_test_signal"] = s.disjoint_test_signal;
    dataset["noise_len"] = s.noise_len;
    dataset["shared_signal_tokens"] = s.shared_signal_tokens;
    dataset["seed"] = s.seed;
  } else {
    dataset["data"] = cfg.dataset.data.string();
    dataset["test"] = cfg.dataset.test.string();
    dataset["mapping"] = cfg.dataset.mapping.string();
    if (cfg.dataset.valid) dataset["valid"] = cfg.dataset.valid->string();
  }

  nlohmann::json j;
  j["protocol"] = cfg.protocol;
  j["dataset"] = dataset;
  j["method"] = method_name(cfg.run.method);
  j["mode"] = mapping_mode_name(cfg.run.mode);
  if (cfg.run.k) {
    j["k"] = *cfg.run.k;
  } else {
    j["k"] = "full";
  }
  j["seeds"] = cfg.run.seeds;
  j["encoder"] = {{"max_len", cfg.run.encoder.max_len},
                  {"embed_dim", cfg.run.encoder.embed_dim},
                  {"num_layers", cfg.run.encoder.num_layers},
                  {"num_heads", cfg.run.encoder.num_heads},
                  {"ffn_dim", cfg.run.encoder.ffn_dim},
                  {"repr_dim", cfg.run.encoder.repr_dim},
                  {"dropout", cfg.run.encoder.dropout}};
  j["hyper"] = {{"tau", cfg.run.hyper.tau},
                {"delta", cfg.run.hyper.delta},
                {"alpha", cfg.run.hyper.alpha}};
  j["optim"] = {{"lr", cfg.run.options.optim.lr},
                {"beta1", cfg.run.options.optim.beta1},
                {"beta2", cfg.run.options.optim.beta2},
                {"eps", cfg.run.options.optim.eps},
                {"weight_decay", cfg.run.options.optim.weight_decay}};
  j["batch_size"] = cfg.run.options.batch_size;
  j["epochs"] = cfg.run.options.epochs;
  j["eval_batch"] = cfg.run.eval_batch;
  if (cfg.protocol == "class_sweep") {
    j["class_counts"] = cfg.class_counts;
    j["subset_seed"] = cfg.subset_seed;
  }
  if (cfg.protocol == "description_sweep") {
    nlohmann::json modes = nlohmann::json::array();
    for (MappingMode m : cfg.sweep_modes) modes.push_back(mapping_mode_name(m));
    j["sweep_modes"] = modes;
    j["sweep_ks"] = cfg.sweep_ks;
  }
  j["output_dir"] = cfg.output_dir.string();
  return j;
}

Dataset load_dataset(const DatasetConfig& cfg) {
  Dataset out;
  if (cfg.kind == "synthetic") {
    SyntheticData data = generate_synthetic(cfg.synthetic);
    out.pool = std::move(data.pool);
    out.test = std::move(data.test);
    out.mapping = std::move(data.mapping);
  } else {
    out.pool = load_jsonl(cfg.data);
    out.test = load_jsonl(cfg.test);
    out.mapping = load_label_mapping(cfg.mapping);
    if (cfg.valid) out.valid = load_jsonl(*cfg.valid);
  }
  return out;
}

}  // namespace tcm
