// Command-line front end: train one model, run an experiment protocol,
// classify texts with a saved checkpoint, or emit a synthetic corpus.
//
// Exit codes: 0 success; 1 for bad configs, schemas, hyperparameters or
// inputs (the caller's mistake); 2 for everything else.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tcm/config.hpp"
#include "tcm/errors.hpp"

namespace fs = std::filesystem;
using namespace tcm;

namespace {

// --out beats the config's output_dir; a relative result is rooted under
// $TCM_OUTPUT_ROOT when that is set.
fs::path resolve_output(const fs::path& configured, const std::string& flag) {
  fs::path out = flag.empty() ? configured : fs::path(flag);
  const char* root = std::getenv("TCM_OUTPUT_ROOT");
  if (root != nullptr && *root != '\0' && out.is_relative()) out = fs::path(root) / out;
  return out;
}

void write_file(const fs::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << body;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  write_file(path, j.dump(2) + "\n");
}

// run_seed assigns into an existing model; seed it with a throwaway shell.
TrainedModel train_one(const Dataset& data, const ProtocolConfig& cfg, std::uint64_t seed,
                       SeedResult& result) {
  EncoderConfig shell;
  shell.vocab_size = 8;
  TrainedModel model(cfg.method, Encoder(shell), Vocab(), LabelSet(), cfg.hyper);
  result = run_seed(data, cfg, seed, &model);
  return model;
}

int cmd_train(RunConfig cfg, const std::string& out_flag,
              const std::optional<std::uint64_t>& seed_flag) {
  if (cfg.protocol != "episode")
    throw ConfigError("train expects an episode-protocol config, got '" + cfg.protocol + "'");
  if (seed_flag) cfg.run.seeds = {*seed_flag};

  const fs::path out = resolve_output(cfg.output_dir, out_flag);
  fs::create_directories(out);
  // Echo the effective config first so a crashed run still shows its inputs.
  write_json(out / "config.json", run_config_to_json(cfg));

  Dataset data = load_dataset(cfg.dataset);
  SeedResult result;
  TrainedModel model = train_one(data, cfg.run, cfg.run.seeds.front(), result);

  save_model(out / "model.json", model);
  nlohmann::json rj = result.to_json();
  nlohmann::json hist = nlohmann::json::array();
  for (const EpochStat& s : model.history)
    hist.push_back({{"epoch", s.epoch},
                    {"train_loss", s.train_loss},
                    {"valid_macro_f1", s.valid_macro_f1}});
  rj["history"] = hist;
  write_json(out / "result.json", rj);
  if (model.method != Method::kTaskHead)
    write_file(out / "similarity.csv", similarity_report(model).to_csv());

  for (const EpochStat& s : model.history)
    std::cout << "epoch " << s.epoch << "  train_loss " << s.train_loss
              << "  valid_macro_f1 " << s.valid_macro_f1 << "\n";
  std::cout << "test_macro_f1 " << result.test_macro_f1 << "\n"
            << "test_accuracy " << result.test_accuracy << "\n"
            << "saved " << (out / "model.json").string() << "\n";
  return 0;
}

int cmd_experiment(RunConfig cfg, const std::string& out_flag) {
  const fs::path out = resolve_output(cfg.output_dir, out_flag);
  fs::create_directories(out);
  write_json(out / "config.json", run_config_to_json(cfg));

  Dataset data = load_dataset(cfg.dataset);
  nlohmann::json results;
  results["protocol"] = cfg.protocol;

  auto print_run = [](const RunResult& r) {
    std::cout << r.name << "  mean_macro_f1 " << r.mean_macro_f1;
    if (r.std_macro_f1) std::cout << "  std " << *r.std_macro_f1;
    std::cout << "  (" << r.seeds.size() << " seeds)\n";
  };

  if (cfg.protocol == "episode") {
    RunResult r = run_protocol(method_name(cfg.run.method), data, cfg.run);
    results["runs"] = nlohmann::json::array({r.to_json()});
    print_run(r);
  } else if (cfg.protocol == "class_sweep") {
    auto points = class_number_sweep(data, cfg.run, cfg.class_counts, cfg.subset_seed);
    nlohmann::json arr = nlohmann::json::array();
    for (const ClassCountResult& p : points) {
      arr.push_back(p.to_json());
      std::cout << p.num_classes << " classes\n  ";
      print_run(p.matching);
      std::cout << "  ";
      print_run(p.task_head);
    }
    results["points"] = arr;
  } else {  // description_sweep; parse_run_config admits nothing else
    auto points = description_sweep(data, cfg.run, cfg.sweep_modes, cfg.sweep_ks);
    nlohmann::json arr = nlohmann::json::array();
    for (const DescriptionPoint& p : points) {
      arr.push_back(p.to_json());
      print_run(p.result);
    }
    results["points"] = arr;
  }

  write_json(out / "results.json", results);
  std::cout << "saved " << (out / "results.json").string() << "\n";
  return 0;
}

int cmd_predict(const std::string& model_path, std::vector<std::string> texts,
                const std::string& input_file, bool with_scores) {
  TrainedModel model = load_model(model_path);
  if (!input_file.empty()) {
    std::ifstream in(input_file);
    if (!in) throw IoError("cannot read " + input_file);
    for (std::string line; std::getline(in, line);)
      if (!line.empty()) texts.push_back(line);
  }
  if (texts.empty()) throw InputError("nothing to classify: pass --text or --input");

  const std::vector<std::string>& labels = model.label_set.labels();
  const auto rows = model.score(texts);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    std::cout << labels[argmax_index(rows[i])];
    if (with_scores)
      for (std::size_t y = 0; y < labels.size(); ++y)
        std::cout << "  " << labels[y] << ":" << rows[i][y];
    std::cout << "\n";
  }
  return 0;
}

int cmd_make_synthetic(const SyntheticSpec& spec, const std::string& out_flag) {
  const fs::path out = resolve_output("synthetic", out_flag);
  fs::create_directories(out);
  SyntheticData data = generate_synthetic(spec);
  save_jsonl(out / "data.jsonl", data.pool);
  save_jsonl(out / "test.jsonl", data.test);
  save_label_mapping(out / "mapping.json", data.mapping);
  std::cout << data.labels.size() << " classes, " << data.pool.size() << " pool / "
            << data.test.size() << " test examples written to " << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"train and evaluate matching-based text classifiers"};
  app.require_subcommand(1);

  std::string config_path, out_flag, model_path, input_file;
  std::optional<std::uint64_t> seed_flag;
  std::vector<std::string> texts;
  bool with_scores = false;
  SyntheticSpec spec;

  CLI::App* train = app.add_subcommand("train", "train one model from a config file");
  train->add_option("config", config_path, "run config (JSON)")->required();
  train->add_option("--seed", seed_flag, "override the config's seed list with one seed");
  train->add_option("--out", out_flag, "output directory (default: config output_dir)");

  CLI::App* experiment =
      app.add_subcommand("experiment", "run a multi-seed protocol from a config file");
  experiment->add_option("config", config_path, "run config (JSON)")->required();
  experiment->add_option("--out", out_flag, "output directory (default: config output_dir)");

  CLI::App* predict = app.add_subcommand("predict", "classify texts with a saved model");
  predict->add_option("--model", model_path, "model checkpoint path")->required();
  predict->add_option("--text", texts, "text to classify (repeatable)");
  predict->add_option("--input", input_file, "file with one text per line");
  predict->add_flag("--scores", with_scores, "also print per-label scores");

  CLI::App* synth = app.add_subcommand("make-synthetic", "generate a synthetic corpus");
  synth->add_option("--classes", spec.classes);
  synth->add_option("--per-class", spec.per_class);
  synth->add_option("--test-per-class", spec.test_per_class);
  synth->add_option("--vocab", spec.vocab_size);
  synth->add_option("--signal", spec.signal_tokens_per_class);
  synth->add_option("--noise-len", spec.noise_len);
  synth->add_option("--shared-signal", spec.shared_signal_tokens);
  synth->add_option("--seed", spec.seed);
  synth->add_option("--out", out_flag, "output directory (default: synthetic)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return cmd_train(load_run_config(config_path), out_flag, seed_flag);
    if (*experiment) return cmd_experiment(load_run_config(config_path), out_flag);
    if (*predict) return cmd_predict(model_path, std::move(texts), input_file, with_scores);
    return cmd_make_synthetic(spec, out_flag);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const HyperparameterError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
}
