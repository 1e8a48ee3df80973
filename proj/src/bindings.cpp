// Python bindings. Configs cross the boundary as plain dicts with the same
// schema as the JSON config files; results come back as dicts mirroring the
// CLI's output files.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tcm/config.hpp"
#include "tcm/errors.hpp"
#include "tcm/experiments.hpp"
#include "tcm/metrics.hpp"
#include "tcm/objective.hpp"
#include "tcm/synthetic.hpp"

namespace py = pybind11;

namespace {

using namespace tcm;

py::object json_to_py(const nlohmann::json& j) {
  switch (j.type()) {
    case nlohmann::json::value_t::null:
      return py::none();
    case nlohmann::json::value_t::boolean:
      return py::bool_(j.get<bool>());
    case nlohmann::json::value_t::number_integer:
      return py::int_(j.get<long long>());
    case nlohmann::json::value_t::number_unsigned:
      return py::int_(j.get<unsigned long long>());
    case nlohmann::json::value_t::number_float:
      return py::float_(j.get<double>());
    case nlohmann::json::value_t::string:
      return py::str(j.get<std::string>());
    case nlohmann::json::value_t::array: {
      py::list out;
      for (const auto& e : j) out.append(json_to_py(e));
      return out;
    }
    case nlohmann::json::value_t::object: {
      py::dict out;
      for (const auto& [k, v] : j.items()) out[py::str(k)] = json_to_py(v);
      return out;
    }
    default:
      return py::none();
  }
}

nlohmann::json py_to_json(py::handle h) {
  if (h.is_none()) return nullptr;
  if (py::isinstance<py::bool_>(h)) return h.cast<bool>();
  if (py::isinstance<py::int_>(h)) return h.cast<long long>();
  if (py::isinstance<py::float_>(h)) return h.cast<double>();
  if (py::isinstance<py::str>(h)) return h.cast<std::string>();
  if (py::isinstance<py::dict>(h)) {
    nlohmann::json out = nlohmann::json::object();
    for (auto item : h.cast<py::dict>())
      out[item.first.cast<std::string>()] = py_to_json(item.second);
    return out;
  }
  if (py::isinstance<py::list>(h) || py::isinstance<py::tuple>(h)) {
    nlohmann::json out = nlohmann::json::array();
    for (auto item : h.cast<py::sequence>()) out.push_back(py_to_json(item));
    return out;
  }
  throw py::type_error("config values must be None, bool, int, float, str, list or dict");
}

Tensor matrix_tensor(const std::vector<std::vector<double>>& rows, const char* what) {
  if (rows.empty()) throw InputError(std::string(what) + " must not be empty");
  const std::size_t cols = rows.front().size();
  if (cols == 0) throw InputError(std::string(what) + " rows must not be empty");
  Tensor t = Tensor::zeros({rows.size(), cols});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols)
      throw DimensionError(std::string(what) + " rows must all have the same length");
    for (std::size_t j = 0; j < cols; ++j) t.values()[i * cols + j] = Real(rows[i][j]);
  }
  return t;
}

std::vector<std::vector<double>> tensor_matrix(const Tensor& t) {
  const auto& shape = t.shape();
  std::vector<std::vector<double>> out(shape[0], std::vector<double>(shape[1]));
  for (std::size_t i = 0; i < shape[0]; ++i)
    for (std::size_t j = 0; j < shape[1]; ++j) out[i][j] = double(t.values()[i * shape[1] + j]);
  return out;
}

SyntheticSpec spec_from_json(const nlohmann::json& j) {
  SyntheticSpec s;
  for (const auto& [key, value] : j.items()) {
    (void)value;
    static const char* known[] = {"classes",
                                  "per_class",
                                  "test_per_class",
                                  "vocab_size",
                                  "signal_tokens_per_class",
                                  "signal_tokens_per_example",
                                  "disjoint_test_signal",
                                  "noise_len",
                                  "shared_signal_tokens",
                                  "seed"};
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError("unknown synthetic field '" + key + "'");
  }
  s.classes = j.value("classes", s.classes);
  s.per_class = j.value("per_class", s.per_class);
  s.test_per_class = j.value("test_per_class", s.test_per_class);
  s.vocab_size = j.value("vocab_size", s.vocab_size);
  s.signal_tokens_per_class = j.value("signal_tokens_per_class", s.signal_tokens_per_class);
  s.signal_tokens_per_example = j.value("signal_tokens_per_example", s.signal_tokens_per_example);
  s.disjoint_test_signal = j.value("disjoint_test_signal", s.disjoint_test_signal);
  s.noise_len = j.value("noise_len", s.noise_len);
  s.shared_signal_tokens = j.value("shared_signal_tokens", s.shared_signal_tokens);
  s.seed = j.value("seed", s.seed);
  return s;
}

nlohmann::json examples_json(const std::vector<Example>& examples) {
  nlohmann::json out = nlohmann::json::array();
  for (const Example& e : examples) out.push_back({{"text", e.text}, {"label", e.label}});
  return out;
}

nlohmann::json history_json(const TrainedModel& model) {
  nlohmann::json out = nlohmann::json::array();
  for (const EpochStat& e : model.history)
    out.push_back({{"epoch", e.epoch},
                   {"train_loss", e.train_loss},
                   {"valid_macro_f1", e.valid_macro_f1}});
  return out;
}

// A trained classifier plus the evaluation record of the run that made it.
struct PyModel {
  TrainedModel model;
  nlohmann::json result;  // null for models loaded from disk
};

PyModel train_from_config(py::dict config, std::optional<std::uint64_t> seed) {
  RunConfig cfg = parse_run_config(py_to_json(config));
  if (cfg.protocol != "episode")
    throw ConfigError("Model.train expects the episode protocol, got '" + cfg.protocol + "'");
  Dataset data = load_dataset(cfg.dataset);
  const std::uint64_t s = seed ? *seed : cfg.run.seeds.front();
  PyModel out{TrainedModel(Method::kTcm, Encoder(EncoderConfig{.vocab_size = 8}), Vocab{},
                           LabelSet{}, TcmHyper{}),
              nullptr};
  out.result = run_seed(data, cfg.run, s, &out.model).to_json();
  out.result["history"] = history_json(out.model);
  return out;
}

py::object run_experiment(py::dict config) {
  RunConfig cfg = parse_run_config(py_to_json(config));
  Dataset data = load_dataset(cfg.dataset);
  nlohmann::json out;
  out["protocol"] = cfg.protocol;
  if (cfg.protocol == "episode") {
    out["runs"] = nlohmann::json::array(
        {run_protocol(method_name(cfg.run.method), data, cfg.run).to_json()});
  } else if (cfg.protocol == "class_sweep") {
    out["points"] = nlohmann::json::array();
    for (const auto& p : class_number_sweep(data, cfg.run, cfg.class_counts, cfg.subset_seed))
      out["points"].push_back(p.to_json());
  } else {
    out["points"] = nlohmann::json::array();
    for (const auto& p : description_sweep(data, cfg.run, cfg.sweep_modes, cfg.sweep_ks))
      out["points"].push_back(p.to_json());
  }
  return json_to_py(out);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Siamese text matching against natural-language class descriptions";

  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const IoError& e) {
      PyErr_SetString(PyExc_OSError, e.what());
    } catch (const StalenessError& e) {
      PyErr_SetString(PyExc_RuntimeError, e.what());
    } catch (const ContractError& e) {
      PyErr_SetString(PyExc_RuntimeError, e.what());
    } catch (const Error& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  m.def(
      "make_synthetic",
      [](py::kwargs kwargs) {
        SyntheticData d = generate_synthetic(spec_from_json(py_to_json(kwargs)));
        nlohmann::json mapping;
        for (const auto& [label, entry] : d.mapping) {
          mapping[label] = {{"name", entry.name}, {"definition", entry.definition}};
          if (entry.sample) mapping[label]["sample"] = *entry.sample;
        }
        nlohmann::json out{{"pool", examples_json(d.pool)},
                           {"test", examples_json(d.test)},
                           {"labels", d.labels},
                           {"mapping", mapping}};
        return json_to_py(out);
      },
      "Generate a synthetic task; keywords mirror the config file's dataset "
      "fields (classes, per_class, vocab_size, ...).");

  m.def(
      "similarity_matrix",
      [](const std::vector<std::vector<double>>& inputs,
         const std::vector<std::vector<double>>& labels) {
        return tensor_matrix(similarity_matrix(nullptr, matrix_tensor(inputs, "inputs"),
                                               matrix_tensor(labels, "labels")));
      },
      py::arg("inputs"), py::arg("labels"),
      "Pairwise input-label inner products, [n_inputs x n_labels].");

  m.def(
      "matching_loss",
      [](const std::vector<std::vector<double>>& inputs,
         const std::vector<std::vector<double>>& labels, const std::vector<int>& targets,
         double tau) {
        return double(matching_loss(nullptr, matrix_tensor(inputs, "inputs"),
                                    matrix_tensor(labels, "labels"), targets, Real(tau))
                          .item());
      },
      py::arg("inputs"), py::arg("labels"), py::arg("targets"), py::arg("tau"),
      "Mean cross entropy of softmax(sim/tau) at the true labels.");

  m.def(
      "regularization_loss",
      [](const std::vector<std::vector<double>>& labels, double delta) {
        return double(
            regularization_loss(nullptr, matrix_tensor(labels, "labels"), Real(delta)).item());
      },
      py::arg("labels"), py::arg("delta"),
      "Mean over labels of max(delta, nearest other-label similarity).");

  m.def("macro_f1", &macro_f1, py::arg("confusion"),
        "Unweighted mean of per-class F1 over a confusion matrix (rows actual).");
  m.def("micro_f1", &micro_f1, py::arg("confusion"));
  m.def("accuracy", &accuracy, py::arg("confusion"));

  m.def("run_experiment", &run_experiment, py::arg("config"),
        "Run a full protocol (episode, class_sweep or description_sweep) from "
        "a config dict; returns the aggregated results as a dict.");

  py::class_<PyModel>(m, "Model", "A trained matcher bound to its vocabulary and label space.")
      .def_static("train", &train_from_config, py::arg("config"), py::arg("seed") = py::none(),
                  "Train one model from an episode-protocol config dict. Uses "
                  "the first seed in the config unless `seed` is given.")
      .def_static(
          "load",
          [](const std::string& path) { return PyModel{load_model(path), nullptr}; },
          py::arg("path"))
      .def("save",
           [](const PyModel& self, const std::string& path) { save_model(path, self.model); },
           py::arg("path"))
      .def("predict",
           [](const PyModel& self, const std::string& text) {
             return self.model.predict_label(text);
           },
           py::arg("text"))
      .def("scores",
           [](const PyModel& self, const std::string& text) {
             const auto rows = self.model.score({text});
             py::dict out;
             const auto& labels = self.model.label_set.labels();
             for (std::size_t i = 0; i < labels.size(); ++i)
               out[py::str(labels[i])] = double(rows[0][i]);
             return out;
           },
           py::arg("text"), "Per-label similarity scores for one text.")
      .def("encode",
           [](const PyModel& self, const std::vector<std::string>& texts) {
             Batch b = make_batch(self.model.vocab, texts, self.model.encoder.config().max_len);
             return tensor_matrix(self.model.encoder.encode(nullptr, b));
           },
           py::arg("texts"), "Matching-space representations, one row per text.")
      .def_property_readonly(
          "labels",
          [](const PyModel& self) { return self.model.label_set.labels(); })
      .def_property_readonly("method",
                             [](const PyModel& self) { return method_name(self.model.method); })
      .def_property_readonly("param_count",
                             [](const PyModel& self) { return self.model.param_count(); })
      .def_property_readonly(
          "history", [](const PyModel& self) { return json_to_py(history_json(self.model)); })
      .def_property_readonly(
          "result", [](const PyModel& self) { return json_to_py(self.result); },
          "Evaluation record of the training run; None for loaded models.");
}
