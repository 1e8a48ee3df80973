#include "tcm/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include "tcm/errors.hpp"
#include "tcm/ops.hpp"
#include "tcm/serialize.hpp"

namespace tcm {

namespace {

bool uses_free_labels(Method m) {
  return m == Method::kTcmInit || m == Method::kTcmRandInit;
}

bool uses_encoded_labels(Method m) {
  return m == Method::kTcm || m == Method::kTcmNoReg || m == Method::kTwoEncoder;
}

}  // namespace

Method parse_method(const std::string& name) {
  if (name == "tcm") return Method::kTcm;
  if (name == "tcm_noreg") return Method::kTcmNoReg;
  if (name == "tcm_init") return Method::kTcmInit;
  if (name == "tcm_randinit") return Method::kTcmRandInit;
  if (name == "task_head") return Method::kTaskHead;
  if (name == "two_encoder") return Method::kTwoEncoder;
  throw ConfigError("unknown method '" + name +
                    "' (expected tcm, tcm_noreg, tcm_init, tcm_randinit, task_head or "
                    "two_encoder)");
}

std::string method_name(Method method) {
  switch (method) {
    case Method::kTcm: return "tcm";
    case Method::kTcmNoReg: return "tcm_noreg";
    case Method::kTcmInit: return "tcm_init";
    case Method::kTcmRandInit: return "tcm_randinit";
    case Method::kTaskHead: return "task_head";
    case Method::kTwoEncoder: return "two_encoder";
  }
  throw ContractError("unhandled method value");
}

void TrainOptions::validate() const {
  optim.validate();
  if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
  if (epochs == 0) throw ConfigError("epochs must be at least 1");
}

std::vector<Tensor> TrainedModel::parameters() const {
  std::vector<Tensor> out = encoder.parameters();
  if (label_encoder) {
    auto extra = label_encoder->parameters();
    out.insert(out.end(), extra.begin(), extra.end());
  }
  if (free_labels) out.push_back(*free_labels);
  if (head_w) out.push_back(*head_w);
  if (head_b) out.push_back(*head_b);
  return out;
}

std::size_t TrainedModel::param_count() const {
  std::size_t n = 0;
  for (const Tensor& t : parameters()) n += t.size();
  return n;
}

Tensor TrainedModel::label_matrix() const {
  if (method == Method::kTaskHead)
    throw ContractError("task-head models score through a linear head, not a label matrix");
  if (free_labels) return *free_labels;
  const Encoder& enc = label_encoder ? *label_encoder : encoder;
  Batch b = make_batch(vocab, label_set.texts(), enc.config().max_len);
  return enc.encode(nullptr, b);
}

std::vector<std::vector<Real>> TrainedModel::score(const std::vector<std::string>& texts,
                                                   std::size_t eval_batch) const {
  if (eval_batch == 0) throw ConfigError("eval_batch must be at least 1");
  std::vector<std::vector<Real>> out;
  out.reserve(texts.size());
  if (texts.empty()) return out;

  Tensor labels;  // undefined for task-head models
  if (method != Method::kTaskHead) labels = label_matrix();

  const std::size_t y = label_set.size();
  for (std::size_t start = 0; start < texts.size(); start += eval_batch) {
    const std::size_t stop = std::min(texts.size(), start + eval_batch);
    std::vector<std::string> chunk(texts.begin() + start, texts.begin() + stop);
    Batch b = make_batch(vocab, chunk, encoder.config().max_len);
    Tensor scores;
    if (method == Method::kTaskHead) {
      Tensor cls = encoder.encode_cls(nullptr, b);
      scores = add(nullptr, matmul(nullptr, cls, *head_w), *head_b);
    } else {
      Tensor x = encoder.encode(nullptr, b);
      scores = similarity_matrix(nullptr, x, labels);
    }
    auto vals = scores.values();
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      out.emplace_back(vals.begin() + static_cast<std::ptrdiff_t>(i * y),
                       vals.begin() + static_cast<std::ptrdiff_t>((i + 1) * y));
    }
  }
  return out;
}

std::size_t TrainedModel::predict_index(const std::string& text) const {
  return argmax_index(score({text}).front());
}

std::string TrainedModel::predict_label(const std::string& text) const {
  return label_set.labels().at(predict_index(text));
}

std::size_t argmax_index(const std::vector<Real>& scores) {
  if (scores.empty()) throw InputError("cannot take the argmax of an empty score row");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;
  return best;
}

Confusion evaluate(const TrainedModel& model, const std::vector<Example>& examples,
                   std::size_t eval_batch) {
  if (examples.empty()) throw InputError("no examples to evaluate");
  const std::size_t y = model.label_set.size();
  Confusion confusion(y, std::vector<std::size_t>(y, 0));
  std::vector<std::string> texts;
  texts.reserve(examples.size());
  for (const Example& ex : examples) texts.push_back(ex.text);
  auto scores = model.score(texts, eval_batch);
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const std::size_t actual = model.label_set.index_of(examples[i].label);
    confusion[actual][argmax_index(scores[i])] += 1;
  }
  return confusion;
}

TrainedModel train_model(Method method, const EncoderConfig& ecfg, const Vocab& vocab,
                         const LabelSet& ls, const Episode& episode, const TcmHyper& hyper,
                         const TrainOptions& opt) {
  hyper.validate();
  opt.validate();
  if (ecfg.vocab_size != vocab.size())
    throw ConfigError("encoder vocab_size " + std::to_string(ecfg.vocab_size) +
                      " does not match the vocabulary (" + std::to_string(vocab.size()) +
                      " ids)");
  if (ls.size() == 0) throw InputError("label set is empty");
  if (episode.train.empty()) throw InputError("episode has no training examples");
  if (episode.valid.empty()) throw InputError("episode has no validation examples");

  TrainedModel model(method, Encoder(ecfg), vocab, ls, hyper);
  const std::size_t y = ls.size();

  if (method == Method::kTwoEncoder) {
    EncoderConfig lcfg = ecfg;
    lcfg.seed = mix64(ecfg.seed, fnv1a64("label_tower"));
    model.label_encoder.emplace(lcfg);
  } else if (method == Method::kTcmInit) {
    Tensor init = build_label_cache(model.encoder, vocab, ls).matrix.clone();
    init.set_requires_grad(true);
    model.free_labels = init;
  } else if (method == Method::kTcmRandInit) {
    // Scale-matched to what encoded descriptions would give, so the only
    // difference from kTcmInit is the missing description signal.
    Tensor init = Tensor::zeros({y, ecfg.repr_dim}, true);
    Rng r = Rng(ecfg.seed).fork("free_labels");
    const double sigma = 1.0 / std::sqrt(double(ecfg.repr_dim));
    for (Real& v : init.values()) v = Real(r.next_trunc_normal(sigma));
    model.free_labels = init;
  } else if (method == Method::kTaskHead) {
    // Zero head: the first-step loss is exactly log(|Y|) no matter what the
    // encoder emits, which makes fresh-start sanity checks cheap.
    model.head_w = Tensor::zeros({ecfg.embed_dim, y}, true);
    model.head_b = Tensor::zeros({y}, true);
  }

  std::vector<Tensor> params = model.parameters();
  AdamW optimizer(params, opt.optim);

  const Real alpha_eff = method == Method::kTcmNoReg ? Real(0) : hyper.alpha;
  const bool regularize = method != Method::kTaskHead && alpha_eff > Real(0) && y >= 2;

  Batch label_batch;
  if (uses_encoded_labels(method)) label_batch = make_batch(vocab, ls.texts(), ecfg.max_len);

  Rng shuffle_root = Rng(opt.seed).fork("shuffle");
  Rng dropout_rng = Rng(opt.seed).fork("dropout");

  const std::size_t n = episode.train.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  double best_f1 = -1.0;
  std::vector<std::vector<Real>> best_values;
  auto snapshot = [&] {
    best_values.clear();
    for (const Tensor& t : params) {
      auto v = t.values();
      best_values.emplace_back(v.begin(), v.end());
    }
  };

  for (std::size_t epoch = 1; epoch <= opt.epochs; ++epoch) {
    Rng epoch_rng = shuffle_root.fork(epoch);
    epoch_rng.shuffle(order);

    double loss_sum = 0;
    for (std::size_t start = 0; start < n; start += opt.batch_size) {
      const std::size_t stop = std::min(n, start + opt.batch_size);
      std::vector<std::string> texts;
      std::vector<int> targets;
      texts.reserve(stop - start);
      targets.reserve(stop - start);
      for (std::size_t i = start; i < stop; ++i) {
        const Example& ex = episode.train[order[i]];
        texts.push_back(ex.text);
        targets.push_back(static_cast<int>(ls.index_of(ex.label)));
      }

      Tape tape;
      Tensor loss = [&]() -> Tensor {
        Batch in = make_batch(vocab, texts, ecfg.max_len);
        if (method == Method::kTaskHead) {
          Tensor cls = model.encoder.encode_cls(&tape, in, &dropout_rng);
          Tensor logits = add(&tape, matmul(&tape, cls, *model.head_w), *model.head_b);
          return softmax_cross_entropy(&tape, logits, targets);
        }
        Tensor x = model.encoder.encode(&tape, in, &dropout_rng);
        Tensor labels = model.free_labels
                            ? *model.free_labels
                            : (model.label_encoder
                                   ? model.label_encoder->encode(&tape, label_batch, &dropout_rng)
                                   : model.encoder.encode(&tape, label_batch, &dropout_rng));
        Tensor lm = matching_loss(&tape, x, labels, targets, hyper.tau);
        if (!regularize) return lm;
        Tensor lr = regularization_loss(&tape, labels, hyper.delta);
        return total_loss(&tape, lm, lr, alpha_eff);
      }();

      loss_sum += loss.item() * static_cast<double>(texts.size());
      tape.backward(loss);
      optimizer.step();
      optimizer.zero_grad();
      model.encoder.bump_version();
      if (model.label_encoder) model.label_encoder->bump_version();
    }

    const double valid_f1 = macro_f1(evaluate(model, episode.valid));
    model.history.push_back(
        {epoch, Real(loss_sum / static_cast<double>(n)), valid_f1});
    if (valid_f1 > best_f1) {
      best_f1 = valid_f1;
      snapshot();
    }
  }

  // Roll back to the best-validation epoch (ties keep the earliest).
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto v = params[i].values();
    std::copy(best_values[i].begin(), best_values[i].end(), v.begin());
  }
  model.encoder.bump_version();
  if (model.label_encoder) model.label_encoder->bump_version();
  return model;
}

namespace {

nlohmann::json label_set_to_json(const LabelSet& ls) {
  return {{"mode", mapping_mode_name(ls.mode())},
          {"labels", ls.labels()},
          {"texts", ls.texts()}};
}

const nlohmann::json& require_key(const nlohmann::json& j, const std::string& key) {
  auto it = j.find(key);
  if (it == j.end()) throw SchemaError("model checkpoint metadata is missing '" + key + "'");
  return *it;
}

// Checkpoint view holding only the parameters under `prefix`, names stripped.
Checkpoint scoped(const Checkpoint& ckpt, const std::string& prefix) {
  Checkpoint out;
  out.metadata = ckpt.metadata;
  for (const NamedTensor& p : ckpt.params)
    if (p.name.rfind(prefix, 0) == 0)
      out.params.push_back({p.name.substr(prefix.size()), p.tensor});
  return out;
}

Tensor required_param(const Checkpoint& ckpt, const std::string& name, const Shape& shape) {
  const Tensor* t = ckpt.find(name);
  if (t == nullptr) throw SchemaError("model checkpoint is missing parameter '" + name + "'");
  if (t->shape() != shape)
    throw SchemaError("parameter '" + name + "' has shape " + shape_str(t->shape()) +
                      ", expected " + shape_str(shape));
  Tensor out = t->clone();
  out.set_requires_grad(true);
  return out;
}

}  // namespace

void save_model(const std::filesystem::path& path, const TrainedModel& model) {
  nlohmann::json history = nlohmann::json::array();
  for (const EpochStat& s : model.history)
    history.push_back({{"epoch", s.epoch},
                       {"train_loss", s.train_loss},
                       {"valid_macro_f1", s.valid_macro_f1}});

  nlohmann::json meta = {{"format", "tcm-model"},
                         {"format_version", 1},
                         {"method", method_name(model.method)},
                         {"encoder", model.encoder.config().to_json()},
                         {"vocab", model.vocab.content_tokens()},
                         {"label_set", label_set_to_json(model.label_set)},
                         {"hyper",
                          {{"tau", model.hyper.tau},
                           {"delta", model.hyper.delta},
                           {"alpha", model.hyper.alpha}}},
                         {"history", history}};
  if (model.label_encoder) meta["label_encoder"] = model.label_encoder->config().to_json();

  std::vector<NamedTensor> params;
  for (const NamedTensor& p : model.encoder.named_parameters())
    params.push_back({"encoder." + p.name, p.tensor});
  if (model.label_encoder)
    for (const NamedTensor& p : model.label_encoder->named_parameters())
      params.push_back({"label_encoder." + p.name, p.tensor});
  if (model.free_labels) params.push_back({"free_labels", *model.free_labels});
  if (model.head_w) params.push_back({"head.w", *model.head_w});
  if (model.head_b) params.push_back({"head.b", *model.head_b});

  save_checkpoint(path, meta, params);
}

TrainedModel load_model(const std::filesystem::path& path) {
  Checkpoint ckpt = load_checkpoint(path);
  const nlohmann::json& meta = ckpt.metadata;
  if (!meta.is_object() || require_key(meta, "format") != "tcm-model")
    throw SchemaError(path.string() + ": not a model checkpoint");

  const Method method = parse_method(require_key(meta, "method").get<std::string>());
  EncoderConfig ecfg = EncoderConfig::from_json(require_key(meta, "encoder"));

  Vocab vocab(require_key(meta, "vocab").get<std::vector<std::string>>());
  const nlohmann::json& lsj = require_key(meta, "label_set");
  LabelSet ls(require_key(lsj, "labels").get<std::vector<std::string>>(),
              require_key(lsj, "texts").get<std::vector<std::string>>(),
              parse_mapping_mode(require_key(lsj, "mode").get<std::string>()));

  const nlohmann::json& hj = require_key(meta, "hyper");
  TcmHyper hyper;
  hyper.tau = require_key(hj, "tau").get<Real>();
  hyper.delta = require_key(hj, "delta").get<Real>();
  hyper.alpha = require_key(hj, "alpha").get<Real>();
  hyper.validate();

  TrainedModel model(method, Encoder(ecfg), std::move(vocab), std::move(ls), hyper);
  model.encoder.load_state(scoped(ckpt, "encoder."));

  const std::size_t y = model.label_set.size();
  if (method == Method::kTwoEncoder) {
    EncoderConfig lcfg = EncoderConfig::from_json(require_key(meta, "label_encoder"));
    model.label_encoder.emplace(lcfg);
    model.label_encoder->load_state(scoped(ckpt, "label_encoder."));
  } else if (uses_free_labels(method)) {
    model.free_labels = required_param(ckpt, "free_labels", {y, ecfg.repr_dim});
  } else if (method == Method::kTaskHead) {
    model.head_w = required_param(ckpt, "head.w", {ecfg.embed_dim, y});
    model.head_b = required_param(ckpt, "head.b", {y});
  }

  if (meta.contains("history")) {
    for (const nlohmann::json& s : meta["history"]) {
      model.history.push_back({require_key(s, "epoch").get<std::size_t>(),
                               require_key(s, "train_loss").get<Real>(),
                               require_key(s, "valid_macro_f1").get<double>()});
    }
  }
  return model;
}

}  // namespace tcm
