#include "tcm/objective.hpp"

#include <algorithm>

#include "tcm/errors.hpp"
#include "tcm/ops.hpp"

namespace tcm {

void TcmHyper::validate() const {
  if (!(tau > Real(0))) throw HyperparameterError("hyper.tau must be > 0");
  if (!(alpha >= Real(0))) throw HyperparameterError("hyper.alpha must be >= 0");
}

Tensor similarity(Tape* tape, const Tensor& u, const Tensor& v) {
  return dot(tape, u, v);
}

Tensor similarity_matrix(Tape* tape, const Tensor& inputs, const Tensor& labels) {
  if (inputs.ndim() != 2 || labels.ndim() != 2 || inputs.dim(1) != labels.dim(1)) {
    throw DimensionError("similarity_matrix: incompatible shapes " +
                         shape_str(inputs.shape()) + " and " + shape_str(labels.shape()));
  }
  return matmul(tape, inputs, transpose(tape, labels));
}

Tensor matching_loss(Tape* tape, const Tensor& inputs, const Tensor& labels,
                     const std::vector<int>& targets, Real tau) {
  if (!(tau > Real(0))) throw HyperparameterError("matching_loss: tau must be > 0");
  Tensor logits = scale(tape, similarity_matrix(tape, inputs, labels), Real(1) / tau);
  return softmax_cross_entropy(tape, logits, targets);
}

Tensor regularization_loss(Tape* tape, const Tensor& labels, Real delta) {
  if (labels.ndim() != 2) throw DimensionError("regularization_loss: labels must be 2-D");
  const std::size_t y = labels.dim(0);
  if (y < 2) throw ConfigError("regularization_loss needs at least 2 labels");
  Tensor sims = matmul(tape, labels, transpose(tape, labels));
  // Knock the diagonal out of the per-row max with a constant offset.
  Tensor diag_mask = Tensor::zeros({y, y});
  for (std::size_t i = 0; i < y; ++i) diag_mask.values()[i * y + i] = Real(-1e30);
  Tensor off_diag = add(tape, sims, diag_mask);
  return mean(tape, clamp_min(tape, row_max(tape, off_diag), delta));
}

Tensor total_loss(Tape* tape, const Tensor& matching, const Tensor& regularization,
                  Real alpha) {
  if (!(alpha >= Real(0))) throw HyperparameterError("total_loss: alpha must be >= 0");
  return add(tape, matching, scale(tape, regularization, alpha));
}

LabelEmbeddingCache build_label_cache(const Encoder& enc, const Vocab& vocab,
                                      const LabelSet& ls) {
  if (ls.size() == 0) throw ContractError("build_label_cache: empty label set");
  Batch batch = make_batch(vocab, ls.texts(), enc.config().max_len);
  LabelEmbeddingCache cache;
  cache.matrix = enc.encode(nullptr, batch);
  cache.encoder_version = enc.version();
  cache.label_fingerprint = ls.fingerprint();
  return cache;
}

namespace {

Prediction scores_to_prediction(const LabelSet& ls, const Tensor& scores) {
  Prediction pred;
  pred.scores.assign(scores.values().begin(), scores.values().end());
  pred.index = 0;
  for (std::size_t i = 1; i < pred.scores.size(); ++i) {
    if (pred.scores[i] > pred.scores[pred.index]) pred.index = i;
  }
  pred.label = ls.labels()[pred.index];
  return pred;
}

}  // namespace

Prediction predict(const Encoder& enc, const Vocab& vocab, const LabelSet& ls,
                   const LabelEmbeddingCache& cache, const std::string& text) {
  if (cache.encoder_version != enc.version()) {
    throw StalenessError("label cache built at encoder version " +
                         std::to_string(cache.encoder_version) + ", encoder is at " +
                         std::to_string(enc.version()));
  }
  if (cache.label_fingerprint != ls.fingerprint()) {
    throw StalenessError("label cache does not match the label set");
  }
  Batch batch = make_batch(vocab, {text}, enc.config().max_len);
  Tensor x = enc.encode(nullptr, batch);
  Tensor scores = similarity_matrix(nullptr, x, cache.matrix);
  return scores_to_prediction(ls, scores);
}

Prediction predict_fresh(const Encoder& enc, const Vocab& vocab, const LabelSet& ls,
                         const std::string& text) {
  Batch batch = make_batch(vocab, {text}, enc.config().max_len);
  Tensor x = enc.encode(nullptr, batch);
  Batch labels = make_batch(vocab, ls.texts(), enc.config().max_len);
  Tensor label_matrix = enc.encode(nullptr, labels);
  Tensor scores = similarity_matrix(nullptr, x, label_matrix);
  return scores_to_prediction(ls, scores);
}

}  // namespace tcm
