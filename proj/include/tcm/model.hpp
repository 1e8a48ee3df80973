#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tcm/encoder.hpp"
#include "tcm/episode.hpp"
#include "tcm/labels.hpp"
#include "tcm/metrics.hpp"
#include "tcm/objective.hpp"
#include "tcm/optim.hpp"

namespace tcm {

// The trainable variants. kTcmNoReg is kTcm with the regularizer weight
// forced to zero; kTcmInit seeds a free label matrix from the encoded
// descriptions and never re-encodes them; kTcmRandInit is the same free
// matrix from random initialization (no description signal at all).
enum class Method { kTcm, kTcmNoReg, kTcmInit, kTcmRandInit, kTaskHead, kTwoEncoder };

Method parse_method(const std::string& name);
std::string method_name(Method method);

struct TrainOptions {
  AdamWConfig optim;
  std::size_t batch_size = 8;
  std::size_t epochs = 20;
  std::uint64_t seed = 0;  // drives batch shuffling and dropout

  void validate() const;
};

struct EpochStat {
  std::size_t epoch = 0;
  Real train_loss = Real(0);
  double valid_macro_f1 = 0;
};

// A trained classifier: the encoder plus whatever extra parameters its
// method carries, with everything needed to score raw text.
struct TrainedModel {
  TrainedModel(Method method, Encoder encoder, Vocab vocab, LabelSet label_set,
               TcmHyper hyper)
      : method(method),
        encoder(std::move(encoder)),
        vocab(std::move(vocab)),
        label_set(std::move(label_set)),
        hyper(hyper) {}

  Method method;
  Encoder encoder;
  std::optional<Encoder> label_encoder;  // kTwoEncoder
  std::optional<Tensor> free_labels;     // kTcmInit / kTcmRandInit, [Y × d]
  std::optional<Tensor> head_w;          // kTaskHead, [E × Y]
  std::optional<Tensor> head_b;          // kTaskHead, [Y]
  Vocab vocab;
  LabelSet label_set;
  TcmHyper hyper;
  std::vector<EpochStat> history;

  std::vector<Tensor> parameters() const;
  std::size_t param_count() const;

  // Eval-mode label-side embedding matrix [Y × d]; the free matrix for the
  // init variants, encoded label texts otherwise. Task-head models have no
  // label matrix and hit a contract error.
  Tensor label_matrix() const;

  // Per-text score rows in label-set order.
  std::vector<std::vector<Real>> score(const std::vector<std::string>& texts,
                                       std::size_t eval_batch = 32) const;
  std::size_t predict_index(const std::string& text) const;
  std::string predict_label(const std::string& text) const;
};

// Row argmax with ties to the smallest index.
std::size_t argmax_index(const std::vector<Real>& scores);

// Confusion matrix (rows actual, columns predicted) of the model over
// labeled examples.
Confusion evaluate(const TrainedModel& model, const std::vector<Example>& examples,
                   std::size_t eval_batch = 32);

// Trains `method` on the episode: per-epoch passes over shuffled K-shot
// train batches, validation macro-F1 after each epoch, and the parameters
// restored to the best-validation epoch at the end. Every step re-encodes
// the batch inputs and (for description-driven methods) all label texts
// with the current parameters.
TrainedModel train_model(Method method, const EncoderConfig& ecfg, const Vocab& vocab,
                         const LabelSet& ls, const Episode& episode, const TcmHyper& hyper,
                         const TrainOptions& opt);

void save_model(const std::filesystem::path& path, const TrainedModel& model);
TrainedModel load_model(const std::filesystem::path& path);

}  // namespace tcm
