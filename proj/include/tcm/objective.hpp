#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tcm/encoder.hpp"
#include "tcm/labels.hpp"
#include "tcm/tensor.hpp"

namespace tcm {

struct TcmHyper {
  Real tau = Real(0.07);   // softmax temperature
  Real delta = Real(0);    // separation threshold, raw dot-product units
  Real alpha = Real(1);    // regularizer weight

  void validate() const;
};

// Raw (unnormalized) inner product of two equal-shape vectors.
Tensor similarity(Tape* tape, const Tensor& u, const Tensor& v);

// All pairwise similarities: [N×d] x [Y×d] -> [N×Y].
Tensor similarity_matrix(Tape* tape, const Tensor& inputs, const Tensor& labels);

// Mean cross entropy of softmax over sim(x_i, t_y)/tau at the true label.
Tensor matching_loss(Tape* tape, const Tensor& inputs, const Tensor& labels,
                     const std::vector<int>& targets, Real tau);

// (1/|Y|) sum_y max{delta, max_{y'!=y} sim(t_y, t_y')}. Pushes the label
// embeddings apart; gradient flows through both members of the selected pair
// and vanishes once every off-diagonal similarity is at or below delta.
Tensor regularization_loss(Tape* tape, const Tensor& labels, Real delta);

// matching + alpha * regularization.
Tensor total_loss(Tape* tape, const Tensor& matching, const Tensor& regularization, Real alpha);

// Precomputed label-text embeddings; valid only while the encoder parameters
// and the label set both stay exactly as they were at build time.
struct LabelEmbeddingCache {
  Tensor matrix;  // [Y × d]
  std::uint64_t encoder_version = 0;
  std::uint64_t label_fingerprint = 0;
};

LabelEmbeddingCache build_label_cache(const Encoder& enc, const Vocab& vocab,
                                      const LabelSet& ls);

struct Prediction {
  std::size_t index = 0;
  std::string label;
  std::vector<Real> scores;  // LabelSet order
};

// Inference against the cache; throws StalenessError when the encoder or the
// label set moved since the cache was built. Ties go to the smallest index.
Prediction predict(const Encoder& enc, const Vocab& vocab, const LabelSet& ls,
                   const LabelEmbeddingCache& cache, const std::string& text);

// Same scores computed by re-encoding every label text on the spot.
Prediction predict_fresh(const Encoder& enc, const Vocab& vocab, const LabelSet& ls,
                         const std::string& text);

}  // namespace tcm
