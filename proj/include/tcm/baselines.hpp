#pragma once

#include "tcm/model.hpp"

namespace tcm {

// Both baselines run through the same training driver as the matching
// methods — identical batching, shuffling, validation and checkpoint
// selection — so any score gap is down to the objective, not the harness.

// Conventional classifier: the encoder's raw [CLS] state through a zero-
// initialized linear layer with one logit per class. No label text is read;
// adding a class means widening the head and retraining.
TrainedModel train_task_head(const EncoderConfig& ecfg, const Vocab& vocab, const LabelSet& ls,
                             const Episode& episode, const TcmHyper& hyper,
                             const TrainOptions& opt);

// Matching with the weight sharing removed: label descriptions get their own
// independently initialized tower, doubling the parameter count.
TrainedModel train_two_encoder(const EncoderConfig& ecfg, const Vocab& vocab, const LabelSet& ls,
                               const Episode& episode, const TcmHyper& hyper,
                               const TrainOptions& opt);

}  // namespace tcm
