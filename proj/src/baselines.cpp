#include "tcm/baselines.hpp"

namespace tcm {

TrainedModel train_task_head(const EncoderConfig& ecfg, const Vocab& vocab, const LabelSet& ls,
                             const Episode& episode, const TcmHyper& hyper,
                             const TrainOptions& opt) {
  return train_model(Method::kTaskHead, ecfg, vocab, ls, episode, hyper, opt);
}

TrainedModel train_two_encoder(const EncoderConfig& ecfg, const Vocab& vocab, const LabelSet& ls,
                               const Episode& episode, const TcmHyper& hyper,
                               const TrainOptions& opt) {
  return train_model(Method::kTwoEncoder, ecfg, vocab, ls, episode, hyper, opt);
}

}  // namespace tcm
