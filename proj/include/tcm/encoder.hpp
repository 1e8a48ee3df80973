#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "tcm/rng.hpp"
#include "tcm/serialize.hpp"
#include "tcm/tensor.hpp"
#include "tcm/text.hpp"

namespace tcm {

struct EncoderConfig {
  std::size_t vocab_size = 0;
  std::size_t max_len = 64;
  std::size_t embed_dim = 64;
  std::size_t num_layers = 2;
  std::size_t num_heads = 4;
  std::size_t ffn_dim = 128;
  std::size_t repr_dim = 64;  // d, the matching-space width
  Real dropout = Real(0);
  std::uint64_t seed = 0;

  void validate() const;
  // Trainable scalar count implied by the config.
  std::size_t param_count() const;

  nlohmann::json to_json() const;
  static EncoderConfig from_json(const nlohmann::json& j);
};

// A fixed-width batch of encoded texts: ids flattened row-major [batch*seq],
// mask [batch × seq] marking real tokens.
struct Batch {
  std::vector<std::size_t> ids;
  Tensor mask;
  std::size_t batch = 0;
  std::size_t seq = 0;
};

Batch make_batch(const Vocab& vocab, const std::vector<std::string>& texts,
                 std::size_t max_len);

// The shared text encoder f_θ: token+position embeddings, transformer layers
// with masked attention, then the [CLS] hidden state through a one-hidden-
// layer tanh MLP down to repr_dim. One parameter set serves both input texts
// and label texts.
class Encoder {
 public:
  explicit Encoder(EncoderConfig cfg);

  const EncoderConfig& config() const { return cfg_; }

  // All trainable tensors; the same handles the optimizer should hold.
  std::vector<Tensor> parameters() const;
  std::vector<NamedTensor> named_parameters() const;
  std::size_t param_count() const;

  // [batch × repr_dim] matching-space representations. Dropout is applied
  // only when dropout_rng is non-null (training mode) and the configured
  // rate is positive.
  Tensor encode(Tape* tape, const Batch& batch, Rng* dropout_rng = nullptr) const;
  // Raw [CLS] hidden states [batch × embed_dim], bypassing the pooling MLP.
  Tensor encode_cls(Tape* tape, const Batch& batch, Rng* dropout_rng = nullptr) const;

  // Monotone counter identifying the parameter state; anything that mutates
  // the parameters (an optimizer step, a checkpoint load) must bump it so
  // cached label embeddings can detect staleness.
  std::uint64_t version() const { return version_; }
  void bump_version() { ++version_; }

  // Copies values for every named parameter from a checkpoint (shape-checked).
  void load_state(const Checkpoint& ckpt);

 private:
  Tensor hidden_states(Tape* tape, const Batch& batch, Rng* dropout_rng) const;
  Tensor cls_rows(Tape* tape, const Tensor& hidden, const Batch& batch) const;
  Tensor pool(Tape* tape, const Tensor& cls) const;
  Tensor maybe_dropout(Tape* tape, const Tensor& x, Rng* rng) const;
  Tensor param(const std::string& name) const;

  EncoderConfig cfg_;
  std::vector<NamedTensor> params_;
  std::uint64_t version_ = 0;
};

}  // namespace tcm
