#include "tcm/encoder.hpp"

#include <cmath>

#include "tcm/errors.hpp"
#include "tcm/ops.hpp"
#include "tcm/rng.hpp"

namespace tcm {

void EncoderConfig::validate() const {
  if (vocab_size < Vocab::kReserved + 1) {
    throw ConfigError("encoder.vocab_size must cover the reserved ids, got " +
                      std::to_string(vocab_size));
  }
  if (max_len < 2) throw ConfigError("encoder.max_len must be >= 2");
  if (embed_dim < 1) throw ConfigError("encoder.embed_dim must be >= 1");
  if (num_layers < 1) throw ConfigError("encoder.num_layers must be >= 1");
  if (num_heads < 1) throw ConfigError("encoder.num_heads must be >= 1");
  if (embed_dim % num_heads != 0) {
    throw ConfigError("encoder.embed_dim " + std::to_string(embed_dim) +
                      " not divisible by num_heads " + std::to_string(num_heads));
  }
  if (ffn_dim < 1) throw ConfigError("encoder.ffn_dim must be >= 1");
  if (repr_dim < 1) throw ConfigError("encoder.repr_dim must be >= 1");
  if (dropout < Real(0) || dropout >= Real(1)) {
    throw ConfigError("encoder.dropout must be in [0, 1)");
  }
}

std::size_t EncoderConfig::param_count() const {
  const std::size_t e = embed_dim, f = ffn_dim;
  const std::size_t attn = 4 * (e * e + e);
  const std::size_t ffn = e * f + f + f * e + e;
  const std::size_t norms = 4 * e;  // two layer norms, gain + bias each
  return vocab_size * e + max_len * e + num_layers * (attn + ffn + norms) +
         (e * e + e + e * repr_dim + repr_dim);
}

nlohmann::json EncoderConfig::to_json() const {
  return {{"vocab_size", vocab_size}, {"max_len", max_len},     {"embed_dim", embed_dim},
          {"num_layers", num_layers}, {"num_heads", num_heads}, {"ffn_dim", ffn_dim},
          {"repr_dim", repr_dim},     {"dropout", dropout},     {"seed", seed}};
}

EncoderConfig EncoderConfig::from_json(const nlohmann::json& j) {
  EncoderConfig cfg;
  cfg.vocab_size = j.at("vocab_size").get<std::size_t>();
  cfg.max_len = j.at("max_len").get<std::size_t>();
  cfg.embed_dim = j.at("embed_dim").get<std::size_t>();
  cfg.num_layers = j.at("num_layers").get<std::size_t>();
  cfg.num_heads = j.at("num_heads").get<std::size_t>();
  cfg.ffn_dim = j.at("ffn_dim").get<std::size_t>();
  cfg.repr_dim = j.at("repr_dim").get<std::size_t>();
  cfg.dropout = j.at("dropout").get<Real>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  return cfg;
}

Batch make_batch(const Vocab& vocab, const std::vector<std::string>& texts,
                 std::size_t max_len) {
  if (texts.empty()) throw InputError("make_batch: no texts");
  Batch b;
  b.batch = texts.size();
  b.seq = max_len;
  b.ids.reserve(b.batch * b.seq);
  b.mask = Tensor::zeros({b.batch, b.seq});
  auto mv = b.mask.values();
  for (std::size_t i = 0; i < texts.size(); ++i) {
    Encoded enc = encode_text(vocab, texts[i], max_len);
    b.ids.insert(b.ids.end(), enc.ids.begin(), enc.ids.end());
    for (std::size_t j = 0; j < max_len; ++j) mv[i * max_len + j] = enc.mask[j];
  }
  return b;
}

namespace {

Tensor init_param(const std::string& name, Shape shape, const Rng& root) {
  Tensor t = Tensor::zeros(std::move(shape), /*requires_grad=*/true);
  Rng rng = root.fork(name);
  const bool is_matrix = t.ndim() == 2;
  const bool is_gain = name.find(".gain") != std::string::npos;
  // The pooling head gets fan-in-scaled noise so matching-space vectors come
  // out at unit scale from the start. At sigma 0.02 both towers would emit
  // ~1e-2-norm vectors, their dot products ~1e-4: in that regime the input-
  // side matching gradient is quadratically suppressed and training stalls
  // on the uniform plateau. The transformer blocks keep the usual 0.02 —
  // their residual path needs small perturbations, not unit ones.
  const bool is_pool = name.find("pool.") != std::string::npos;
  if (is_matrix) {
    const double sigma = is_pool ? 1.0 / std::sqrt(double(t.dim(0))) : 0.02;
    for (auto& v : t.values()) v = Real(rng.next_trunc_normal(sigma));
  } else if (is_gain) {
    for (auto& v : t.values()) v = Real(1);
  }
  return t;
}

}  // namespace

Encoder::Encoder(EncoderConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  const Rng root = Rng(cfg_.seed).fork("init");
  const std::size_t e = cfg_.embed_dim, f = cfg_.ffn_dim;
  auto add = [&](const std::string& name, Shape shape) {
    params_.push_back({name, init_param(name, std::move(shape), root)});
  };
  add("embed.token", {cfg_.vocab_size, e});
  add("embed.pos", {cfg_.max_len, e});
  for (std::size_t l = 0; l < cfg_.num_layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    for (const char* m : {"attn.wq", "attn.wk", "attn.wv", "attn.wo"}) add(p + m, {e, e});
    for (const char* b : {"attn.bq", "attn.bk", "attn.bv", "attn.bo"}) add(p + b, {e});
    add(p + "ln1.gain", {e});
    add(p + "ln1.bias", {e});
    add(p + "ffn.w1", {e, f});
    add(p + "ffn.b1", {f});
    add(p + "ffn.w2", {f, e});
    add(p + "ffn.b2", {e});
    add(p + "ln2.gain", {e});
    add(p + "ln2.bias", {e});
  }
  add("pool.w1", {e, e});
  add("pool.b1", {e});
  add("pool.w2", {e, cfg_.repr_dim});
  add("pool.b2", {cfg_.repr_dim});
}

std::vector<Tensor> Encoder::parameters() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& np : params_) out.push_back(np.tensor);
  return out;
}

std::vector<NamedTensor> Encoder::named_parameters() const { return params_; }

std::size_t Encoder::param_count() const {
  std::size_t n = 0;
  for (const auto& np : params_) n += np.tensor.size();
  return n;
}

Tensor Encoder::param(const std::string& name) const {
  for (const auto& np : params_) {
    if (np.name == name) return np.tensor;
  }
  throw ContractError("encoder has no parameter '" + name + "'");
}

Tensor Encoder::maybe_dropout(Tape* tape, const Tensor& x, Rng* rng) const {
  if (!rng || cfg_.dropout == Real(0)) return x;
  return dropout(tape, x, cfg_.dropout, *rng);
}

Tensor Encoder::hidden_states(Tape* tape, const Batch& batch, Rng* dropout_rng) const {
  if (batch.seq != cfg_.max_len) {
    throw DimensionError("batch seq " + std::to_string(batch.seq) +
                         " does not match encoder max_len " + std::to_string(cfg_.max_len));
  }
  if (batch.ids.size() != batch.batch * batch.seq ||
      batch.mask.shape() != Shape{batch.batch, batch.seq}) {
    throw DimensionError("batch ids/mask shapes disagree");
  }
  const std::size_t s = batch.seq;
  std::vector<std::size_t> pos(batch.ids.size());
  for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = i % s;

  Tensor x = add(tape, gather_rows(tape, param("embed.token"), batch.ids),
                 gather_rows(tape, param("embed.pos"), pos));
  x = maybe_dropout(tape, x, dropout_rng);

  const std::size_t heads = cfg_.num_heads;
  const Real inv_sqrt_hd = Real(1) / std::sqrt(Real(cfg_.embed_dim / heads));
  for (std::size_t l = 0; l < cfg_.num_layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    Tensor q = add(tape, matmul(tape, x, param(p + "attn.wq")), param(p + "attn.bq"));
    Tensor k = add(tape, matmul(tape, x, param(p + "attn.wk")), param(p + "attn.bk"));
    Tensor v = add(tape, matmul(tape, x, param(p + "attn.wv")), param(p + "attn.bv"));
    q = split_heads(tape, q, batch.batch, s, heads);
    k = split_heads(tape, k, batch.batch, s, heads);
    v = split_heads(tape, v, batch.batch, s, heads);
    Tensor scores = scale(tape, bmm(tape, q, k, false, true), inv_sqrt_hd);
    Tensor probs = attention_softmax(tape, scores, batch.mask, heads);
    Tensor ctx = merge_heads(tape, bmm(tape, probs, v), batch.batch, s, heads);
    Tensor attn_out = add(tape, matmul(tape, ctx, param(p + "attn.wo")), param(p + "attn.bo"));
    attn_out = maybe_dropout(tape, attn_out, dropout_rng);
    x = layer_norm(tape, add(tape, x, attn_out), param(p + "ln1.gain"), param(p + "ln1.bias"));

    Tensor h = gelu(tape, add(tape, matmul(tape, x, param(p + "ffn.w1")), param(p + "ffn.b1")));
    Tensor ffn_out = add(tape, matmul(tape, h, param(p + "ffn.w2")), param(p + "ffn.b2"));
    ffn_out = maybe_dropout(tape, ffn_out, dropout_rng);
    x = layer_norm(tape, add(tape, x, ffn_out), param(p + "ln2.gain"), param(p + "ln2.bias"));
  }
  return x;
}

Tensor Encoder::cls_rows(Tape* tape, const Tensor& hidden, const Batch& batch) const {
  std::vector<std::size_t> cls(batch.batch);
  for (std::size_t b = 0; b < batch.batch; ++b) cls[b] = b * batch.seq;
  return gather_rows(tape, hidden, cls);
}

Tensor Encoder::pool(Tape* tape, const Tensor& cls) const {
  Tensor h = tanh_op(tape, add(tape, matmul(tape, cls, param("pool.w1")), param("pool.b1")));
  return add(tape, matmul(tape, h, param("pool.w2")), param("pool.b2"));
}

Tensor Encoder::encode(Tape* tape, const Batch& batch, Rng* dropout_rng) const {
  return pool(tape, cls_rows(tape, hidden_states(tape, batch, dropout_rng), batch));
}

Tensor Encoder::encode_cls(Tape* tape, const Batch& batch, Rng* dropout_rng) const {
  return cls_rows(tape, hidden_states(tape, batch, dropout_rng), batch);
}

void Encoder::load_state(const Checkpoint& ckpt) {
  for (auto& np : params_) {
    const Tensor* src = ckpt.find(np.name);
    if (!src) throw SchemaError("checkpoint is missing parameter '" + np.name + "'");
    if (src->shape() != np.tensor.shape()) {
      throw SchemaError("checkpoint parameter '" + np.name + "' has shape " +
                        shape_str(src->shape()) + ", expected " + shape_str(np.tensor.shape()));
    }
    std::copy(src->values().begin(), src->values().end(), np.tensor.values().begin());
  }
  bump_version();
}

}  // namespace tcm
