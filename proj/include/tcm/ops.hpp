#pragma once

#include <cstddef>
#include <vector>

#include "tcm/rng.hpp"
#include "tcm/tensor.hpp"

namespace tcm {

// Differentiable tensor operations. Every op takes the recording tape as its
// first argument; pass nullptr for a plain (inference-mode) forward pass.
// An op records a backward closure only when the tape is present and at
// least one input requires gradients.

// [m×k]·[k×n] -> [m×n]
Tensor matmul(Tape* tape, const Tensor& a, const Tensor& b);

// Batched [B×m×k]·[B×k×n] -> [B×m×n]. A transpose flag means the operand is
// stored with its last two dims swapped (e.g. trans_b: b is [B×n×k]).
Tensor bmm(Tape* tape, const Tensor& a, const Tensor& b, bool trans_a = false,
           bool trans_b = false);

// Elementwise with limited broadcasting on the right operand: same shape,
// rank-1 [d] broadcast over the last dimension, or a single-element scalar.
Tensor add(Tape* tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape* tape, const Tensor& a, const Tensor& b);

// Multiply by a compile-time constant (no gradient for the constant).
Tensor scale(Tape* tape, const Tensor& a, Real c);

Tensor gelu(Tape* tape, const Tensor& a);
Tensor tanh_op(Tape* tape, const Tensor& a);

// Full reductions to a scalar.
Tensor sum(Tape* tape, const Tensor& a);
Tensor mean(Tape* tape, const Tensor& a);

// Inner product of two same-shape tensors -> scalar.
Tensor dot(Tape* tape, const Tensor& a, const Tensor& b);

// Elementwise max; on ties the gradient follows the first operand.
Tensor maximum(Tape* tape, const Tensor& a, const Tensor& b);

// max(floor, x) elementwise; gradient flows only where x > floor.
Tensor clamp_min(Tape* tape, const Tensor& a, Real floor);

// Concatenate 2-D tensors along axis 0 or 1.
Tensor concat(Tape* tape, const std::vector<Tensor>& parts, std::size_t axis);

// 2-D transpose.
Tensor transpose(Tape* tape, const Tensor& a);

// Row gather from a [R×C] table; the embedding lookup and row-slice
// primitive. Backward scatter-adds into the table.
Tensor gather_rows(Tape* tape, const Tensor& table, const std::vector<std::size_t>& rows);

// Layer normalization over the last dim of a 2-D input, with learned gain
// and bias.
Tensor layer_norm(Tape* tape, const Tensor& x, const Tensor& gain, const Tensor& bias,
                  Real eps = Real(1e-5));

// Mean over rows of -log softmax(logits)[target]. targets[i] in [0, cols).
Tensor softmax_cross_entropy(Tape* tape, const Tensor& logits, const std::vector<int>& targets);

// Softmax over the last dim of [B*heads × s × s] attention scores, with key
// positions excluded wherever mask ([B × s], 1=valid) is zero.
Tensor attention_softmax(Tape* tape, const Tensor& scores, const Tensor& mask,
                         std::size_t heads);

// Per-row maximum of a 2-D tensor -> [rows]; ties resolve to the smallest
// column index and the gradient follows that entry.
Tensor row_max(Tape* tape, const Tensor& x);

// [B*S × E] -> [B*heads × S × E/heads] and back.
Tensor split_heads(Tape* tape, const Tensor& x, std::size_t batch, std::size_t seq,
                   std::size_t heads);
Tensor merge_heads(Tape* tape, const Tensor& x, std::size_t batch, std::size_t seq,
                   std::size_t heads);

// Inverted dropout; draws one uniform per element from `rng`. rate must be
// in [0,1); rate 0 returns the input unchanged.
Tensor dropout(Tape* tape, const Tensor& x, Real rate, Rng& rng);

}  // namespace tcm
