#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "triage/model.hpp"
#include "triage/random.hpp"
#include "triage/sequence.hpp"

namespace triage {

template <typename S>
using ColVector = Eigen::Matrix<S, Eigen::Dynamic, 1>;

// Activations kept from a forward pass over one row for the backward pass.
template <typename S>
struct LayerCache {
  Matrix<S> input;
  Matrix<S> query, key, value;
  Matrix<S> query_z, key_z, value_z;  // x A^T for adapted projections
  std::vector<Matrix<S>> probs;       // one n x n matrix per head
  Matrix<S> context;
  Matrix<S> attn_dropout;
  Matrix<S> ln1_xhat;
  ColVector<S> ln1_inv;
  Matrix<S> ln1_out;
  Matrix<S> ff_pre, ff_act;
  Matrix<S> ff_dropout;
  Matrix<S> ln2_xhat;
  ColVector<S> ln2_inv;
};

template <typename S>
struct RowCache {
  std::vector<TokenId> ids;
  std::vector<std::uint8_t> mask;  // empty: every position is real
  Matrix<S> emb_xhat;
  ColVector<S> emb_inv;
  Matrix<S> emb_dropout;
  std::vector<LayerCache<S>> layers;
};

// Runs the encoder over one row of token ids with positions 0..n-1. Keys at
// masked positions are excluded from attention; the result has one state per
// position (padded positions included). Dropout is applied only when
// `dropout_rng` is given.
template <typename S>
Matrix<S> encode_row(const EncoderModel<S>& model, std::span<const TokenId> ids,
                     std::span<const std::uint8_t> mask, RowCache<S>* cache, Rng* dropout_rng);

// Accumulates gradients of the row into `grads` given d(loss)/d(states).
// Frozen parameter groups receive nothing.
template <typename S>
void backward_row(const EncoderModel<S>& model, const RowCache<S>& cache, const Matrix<S>& d_states,
                  Weights<S>& grads);

// A padded batch: rows x width ids with a mask marking real tokens.
struct EncodeBatch {
  std::size_t rows = 0;
  std::size_t width = 0;
  std::vector<TokenId> ids;
  std::vector<std::uint8_t> mask;

  static EncodeBatch from_sequences(std::span<const TokenSequence> sequences,
                                    std::size_t width = 0);
  static EncodeBatch from_segments(const SegmentBatch& segments);
};

template <typename S>
struct EncoderOutput {
  Matrix<S> states;     // n x d, unmasked positions only, in order
  RowVector<S> pooled;  // 1 x d
};

// Validates ids and lengths (ArgumentError naming the row) and encodes every
// row in inference mode.
template <typename S>
std::vector<EncoderOutput<S>> encode(const EncoderModel<S>& model, const EncodeBatch& batch);

template <typename S>
RowVector<S> pool(const Matrix<S>& states, Pooling pooling);

template <typename S>
RowVector<S> classify_pooled(const EncoderModel<S>& model, const RowVector<S>& pooled);

template <typename S>
struct LabelAttentionOutput {
  RowVector<S> logits;  // 1 x T
  Matrix<S> attention;  // T x n, rows sum to one
  Matrix<S> values;     // T x d, v_l = attention_l * H
};

template <typename S>
LabelAttentionOutput<S> classify_label_attention(const EncoderModel<S>& model,
                                                 const Matrix<S>& states);

template <typename S>
RowVector<S> softmax(const RowVector<S>& logits);

// Training-time view of one example: unpadded rows whose states are
// concatenated before the head (one row for document/concatenated inputs,
// several for segment batches).
template <typename S>
struct ExampleCache {
  std::vector<RowCache<S>> rows;
  std::vector<Eigen::Index> row_lengths;
  Matrix<S> states;
  RowVector<S> pooled;
  RowVector<S> pool_hidden;
  Matrix<S> attention;
  Matrix<S> values;
};

template <typename S>
RowVector<S> forward_example(const EncoderModel<S>& model, std::span<const TokenSequence> rows,
                             ExampleCache<S>* cache, Rng* dropout_rng);

template <typename S>
void backward_example(const EncoderModel<S>& model, const ExampleCache<S>& cache,
                      const RowVector<S>& d_logits, Weights<S>& grads);

}  // namespace triage
