#pragma once

#include <cstdint>
#include <set>
#include <vector>

#include "gapcoref/nn.hpp"
#include "gapcoref/tokenizer.hpp"

namespace gapcoref {

struct EncoderConfig {
  int num_layers = 4;
  int hidden_dim = 128;
  int num_heads = 4;
  int ffn_dim = 512;
  int max_positions = 512;
  int vocab_size = 0;
  std::set<int> frozen_layers;  // 1-based layer indices
  std::uint64_t seed = 0;
  // Which layer's states encoder_forward returns: 0 is the embedding layer,
  // -1 means the last layer.
  int output_layer = -1;

  // Throws BadConfig or BadRange.
  void validate() const;
  int resolved_output_layer() const { return output_layer < 0 ? num_layers : output_layer; }
};

// One post-norm transformer block.
struct EncoderLayer {
  Parameter query_w, query_b, key_w, key_b, value_w, value_b;
  Parameter attn_out_w, attn_out_b, attn_norm_g, attn_norm_b;
  Parameter ffn_in_w, ffn_in_b, ffn_out_w, ffn_out_b, ffn_norm_g, ffn_norm_b;

  ParameterList parameters();
};

struct EncoderParams {
  EncoderConfig config;
  Parameter token_embedding, position_embedding, segment_embedding;
  Parameter embed_norm_g, embed_norm_b;
  std::vector<EncoderLayer> layers;

  ParameterList embedding_parameters();
  ParameterList parameters();
  std::size_t parameter_count() const;
};

// Token states: one row of width hidden_dim per input position.
using TokenStates = Matrix;

// Deterministic from config.seed: Glorot-uniform matrices, small uniform
// embeddings, zero biases, unit normalization gains. Applies
// config.frozen_layers.
EncoderParams init_params(const EncoderConfig& config);

// Clears the trainable flag on layers [first, last] (1-based, inclusive).
// Freezing layer 1 also freezes the embedding block beneath it. Throws BadRange.
void freeze_layers(EncoderParams& params, int first, int last);
void unfreeze_all(EncoderParams& params);

struct LayerTape {
  Matrix input;
  Matrix query, key, value;
  std::vector<Matrix> attention;  // per head, rows x cols = n x n
  Matrix context;
  NormCache attn_norm;
  Matrix attn_normed;
  Matrix ffn_pre;
  Matrix ffn_act;
  NormCache ffn_norm;
};

// Intermediates recorded by a forward pass for encoder_backward.
struct EncoderTape {
  std::vector<std::int32_t> ids;
  std::vector<std::int32_t> segment_ids;
  std::vector<std::int32_t> mask;
  NormCache embed_norm;
  std::vector<LayerTape> layers;
};

// Masked positions neither attend nor are attended to. Throws SequenceTooLong.
TokenStates encoder_forward(const EncoderParams& params, const EncodedInput& input, EncoderTape* tape = nullptr);

// Accumulates parameter gradients given d loss / d states. Stops descending
// once every remaining layer (and the embeddings) is frozen.
void encoder_backward(EncoderParams& params, const EncoderTape& tape, const Matrix& d_states);

}  // namespace gapcoref
