#pragma once

// Attention LSTM decoder with a pointer-copy mixture over rationale tokens.

#include <string>
#include <vector>

#include "redr/config.hpp"
#include "redr/data/vocabulary.hpp"
#include "redr/model/layers.hpp"

namespace redr::model {

/// Maps rationale positions into the extended output space: ids below
/// vocab_size are vocabulary entries, id vocab_size + k is the k-th
/// out-of-vocabulary rationale token, so it can still be copied verbatim.
struct CopySource {
  std::vector<int> input_ids;     // embedding ids (OOV -> UNK)
  std::vector<int> extended_ids;  // copy target per position
  std::vector<std::string> oov_tokens;
  int vocab_size = 0;

  int extended_size() const { return vocab_size + static_cast<int>(oov_tokens.size()); }
  std::size_t length() const { return extended_ids.size(); }
  /// Output id for a surface token: vocabulary id, else its copy slot, else UNK.
  int output_id(const data::Vocabulary& vocab, const std::string& token) const;
  std::string surface(const data::Vocabulary& vocab, int output_id) const;
  /// Embedding id for a previously emitted output id.
  int embedding_id(int output_id) const { return output_id >= vocab_size ? data::Vocabulary::kUnk : output_id; }
};

CopySource make_copy_source(const data::Vocabulary& vocab, const data::Tokens& rationale);

struct DecoderParams {
  std::vector<LstmLayer> lstm;
  Param bridge_w;      // (layers * D) x d
  Param bridge_b;      // (layers * D) x 1
  Param att_query;     // A x D
  Param att_key;       // A x d
  Param att_bias;      // A x 1
  Param att_score;     // 1 x A
  Param out_hidden_w;  // D x (D + d)
  Param out_hidden_b;  // D x 1
  Param out_w;         // V x D
  Param out_b;         // V x 1
  Param copy_v;        // 1 x d
  Param copy_o;        // 1 x D
  Param copy_y;        // 1 x E
  Param copy_b;        // 1 x 1

  DecoderParams() = default;
  DecoderParams(const TrainConfig& config, int vocab_size);
  int hidden_size() const { return lstm.front().hidden_size; }
  void collect(std::vector<Param*>& out);
};

/// Encoder output prepared for attention: U (d x n) and its projected keys.
struct AttentionMemory {
  Var encodings;
  Var keys;  // att_key U + att_bias, A x n
};

AttentionMemory make_memory(const Var& encodings, const DecoderParams& params);

struct DecoderState {
  std::vector<Var> h;  // per layer, D x 1
  std::vector<Var> c;
  Var read;            // attentive read from the previous step, d x 1
  int step = 0;

  bool initialized() const { return !h.empty() && read.valid(); }
  const Var& output() const { return h.back(); }
};

/// Hidden states from a learned map of the final integration states
/// ([forward at n; backward at 1]); zero cells; read = mean of U's columns.
DecoderState initial_state(const AttentionMemory& memory, const DecoderParams& params);

struct Attention {
  Var weights;  // n x 1
  Var read;     // d x 1
};

/// weights = softmax_i(att_score tanh(att_query o + key_i)); read = U weights.
Attention attend(const Var& output, const AttentionMemory& memory, const DecoderParams& params);

struct DecodeStep {
  DecoderState state;
  Var generation;  // P_gen over the vocabulary, V x 1
  Var weights;     // attention over rationale positions
  Var prev_embedding;
};

/// Feeds [Emb(y_prev); read_{t-1}] through the LSTM stack, attends with the
/// new output and scores the vocabulary with an MLP over [o_t; read_t].
DecodeStep decode_step(const DecoderState& state, int prev_embedding_id, const AttentionMemory& memory,
                       const Var& embedding, const DecoderParams& params, const Dropout& dropout = {});

struct StepDistribution {
  Var probs;   // extended_size x 1
  Var lambda;  // 1 x 1
  Var alpha;   // n x 1
};

/// P(y) = lambda P_gen(y) + (1 - lambda) sum_{i: r_i = y} alpha_i with
/// lambda = sigmoid(copy_v read + copy_o o + copy_y Emb(y_prev) + copy_b).
StepDistribution copy_mix(const Var& generation, const Var& alpha, const CopySource& source, const Var& output,
                          const Var& read, const Var& prev_embedding, const DecoderParams& params);

}  // namespace redr::model
