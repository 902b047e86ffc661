#pragma once

// Rationale/history encoding and the iterative gated reasoning loop.
//
// Shapes follow the column convention throughout: an encoding of a length-L
// sequence is d x L, one column per token.

#include <span>
#include <string>
#include <vector>

#include "redr/config.hpp"
#include "redr/model/layers.hpp"

namespace redr::model {

/// Per-position soft switch between two reasoning depths.
struct DecisionGate {
  Param w_u;  // 1 x d
  Param w_g;  // 1 x 2d
  Param w_r;  // 1 x d
  Param b;    // 1 x 1

  DecisionGate() = default;
  DecisionGate(const std::string& name, int d);
  void collect(std::vector<Param*>& out);
};

struct ReasoningLayerParams {
  BiLstm integration;
  DecisionGate gate;
};

struct EncoderParams {
  BiLstm history;
  BiLstm rationale;
  BiLstm integration;                        // builds U^0
  std::vector<ReasoningLayerParams> layers;  // one per transition U^j -> U^{j+1}

  EncoderParams() = default;
  explicit EncoderParams(const TrainConfig& config);
  int hidden_size() const { return history.output_size(); }
  void collect(std::vector<Param*>& out);
};

/// Embeds `ids` with the columns of `embedding` and runs the BiLSTM.
/// Returns d x ids.size().
Var encode_bilstm(std::span<const int> ids, const Var& embedding, const BiLstm& lstm, const Dropout& dropout = {});

struct CoattentionOutput {
  Var alignment;          // S = R^T C, n x m
  Var history_weights;    // softmax_columns(S), n x m
  Var rationale_weights;  // softmax_columns(S^T), m x n
  Var history_summary;    // H = R softmax(S), d x m
  Var codependent;        // G = [C; H] softmax(S^T), 2d x n
};

CoattentionOutput coattend(const Var& rationale, const Var& history);

/// BiLSTM over the columns of [G; R] (3d x n), giving d x n.
Var integrate(const Var& codependent, const Var& rationale, const BiLstm& lstm);

struct ReasonLayerOutput {
  Var candidate;  // U~, d x n
  Var codependent;
  CoattentionOutput coattention;
};

/// One reasoning pass with `previous` in the role of the rationale.
ReasonLayerOutput reason_layer(const Var& previous, const Var& history, const BiLstm& integration);

struct GateOutput {
  Var next;  // d x n
  Var gate;  // 1 x n, entries in (0, 1)
};

/// gate = sigmoid(w_u U_prev + w_g G + w_r R + b);
/// next[:, i] = gate[i] U_prev[:, i] + (1 - gate[i]) U~[:, i].
GateOutput gate_combine(const Var& previous, const Var& candidate, const Var& codependent, const Var& rationale,
                        const DecisionGate& params);

struct ReasoningState {
  std::vector<Var> layers;      // U^0 .. U^{N-1} in reasoning order; back() feeds the decoder
  std::vector<Var> candidates;  // U~ for every transition
  std::vector<Var> gates;       // decision gate per transition (empty without the decision maker)
  std::vector<CoattentionOutput> coattention;

  const Var& output() const { return layers.back(); }
};

/// U^0 from coattention + integration, then `depth - 1` gated reasoning
/// transitions. With `use_gate` false each transition takes U~ directly.
ReasoningState dynamic_reason(const Var& rationale, const Var& history, int depth, const EncoderParams& params,
                              bool use_gate = true);

}  // namespace redr::model
