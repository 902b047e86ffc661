#include "redr/model/encoder.hpp"

#include "redr/error.hpp"

namespace redr::model {

DecisionGate::DecisionGate(const std::string& name, int d)
    : w_u(name + ".w_u", 1, d), w_g(name + ".w_g", 1, 2 * d), w_r(name + ".w_r", 1, d), b(name + ".b", 1, 1) {}

void DecisionGate::collect(std::vector<Param*>& out) {
  out.push_back(&w_u);
  out.push_back(&w_g);
  out.push_back(&w_r);
  out.push_back(&b);
}

EncoderParams::EncoderParams(const TrainConfig& config)
    : history("encoder.history", config.embedding_dim, config.hidden_size, config.lstm_layers),
      rationale("encoder.rationale", config.embedding_dim, config.hidden_size, config.lstm_layers),
      integration("reasoning0.integration", 3 * config.hidden_size, config.hidden_size, 1) {
  if (config.reasoning_layers < 1) throw ConfigError("reasoning_layers must be >= 1");
  for (int j = 1; j < config.reasoning_layers; ++j) {
    const std::string name = "reasoning" + std::to_string(j);
    layers.push_back({BiLstm(name + ".integration", 3 * config.hidden_size, config.hidden_size, 1),
                      DecisionGate(name + ".gate", config.hidden_size)});
  }
}

void EncoderParams::collect(std::vector<Param*>& out) {
  history.collect(out);
  rationale.collect(out);
  integration.collect(out);
  for (auto& layer : layers) {
    layer.integration.collect(out);
    layer.gate.collect(out);
  }
}

Var encode_bilstm(std::span<const int> ids, const Var& embedding, const BiLstm& lstm, const Dropout& dropout) {
  if (ids.empty()) throw ShapeError("encode_bilstm: empty token sequence");
  return run_bilstm(ad::lookup_columns(embedding, ids), lstm, dropout);
}

CoattentionOutput coattend(const Var& rationale, const Var& history) {
  if (rationale.rows() != history.rows()) {
    throw ShapeError("coattend: rationale " + ad::shape_string(rationale.rows(), rationale.cols()) + " and history " +
                     ad::shape_string(history.rows(), history.cols()) + " differ in hidden size");
  }
  CoattentionOutput out;
  out.alignment = ad::transpose(rationale) * history;
  out.history_weights = ad::softmax_columns(out.alignment);
  out.rationale_weights = ad::softmax_columns(ad::transpose(out.alignment));
  out.history_summary = rationale * out.history_weights;
  out.codependent = ad::concat_rows<Real>({history, out.history_summary}) * out.rationale_weights;
  return out;
}

Var integrate(const Var& codependent, const Var& rationale, const BiLstm& lstm) {
  if (codependent.cols() != rationale.cols() || codependent.rows() != 2 * rationale.rows()) {
    throw ShapeError("integrate: G " + ad::shape_string(codependent.rows(), codependent.cols()) + " vs R " +
                     ad::shape_string(rationale.rows(), rationale.cols()));
  }
  return run_bilstm(ad::concat_rows<Real>({codependent, rationale}), lstm);
}

ReasonLayerOutput reason_layer(const Var& previous, const Var& history, const BiLstm& integration) {
  ReasonLayerOutput out;
  out.coattention = coattend(previous, history);
  out.codependent = out.coattention.codependent;
  out.candidate = integrate(out.codependent, previous, integration);
  return out;
}

GateOutput gate_combine(const Var& previous, const Var& candidate, const Var& codependent, const Var& rationale,
                        const DecisionGate& params) {
  const Eigen::Index d = previous.rows();
  if (candidate.rows() != d || rationale.rows() != d || codependent.rows() != 2 * d ||
      candidate.cols() != previous.cols() || rationale.cols() != previous.cols() ||
      codependent.cols() != previous.cols()) {
    throw ShapeError("gate_combine: U " + ad::shape_string(previous.rows(), previous.cols()) + ", U~ " +
                     ad::shape_string(candidate.rows(), candidate.cols()) + ", G " +
                     ad::shape_string(codependent.rows(), codependent.cols()) + ", R " +
                     ad::shape_string(rationale.rows(), rationale.cols()));
  }
  Tape& tape = *previous.tape();
  const Var score = ad::add_n<Real>(std::vector<Var>{tape.parameter(params.w_u) * previous,
                                                     tape.parameter(params.w_g) * codependent,
                                                     tape.parameter(params.w_r) * rationale});
  GateOutput out;
  out.gate = ad::sigmoid(ad::add_broadcast(score, tape.parameter(params.b)));
  out.next = ad::scale_columns(previous, out.gate) + ad::scale_columns(candidate, ad::one_minus(out.gate));
  return out;
}

ReasoningState dynamic_reason(const Var& rationale, const Var& history, int depth, const EncoderParams& params,
                              bool use_gate) {
  if (depth < 1) throw ConfigError("dynamic_reason: depth must be >= 1");
  if (static_cast<std::size_t>(depth - 1) > params.layers.size()) {
    throw ConfigError("dynamic_reason: depth " + std::to_string(depth) + " exceeds the " +
                      std::to_string(params.layers.size() + 1) + " parameterized layers");
  }
  ReasoningState state;
  state.coattention.push_back(coattend(rationale, history));
  state.layers.push_back(integrate(state.coattention.back().codependent, rationale, params.integration));
  for (int j = 1; j < depth; ++j) {
    const ReasoningLayerParams& layer = params.layers[static_cast<std::size_t>(j - 1)];
    const Var& previous = state.layers.back();
    ReasonLayerOutput step = reason_layer(previous, history, layer.integration);
    state.coattention.push_back(step.coattention);
    state.candidates.push_back(step.candidate);
    if (use_gate) {
      GateOutput g = gate_combine(previous, step.candidate, step.codependent, rationale, layer.gate);
      state.gates.push_back(g.gate);
      state.layers.push_back(g.next);
    } else {
      state.layers.push_back(step.candidate);
    }
  }
  return state;
}

}  // namespace redr::model
