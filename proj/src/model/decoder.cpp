#include "redr/model/decoder.hpp"

#include <algorithm>

#include "redr/error.hpp"

namespace redr::model {

int CopySource::output_id(const data::Vocabulary& vocab, const std::string& token) const {
  if (vocab.contains(token)) return vocab.id(token);
  const auto it = std::find(oov_tokens.begin(), oov_tokens.end(), token);
  if (it != oov_tokens.end()) return vocab_size + static_cast<int>(it - oov_tokens.begin());
  return data::Vocabulary::kUnk;
}

std::string CopySource::surface(const data::Vocabulary& vocab, int output_id) const {
  if (output_id < vocab_size) return vocab.token(output_id);
  const auto k = static_cast<std::size_t>(output_id - vocab_size);
  if (k >= oov_tokens.size()) throw Error("copy source: output id " + std::to_string(output_id) + " out of range");
  return oov_tokens[k];
}

CopySource make_copy_source(const data::Vocabulary& vocab, const data::Tokens& rationale) {
  CopySource src;
  src.vocab_size = vocab.size();
  for (const auto& tok : rationale) {
    if (vocab.contains(tok)) {
      src.input_ids.push_back(vocab.id(tok));
      src.extended_ids.push_back(vocab.id(tok));
      continue;
    }
    src.input_ids.push_back(data::Vocabulary::kUnk);
    auto it = std::find(src.oov_tokens.begin(), src.oov_tokens.end(), tok);
    if (it == src.oov_tokens.end()) {
      src.oov_tokens.push_back(tok);
      src.extended_ids.push_back(src.vocab_size + static_cast<int>(src.oov_tokens.size()) - 1);
    } else {
      src.extended_ids.push_back(src.vocab_size + static_cast<int>(it - src.oov_tokens.begin()));
    }
  }
  return src;
}

DecoderParams::DecoderParams(const TrainConfig& config, int vocab_size) {
  const int d = config.hidden_size;
  const int dec = config.hidden_size;
  const int att = config.hidden_size;
  const int emb = config.embedding_dim;
  const int layers = config.lstm_layers;
  for (int l = 0; l < layers; ++l) {
    lstm.emplace_back("decoder.lstm" + std::to_string(l), l == 0 ? emb + d : dec, dec);
  }
  bridge_w = Param("decoder.bridge_w", layers * dec, d);
  bridge_b = Param("decoder.bridge_b", layers * dec, 1);
  att_query = Param("decoder.att_query", att, dec);
  att_key = Param("decoder.att_key", att, d);
  att_bias = Param("decoder.att_bias", att, 1);
  att_score = Param("decoder.att_score", 1, att);
  out_hidden_w = Param("decoder.out_hidden_w", dec, dec + d);
  out_hidden_b = Param("decoder.out_hidden_b", dec, 1);
  out_w = Param("decoder.out_w", vocab_size, dec);
  out_b = Param("decoder.out_b", vocab_size, 1);
  copy_v = Param("decoder.copy_v", 1, d);
  copy_o = Param("decoder.copy_o", 1, dec);
  copy_y = Param("decoder.copy_y", 1, emb);
  copy_b = Param("decoder.copy_b", 1, 1);
}

void DecoderParams::collect(std::vector<Param*>& out) {
  for (auto& l : lstm) l.collect(out);
  for (Param* p : {&bridge_w, &bridge_b, &att_query, &att_key, &att_bias, &att_score, &out_hidden_w, &out_hidden_b,
                   &out_w, &out_b, &copy_v, &copy_o, &copy_y, &copy_b}) {
    out.push_back(p);
  }
}

AttentionMemory make_memory(const Var& encodings, const DecoderParams& params) {
  if (encodings.cols() < 1) throw ShapeError("attention memory: no rationale positions");
  Tape& tape = *encodings.tape();
  return {encodings, ad::add_broadcast(tape.parameter(params.att_key) * encodings, tape.parameter(params.att_bias))};
}

DecoderState initial_state(const AttentionMemory& memory, const DecoderParams& params) {
  const Var& u = memory.encodings;
  Tape& tape = *u.tape();
  const Eigen::Index d = u.rows();
  const Eigen::Index half = d / 2;
  const Var finals = ad::concat_rows<Real>(
      {ad::slice_rows(ad::column(u, u.cols() - 1), 0, half), ad::slice_rows(ad::column(u, 0), half, d - half)});
  const Var hidden =
      ad::tanh(ad::add_broadcast(tape.parameter(params.bridge_w) * finals, tape.parameter(params.bridge_b)));
  DecoderState state;
  const int dec = params.hidden_size();
  for (std::size_t l = 0; l < params.lstm.size(); ++l) {
    state.h.push_back(ad::slice_rows(hidden, static_cast<Eigen::Index>(l) * dec, dec));
    state.c.push_back(tape.constant(Mat::Zero(dec, 1), "decoder_c0"));
  }
  state.read = ad::mean_columns(u);
  return state;
}

Attention attend(const Var& output, const AttentionMemory& memory, const DecoderParams& params) {
  if (memory.encodings.cols() < 1) throw ShapeError("attend: no rationale positions");
  Tape& tape = *output.tape();
  const Var query = tape.parameter(params.att_query) * output;
  const Var scores = tape.parameter(params.att_score) * ad::tanh(ad::add_broadcast(memory.keys, query));
  Attention att;
  att.weights = ad::softmax_columns(ad::transpose(scores));
  att.read = memory.encodings * att.weights;
  return att;
}

DecodeStep decode_step(const DecoderState& state, int prev_embedding_id, const AttentionMemory& memory,
                       const Var& embedding, const DecoderParams& params, const Dropout& dropout) {
  if (!state.initialized() || state.h.size() != params.lstm.size()) {
    throw Error("decode_step: decoder state is not initialized");
  }
  Tape& tape = *embedding.tape();
  const int ids[] = {prev_embedding_id};
  DecodeStep out;
  out.prev_embedding = ad::lookup_columns(embedding, std::span<const int>(ids));
  Var x = ad::concat_rows<Real>({out.prev_embedding, state.read});
  out.state.step = state.step + 1;
  for (std::size_t l = 0; l < params.lstm.size(); ++l) {
    const LstmLayer& layer = params.lstm[l];
    const Var hc = ad::lstm_cell(tape.parameter(layer.weight), tape.parameter(layer.bias), dropout.apply(x),
                                 state.h[l], state.c[l]);
    out.state.h.push_back(ad::slice_rows(hc, 0, layer.hidden_size));
    out.state.c.push_back(ad::slice_rows(hc, layer.hidden_size, layer.hidden_size));
    x = out.state.h.back();
  }
  const Attention att = attend(out.state.output(), memory, params);
  out.state.read = att.read;
  out.weights = att.weights;
  const Var hidden =
      ad::tanh(ad::add_broadcast(tape.parameter(params.out_hidden_w) * ad::concat_rows<Real>({out.state.output(), att.read}),
                                 tape.parameter(params.out_hidden_b)));
  out.generation = ad::softmax_columns(
      ad::add_broadcast(tape.parameter(params.out_w) * hidden, tape.parameter(params.out_b)));
  return out;
}

StepDistribution copy_mix(const Var& generation, const Var& alpha, const CopySource& source, const Var& output,
                          const Var& read, const Var& prev_embedding, const DecoderParams& params) {
  if (alpha.rows() != static_cast<Eigen::Index>(source.length()) || alpha.cols() != 1) {
    throw ShapeError("copy_mix: attention " + ad::shape_string(alpha.rows(), alpha.cols()) + " vs rationale length " +
                     std::to_string(source.length()));
  }
  if (generation.rows() != source.vocab_size) {
    throw ShapeError("copy_mix: generation distribution has " + std::to_string(generation.rows()) +
                     " entries, vocabulary has " + std::to_string(source.vocab_size));
  }
  Tape& tape = *generation.tape();
  const Var gate_input = ad::add_n<Real>(std::vector<Var>{
      tape.parameter(params.copy_v) * read, tape.parameter(params.copy_o) * output,
      tape.parameter(params.copy_y) * prev_embedding, tape.parameter(params.copy_b)});
  StepDistribution dist;
  dist.lambda = ad::sigmoid(gate_input);
  dist.alpha = alpha;
  const Var generate = ad::pad_rows(generation, source.extended_size() - source.vocab_size);
  const Var copy = ad::scatter_add(alpha, source.extended_ids, source.extended_size());
  dist.probs = ad::scale_columns(generate, dist.lambda) + ad::scale_columns(copy, ad::one_minus(dist.lambda));
  return dist;
}

}  // namespace redr::model
