#include "redr/model/layers.hpp"

#include "redr/error.hpp"

namespace redr::model {

void init_uniform(Param& p, Real scale, std::mt19937_64& rng) {
  std::uniform_real_distribution<Real> dist(-scale, scale);
  for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = dist(rng);
  p.zero_grad();
}

LstmLayer::LstmLayer(const std::string& name, int input, int hidden)
    : weight(name + ".weight", 4 * hidden, input + hidden),
      bias(name + ".bias", 4 * hidden, 1),
      input_size(input),
      hidden_size(hidden) {}

void LstmLayer::collect(std::vector<Param*>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

BiLstm::BiLstm(const std::string& name, int input_size, int output_size, int layers) {
  if (output_size % 2 != 0) {
    throw ConfigError(name + ": bidirectional output size " + std::to_string(output_size) + " must be even");
  }
  if (layers < 1) throw ConfigError(name + ": needs at least one layer");
  const int half = output_size / 2;
  for (int l = 0; l < layers; ++l) {
    const int in = l == 0 ? input_size : output_size;
    forward.emplace_back(name + ".fwd" + std::to_string(l), in, half);
    backward.emplace_back(name + ".bwd" + std::to_string(l), in, half);
  }
}

void BiLstm::collect(std::vector<Param*>& out) {
  for (std::size_t l = 0; l < forward.size(); ++l) {
    forward[l].collect(out);
    backward[l].collect(out);
  }
}

Var Dropout::apply(const Var& x) const {
  if (!active()) return x;
  std::bernoulli_distribution keep(1.0 - rate_);
  Mat mask(x.rows(), x.cols());
  const Real scale = 1.0 / (1.0 - rate_);
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(*rng_) ? scale : 0.0;
  return ad::cwise_product(x, x.tape()->constant(std::move(mask), "dropout_mask"));
}

Var run_lstm(const Var& inputs, const LstmLayer& layer, bool reverse) {
  if (inputs.rows() != layer.input_size) {
    throw ShapeError("lstm: input has " + std::to_string(inputs.rows()) + " rows, layer expects " +
                     std::to_string(layer.input_size));
  }
  Tape& tape = *inputs.tape();
  const Eigen::Index len = inputs.cols();
  if (len < 1) throw ShapeError("lstm: empty input sequence");
  const int hsz = layer.hidden_size;
  Var w = tape.parameter(layer.weight);
  Var b = tape.parameter(layer.bias);
  Var h = tape.constant(Mat::Zero(hsz, 1), "lstm_h0");
  Var c = tape.constant(Mat::Zero(hsz, 1), "lstm_c0");
  std::vector<Var> outputs(static_cast<std::size_t>(len));
  for (Eigen::Index k = 0; k < len; ++k) {
    const Eigen::Index pos = reverse ? len - 1 - k : k;
    Var hc = ad::lstm_cell(w, b, ad::column(inputs, pos), h, c);
    h = ad::slice_rows(hc, 0, hsz);
    c = ad::slice_rows(hc, hsz, hsz);
    outputs[static_cast<std::size_t>(pos)] = h;
  }
  return ad::concat_cols<Real>(outputs);
}

Var run_bilstm(const Var& inputs, const BiLstm& lstm, const Dropout& dropout) {
  Var x = inputs;
  for (std::size_t l = 0; l < lstm.forward.size(); ++l) {
    const Var in = dropout.apply(x);
    const Var f = run_lstm(in, lstm.forward[l], false);
    const Var b = run_lstm(in, lstm.backward[l], true);
    x = ad::concat_rows<Real>({f, b});
  }
  return x;
}

}  // namespace redr::model
