#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "redr/autodiff.hpp"

namespace redr::model {

using Real = double;
using Param = ad::Parameter<Real>;
using Tape = ad::Tape<Real>;
using Var = ad::Var<Real>;
using Mat = ad::Matrix<Real>;

/// Fills every entry of `p` from uniform(-scale, scale).
void init_uniform(Param& p, Real scale, std::mt19937_64& rng);

struct LstmLayer {
  Param weight;  // 4H x (I + H), gate blocks i, f, g, o
  Param bias;    // 4H x 1
  int input_size = 0;
  int hidden_size = 0;

  LstmLayer() = default;
  LstmLayer(const std::string& name, int input, int hidden);
  void collect(std::vector<Param*>& out);
};

/// Stacked bidirectional LSTM. Each direction has output_size / 2 units so
/// a column of the output is [forward; backward] of size output_size.
struct BiLstm {
  std::vector<LstmLayer> forward;
  std::vector<LstmLayer> backward;

  BiLstm() = default;
  BiLstm(const std::string& name, int input_size, int output_size, int layers);
  int output_size() const { return forward.empty() ? 0 : 2 * forward.front().hidden_size; }
  void collect(std::vector<Param*>& out);
};

/// Inverted dropout on LSTM inputs. A default-constructed Dropout is a no-op.
class Dropout {
 public:
  Dropout() = default;
  Dropout(Real rate, std::mt19937_64& rng) : rate_(rate), rng_(&rng) {}

  bool active() const { return rng_ != nullptr && rate_ > 0; }
  Var apply(const Var& x) const;

 private:
  Real rate_ = 0;
  std::mt19937_64* rng_ = nullptr;
};

/// Runs one LSTM direction over the columns of `inputs` (I x len) from zero
/// state and returns the hidden states as H x len in position order.
Var run_lstm(const Var& inputs, const LstmLayer& layer, bool reverse);

/// Dropout is applied to the input of every stacked layer.
Var run_bilstm(const Var& inputs, const BiLstm& lstm, const Dropout& dropout = {});

}  // namespace redr::model
