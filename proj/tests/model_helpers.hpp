#pragma once

#include <random>
#include <vector>

#include "redr/model/model.hpp"

namespace testing_helpers {

using namespace redr;
using namespace redr::model;

inline Mat random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

template <typename Params>
void randomize(Params& params, std::mt19937_64& rng, double scale = 0.5) {
  std::vector<Param*> ps;
  params.collect(ps);
  for (Param* p : ps) init_uniform(*p, scale, rng);
}

template <typename Params>
void zero(Params& params) {
  std::vector<Param*> ps;
  params.collect(ps);
  for (Param* p : ps) p->value.setZero();
}

inline TrainConfig small_config(int d = 8, int layers = 1, int depth = 3) {
  TrainConfig c;
  c.hidden_size = d;
  c.embedding_dim = d;
  c.lstm_layers = layers;
  c.reasoning_layers = depth;
  c.dropout = 0.0;
  return c;
}

}  // namespace testing_helpers
