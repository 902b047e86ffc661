#include <doctest.h>

#include "redr/config.hpp"

#ifndef REDR_SOURCE_DIR
#error "REDR_SOURCE_DIR must point at the source tree"
#endif

using namespace redr;

TEST_CASE("shipped config equals the published settings") {
  const TrainConfig shipped = load_config(std::string(REDR_SOURCE_DIR) + "/configs/redr.cfg");
  CHECK(shipped == TrainConfig{});
  CHECK(shipped.hidden_size == 500);
  CHECK(shipped.embedding_dim == 300);
  CHECK(shipped.lstm_layers == 2);
  CHECK(shipped.learning_rate == 1.0);
  CHECK(shipped.lr_decay == 0.95);
  CHECK(shipped.lr_decay_every == 5000);
  CHECK(shipped.lr_decay_start == 15000);
  CHECK(shipped.batch_size == 64);
  CHECK(shipped.dropout == 0.3);
  CHECK(shipped.beam_size == 5);
  CHECK(shipped.reasoning_layers == 3);
}
