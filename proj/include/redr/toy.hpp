#pragma once

// Small fixed-size instances for gradient checks, smoke runs and the
// acceptance suite.

#include <cstdint>
#include <string>
#include <vector>

#include "redr/autodiff/grad_check.hpp"
#include "redr/config.hpp"
#include "redr/data/corpus.hpp"
#include "redr/data/vocabulary.hpp"
#include "redr/model/model.hpp"

namespace redr::toy {

/// d = 8, embeddings 8, two LSTM layers, three reasoning layers, no dropout.
TrainConfig toy_config();

/// The reserved tokens followed by w0, w1, ... up to `size` entries.
data::Vocabulary toy_vocabulary(int size);

struct ToyInstance {
  model::ModelInputs inputs;
  std::vector<int> targets;
};

/// Random history (m ids), rationale (n tokens, the last one out of
/// vocabulary so a copy slot exists) and a target of `target_length` tokens
/// plus EOS that includes the copy-only token.
ToyInstance toy_instance(std::uint64_t seed, const data::Vocabulary& vocab, int m = 6, int n = 4,
                         int target_length = 3);

/// Finite-difference check of the full teacher-forced NLL (encoder, gated
/// reasoning, decoder, copy mixture) for one seeded model and instance.
ad::GradCheckReport<double> full_model_grad_check(std::uint64_t seed, double epsilon = 1e-5,
                                                  const TrainConfig& config = toy_config(), int vocab_size = 20);

/// Template questions over short synthetic rationales ("the n3 v1 the n7 .")
/// with a one-turn history; every question token is in the corpus
/// vocabulary and most can be copied from the rationale.
std::vector<data::ConversationExample> synthetic_corpus(std::uint64_t seed, int count);

/// Like synthetic_corpus, but every rationale contains `marker` and only a
/// `marker_fraction` share of target questions mention it. The gold answer
/// of every example is [marker].
std::vector<data::ConversationExample> marker_corpus(std::uint64_t seed, int count, double marker_fraction,
                                                     const std::string& marker = "marker");

/// Vocabulary over rationale, history, question and answer tokens.
data::Vocabulary corpus_vocabulary(const std::vector<data::ConversationExample>& examples);

}  // namespace redr::toy
