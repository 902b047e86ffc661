#pragma once

// The full question generator: embeddings, reasoning encoder and copy decoder.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "redr/config.hpp"
#include "redr/data/vocabulary.hpp"
#include "redr/model/beam.hpp"
#include "redr/model/decoder.hpp"
#include "redr/model/encoder.hpp"

namespace redr::model {

struct ModelInputs {
  std::vector<int> history_ids;
  CopySource source;
};

ModelInputs prepare_inputs(const data::Vocabulary& vocab, const data::Tokens& history,
                           const data::Tokens& rationale);

/// Output ids of `question` followed by EOS. Out-of-vocabulary tokens map to
/// their copy slot when they occur in the rationale and to UNK otherwise.
std::vector<int> target_ids(const data::Vocabulary& vocab, const CopySource& source, const data::Tokens& question);

struct Encoded {
  Var embedding;  // E x V
  Var history;    // C, d x m
  Var rationale;  // R, d x n
  ReasoningState reasoning;
  AttentionMemory memory;
};

struct StepOutput {
  DecoderState state;
  StepDistribution dist;
};

struct SequenceLoss {
  Var nll;  // summed over target tokens
  int tokens = 0;
  int correct = 0;  // argmax hits under teacher forcing
};

/// Summed -log p_t[target_t] over a sequence of per-step distributions.
Var nll_of_distributions(std::span<const Var> probs, std::span<const int> targets);

class ReDRModel {
 public:
  ReDRModel(const TrainConfig& config, int vocab_size, std::uint64_t seed);

  const TrainConfig& config() const { return config_; }
  /// Replaces training/decoding settings; architecture fields must match.
  void update_config(const TrainConfig& config);
  int vocab_size() const { return vocab_size_; }

  /// Every trainable tensor in a fixed order; names are unique.
  std::vector<Param*> parameters();
  std::vector<const Param*> parameters() const;

  Encoded encode(Tape& tape, const ModelInputs& inputs, const Dropout& dropout = {}) const;
  DecoderState start(const Encoded& encoded) const;
  StepOutput step(const Encoded& encoded, const CopySource& source, const DecoderState& state, int prev_output_id,
                  const Dropout& dropout = {}) const;

  /// Teacher-forced negative log-likelihood of `targets` (output ids, EOS last).
  SequenceLoss sequence_nll(Tape& tape, const ModelInputs& inputs, std::span<const int> targets,
                            const Dropout& dropout = {}) const;

  Param embedding;  // E x V, one column per token
  EncoderParams encoder;
  DecoderParams decoder;

 private:
  TrainConfig config_;
  int vocab_size_ = 0;
};

struct Generated {
  std::vector<int> ids;  // without the trailing EOS
  data::Tokens tokens;
  double log_prob = 0.0;
  double score = 0.0;
  bool finished = false;
  std::vector<double> lambda_trace;
  std::vector<std::vector<double>> alpha_trace;
};

/// Beam search over the copy-augmented distribution, best hypothesis first.
std::vector<Generated> generate_beam(const ReDRModel& model, const data::Vocabulary& vocab, const ModelInputs& inputs,
                                     int beam, int max_len);
Generated generate_greedy(const ReDRModel& model, const data::Vocabulary& vocab, const ModelInputs& inputs,
                          int max_len);

/// Binary container: magic, version, config text, vocabulary, then named
/// tensors (rows, cols, raw 64-bit values). Round-trips bit-exactly.
void save_checkpoint(const std::filesystem::path& path, const ReDRModel& model, const data::Vocabulary& vocab);

struct LoadedCheckpoint {
  data::Vocabulary vocab;
  ReDRModel model;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace redr::model
