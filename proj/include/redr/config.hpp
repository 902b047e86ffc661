#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace redr {

/// Every tunable of the model, MLE training and RL fine-tuning. The defaults
/// are the published settings; `configs/redr.cfg` ships the same values as a
/// key-value file whose keys are these field names.
struct TrainConfig {
  // model
  int hidden_size = 500;
  int embedding_dim = 300;
  int lstm_layers = 2;
  int reasoning_layers = 3;
  bool decision_maker = true;
  double dropout = 0.3;
  double init_scale = 0.1;
  bool finetune_embeddings = true;

  // MLE
  double learning_rate = 1.0;
  double lr_decay = 0.95;
  std::int64_t lr_decay_every = 5000;
  std::int64_t lr_decay_start = 15000;
  int batch_size = 64;
  int max_epochs = 15;
  double grad_clip = 5.0;
  std::uint64_t seed = 1;

  // decoding
  int beam_size = 5;
  int max_question_length = 30;

  // data
  int min_freq = 1;
  int history_max_tokens = 200;
  int history_max_turns = 3;

  // RL fine-tuning
  double rl_learning_rate = 0.01;
  bool rl_baseline = true;
  int rl_max_updates = 2000;
  int rl_eval_every = 100;
  int rl_patience = 3;

  /// Throws ConfigError naming the offending field.
  void validate() const;

  bool operator==(const TrainConfig&) const = default;
};

/// Parses "key = value" lines; '#' starts a comment. Keys not named are left
/// at their defaults; unknown keys are an error.
TrainConfig parse_config(std::string_view text);
TrainConfig load_config(const std::filesystem::path& path);

/// Writes every field, one per line, in declaration order.
std::string format_config(const TrainConfig& config);

}  // namespace redr
