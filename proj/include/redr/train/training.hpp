#pragma once

// Maximum-likelihood training and REINFORCE fine-tuning.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "redr/data/corpus.hpp"
#include "redr/model/model.hpp"
#include "redr/qa/oracle.hpp"

namespace redr::train {

using model::Real;
using model::Tape;
using model::Var;

/// A ConversationExample mapped onto a vocabulary, plus the passage
/// sentences the answering oracle reads.
struct PreparedExample {
  std::string id;
  model::ModelInputs inputs;
  std::vector<int> targets;  // output ids, EOS last
  data::Tokens rationale;
  data::Tokens history;
  data::Tokens question;
  data::Tokens answer;
  std::vector<data::Tokens> passage_sentences;
};

/// Throws when the target question is empty or consists only of padding.
PreparedExample prepare_example(const data::Vocabulary& vocab, const data::ConversationExample& example,
                                std::vector<data::Tokens> passage_sentences = {});

/// Prepares examples whose passages come from `docs` (indexed by
/// document_index). With no docs the rationale stands in for the passage.
std::vector<PreparedExample> prepare_examples(const data::Vocabulary& vocab,
                                              std::span<const data::ConversationExample> examples,
                                              std::span<const data::CoqaDocument> docs = {});

struct BatchLoss {
  Var loss;  // mean over the batch of per-example summed NLL
  int tokens = 0;
  int correct = 0;
};

BatchLoss mle_loss(Tape& tape, const model::ReDRModel& model, std::span<const PreparedExample* const> batch,
                   const model::Dropout& dropout = {});

struct CorpusStats {
  double mean_loss = 0.0;   // per example
  double perplexity = 0.0;  // per token
  double token_accuracy = 0.0;
  long tokens = 0;
};

/// Forward-only teacher-forced statistics, no dropout.
CorpusStats evaluate_nll(const model::ReDRModel& model, std::span<const PreparedExample> examples);

/// Fraction of examples whose greedy decode equals the target token-exactly.
double exact_match_rate(const model::ReDRModel& model, const data::Vocabulary& vocab,
                        std::span<const PreparedExample> examples, int max_len);

using ParameterSnapshot = std::vector<model::Mat>;
ParameterSnapshot snapshot(const model::ReDRModel& model);
void restore(model::ReDRModel& model, const ParameterSnapshot& snap);

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double token_accuracy = 0.0;
  double perplexity = 0.0;
  std::optional<double> dev_loss;
};

struct MleOptions {
  std::span<const PreparedExample> dev;
  /// Best-dev (or, without dev data, final) checkpoint; empty disables saving.
  std::filesystem::path checkpoint;
  /// Line-delimited JSON {step, lr, loss} per update.
  std::ostream* log = nullptr;
};

struct MleResult {
  std::vector<EpochMetrics> epochs;
  std::int64_t steps = 0;
  bool diverged = false;
  std::string diagnostics;
  std::optional<double> best_dev_loss;
};

/// Minibatch SGD over shuffled examples with the configured decay schedule
/// and gradient clipping. On a non-finite loss or gradient the parameters
/// are reset to the last completed epoch and training stops. With dev data
/// the best-dev parameters are restored at the end.
MleResult train_mle(model::ReDRModel& model, const data::Vocabulary& vocab, std::span<const PreparedExample> train,
                    const MleOptions& options = {});

// --- REINFORCE ----------------------------------------------------------------

struct RewardSample {
  enum class Source { Gold, Beam };
  data::Tokens question;
  std::vector<int> target_ids;  // EOS last
  Source source = Source::Beam;
  data::Tokens answer;
  double reward = 0.0;
  double log_prob = 0.0;
};

/// The gold question plus the deterministic top-`beam` beam questions that
/// differ from it, each scored by oracle-answer F1 against the gold answer.
std::vector<RewardSample> build_sample_pool(const model::ReDRModel& model, const data::Vocabulary& vocab,
                                            const PreparedExample& example, const qa::QaOracle& oracle, int beam,
                                            int max_len);

double mean_reward(std::span<const RewardSample> pool);

/// loss = -sum_i (R_i - b) log pi_i / |pool|, with b the mean reward when
/// `baseline` is set and 0 otherwise. Gradients flow only through log pi.
Var reinforce_objective(std::span<const double> rewards, std::span<const Var> log_probs, bool baseline);

/// True when every advantage is zero, so an update carries no signal.
bool zero_advantage(std::span<const double> rewards, bool baseline);

struct ReinforceStep {
  bool skipped = false;
  double loss = 0.0;
  double mean_reward = 0.0;
  double grad_norm = 0.0;
};

/// Builds the objective over `pool` for `example`, backpropagates and applies
/// one SGD step at `lr`.
ReinforceStep reinforce_step(model::ReDRModel& model, const PreparedExample& example,
                             std::span<const RewardSample> pool, double lr, bool baseline, double grad_clip);

/// Mean oracle F1 of the beam-best question against the gold answer.
double dev_reward(const model::ReDRModel& model, const data::Vocabulary& vocab,
                  std::span<const PreparedExample> dev, const qa::QaOracle& oracle);

struct RlOptions {
  std::filesystem::path checkpoint;
  std::ostream* log = nullptr;  // {step, lr, loss, mean_reward}
};

struct RlResult {
  double initial_dev_reward = 0.0;
  double best_dev_reward = 0.0;
  double final_dev_reward = 0.0;
  int updates = 0;
  bool plateaued = false;
  bool aborted = false;
  std::string diagnostics;
  std::vector<double> pool_rewards;  // mean pool reward per update
  std::vector<double> dev_rewards;   // per evaluation, initial first
};

/// Cycles through shuffled training examples, one pool per update, for at
/// most rl_max_updates updates. Evaluates dev reward every rl_eval_every
/// updates and stops after rl_patience evaluations without improvement; the
/// best parameters are kept. A full pass with every pool reward at 0 aborts.
RlResult finetune_rl(model::ReDRModel& model, const data::Vocabulary& vocab, std::span<const PreparedExample> train,
                     std::span<const PreparedExample> dev, const qa::QaOracle& oracle,
                     const RlOptions& options = {});

}  // namespace redr::train
