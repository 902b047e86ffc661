#pragma once

// Turn-by-turn conversation generation over a passage: the model asks, the
// oracle answers, and the answer feeds the next turn's history.

#include <span>
#include <string>
#include <vector>

#include "redr/data/corpus.hpp"
#include "redr/model/model.hpp"
#include "redr/qa/oracle.hpp"

namespace redr::conversation {

struct GeneratedTurn {
  int turn = 0;
  std::size_t rationale_sentence = 0;  // 1-based
  data::Tokens rationale;
  data::Tokens history;  // model input for this turn
  data::Tokens question;
  data::Tokens answer;
  double confidence = 0.0;
  double score = 0.0;
  std::vector<double> lambda_trace;
  std::vector<std::vector<double>> alpha_trace;
};

struct GeneratedConversation {
  std::string passage_id;
  std::vector<GeneratedTurn> turns;
};

struct RolloutOptions {
  int beam = 5;
  int max_question_length = 30;
  data::HistoryOptions history;
};

RolloutOptions rollout_options(const TrainConfig& config);

GeneratedConversation generate_conversation(const data::Passage& passage, const model::ReDRModel& model,
                                            const data::Vocabulary& vocab, const qa::QaOracle& oracle, int turns,
                                            const RolloutOptions& options);

/// CoQA-schema document set: data[] with id, story, questions[] and answers[]
/// (input_text, turn_id, span_start/span_end of the rationale sentence).
std::string to_coqa_json(std::span<const GeneratedConversation> conversations,
                         std::span<const data::Passage> passages);

/// One JSON object per turn:
/// {example_id, question_tokens, score, lambda_trace, alpha_trace}.
std::string to_trace_jsonl(std::span<const GeneratedConversation> conversations);

}  // namespace redr::conversation
