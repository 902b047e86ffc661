#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "redr/data/text.hpp"

namespace redr::data {

struct Passage {
  std::string id;
  std::string text;
  std::vector<CharSpan> sentences;

  std::size_t sentence_count() const { return sentences.size(); }
  /// Tokens of sentence `index` (0-based).
  Tokens sentence_tokens(std::size_t index) const;
  std::vector<Tokens> tokenized_sentences() const;
};

/// Builds a passage with sentence spans from the default splitter.
Passage make_passage(std::string id, std::string text);

struct QATurn {
  int turn_id = 0;
  std::string question_text;
  std::string answer_text;
  Tokens question_tokens;
  Tokens answer_tokens;
  std::optional<CharSpan> rationale_span;
};

struct CoqaDocument {
  Passage passage;
  std::vector<QATurn> turns;
};

std::vector<CoqaDocument> parse_coqa(std::string_view json_text);
std::vector<CoqaDocument> parse_coqa_file(const std::filesystem::path& path);

/// One passage per SQuAD v1.1 paragraph context.
std::vector<Passage> parse_squad(std::string_view json_text);
std::vector<Passage> parse_squad_file(const std::filesystem::path& path);

struct RationaleSelection {
  /// 1-based sentence index, or 0 when the dataset span was used.
  std::size_t sentence_index = 0;
  CharSpan span;
  Tokens tokens;
  bool from_dataset = false;
};

/// Sentence min(turn, sentence_count) of the passage, unless a dataset
/// rationale span is supplied, which wins.
RationaleSelection select_rationale(const Passage& passage, int turn,
                                    std::optional<CharSpan> dataset_span = std::nullopt);

struct HistoryOptions {
  /// When the full history would exceed this many tokens, only the most
  /// recent `max_turns` turns are kept.
  std::size_t max_tokens = 200;
  std::size_t max_turns = 3;
};

using QAPair = std::pair<Tokens, Tokens>;

/// <q> q1 <a> a1 ... <q> q_{k-1} <a> a_{k-1}; a lone <hist-empty> token when
/// there are no previous turns.
Tokens build_history(std::span<const QAPair> turns, const HistoryOptions& options = {});

struct ConversationExample {
  std::string id;
  std::size_t document_index = 0;
  int turn_index = 1;
  std::size_t rationale_sentence = 0;
  Tokens rationale_tokens;
  Tokens history_tokens;
  Tokens target_question_tokens;
  Tokens answer_tokens;
};

/// Supplies the answer placed into the history for a previous turn. The
/// default uses the gold answer.
using HistoryAnswerFn =
    std::function<Tokens(const CoqaDocument& doc, std::size_t turn_position, const Tokens& history)>;

struct AssemblyOptions {
  HistoryOptions history;
  bool use_dataset_rationale = true;
  HistoryAnswerFn history_answer;
};

std::vector<ConversationExample> assemble_examples(std::span<const CoqaDocument> docs,
                                                   const AssemblyOptions& options = {});

}  // namespace redr::data
