#pragma once

// Answering oracles used for RL rewards and conversation rollout.

#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "redr/data/text.hpp"

namespace redr::qa {

struct OracleRequest {
  std::vector<data::Tokens> passage_sentences;
  data::Tokens history;
  data::Tokens question;
  /// Gold answer when one exists. Only the gold-replay oracle reads it.
  data::Tokens reference_answer;
};

struct OracleAnswer {
  data::Tokens answer;
  double confidence = 0.0;  // in [0, 1]
};

class QaOracle {
 public:
  virtual ~QaOracle() = default;
  virtual OracleAnswer answer(const OracleRequest& request) const = 0;
  virtual std::string name() const = 0;
};

/// Scores each sentence by the number of distinct non-stopword question
/// tokens it contains and answers with up to five content tokens of the best
/// sentence that the question does not already mention, in passage order.
/// Ties go to the earliest sentence; no overlap gives "unknown".
class LexicalOracle : public QaOracle {
 public:
  explicit LexicalOracle(std::size_t max_answer_tokens = 5) : max_tokens_(max_answer_tokens) {}
  OracleAnswer answer(const OracleRequest& request) const override;
  std::string name() const override { return "lexical"; }

 private:
  std::size_t max_tokens_;
};

/// Returns the reference answer verbatim.
class GoldReplayOracle : public QaOracle {
 public:
  OracleAnswer answer(const OracleRequest& request) const override { return {request.reference_answer, 1.0}; }
  std::string name() const override { return "gold"; }
};

/// Always answers with nothing.
class NullOracle : public QaOracle {
 public:
  OracleAnswer answer(const OracleRequest&) const override { return {}; }
  std::string name() const override { return "null"; }
};

/// Answers [marker] when the question contains the marker token, else nothing.
class MarkerOracle : public QaOracle {
 public:
  explicit MarkerOracle(std::string marker) : marker_(std::move(marker)) {}
  OracleAnswer answer(const OracleRequest& request) const override;
  std::string name() const override { return "marker:" + marker_; }
  const std::string& marker() const { return marker_; }

 private:
  std::string marker_;
};

/// External answerer behind a pipe: the command is started once through
/// /bin/sh and receives one JSON request per line
///   {"passage": [[tok...]...], "history": [...], "question": [...]}
/// and must reply with one line {"answer": [...], "confidence": x}.
class PipeOracle : public QaOracle {
 public:
  explicit PipeOracle(std::string command);
  ~PipeOracle() override;
  PipeOracle(const PipeOracle&) = delete;
  PipeOracle& operator=(const PipeOracle&) = delete;

  OracleAnswer answer(const OracleRequest& request) const override;
  std::string name() const override { return "pipe:" + command_; }

 private:
  std::string read_line() const;

  std::string command_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  mutable std::string pending_;
  mutable std::mutex mutex_;
};

/// "lexical", "gold", "null", "marker:<token>" or "pipe:<command>".
std::unique_ptr<QaOracle> make_oracle(std::string_view spec);

/// Runs the oracle; any failure becomes "unknown" with confidence 0 and a
/// warning. An empty question is answered "unknown" without calling it.
OracleAnswer oracle_answer(const OracleRequest& request, const QaOracle& oracle);

/// Lowercases, removes punctuation characters and drops tokens left empty.
data::Tokens normalize_answer(const data::Tokens& tokens);

/// Multiset token-overlap F1 after normalization. Both empty gives 1, exactly
/// one empty gives 0.
double f1_score(const data::Tokens& prediction, const data::Tokens& gold);

bool is_stopword(std::string_view token);

}  // namespace redr::qa
