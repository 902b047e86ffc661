#include "redr/data/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "redr/data/vocabulary.hpp"
#include "redr/error.hpp"
#include "redr/log.hpp"

namespace redr::data {

using nlohmann::json;

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_json(std::string_view text, std::string_view what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string(what) + ": malformed JSON: " + e.what());
  }
}

const json& require(const json& obj, const char* field, const std::string& context) {
  if (!obj.is_object() || !obj.contains(field)) {
    throw ParseError(context + ": missing field '" + field + "'");
  }
  return obj.at(field);
}

std::string require_string(const json& obj, const char* field, const std::string& context) {
  const json& v = require(obj, field, context);
  if (!v.is_string()) throw ParseError(context + ": field '" + field + "' is not a string");
  return v.get<std::string>();
}

}  // namespace

Tokens Passage::sentence_tokens(std::size_t index) const {
  const CharSpan s = sentences.at(index);
  return tokenize(std::string_view(text).substr(s.begin, s.size()));
}

std::vector<Tokens> Passage::tokenized_sentences() const {
  std::vector<Tokens> out;
  out.reserve(sentences.size());
  for (std::size_t i = 0; i < sentences.size(); ++i) out.push_back(sentence_tokens(i));
  return out;
}

Passage make_passage(std::string id, std::string text) {
  Passage p{std::move(id), std::move(text), {}};
  p.sentences = split_sentences(p.text);
  return p;
}

std::vector<CoqaDocument> parse_coqa(std::string_view json_text) {
  const json root = parse_json(json_text, "CoQA");
  const json& data = require(root, "data", "CoQA root");
  if (!data.is_array()) throw ParseError("CoQA root: 'data' is not an array");

  std::vector<CoqaDocument> docs;
  docs.reserve(data.size());
  for (std::size_t d = 0; d < data.size(); ++d) {
    const json& entry = data[d];
    const std::string id = entry.contains("id") && entry["id"].is_string() ? entry["id"].get<std::string>()
                                                                            : "#" + std::to_string(d);
    const std::string ctx = "CoQA passage " + id;
    CoqaDocument doc;
    doc.passage = make_passage(id, require_string(entry, "story", ctx));
    const json& questions = require(entry, "questions", ctx);
    const json& answers = require(entry, "answers", ctx);
    if (!questions.is_array() || !answers.is_array()) throw ParseError(ctx + ": questions/answers must be arrays");
    if (questions.size() != answers.size()) {
      throw ParseError(ctx + ": " + std::to_string(questions.size()) + " questions but " +
                       std::to_string(answers.size()) + " answers");
    }
    for (std::size_t t = 0; t < questions.size(); ++t) {
      const json& q = questions[t];
      const json& a = answers[t];
      QATurn turn;
      turn.turn_id = q.contains("turn_id") ? q["turn_id"].get<int>() : static_cast<int>(t) + 1;
      turn.question_text = require_string(q, "input_text", ctx + " question " + std::to_string(t + 1));
      turn.answer_text = require_string(a, "input_text", ctx + " answer " + std::to_string(t + 1));
      turn.question_tokens = tokenize(turn.question_text);
      turn.answer_tokens = tokenize(turn.answer_text);
      if (a.contains("span_start") && a.contains("span_end")) {
        const long start = a["span_start"].get<long>();
        const long end = a["span_end"].get<long>();
        if (start >= 0 || end >= 0) {
          if (start < 0 || end < start) {
            throw ParseError(ctx + " answer " + std::to_string(t + 1) + ": span_end " + std::to_string(end) +
                             " < span_start " + std::to_string(start));
          }
          if (static_cast<std::size_t>(end) > doc.passage.text.size()) {
            throw ParseError(ctx + " answer " + std::to_string(t + 1) + ": rationale span ends at " +
                             std::to_string(end) + " beyond passage length " +
                             std::to_string(doc.passage.text.size()));
          }
          turn.rationale_span = CharSpan{static_cast<std::size_t>(start), static_cast<std::size_t>(end)};
        }
      }
      doc.turns.push_back(std::move(turn));
    }
    std::stable_sort(doc.turns.begin(), doc.turns.end(),
                     [](const QATurn& x, const QATurn& y) { return x.turn_id < y.turn_id; });
    docs.push_back(std::move(doc));
  }
  return docs;
}

std::vector<CoqaDocument> parse_coqa_file(const std::filesystem::path& path) {
  return parse_coqa(read_file(path));
}

std::vector<Passage> parse_squad(std::string_view json_text) {
  const json root = parse_json(json_text, "SQuAD");
  const json& data = require(root, "data", "SQuAD root");
  if (!data.is_array()) throw ParseError("SQuAD root: 'data' is not an array");
  std::vector<Passage> out;
  for (std::size_t a = 0; a < data.size(); ++a) {
    const std::string ctx = "SQuAD article " + std::to_string(a);
    const json& paragraphs = require(data[a], "paragraphs", ctx);
    if (!paragraphs.is_array()) throw ParseError(ctx + ": 'paragraphs' is not an array");
    if (paragraphs.empty()) log::warn(ctx + ": empty paragraphs list");
    for (std::size_t p = 0; p < paragraphs.size(); ++p) {
      const std::string id = std::to_string(a) + "_" + std::to_string(p);
      out.push_back(make_passage(id, require_string(paragraphs[p], "context", ctx + " paragraph " + std::to_string(p))));
    }
  }
  if (out.empty()) log::warn("SQuAD: no passages found");
  return out;
}

std::vector<Passage> parse_squad_file(const std::filesystem::path& path) { return parse_squad(read_file(path)); }

RationaleSelection select_rationale(const Passage& passage, int turn, std::optional<CharSpan> dataset_span) {
  if (turn < 1) throw Error("select_rationale: turn index must be >= 1");
  if (dataset_span) {
    const CharSpan s = *dataset_span;
    if (s.end > passage.text.size() || s.begin > s.end) throw Error("select_rationale: dataset span outside passage");
    Tokens toks = tokenize(std::string_view(passage.text).substr(s.begin, s.size()));
    if (!toks.empty()) return {0, s, std::move(toks), true};
  }
  if (passage.sentences.empty()) throw Error("select_rationale: passage " + passage.id + " has no sentences");
  const std::size_t index = std::min<std::size_t>(static_cast<std::size_t>(turn), passage.sentences.size());
  return {index, passage.sentences[index - 1], passage.sentence_tokens(index - 1), false};
}

Tokens build_history(std::span<const QAPair> turns, const HistoryOptions& options) {
  if (turns.empty()) return {std::string(Vocabulary::kReserved[Vocabulary::kHistEmpty])};
  std::size_t total = 0;
  for (const auto& [q, a] : turns) total += 2 + q.size() + a.size();
  std::size_t first = 0;
  if (total > options.max_tokens && turns.size() > options.max_turns) first = turns.size() - options.max_turns;
  Tokens out;
  for (std::size_t i = first; i < turns.size(); ++i) {
    out.emplace_back(Vocabulary::kReserved[Vocabulary::kSepQ]);
    out.insert(out.end(), turns[i].first.begin(), turns[i].first.end());
    out.emplace_back(Vocabulary::kReserved[Vocabulary::kSepA]);
    out.insert(out.end(), turns[i].second.begin(), turns[i].second.end());
  }
  return out;
}

std::vector<ConversationExample> assemble_examples(std::span<const CoqaDocument> docs, const AssemblyOptions& options) {
  std::vector<ConversationExample> out;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    const CoqaDocument& doc = docs[d];
    std::vector<QAPair> history;
    for (std::size_t t = 0; t < doc.turns.size(); ++t) {
      const QATurn& turn = doc.turns[t];
      const int k = static_cast<int>(t) + 1;
      const Tokens hist = build_history(history, options.history);
      if (turn.question_tokens.empty()) {
        log::warn("passage " + doc.passage.id + " turn " + std::to_string(turn.turn_id) + ": empty question skipped");
      } else {
        const auto rationale = select_rationale(
            doc.passage, k, options.use_dataset_rationale ? turn.rationale_span : std::nullopt);
        ConversationExample ex;
        ex.id = doc.passage.id + "_" + std::to_string(turn.turn_id);
        ex.document_index = d;
        ex.turn_index = k;
        ex.rationale_sentence = rationale.sentence_index;
        ex.rationale_tokens = rationale.tokens;
        ex.history_tokens = hist;
        ex.target_question_tokens = turn.question_tokens;
        ex.answer_tokens = turn.answer_tokens;
        out.push_back(std::move(ex));
      }
      Tokens answer = options.history_answer ? options.history_answer(doc, t, hist) : turn.answer_tokens;
      history.emplace_back(turn.question_tokens, std::move(answer));
    }
  }
  return out;
}

}  // namespace redr::data
