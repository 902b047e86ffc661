#include "redr/conversation/rollout.hpp"

#include <nlohmann/json.hpp>

#include "redr/error.hpp"

namespace redr::conversation {

RolloutOptions rollout_options(const TrainConfig& config) {
  RolloutOptions o;
  o.beam = config.beam_size;
  o.max_question_length = config.max_question_length;
  o.history.max_tokens = static_cast<std::size_t>(config.history_max_tokens);
  o.history.max_turns = static_cast<std::size_t>(config.history_max_turns);
  return o;
}

GeneratedConversation generate_conversation(const data::Passage& passage, const model::ReDRModel& model,
                                            const data::Vocabulary& vocab, const qa::QaOracle& oracle, int turns,
                                            const RolloutOptions& options) {
  if (turns < 1) throw ConfigError("generate_conversation: turns must be >= 1");
  if (passage.sentence_count() == 0) throw Error("generate_conversation: passage " + passage.id + " has no sentences");
  const std::vector<data::Tokens> sentences = passage.tokenized_sentences();
  GeneratedConversation conv;
  conv.passage_id = passage.id;
  std::vector<data::QAPair> past;
  for (int k = 1; k <= turns; ++k) {
    const data::RationaleSelection sel = data::select_rationale(passage, k);
    GeneratedTurn t;
    t.turn = k;
    t.rationale_sentence = sel.sentence_index;
    t.rationale = sel.tokens;
    t.history = data::build_history(past, options.history);
    const model::ModelInputs inputs = model::prepare_inputs(vocab, t.history, t.rationale);
    const auto beams = model::generate_beam(model, vocab, inputs, options.beam, options.max_question_length);
    const model::Generated& best = beams.front();
    t.question = best.tokens;
    t.score = best.score;
    t.lambda_trace = best.lambda_trace;
    t.alpha_trace = best.alpha_trace;
    const qa::OracleAnswer a = qa::oracle_answer({sentences, t.history, t.question, {}}, oracle);
    t.answer = a.answer;
    t.confidence = a.confidence;
    past.emplace_back(t.question, t.answer);
    conv.turns.push_back(std::move(t));
  }
  return conv;
}

std::string to_coqa_json(std::span<const GeneratedConversation> conversations,
                         std::span<const data::Passage> passages) {
  if (conversations.size() != passages.size()) throw Error("to_coqa_json: one passage per conversation required");
  nlohmann::ordered_json data = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < conversations.size(); ++i) {
    const auto& conv = conversations[i];
    const auto& passage = passages[i];
    nlohmann::ordered_json questions = nlohmann::ordered_json::array();
    nlohmann::ordered_json answers = nlohmann::ordered_json::array();
    for (const auto& t : conv.turns) {
      const data::CharSpan span = passage.sentences.at(t.rationale_sentence - 1);
      questions.push_back({{"input_text", data::detokenize(t.question)}, {"turn_id", t.turn}});
      answers.push_back({{"input_text", data::detokenize(t.answer)},
                         {"span_start", span.begin},
                         {"span_end", span.end},
                         {"span_text", passage.text.substr(span.begin, span.size())},
                         {"turn_id", t.turn},
                         {"confidence", t.confidence}});
    }
    data.push_back({{"id", conv.passage_id},
                    {"source", "generated"},
                    {"story", passage.text},
                    {"questions", questions},
                    {"answers", answers}});
  }
  nlohmann::ordered_json root = {{"version", "1.0"}, {"data", data}};
  return root.dump(2) + "\n";
}

std::string to_trace_jsonl(std::span<const GeneratedConversation> conversations) {
  std::string out;
  for (const auto& conv : conversations) {
    for (const auto& t : conv.turns) {
      nlohmann::ordered_json j = {{"example_id", conv.passage_id + "_t" + std::to_string(t.turn)},
                                  {"question_tokens", t.question},
                                  {"score", t.score},
                                  {"lambda_trace", t.lambda_trace},
                                  {"alpha_trace", t.alpha_trace}};
      out += j.dump() + "\n";
    }
  }
  return out;
}

}  // namespace redr::conversation
