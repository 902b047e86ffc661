#include "redr/toy.hpp"

#include <random>

namespace redr::toy {

TrainConfig toy_config() {
  TrainConfig c;
  c.hidden_size = 8;
  c.embedding_dim = 8;
  c.lstm_layers = 2;
  c.reasoning_layers = 3;
  c.dropout = 0.0;
  c.init_scale = 1.0;
  c.batch_size = 1;
  c.max_epochs = 1;
  c.beam_size = 3;
  c.max_question_length = 6;
  return c;
}

data::Vocabulary toy_vocabulary(int size) {
  std::vector<std::string> tokens(data::Vocabulary::kReserved.begin(), data::Vocabulary::kReserved.end());
  for (int i = 0; static_cast<int>(tokens.size()) < size; ++i) tokens.push_back("w" + std::to_string(i));
  return data::Vocabulary::from_tokens(std::move(tokens));
}

ToyInstance toy_instance(std::uint64_t seed, const data::Vocabulary& vocab, int m, int n, int target_length) {
  std::mt19937_64 rng(seed);
  const int first = data::Vocabulary::kHistEmpty + 1;
  std::uniform_int_distribution<int> word(first, vocab.size() - 1);
  data::Tokens history, rationale, target;
  for (int i = 0; i < m; ++i) history.push_back(vocab.token(word(rng)));
  for (int i = 0; i + 1 < n; ++i) rationale.push_back(vocab.token(word(rng)));
  rationale.push_back("oov-token");
  for (int i = 0; i + 1 < target_length; ++i) target.push_back(vocab.token(word(rng)));
  target.push_back("oov-token");
  ToyInstance t;
  t.inputs = model::prepare_inputs(vocab, history, rationale);
  t.targets = model::target_ids(vocab, t.inputs.source, target);
  return t;
}

ad::GradCheckReport<double> full_model_grad_check(std::uint64_t seed, double epsilon, const TrainConfig& config,
                                                  int vocab_size) {
  const data::Vocabulary vocab = toy_vocabulary(vocab_size);
  model::ReDRModel net(config, vocab.size(), seed);
  const ToyInstance inst = toy_instance(seed + 1000, vocab);
  std::vector<model::Param*> leaves;
  for (model::Param* p : net.parameters()) {
    if (p->requires_grad) leaves.push_back(p);
  }
  return ad::grad_check<double>(
      [&](model::Tape& tape) { return net.sequence_nll(tape, inst.inputs, inst.targets).nll; }, leaves, epsilon);
}

namespace {

std::string pick(std::mt19937_64& rng, const char* prefix, int n) {
  return prefix + std::to_string(std::uniform_int_distribution<int>(0, n - 1)(rng));
}

data::ConversationExample synthetic_example(std::mt19937_64& rng, int index) {
  const std::string subject = pick(rng, "n", 40);
  const std::string verb = pick(rng, "v", 12);
  const std::string object = pick(rng, "n", 40);
  const std::string place = pick(rng, "p", 10);
  data::ConversationExample ex;
  ex.id = "syn" + std::to_string(index);
  ex.turn_index = 2;
  ex.rationale_tokens = {"the", subject, verb, "the", object, "in", "the", place, "."};
  const std::string prev = pick(rng, "n", 40);
  ex.history_tokens = {"<q>", "who", "is", "the", prev, "?", "<a>", "the", pick(rng, "n", 40)};
  switch (index % 4) {
    case 0: ex.target_question_tokens = {"what", "did", "the", subject, verb, "?"}; break;
    case 1: ex.target_question_tokens = {"who", verb, "the", object, "?"}; break;
    case 2: ex.target_question_tokens = {"where", "did", "the", subject, verb, "it", "?"}; break;
    default: ex.target_question_tokens = {"what", "is", "in", "the", place, "?"}; break;
  }
  ex.answer_tokens = {"the", object};
  return ex;
}

}  // namespace

std::vector<data::ConversationExample> synthetic_corpus(std::uint64_t seed, int count) {
  std::mt19937_64 rng(seed);
  std::vector<data::ConversationExample> out;
  for (int i = 0; i < count; ++i) out.push_back(synthetic_example(rng, i));
  return out;
}

std::vector<data::ConversationExample> marker_corpus(std::uint64_t seed, int count, double marker_fraction,
                                                     const std::string& marker) {
  std::mt19937_64 rng(seed);
  std::vector<data::ConversationExample> out;
  const int with_marker = static_cast<int>(marker_fraction * count + 0.5);
  for (int i = 0; i < count; ++i) {
    data::ConversationExample ex = synthetic_example(rng, i);
    ex.id = "mark" + std::to_string(i);
    ex.rationale_tokens.insert(ex.rationale_tokens.end() - 1, {"with", marker});
    if (i < with_marker) {
      auto& q = ex.target_question_tokens;
      q.insert(q.end() - 1, {"with", marker});
    }
    ex.answer_tokens = {marker};
    out.push_back(std::move(ex));
  }
  return out;
}

data::Vocabulary corpus_vocabulary(const std::vector<data::ConversationExample>& examples) {
  std::vector<data::Tokens> texts;
  for (const auto& ex : examples) {
    texts.push_back(ex.rationale_tokens);
    texts.push_back(ex.history_tokens);
    texts.push_back(ex.target_question_tokens);
    texts.push_back(ex.answer_tokens);
  }
  return data::Vocabulary::build(texts, 1);
}

}  // namespace redr::toy
