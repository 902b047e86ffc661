#include <doctest.h>

#include <nlohmann/json.hpp>

#include "redr/conversation/rollout.hpp"
#include "redr/data/corpus.hpp"
#include "redr/toy.hpp"

using namespace redr;
using namespace redr::conversation;

namespace {

struct Fixture {
  data::Vocabulary vocab = toy::toy_vocabulary(30);
  model::ReDRModel net{toy::toy_config(), 30, 3};
  qa::LexicalOracle oracle;
  RolloutOptions options = rollout_options(toy::toy_config());
};

const char* kThree = "w1 w2 w3. w4 w5 w6. w7 w8 w9.";

}  // namespace

TEST_CASE("rationale indices follow the turn and clamp at the last sentence") {
  Fixture f;
  const auto passage = data::make_passage("p", kThree);
  std::vector<std::size_t> idx;
  for (const auto& t : generate_conversation(passage, f.net, f.vocab, f.oracle, 3, f.options).turns) {
    idx.push_back(t.rationale_sentence);
  }
  CHECK(idx == std::vector<std::size_t>{1, 2, 3});
  idx.clear();
  const auto conv = generate_conversation(passage, f.net, f.vocab, f.oracle, 5, f.options);
  for (const auto& t : conv.turns) idx.push_back(t.rationale_sentence);
  CHECK(idx == std::vector<std::size_t>{1, 2, 3, 3, 3});
  for (std::size_t k = 0; k < conv.turns.size(); ++k) CHECK(conv.turns[k].turn == static_cast<int>(k) + 1);
}

TEST_CASE("a single turn sees the empty history") {
  Fixture f;
  const auto conv = generate_conversation(data::make_passage("p", kThree), f.net, f.vocab, f.oracle, 1, f.options);
  REQUIRE(conv.turns.size() == 1);
  CHECK(conv.turns[0].history == data::Tokens{"<hist-empty>"});
}

TEST_CASE("each turn's history is built from all earlier turns") {
  Fixture f;
  const auto conv = generate_conversation(data::make_passage("p", kThree), f.net, f.vocab, f.oracle, 4, f.options);
  std::vector<data::QAPair> past;
  for (const auto& t : conv.turns) {
    CHECK(t.history == data::build_history(past, f.options.history));
    past.emplace_back(t.question, t.answer);
  }
}

TEST_CASE("rollout output is byte-identical across runs") {
  Fixture f;
  const std::vector<data::Passage> passages = {data::make_passage("p", kThree)};
  std::string first;
  for (int run = 0; run < 2; ++run) {
    model::ReDRModel net(toy::toy_config(), 30, 3);
    const std::vector<GeneratedConversation> convs = {
        generate_conversation(passages[0], net, f.vocab, f.oracle, 3, f.options)};
    const std::string bytes = to_coqa_json(convs, passages) + to_trace_jsonl(convs);
    if (run == 0) first = bytes;
    else CHECK(bytes == first);
  }
}

TEST_CASE("rollout argument errors") {
  Fixture f;
  CHECK_THROWS_AS(generate_conversation(data::make_passage("p", kThree), f.net, f.vocab, f.oracle, 0, f.options),
                  ConfigError);
  CHECK_THROWS(generate_conversation(data::make_passage("e", ""), f.net, f.vocab, f.oracle, 2, f.options));
}

TEST_CASE("generated CoQA JSON parses back with spans on the rationale sentences") {
  Fixture f;
  const std::vector<data::Passage> passages = {data::make_passage("p", kThree)};
  const std::vector<GeneratedConversation> convs = {
      generate_conversation(passages[0], f.net, f.vocab, f.oracle, 4, f.options)};
  const std::string json = to_coqa_json(convs, passages);
  const auto j = nlohmann::json::parse(json);
  CHECK(j["data"][0]["answers"][3]["span_text"] == "w7 w8 w9.");
  // Empty generated questions are legal, so only check the structure here.
  const auto docs = data::parse_coqa(json);
  REQUIRE(docs.size() == 1);
  CHECK(docs[0].turns.size() == 4);
  CHECK(docs[0].passage.text == kThree);
  const std::string trace = to_trace_jsonl(convs);
  CHECK(std::count(trace.begin(), trace.end(), '\n') == 4);
  CHECK(nlohmann::json::parse(trace.substr(0, trace.find('\n'))).contains("lambda_trace"));
}
