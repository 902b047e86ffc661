#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "redr/config.hpp"
#include "redr/data/cache.hpp"
#include "redr/data/corpus.hpp"
#include "redr/data/embeddings.hpp"
#include "redr/data/text.hpp"
#include "redr/data/vocabulary.hpp"
#include "redr/error.hpp"
#include "redr/log.hpp"

using namespace redr;
using namespace redr::data;

namespace {

// Captures warnings for the lifetime of the object.
struct WarningCapture {
  std::vector<std::string> messages;
  log::Sink previous;
  WarningCapture() {
    previous = log::set_sink([this](std::string_view level, std::string_view msg) {
      if (level == "warn") messages.emplace_back(msg);
    });
  }
  ~WarningCapture() { log::set_sink(previous); }
};

const char* kCoqa = R"({"data": [{
  "id": "p1",
  "story": "Cotton lived in a barn. She was orange. She had many sisters.",
  "questions": [{"input_text": "Who lived in a barn?", "turn_id": 1},
                {"input_text": "What color was she?", "turn_id": 2},
                {"input_text": "Did she have sisters?", "turn_id": 3}],
  "answers": [{"input_text": "Cotton", "span_start": 0, "span_end": 23, "turn_id": 1},
              {"input_text": "orange", "turn_id": 2},
              {"input_text": "yes", "turn_id": 3}]
}]})";

}  // namespace

TEST_CASE("tokenizer lowercases and splits punctuation") {
  CHECK(tokenize("Who lived in a barn?") == Tokens{"who", "lived", "in", "a", "barn", "?"});
  CHECK(tokenize("  ") == Tokens{});
  const auto spans = tokenize_with_spans("Hi, Bob.");
  REQUIRE(spans.size() == 4);
  CHECK(spans[1].text == ",");
  CHECK(spans[2].span == CharSpan{4, 7});
}

TEST_CASE("detokenize inverts tokenize on plain text") {
  const std::string text = "who gave it to her, and why?";
  CHECK(detokenize(tokenize(text)) == text);
  CHECK(tokenize(detokenize(tokenize("It's (very) odd."))) == tokenize("It's (very) odd."));
}

TEST_CASE("sentence splitter") {
  CHECK(split_sentences("A. B. C.").size() == 3);
  CHECK(split_sentences("Mr. Smith left. He came back!").size() == 2);
  CHECK(split_sentences("No terminator here").size() == 1);
  CHECK(split_sentences("").empty());
  const std::string text = "One two. Three?";
  const auto s = split_sentences(text);
  REQUIRE(s.size() == 2);
  CHECK(text.substr(s[1].begin, s[1].size()) == "Three?");
}

TEST_CASE("parse_coqa reads stories, turns and rationale spans") {
  const auto docs = parse_coqa(kCoqa);
  REQUIRE(docs.size() == 1);
  CHECK(docs[0].passage.sentence_count() == 3);
  REQUIRE(docs[0].turns.size() == 3);
  CHECK(docs[0].turns[0].rationale_span.has_value());
  CHECK_FALSE(docs[0].turns[1].rationale_span.has_value());
  CHECK(docs[0].turns[1].question_tokens == Tokens{"what", "color", "was", "she", "?"});
}

TEST_CASE("parse_coqa with one story and one turn") {
  const auto docs = parse_coqa(
      R"({"data":[{"id":"x","story":"A b.","questions":[{"input_text":"q?"}],"answers":[{"input_text":"a"}]}]})");
  REQUIRE(docs.size() == 1);
  CHECK(docs[0].turns.size() == 1);
}

TEST_CASE("parse_coqa errors") {
  CHECK_THROWS_AS(parse_coqa(R"({"data":[{"id":"x","story":"A b.","questions":[{"input_text":"q?"}],
      "answers":[{"input_text":"a","span_start":3,"span_end":1}]}]})"),
                  ParseError);
  CHECK_THROWS_AS(parse_coqa("{not json"), ParseError);
  CHECK_THROWS_AS(parse_coqa(R"({"data":[{"id":"x","questions":[],"answers":[]}]})"), ParseError);
  CHECK_THROWS_AS(parse_coqa(R"({"data":[{"id":"x","story":"s","questions":[{"input_text":"q"}],"answers":[]}]})"),
                  ParseError);
  CHECK_THROWS_AS(parse_coqa_file("/nonexistent/coqa.json"), ParseError);
}

TEST_CASE("parse_squad: one passage per paragraph") {
  std::string json = R"({"data":[)";
  for (int a = 0; a < 2; ++a) {
    json += std::string(a ? "," : "") + R"({"title":"t","paragraphs":[)";
    for (int p = 0; p < 3; ++p) json += std::string(p ? "," : "") + R"({"context":"A. B. C.","qas":[]})";
    json += "]}";
  }
  json += "]}";
  const auto passages = parse_squad(json);
  CHECK(passages.size() == 6);
  CHECK(passages[0].sentence_count() == 3);
}

TEST_CASE("parse_squad with no paragraphs warns") {
  WarningCapture w;
  CHECK(parse_squad(R"({"data":[{"title":"t","paragraphs":[]}]})").empty());
  CHECK_FALSE(w.messages.empty());
}

TEST_CASE("select_rationale") {
  const Passage p = make_passage("p", "S one. S two. S three. S four. S five.");
  CHECK(select_rationale(p, 2).sentence_index == 2);
  CHECK(select_rationale(p, 2).tokens == Tokens{"s", "two", "."});
  CHECK(select_rationale(p, 9).sentence_index == 5);
  const auto ds = select_rationale(p, 1, CharSpan{7, 13});
  CHECK(ds.from_dataset);
  CHECK(ds.tokens == Tokens{"s", "two", "."});
  CHECK_THROWS_AS(select_rationale(p, 0), Error);
  CHECK_THROWS_AS(select_rationale(make_passage("e", ""), 1), Error);
}

TEST_CASE("build_history layout") {
  CHECK(build_history({}) == Tokens{"<hist-empty>"});
  const std::vector<QAPair> one = {{{"who", "?"}, {"cotton"}}};
  CHECK(build_history(one) == Tokens{"<q>", "who", "?", "<a>", "cotton"});
  const std::vector<QAPair> two = {{{"who", "?"}, {"cotton"}}, {{"what", "color", "?"}, {"orange", "cat"}}};
  CHECK(build_history(two).size() == 2 * 2 + 3 + 5);
}

TEST_CASE("build_history grows with k below the truncation threshold") {
  std::vector<QAPair> turns;
  std::size_t last = 1;
  for (int k = 0; k < 6; ++k) {
    turns.push_back({{"q", std::to_string(k)}, {"a"}});
    const std::size_t len = build_history(turns).size();
    CHECK(len > last);
    last = len;
  }
}

TEST_CASE("build_history keeps the last turns once over the token budget") {
  std::vector<QAPair> turns;
  for (int k = 0; k < 5; ++k) turns.push_back({{"q" + std::to_string(k)}, {"a"}});
  const HistoryOptions opts{10, 2};
  CHECK(build_history(turns, opts) == Tokens{"<q>", "q3", "<a>", "a", "<q>", "q4", "<a>", "a"});
}

TEST_CASE("assemble_examples pairs rationale, history and target") {
  const auto docs = parse_coqa(kCoqa);
  const auto ex = assemble_examples(docs);
  REQUIRE(ex.size() == 3);
  CHECK(ex[0].history_tokens == Tokens{"<hist-empty>"});
  CHECK(ex[0].rationale_sentence == 0);  // dataset span
  CHECK(ex[1].rationale_sentence == 2);
  CHECK(ex[1].history_tokens == Tokens{"<q>", "who", "lived", "in", "a", "barn", "?", "<a>", "cotton"});
  AssemblyOptions sentence_only;
  sentence_only.use_dataset_rationale = false;
  CHECK(assemble_examples(docs, sentence_only)[0].rationale_sentence == 1);
}

TEST_CASE("build_vocab frequency cutoff and reserved ids") {
  const std::vector<Tokens> corpus = {{"a", "a", "b"}, {"a"}};
  const Vocabulary v2 = Vocabulary::build(corpus, 2);
  CHECK(v2.size() == 8);
  CHECK(v2.id("a") == 7);
  CHECK(v2.id("b") == Vocabulary::kUnk);
  const Vocabulary v1 = Vocabulary::build(corpus, 1);
  CHECK(v1.size() == 9);
  CHECK(v1.contains("b"));
  CHECK(Vocabulary::build(corpus, 1).id("<unk>") == v1.id("<unk>"));
  CHECK(v1.token(Vocabulary::kEos) == "</s>");
  CHECK(Vocabulary::from_tokens(v1.tokens()) == v1);
}

TEST_CASE("vocabulary ties are lexicographic") {
  const std::vector<Tokens> corpus = {{"zeta", "alpha", "mid"}};
  const Vocabulary v = Vocabulary::build(corpus, 1);
  CHECK(v.token(7) == "alpha");
  CHECK(v.token(8) == "mid");
  CHECK(v.token(9) == "zeta");
}

TEST_CASE("load_embeddings: known rows exact, others seeded") {
  const std::vector<Tokens> corpus = {{"cat", "dog"}};
  const Vocabulary v = Vocabulary::build(corpus, 1);  // 7 reserved + 2
  std::istringstream file("cat 1 2 3\ndog 4 5 6\n");
  const Eigen::MatrixXd e = load_embeddings(file, v, 3, 7);
  CHECK(e.rows() == 3);
  CHECK(e.cols() == 9);
  CHECK(e.col(v.id("cat")) == Eigen::Vector3d(1, 2, 3));
  CHECK(e.col(v.id("dog")) == Eigen::Vector3d(4, 5, 6));
  std::istringstream again("cat 1 2 3\ndog 4 5 6\n");
  CHECK(load_embeddings(again, v, 3, 7) == e);
  CHECK(e.col(Vocabulary::kUnk).cwiseAbs().maxCoeff() <= 0.1);
}

TEST_CASE("load_embeddings: first duplicate wins with a warning") {
  const std::vector<Tokens> corpus = {{"cat"}};
  const Vocabulary v = Vocabulary::build(corpus, 1);
  WarningCapture w;
  std::istringstream file("cat 1 1\ncat 2 2\n");
  const Eigen::MatrixXd e = load_embeddings(file, v, 2, 1);
  CHECK(e.col(v.id("cat")) == Eigen::Vector2d(1, 1));
  CHECK(w.messages.size() == 1);
}

TEST_CASE("load_embeddings: dimension mismatch") {
  const std::vector<Tokens> corpus = {{"cat"}};
  const Vocabulary v = Vocabulary::build(corpus, 1);
  std::istringstream file("cat 1 2 3\n");
  CHECK_THROWS(load_embeddings(file, v, 4, 1));
}

TEST_CASE("dataset cache round trip") {
  const auto docs = parse_coqa(kCoqa);
  const auto ex = assemble_examples(docs);
  std::vector<Tokens> texts;
  for (const auto& e : ex) texts.push_back(e.target_question_tokens);
  const Vocabulary v = Vocabulary::build(texts, 1);  // rationale words partly OOV
  const auto path = std::filesystem::temp_directory_path() / "redr_cache_test.bin";
  DatasetCache::from_examples(v, ex).save(path);
  const DatasetCache loaded = DatasetCache::load(path);
  std::filesystem::remove(path);
  CHECK(loaded.vocab == v);
  const auto back = loaded.to_examples();
  REQUIRE(back.size() == ex.size());
  for (std::size_t i = 0; i < ex.size(); ++i) {
    CHECK(back[i].id == ex[i].id);
    CHECK(back[i].rationale_tokens == ex[i].rationale_tokens);
    CHECK(back[i].history_tokens == ex[i].history_tokens);
    CHECK(back[i].target_question_tokens == ex[i].target_question_tokens);
    CHECK(back[i].answer_tokens == ex[i].answer_tokens);
    CHECK(back[i].rationale_sentence == ex[i].rationale_sentence);
  }
}

TEST_CASE("config parsing") {
  const TrainConfig c = parse_config("# comment\nhidden_size = 32\nbeam_size=3\n\ndecision_maker = false\n");
  CHECK(c.hidden_size == 32);
  CHECK(c.beam_size == 3);
  CHECK_FALSE(c.decision_maker);
  CHECK(c.learning_rate == 1.0);
  CHECK_THROWS_AS(parse_config("no_such_key = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("hidden_size = abc\n"), ConfigError);
  CHECK(parse_config(format_config(c)) == c);
}
