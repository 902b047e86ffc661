#include <doctest.h>

#include <cmath>
#include <sstream>

#include "model_helpers.hpp"
#include "redr/qa/oracle.hpp"
#include "redr/toy.hpp"
#include "redr/train/training.hpp"

using namespace testing_helpers;
using namespace redr::train;

namespace {

TrainConfig tiny_training_config() {
  TrainConfig c = toy::toy_config();
  c.hidden_size = 16;
  c.embedding_dim = 16;
  c.lstm_layers = 1;
  c.init_scale = 0.1;
  c.batch_size = 4;
  c.learning_rate = 0.1;
  c.max_question_length = 10;
  return c;
}

struct Corpus {
  std::vector<data::ConversationExample> raw;
  data::Vocabulary vocab;
  std::vector<PreparedExample> examples;
  explicit Corpus(std::vector<data::ConversationExample> r)
      : raw(std::move(r)), vocab(toy::corpus_vocabulary(raw)), examples(prepare_examples(vocab, raw)) {}
};

}  // namespace

TEST_CASE("nll of uniform distributions is L ln V'") {
  Tape t;
  const int extended = 23;
  std::vector<Var> probs;
  for (int i = 0; i < 4; ++i) probs.push_back(t.constant(Mat::Constant(extended, 1, 1.0 / extended)));
  const std::vector<int> targets = {3, 21, 0, 7};
  CHECK(nll_of_distributions(probs, targets).scalar() == doctest::Approx(4 * std::log(23.0)).epsilon(1e-14));
}

TEST_CASE("nll of a probability-one model is zero") {
  Tape t;
  std::vector<Var> probs;
  const std::vector<int> targets = {2, 0, 1};
  for (int y : targets) {
    Mat p = Mat::Zero(3, 1);
    p(y, 0) = 1.0;
    probs.push_back(t.constant(p));
  }
  CHECK(nll_of_distributions(probs, targets).scalar() == 0.0);
}

TEST_CASE("zero-parameter model loss has the closed form of its mixture") {
  // P_gen is uniform over V, attention is uniform over the n rationale
  // positions and lambda = 1/2, so P(y) = 1/(2V) + count_y / (2n).
  const auto vocab = toy::toy_vocabulary(20);
  ReDRModel net(toy::toy_config(), vocab.size(), 1);
  for (Param* p : net.parameters()) p->value.setZero();
  const data::Tokens rationale = {"w1", "w2", "w1", "rare"};
  const auto inputs = prepare_inputs(vocab, {"w3"}, rationale);
  const auto targets = target_ids(vocab, inputs.source, {"w1", "w5", "rare"});
  Tape t;
  const double loss = net.sequence_nll(t, inputs, targets).nll.scalar();
  const double v = 20.0;
  const double n = 4.0;
  const double expected = -std::log(1 / (2 * v) + 2 / (2 * n)) - std::log(1 / (2 * v)) - std::log(1 / (2 * n)) -
                          std::log(1 / (2 * v));  // w1, w5, rare (copy only), EOS
  CHECK(loss == doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("mle_loss is non-negative and averages over the batch") {
  Corpus c(toy::synthetic_corpus(3, 6));
  ReDRModel net(tiny_training_config(), c.vocab.size(), 2);
  std::vector<const PreparedExample*> batch;
  double sum = 0.0;
  for (const auto& ex : c.examples) {
    batch.push_back(&ex);
    Tape t;
    const double l = net.sequence_nll(t, ex.inputs, ex.targets).nll.scalar();
    CHECK(l >= 0.0);
    sum += l;
  }
  Tape t;
  const BatchLoss bl = mle_loss(t, net, batch);
  CHECK(bl.loss.scalar() == doctest::Approx(sum / 6).epsilon(1e-12));
  CHECK_THROWS(mle_loss(t, net, std::span<const PreparedExample* const>{}));
}

TEST_CASE("prepare_example rejects empty or padding-only questions") {
  const auto vocab = toy::toy_vocabulary(20);
  data::ConversationExample ex;
  ex.id = "x";
  ex.rationale_tokens = {"w1"};
  ex.history_tokens = {"<hist-empty>"};
  CHECK_THROWS(prepare_example(vocab, ex));
  ex.target_question_tokens = {"<pad>", "<pad>"};
  CHECK_THROWS(prepare_example(vocab, ex));
  ex.target_question_tokens = {"w2", "?"};
  const auto p = prepare_example(vocab, ex);
  CHECK(p.targets.back() == data::Vocabulary::kEos);
  CHECK(p.passage_sentences == std::vector<data::Tokens>{ex.rationale_tokens});
}

TEST_CASE("zero epochs leave the initialization untouched") {
  Corpus c(toy::synthetic_corpus(1, 4));
  TrainConfig cfg = tiny_training_config();
  cfg.max_epochs = 0;
  ReDRModel net(cfg, c.vocab.size(), 5);
  const auto before = snapshot(net);
  const auto r = train_mle(net, c.vocab, c.examples);
  CHECK(r.steps == 0);
  CHECK(r.epochs.empty());
  const auto after = snapshot(net);
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(before[i] == after[i]);
}

TEST_CASE("training with a fixed seed is bit-identical") {
  Corpus c(toy::synthetic_corpus(2, 8));
  TrainConfig cfg = tiny_training_config();
  cfg.max_epochs = 3;
  cfg.dropout = 0.3;
  std::vector<double> curves[2];
  std::string logs[2];
  for (int run = 0; run < 2; ++run) {
    ReDRModel net(cfg, c.vocab.size(), 7);
    std::ostringstream log;
    MleOptions opts;
    opts.log = &log;
    for (const auto& e : train_mle(net, c.vocab, c.examples, opts).epochs) curves[run].push_back(e.train_loss);
    logs[run] = log.str();
  }
  CHECK(curves[0].size() == 3);
  CHECK(curves[0] == curves[1]);
  CHECK(logs[0] == logs[1]);
  CHECK(logs[0].find("\"lr\"") != std::string::npos);
}

TEST_CASE("ten MLE steps at lr 0.1 lower the loss") {
  Corpus c(toy::synthetic_corpus(4, 10));
  TrainConfig cfg = tiny_training_config();
  cfg.batch_size = 10;
  cfg.max_epochs = 10;
  ReDRModel net(cfg, c.vocab.size(), 3);
  const double before = evaluate_nll(net, c.examples).mean_loss;
  const auto r = train_mle(net, c.vocab, c.examples);
  CHECK(r.steps == 10);
  CHECK(evaluate_nll(net, c.examples).mean_loss < before);
}

TEST_CASE("a model overfit to one example emits its target exactly") {
  Corpus c(toy::synthetic_corpus(5, 1));
  TrainConfig cfg = tiny_training_config();
  cfg.batch_size = 1;
  cfg.learning_rate = 0.5;
  cfg.max_epochs = 150;
  ReDRModel net(cfg, c.vocab.size(), 8);
  train_mle(net, c.vocab, c.examples);
  const auto g = generate_greedy(net, c.vocab, c.examples[0].inputs, 10);
  CHECK(g.finished);
  CHECK(g.tokens == c.examples[0].question);
  CHECK(exact_match_rate(net, c.vocab, c.examples, 10) == 1.0);
}

TEST_CASE("best-dev parameters are restored and checkpointed") {
  Corpus c(toy::synthetic_corpus(6, 6));
  TrainConfig cfg = tiny_training_config();
  cfg.max_epochs = 4;
  ReDRModel net(cfg, c.vocab.size(), 4);
  const auto path = std::filesystem::temp_directory_path() / "redr_mle_best.ckpt";
  MleOptions opts;
  opts.dev = c.examples;
  opts.checkpoint = path;
  const auto r = train_mle(net, c.vocab, c.examples, opts);
  REQUIRE(r.best_dev_loss.has_value());
  CHECK(evaluate_nll(net, c.examples).mean_loss == doctest::Approx(*r.best_dev_loss).epsilon(1e-12));
  const auto loaded = load_checkpoint(path);
  std::filesystem::remove(path);
  CHECK(snapshot(loaded.model) == snapshot(net));
}

// --- REINFORCE ------------------------------------------------------------------

TEST_CASE("equal rewards under the mean baseline give a zero gradient") {
  Corpus c(toy::synthetic_corpus(7, 1));
  ReDRModel net(tiny_training_config(), c.vocab.size(), 1);
  const auto& ex = c.examples[0];
  const std::vector<double> rewards = {0.7, 0.7, 0.7};
  CHECK(zero_advantage(rewards, true));
  CHECK_FALSE(zero_advantage(rewards, false));
  for (Param* p : net.parameters()) p->zero_grad();
  Tape t;
  std::vector<Var> lps;
  for (int k = 0; k < 3; ++k) {
    std::vector<int> target = ex.targets;
    target[0] = 7 + k;
    lps.push_back(ad::scale(net.sequence_nll(t, ex.inputs, target).nll, -1.0));
  }
  t.backward(reinforce_objective(rewards, lps, true));
  for (const Param* p : net.parameters()) CHECK(p->grad.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("one sample with reward 1 and no baseline is the MLE gradient") {
  Corpus c(toy::synthetic_corpus(8, 1));
  ReDRModel net(tiny_training_config(), c.vocab.size(), 2);
  const auto& ex = c.examples[0];
  for (Param* p : net.parameters()) p->zero_grad();
  {
    Tape t;
    t.backward(net.sequence_nll(t, ex.inputs, ex.targets).nll);
  }
  std::vector<Mat> mle;
  for (const Param* p : net.parameters()) mle.push_back(p->grad);
  for (Param* p : net.parameters()) p->zero_grad();
  {
    Tape t;
    const std::vector<Var> lp = {ad::scale(net.sequence_nll(t, ex.inputs, ex.targets).nll, -1.0)};
    const std::vector<double> r = {1.0};
    t.backward(reinforce_objective(r, lp, false));
  }
  const auto params = net.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) CHECK((params[i]->grad - mle[i]).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("sample pool composition and rewards") {
  Corpus c(toy::marker_corpus(9, 2, 0.0));
  ReDRModel net(tiny_training_config(), c.vocab.size(), 3);
  const auto& ex = c.examples[0];
  const qa::GoldReplayOracle gold;
  const auto pool = build_sample_pool(net, c.vocab, ex, gold, 5, 8);
  REQUIRE(pool.size() >= 1);
  CHECK(pool.size() <= 6);
  CHECK(pool[0].source == RewardSample::Source::Gold);
  CHECK(pool[0].question == ex.question);
  CHECK(pool[0].reward == 1.0);
  for (std::size_t i = 1; i < pool.size(); ++i) {
    CHECK(pool[i].source == RewardSample::Source::Beam);
    CHECK(pool[i].question != ex.question);
  }
  // Marker answers only when asked about the marker; these questions never are.
  const qa::MarkerOracle marker("marker");
  for (const auto& s : build_sample_pool(net, c.vocab, ex, marker, 5, 8)) {
    const bool asks = std::find(s.question.begin(), s.question.end(), "marker") != s.question.end();
    CHECK(s.reward == (asks ? 1.0 : 0.0));
  }
}

TEST_CASE("an oracle failure scores zero instead of aborting") {
  struct Throwing : qa::QaOracle {
    qa::OracleAnswer answer(const qa::OracleRequest&) const override { throw std::runtime_error("down"); }
    std::string name() const override { return "throwing"; }
  };
  Corpus c(toy::marker_corpus(10, 1, 1.0));
  ReDRModel net(tiny_training_config(), c.vocab.size(), 3);
  for (const auto& s : build_sample_pool(net, c.vocab, c.examples[0], Throwing{}, 3, 6)) CHECK(s.reward == 0.0);
}

TEST_CASE("zero RL updates leave the model unchanged") {
  Corpus c(toy::marker_corpus(11, 4, 0.5));
  TrainConfig cfg = tiny_training_config();
  cfg.rl_max_updates = 0;
  ReDRModel net(cfg, c.vocab.size(), 1);
  const auto before = snapshot(net);
  const auto r = finetune_rl(net, c.vocab, c.examples, {}, qa::MarkerOracle("marker"));
  CHECK(r.updates == 0);
  CHECK(snapshot(net) == before);
}

TEST_CASE("RL with a fixed seed has an identical reward trajectory") {
  Corpus c(toy::marker_corpus(12, 6, 0.5));
  TrainConfig cfg = tiny_training_config();
  cfg.rl_max_updates = 12;
  cfg.rl_eval_every = 4;
  cfg.rl_learning_rate = 0.05;
  cfg.beam_size = 3;
  std::vector<double> runs[2];
  std::vector<double> devs[2];
  for (int k = 0; k < 2; ++k) {
    ReDRModel net(cfg, c.vocab.size(), 6);
    const auto r = finetune_rl(net, c.vocab, c.examples, c.examples, qa::MarkerOracle("marker"));
    runs[k] = r.pool_rewards;
    devs[k] = r.dev_rewards;
  }
  CHECK(runs[0].size() == 12);
  CHECK(runs[0] == runs[1]);
  CHECK(devs[0] == devs[1]);
}

TEST_CASE("RL aborts when no sample ever earns reward") {
  Corpus c(toy::marker_corpus(13, 3, 0.0));
  TrainConfig cfg = tiny_training_config();
  cfg.rl_max_updates = 50;
  ReDRModel net(cfg, c.vocab.size(), 2);
  const auto r = finetune_rl(net, c.vocab, c.examples, {}, qa::NullOracle{});
  CHECK(r.aborted);
  CHECK(r.updates == 3);
  CHECK_FALSE(r.diagnostics.empty());
}
