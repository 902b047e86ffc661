#include "redr/train/training.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>
#include <ostream>
#include <random>
#include <set>

#include "redr/autodiff/sgd.hpp"
#include "redr/error.hpp"
#include "redr/log.hpp"

namespace redr::train {

using data::Vocabulary;
using model::Param;

PreparedExample prepare_example(const Vocabulary& vocab, const data::ConversationExample& example,
                                std::vector<data::Tokens> passage_sentences) {
  const auto& q = example.target_question_tokens;
  const bool only_pad = std::all_of(q.begin(), q.end(), [](const std::string& t) {
    return t == Vocabulary::kReserved[Vocabulary::kPad];
  });
  if (only_pad) throw Error("example " + example.id + ": target question is empty or all padding");
  PreparedExample p;
  p.id = example.id;
  p.inputs = model::prepare_inputs(vocab, example.history_tokens, example.rationale_tokens);
  p.targets = model::target_ids(vocab, p.inputs.source, q);
  p.rationale = example.rationale_tokens;
  p.history = example.history_tokens;
  p.question = q;
  p.answer = example.answer_tokens;
  p.passage_sentences = passage_sentences.empty() ? std::vector<data::Tokens>{example.rationale_tokens}
                                                  : std::move(passage_sentences);
  return p;
}

std::vector<PreparedExample> prepare_examples(const Vocabulary& vocab,
                                              std::span<const data::ConversationExample> examples,
                                              std::span<const data::CoqaDocument> docs) {
  std::vector<PreparedExample> out;
  out.reserve(examples.size());
  std::vector<std::vector<data::Tokens>> sentences(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) sentences[i] = docs[i].passage.tokenized_sentences();
  for (const auto& ex : examples) {
    std::vector<data::Tokens> passage;
    if (ex.document_index < sentences.size()) passage = sentences[ex.document_index];
    out.push_back(prepare_example(vocab, ex, std::move(passage)));
  }
  return out;
}

BatchLoss mle_loss(Tape& tape, const model::ReDRModel& model, std::span<const PreparedExample* const> batch,
                   const model::Dropout& dropout) {
  if (batch.empty()) throw Error("mle_loss: empty batch");
  BatchLoss out;
  std::vector<Var> terms;
  terms.reserve(batch.size());
  for (const PreparedExample* ex : batch) {
    model::SequenceLoss s = model.sequence_nll(tape, ex->inputs, ex->targets, dropout);
    out.tokens += s.tokens;
    out.correct += s.correct;
    terms.push_back(s.nll);
  }
  out.loss = ad::scale(ad::add_n<Real>(terms), Real(1) / static_cast<Real>(batch.size()));
  return out;
}

CorpusStats evaluate_nll(const model::ReDRModel& model, std::span<const PreparedExample> examples) {
  CorpusStats st;
  if (examples.empty()) return st;
  double nll = 0.0;
  long correct = 0;
  for (const auto& ex : examples) {
    Tape tape(false);
    const model::SequenceLoss s = model.sequence_nll(tape, ex.inputs, ex.targets);
    nll += s.nll.scalar();
    st.tokens += s.tokens;
    correct += s.correct;
  }
  st.mean_loss = nll / static_cast<double>(examples.size());
  st.perplexity = std::exp(nll / static_cast<double>(st.tokens));
  st.token_accuracy = static_cast<double>(correct) / static_cast<double>(st.tokens);
  return st;
}

double exact_match_rate(const model::ReDRModel& model, const Vocabulary& vocab,
                        std::span<const PreparedExample> examples, int max_len) {
  if (examples.empty()) return 0.0;
  int hits = 0;
  for (const auto& ex : examples) {
    const model::Generated g = model::generate_greedy(model, vocab, ex.inputs, max_len);
    if (g.finished && g.tokens == ex.question) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(examples.size());
}

ParameterSnapshot snapshot(const model::ReDRModel& model) {
  ParameterSnapshot snap;
  for (const Param* p : model.parameters()) snap.push_back(p->value);
  return snap;
}

void restore(model::ReDRModel& model, const ParameterSnapshot& snap) {
  auto params = model.parameters();
  if (params.size() != snap.size()) throw Error("restore: snapshot does not match the model");
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i]->value = snap[i];
    params[i]->zero_grad();
  }
}

namespace {

void log_line(std::ostream* os, const nlohmann::ordered_json& j) {
  if (os != nullptr) *os << j.dump() << '\n';
}

ad::LearningRateSchedule schedule_of(const TrainConfig& c) {
  return {c.learning_rate, c.lr_decay, c.lr_decay_every, c.lr_decay_start};
}

}  // namespace

MleResult train_mle(model::ReDRModel& model, const Vocabulary& vocab, std::span<const PreparedExample> train,
                    const MleOptions& options) {
  if (train.empty()) throw Error("train_mle: empty training corpus");
  const TrainConfig& cfg = model.config();
  std::mt19937_64 order_rng(cfg.seed);
  std::mt19937_64 dropout_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  const model::Dropout dropout(cfg.dropout, dropout_rng);
  const ad::LearningRateSchedule lr_at = schedule_of(cfg);
  auto params = model.parameters();

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  ParameterSnapshot last_good = snapshot(model);
  ParameterSnapshot best;
  MleResult result;
  const auto batch_size = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 1; epoch <= cfg.max_epochs && !result.diverged; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    double nll_sum = 0.0;
    long tokens = 0;
    long correct = 0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      std::vector<const PreparedExample*> batch;
      for (std::size_t i = start; i < std::min(order.size(), start + batch_size); ++i) {
        batch.push_back(&train[order[i]]);
      }
      try {
        Tape tape;
        const BatchLoss bl = mle_loss(tape, model, batch, dropout);
        const double loss = bl.loss.scalar();
        if (!std::isfinite(loss)) throw NumericError("mle loss is not finite");
        for (Param* p : params) p->zero_grad();
        tape.backward(bl.loss);
        ad::clip_grad_norm<Real>(params, cfg.grad_clip);
        const double lr = lr_at.at(result.steps + 1);
        ad::sgd_step<Real>(params, lr);
        ++result.steps;
        nll_sum += loss * static_cast<double>(batch.size());
        tokens += bl.tokens;
        correct += bl.correct;
        log_line(options.log, {{"step", result.steps}, {"lr", lr}, {"loss", loss}});
      } catch (const NumericError& e) {
        result.diverged = true;
        result.diagnostics = "epoch " + std::to_string(epoch) + ", step " + std::to_string(result.steps + 1) +
                             ": " + e.what() + "; parameters reset to the last completed epoch";
        log::warn("training diverged: " + result.diagnostics);
        restore(model, last_good);
        break;
      }
    }
    if (result.diverged) break;
    last_good = snapshot(model);
    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = nll_sum / static_cast<double>(train.size());
    m.perplexity = std::exp(nll_sum / static_cast<double>(tokens));
    m.token_accuracy = static_cast<double>(correct) / static_cast<double>(tokens);
    if (!options.dev.empty()) {
      m.dev_loss = evaluate_nll(model, options.dev).mean_loss;
      if (!result.best_dev_loss || *m.dev_loss < *result.best_dev_loss) {
        result.best_dev_loss = m.dev_loss;
        best = last_good;
        if (!options.checkpoint.empty()) model::save_checkpoint(options.checkpoint, model, vocab);
      }
    }
    nlohmann::ordered_json j = {{"epoch", epoch},
                                {"train_loss", m.train_loss},
                                {"perplexity", m.perplexity},
                                {"token_accuracy", m.token_accuracy}};
    if (m.dev_loss) j["dev_loss"] = *m.dev_loss;
    log::info(j.dump());
    result.epochs.push_back(m);
  }
  if (!best.empty()) restore(model, best);
  if (!options.checkpoint.empty() && (options.dev.empty() || best.empty())) {
    model::save_checkpoint(options.checkpoint, model, vocab);
  }
  return result;
}

// --- REINFORCE ----------------------------------------------------------------

namespace {

qa::OracleRequest request_for(const PreparedExample& ex, const data::Tokens& question) {
  return {ex.passage_sentences, ex.history, question, ex.answer};
}

double score_question(const PreparedExample& ex, const data::Tokens& question, const qa::QaOracle& oracle,
                      data::Tokens& answer) {
  if (question.empty()) {
    answer = {"unknown"};
    return qa::f1_score(answer, ex.answer);
  }
  try {
    answer = oracle.answer(request_for(ex, question)).answer;
  } catch (const std::exception& e) {
    log::warn("oracle " + oracle.name() + " failed on example " + ex.id + ": " + e.what() + "; reward 0");
    answer = {"unknown"};
    return 0.0;
  }
  return qa::f1_score(answer, ex.answer);
}

double sequence_log_prob(const model::ReDRModel& model, const PreparedExample& ex, std::span<const int> targets) {
  Tape tape(false);
  return -model.sequence_nll(tape, ex.inputs, targets).nll.scalar();
}

}  // namespace

std::vector<RewardSample> build_sample_pool(const model::ReDRModel& model, const Vocabulary& vocab,
                                            const PreparedExample& example, const qa::QaOracle& oracle, int beam,
                                            int max_len) {
  std::vector<RewardSample> pool;
  RewardSample gold;
  gold.question = example.question;
  gold.target_ids = example.targets;
  gold.source = RewardSample::Source::Gold;
  pool.push_back(std::move(gold));

  std::set<std::vector<int>> seen{example.targets};
  for (const model::Generated& g : model::generate_beam(model, vocab, example.inputs, beam, max_len)) {
    std::vector<int> ids = g.ids;
    if (g.finished) ids.push_back(Vocabulary::kEos);
    if (g.tokens == example.question || !seen.insert(ids).second) continue;
    RewardSample s;
    s.question = g.tokens;
    s.target_ids = std::move(ids);
    s.source = RewardSample::Source::Beam;
    pool.push_back(std::move(s));
  }
  for (RewardSample& s : pool) {
    s.reward = score_question(example, s.question, oracle, s.answer);
    s.log_prob = sequence_log_prob(model, example, s.target_ids);
  }
  return pool;
}

double mean_reward(std::span<const RewardSample> pool) {
  if (pool.empty()) return 0.0;
  double total = 0.0;
  for (const auto& s : pool) total += s.reward;
  return total / static_cast<double>(pool.size());
}

namespace {

double baseline_of(std::span<const double> rewards, bool baseline) {
  if (!baseline || rewards.empty()) return 0.0;
  // Equal rewards must cancel exactly; a summed mean can be off by an ulp.
  if (std::all_of(rewards.begin(), rewards.end(), [&](double r) { return r == rewards.front(); })) {
    return rewards.front();
  }
  return std::accumulate(rewards.begin(), rewards.end(), 0.0) / static_cast<double>(rewards.size());
}

}  // namespace

Var reinforce_objective(std::span<const double> rewards, std::span<const Var> log_probs, bool baseline) {
  if (rewards.empty()) throw Error("reinforce: empty sample pool");
  if (rewards.size() != log_probs.size()) {
    throw ShapeError("reinforce: " + std::to_string(rewards.size()) + " rewards for " +
                     std::to_string(log_probs.size()) + " log-probabilities");
  }
  const double b = baseline_of(rewards, baseline);
  std::vector<Var> terms;
  terms.reserve(rewards.size());
  for (std::size_t i = 0; i < rewards.size(); ++i) terms.push_back(ad::scale(log_probs[i], -(rewards[i] - b)));
  return ad::scale(ad::add_n<Real>(terms), Real(1) / static_cast<Real>(rewards.size()));
}

bool zero_advantage(std::span<const double> rewards, bool baseline) {
  const double b = baseline_of(rewards, baseline);
  return std::all_of(rewards.begin(), rewards.end(), [b](double r) { return r - b == 0.0; });
}

ReinforceStep reinforce_step(model::ReDRModel& model, const PreparedExample& example,
                             std::span<const RewardSample> pool, double lr, bool baseline, double grad_clip) {
  if (pool.empty()) throw Error("reinforce_step: empty sample pool");
  ReinforceStep out;
  std::vector<double> rewards;
  for (const auto& s : pool) rewards.push_back(s.reward);
  out.mean_reward = mean_reward(pool);
  if (zero_advantage(rewards, baseline)) {
    out.skipped = true;
    return out;
  }
  Tape tape;
  std::vector<Var> log_probs;
  for (const auto& s : pool) {
    log_probs.push_back(ad::scale(model.sequence_nll(tape, example.inputs, s.target_ids).nll, Real(-1)));
  }
  const Var loss = reinforce_objective(rewards, log_probs, baseline);
  auto params = model.parameters();
  for (Param* p : params) p->zero_grad();
  tape.backward(loss);
  out.grad_norm = ad::clip_grad_norm<Real>(params, grad_clip);
  ad::sgd_step<Real>(params, lr);
  out.loss = loss.scalar();
  return out;
}

double dev_reward(const model::ReDRModel& model, const Vocabulary& vocab, std::span<const PreparedExample> dev,
                  const qa::QaOracle& oracle) {
  if (dev.empty()) return 0.0;
  const TrainConfig& cfg = model.config();
  double total = 0.0;
  for (const auto& ex : dev) {
    const auto beams = model::generate_beam(model, vocab, ex.inputs, cfg.beam_size, cfg.max_question_length);
    data::Tokens answer;
    total += score_question(ex, beams.front().tokens, oracle, answer);
  }
  return total / static_cast<double>(dev.size());
}

RlResult finetune_rl(model::ReDRModel& model, const Vocabulary& vocab, std::span<const PreparedExample> train,
                     std::span<const PreparedExample> dev, const qa::QaOracle& oracle, const RlOptions& options) {
  if (train.empty()) throw Error("finetune_rl: empty training corpus");
  const TrainConfig& cfg = model.config();
  const auto eval_set = dev.empty() ? train : dev;
  RlResult r;
  r.initial_dev_reward = dev_reward(model, vocab, eval_set, oracle);
  r.best_dev_reward = r.initial_dev_reward;
  r.final_dev_reward = r.initial_dev_reward;
  r.dev_rewards.push_back(r.initial_dev_reward);
  if (cfg.rl_max_updates == 0) return r;

  ParameterSnapshot best = snapshot(model);
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  int stale = 0;
  bool evaluated_last = true;
  bool stop = false;

  auto evaluate = [&] {
    const double d = dev_reward(model, vocab, eval_set, oracle);
    r.dev_rewards.push_back(d);
    evaluated_last = true;
    log::info("rl update " + std::to_string(r.updates) + ": dev reward " + std::to_string(d));
    if (d > r.best_dev_reward) {
      r.best_dev_reward = d;
      best = snapshot(model);
      stale = 0;
      if (!options.checkpoint.empty()) model::save_checkpoint(options.checkpoint, model, vocab);
    } else if (++stale >= cfg.rl_patience) {
      r.plateaued = true;
      stop = true;
    }
  };

  while (!stop) {
    std::shuffle(order.begin(), order.end(), rng);
    bool any_reward = false;
    for (const std::size_t idx : order) {
      const PreparedExample& ex = train[idx];
      const auto pool = build_sample_pool(model, vocab, ex, oracle, cfg.beam_size, cfg.max_question_length);
      const double mean = mean_reward(pool);
      any_reward = any_reward || std::any_of(pool.begin(), pool.end(), [](const RewardSample& s) {
                     return s.reward > 0.0;
                   });
      const ReinforceStep step = reinforce_step(model, ex, pool, cfg.rl_learning_rate, cfg.rl_baseline, cfg.grad_clip);
      ++r.updates;
      evaluated_last = false;
      r.pool_rewards.push_back(mean);
      nlohmann::ordered_json j = {
          {"step", r.updates}, {"lr", cfg.rl_learning_rate}, {"loss", step.loss}, {"mean_reward", mean}};
      if (step.skipped) j["skipped"] = true;
      log_line(options.log, j);
      if (r.updates % cfg.rl_eval_every == 0) evaluate();
      if (stop || r.updates >= cfg.rl_max_updates) {
        stop = true;
        break;
      }
    }
    if (!stop && !any_reward) {
      r.aborted = true;
      r.diagnostics = "every sampled question scored reward 0 over a full pass of " + std::to_string(train.size()) +
                      " examples (oracle " + oracle.name() + ", " + std::to_string(r.updates) + " updates)";
      log::warn("rl aborted: " + r.diagnostics);
      break;
    }
  }
  if (!evaluated_last && !r.aborted) evaluate();
  restore(model, best);
  r.final_dev_reward = r.best_dev_reward;
  if (!options.checkpoint.empty() && r.best_dev_reward == r.initial_dev_reward) {
    model::save_checkpoint(options.checkpoint, model, vocab);
  }
  return r;
}

}  // namespace redr::train
