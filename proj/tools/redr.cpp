// Command-line entry point: train, finetune-rl, generate, evaluate, analyze,
// gradcheck. Data goes to files or stdout, logs to stderr; failures print a
// JSON error object on stderr and exit nonzero.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "redr/config.hpp"
#include "redr/conversation/rollout.hpp"
#include "redr/data/cache.hpp"
#include "redr/data/corpus.hpp"
#include "redr/data/embeddings.hpp"
#include "redr/error.hpp"
#include "redr/eval/metrics.hpp"
#include "redr/log.hpp"
#include "redr/toy.hpp"
#include "redr/train/training.hpp"

namespace {

using namespace redr;

constexpr int kUsageExit = 2;

void fail(const std::string& kind, const std::string& message) {
  std::cerr << nlohmann::json{{"error", kind}, {"message", message}}.dump() << '\n';
}

std::vector<data::Tokens> read_token_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::vector<data::Tokens> out;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    data::Tokens toks;
    for (std::string t; ss >> t;) toks.push_back(t);
    out.push_back(std::move(toks));
  }
  return out;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

struct LogFile {
  std::ofstream file;
  std::ostream* stream() { return file.is_open() ? &file : nullptr; }
  explicit LogFile(const std::string& path) {
    if (!path.empty()) {
      file.open(path, std::ios::trunc);
      if (!file) throw Error("cannot write " + path);
    }
  }
};

data::AssemblyOptions assembly_options(const TrainConfig& c) {
  data::AssemblyOptions o;
  o.history.max_tokens = static_cast<std::size_t>(c.history_max_tokens);
  o.history.max_turns = static_cast<std::size_t>(c.history_max_turns);
  return o;
}

data::Vocabulary build_vocabulary(const std::vector<data::ConversationExample>& examples, int min_freq) {
  std::vector<data::Tokens> texts;
  for (const auto& ex : examples) {
    texts.push_back(ex.rationale_tokens);
    texts.push_back(ex.history_tokens);
    texts.push_back(ex.target_question_tokens);
  }
  return data::Vocabulary::build(texts, min_freq);
}

struct Corpus {
  std::vector<data::CoqaDocument> docs;
  std::vector<train::PreparedExample> examples;
};

Corpus load_corpus(const std::string& path, const data::Vocabulary* vocab, const TrainConfig& cfg,
                   std::vector<data::ConversationExample>* raw = nullptr) {
  Corpus c;
  c.docs = data::parse_coqa_file(path);
  auto examples = data::assemble_examples(c.docs, assembly_options(cfg));
  if (examples.empty()) throw Error(path + " holds no usable examples");
  if (raw != nullptr) *raw = examples;
  if (vocab != nullptr) c.examples = train::prepare_examples(*vocab, examples, c.docs);
  return c;
}

TrainConfig config_from(const std::string& path) { return path.empty() ? TrainConfig{} : load_config(path); }

int run_train(const std::string& config_path, const std::string& coqa, const std::string& dev, const std::string& out,
              const std::string& log_path, const std::string& embeddings, const std::string& cache) {
  const TrainConfig cfg = config_from(config_path);
  std::vector<data::ConversationExample> raw;
  Corpus train_corpus = load_corpus(coqa, nullptr, cfg, &raw);
  const data::Vocabulary vocab = build_vocabulary(raw, cfg.min_freq);
  train_corpus.examples = train::prepare_examples(vocab, raw, train_corpus.docs);
  if (!cache.empty()) data::DatasetCache::from_examples(vocab, raw).save(cache);
  Corpus dev_corpus;
  if (!dev.empty()) dev_corpus = load_corpus(dev, &vocab, cfg);

  model::ReDRModel net(cfg, vocab.size(), cfg.seed);
  if (!embeddings.empty()) net.embedding.value = data::load_embeddings(embeddings, vocab, cfg.embedding_dim, cfg.seed);
  LogFile log_file(log_path);
  train::MleOptions opts;
  opts.dev = dev_corpus.examples;
  opts.checkpoint = out;
  opts.log = log_file.stream();
  const train::MleResult r = train::train_mle(net, vocab, train_corpus.examples, opts);
  nlohmann::ordered_json summary = {{"examples", train_corpus.examples.size()},
                                    {"vocabulary", vocab.size()},
                                    {"steps", r.steps},
                                    {"epochs", r.epochs.size()},
                                    {"diverged", r.diverged},
                                    {"checkpoint", out}};
  if (!r.epochs.empty()) summary["final_train_loss"] = r.epochs.back().train_loss;
  if (r.best_dev_loss) summary["best_dev_loss"] = *r.best_dev_loss;
  if (r.diverged) summary["diagnostics"] = r.diagnostics;
  std::cout << summary.dump(2) << '\n';
  return r.diverged ? 1 : 0;
}

int run_finetune(const std::string& config_path, const std::string& checkpoint, const std::string& coqa,
                 const std::string& dev, const std::string& oracle_spec, const std::string& out,
                 const std::string& log_path) {
  model::LoadedCheckpoint ck = model::load_checkpoint(checkpoint);
  if (!config_path.empty()) ck.model.update_config(load_config(config_path));
  const TrainConfig& cfg = ck.model.config();
  const Corpus train_corpus = load_corpus(coqa, &ck.vocab, cfg);
  Corpus dev_corpus;
  if (!dev.empty()) dev_corpus = load_corpus(dev, &ck.vocab, cfg);
  const auto oracle = qa::make_oracle(oracle_spec);
  LogFile log_file(log_path);
  const train::RlResult r = train::finetune_rl(ck.model, ck.vocab, train_corpus.examples, dev_corpus.examples, *oracle,
                                               {out, log_file.stream()});
  model::save_checkpoint(out, ck.model, ck.vocab);
  nlohmann::ordered_json summary = {{"updates", r.updates},
                                    {"initial_dev_reward", r.initial_dev_reward},
                                    {"best_dev_reward", r.best_dev_reward},
                                    {"plateaued", r.plateaued},
                                    {"aborted", r.aborted},
                                    {"checkpoint", out}};
  if (r.aborted) summary["diagnostics"] = r.diagnostics;
  std::cout << summary.dump(2) << '\n';
  return r.aborted ? 1 : 0;
}

int run_generate(const std::string& config_path, const std::string& checkpoint, const std::string& squad,
                 const std::string& coqa, int turns, const std::string& oracle_spec, const std::string& out,
                 const std::string& trace, int limit) {
  model::LoadedCheckpoint ck = model::load_checkpoint(checkpoint);
  if (!config_path.empty()) ck.model.update_config(load_config(config_path));
  std::vector<data::Passage> passages;
  if (!squad.empty()) {
    passages = data::parse_squad_file(squad);
  } else {
    for (auto& d : data::parse_coqa_file(coqa)) passages.push_back(std::move(d.passage));
  }
  if (limit > 0 && passages.size() > static_cast<std::size_t>(limit)) passages.resize(static_cast<std::size_t>(limit));
  const auto oracle = qa::make_oracle(oracle_spec);
  const auto opts = conversation::rollout_options(ck.model.config());
  std::vector<conversation::GeneratedConversation> convs;
  for (const auto& p : passages) {
    convs.push_back(conversation::generate_conversation(p, ck.model, ck.vocab, *oracle, turns, opts));
  }
  write_file(out, conversation::to_coqa_json(convs, passages));
  if (!trace.empty()) write_file(trace, conversation::to_trace_jsonl(convs));
  std::cout << nlohmann::json{{"conversations", convs.size()}, {"turns", turns}, {"output", out}}.dump() << '\n';
  return 0;
}

int run_evaluate(const std::string& hyp, const std::string& ref) {
  const auto h = read_token_lines(hyp);
  const auto r = read_token_lines(ref);
  std::cout << eval::to_json(eval::evaluate(h, r)) << '\n';
  return 0;
}

int run_analyze(const std::string& questions) {
  std::cout << eval::to_json(eval::linguistic_profile(read_token_lines(questions))) << '\n';
  return 0;
}

int run_gradcheck(int seeds, double epsilon, double tolerance) {
  double worst = 0.0;
  for (int s = 1; s <= seeds; ++s) {
    const auto r = toy::full_model_grad_check(static_cast<std::uint64_t>(s), epsilon);
    worst = std::max(worst, r.max_relative_error);
    std::cout << nlohmann::ordered_json{{"seed", s},
                                        {"max_relative_error", r.max_relative_error},
                                        {"worst_parameter", r.worst_parameter},
                                        {"worst_index", r.worst_index},
                                        {"analytic", r.worst_analytic},
                                        {"max_absolute_error", r.max_absolute_error},
                                        {"numeric", r.worst_numeric},
                                        {"entries", r.entries_checked}}
                     .dump()
              << '\n';
  }
  std::cout << nlohmann::ordered_json{{"max_relative_error", worst}, {"tolerance", tolerance},
                                      {"pass", worst < tolerance}}
                   .dump()
            << '\n';
  return worst < tolerance ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conversational question generation with dynamic reasoning"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "key = value config file")->check(CLI::ExistingFile);

  std::string coqa, dev, out = "redr.ckpt", log_path, embeddings, cache, checkpoint, oracle = "lexical", squad,
                         trace, hyp, ref, questions;
  int turns = 5, limit = 0, seeds = 20;
  double epsilon = 1e-5, tolerance = 1e-4;

  auto* train_cmd = app.add_subcommand("train", "MLE training on a CoQA-format corpus");
  train_cmd->add_option("--coqa", coqa, "training corpus")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--dev", dev, "dev corpus for checkpoint selection")->check(CLI::ExistingFile);
  train_cmd->add_option("--out", out, "checkpoint path");
  train_cmd->add_option("--log", log_path, "JSONL training log");
  train_cmd->add_option("--embeddings", embeddings, "text embeddings to initialize from")->check(CLI::ExistingFile);
  train_cmd->add_option("--cache", cache, "write the tokenized dataset cache here");

  auto* rl_cmd = app.add_subcommand("finetune-rl", "REINFORCE fine-tuning against a QA oracle");
  rl_cmd->add_option("--checkpoint", checkpoint, "MLE checkpoint")->required()->check(CLI::ExistingFile);
  rl_cmd->add_option("--coqa", coqa, "training corpus")->required()->check(CLI::ExistingFile);
  rl_cmd->add_option("--dev", dev, "dev corpus for reward tracking")->check(CLI::ExistingFile);
  rl_cmd->add_option("--oracle", oracle, "lexical | gold | null | marker:<tok> | pipe:<cmd>");
  rl_cmd->add_option("--out", out, "checkpoint path");
  rl_cmd->add_option("--log", log_path, "JSONL training log");

  auto* gen_cmd = app.add_subcommand("generate", "roll out conversations over passages");
  gen_cmd->add_option("--checkpoint", checkpoint, "model checkpoint")->required()->check(CLI::ExistingFile);
  auto* squad_opt = gen_cmd->add_option("--squad", squad, "SQuAD v1.1 passages")->check(CLI::ExistingFile);
  auto* coqa_opt = gen_cmd->add_option("--coqa", coqa, "CoQA passages")->check(CLI::ExistingFile);
  squad_opt->excludes(coqa_opt);
  gen_cmd->add_option("--turns", turns, "turns per passage")->check(CLI::Range(1, 1000000));
  gen_cmd->add_option("--oracle", oracle, "lexical | gold | null | marker:<tok> | pipe:<cmd>");
  gen_cmd->add_option("--out", out, "CoQA-schema output")->required();
  gen_cmd->add_option("--trace", trace, "per-turn generation trace (JSONL)");
  gen_cmd->add_option("--limit", limit, "at most this many passages")->check(CLI::NonNegativeNumber);

  auto* eval_cmd = app.add_subcommand("evaluate", "BLEU, ROUGE-L, Dist-n and Ent-4 of hypotheses");
  eval_cmd->add_option("--hyp", hyp, "one tokenized question per line")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--ref", ref, "one tokenized question per line")->required()->check(CLI::ExistingFile);

  auto* analyze_cmd = app.add_subcommand("analyze", "question type and coreference profile");
  analyze_cmd->add_option("--questions", questions, "one tokenized question per line")
      ->required()
      ->check(CLI::ExistingFile);

  auto* gc_cmd = app.add_subcommand("gradcheck", "finite-difference check of the full model at toy dims");
  gc_cmd->add_option("--seeds", seeds, "number of seeds")->check(CLI::PositiveNumber);
  gc_cmd->add_option("--epsilon", epsilon, "central-difference step");
  gc_cmd->add_option("--tolerance", tolerance, "maximum relative error");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << app.help() << '\n';
    fail("usage", e.what());
    return kUsageExit;
  }

  try {
    if (*gen_cmd && squad.empty() && coqa.empty()) throw ConfigError("generate needs --squad or --coqa");
    if (*train_cmd) return run_train(config_path, coqa, dev, out, log_path, embeddings, cache);
    if (*rl_cmd) return run_finetune(config_path, checkpoint, coqa, dev, oracle, out, log_path);
    if (*gen_cmd) return run_generate(config_path, checkpoint, squad, coqa, turns, oracle, out, trace, limit);
    if (*eval_cmd) return run_evaluate(hyp, ref);
    if (*analyze_cmd) return run_analyze(questions);
    if (*gc_cmd) return run_gradcheck(seeds, epsilon, tolerance);
  } catch (const ConfigError& e) {
    fail("config", e.what());
    return 1;
  } catch (const ParseError& e) {
    fail("parse", e.what());
    return 1;
  } catch (const NumericError& e) {
    fail("numeric", e.what());
    return 1;
  } catch (const std::exception& e) {
    fail("runtime", e.what());
    return 1;
  }
  return 0;
}
