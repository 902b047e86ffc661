#include "redr/model/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <set>
#include <tuple>
#include <unordered_map>

#include "redr/error.hpp"

namespace redr::model {

ModelInputs prepare_inputs(const data::Vocabulary& vocab, const data::Tokens& history,
                           const data::Tokens& rationale) {
  if (rationale.empty()) throw ShapeError("prepare_inputs: empty rationale");
  ModelInputs in;
  if (history.empty()) {
    in.history_ids = {data::Vocabulary::kHistEmpty};
  } else {
    in.history_ids = vocab.encode(history);
  }
  in.source = make_copy_source(vocab, rationale);
  return in;
}

std::vector<int> target_ids(const data::Vocabulary& vocab, const CopySource& source, const data::Tokens& question) {
  std::vector<int> ids;
  ids.reserve(question.size() + 1);
  for (const auto& tok : question) ids.push_back(source.output_id(vocab, tok));
  ids.push_back(data::Vocabulary::kEos);
  return ids;
}

Var nll_of_distributions(std::span<const Var> probs, std::span<const int> targets) {
  if (probs.size() != targets.size()) {
    throw ShapeError("nll: " + std::to_string(probs.size()) + " distributions for " + std::to_string(targets.size()) +
                     " targets");
  }
  if (probs.empty()) throw ShapeError("nll: empty target sequence");
  std::vector<Var> terms;
  terms.reserve(probs.size());
  for (std::size_t t = 0; t < probs.size(); ++t) {
    const int y = targets[t];
    if (y < 0 || y >= probs[t].rows()) {
      throw ShapeError("nll: target id " + std::to_string(y) + " outside a distribution of size " +
                       std::to_string(probs[t].rows()));
    }
    terms.push_back(ad::log(ad::pick(probs[t], y)));
  }
  return ad::scale(ad::add_n<Real>(terms), Real(-1));
}

ReDRModel::ReDRModel(const TrainConfig& config, int vocab_size, std::uint64_t seed)
    : embedding("embedding", config.embedding_dim, vocab_size),
      encoder(config),
      decoder(config, vocab_size),
      config_(config),
      vocab_size_(vocab_size) {
  config.validate();
  if (vocab_size <= data::Vocabulary::kHistEmpty) throw ConfigError("model: vocabulary lacks the reserved tokens");
  embedding.requires_grad = config.finetune_embeddings;
  std::mt19937_64 rng(seed);
  for (Param* p : parameters()) init_uniform(*p, config.init_scale, rng);
}

void ReDRModel::update_config(const TrainConfig& config) {
  config.validate();
  const auto arch = [](const TrainConfig& c) {
    return std::tuple(c.hidden_size, c.embedding_dim, c.lstm_layers, c.reasoning_layers, c.decision_maker);
  };
  if (arch(config) != arch(config_)) throw ConfigError("config changes the architecture of a trained model");
  config_ = config;
  embedding.requires_grad = config.finetune_embeddings;
}

std::vector<Param*> ReDRModel::parameters() {
  std::vector<Param*> out{&embedding};
  encoder.collect(out);
  decoder.collect(out);
  return out;
}

std::vector<const Param*> ReDRModel::parameters() const {
  auto mut = const_cast<ReDRModel*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

Encoded ReDRModel::encode(Tape& tape, const ModelInputs& inputs, const Dropout& dropout) const {
  Encoded e;
  e.embedding = tape.parameter(embedding);
  e.history = encode_bilstm(inputs.history_ids, e.embedding, encoder.history, dropout);
  e.rationale = encode_bilstm(inputs.source.input_ids, e.embedding, encoder.rationale, dropout);
  e.reasoning = dynamic_reason(e.rationale, e.history, config_.reasoning_layers, encoder, config_.decision_maker);
  e.memory = make_memory(e.reasoning.output(), decoder);
  return e;
}

DecoderState ReDRModel::start(const Encoded& encoded) const { return initial_state(encoded.memory, decoder); }

StepOutput ReDRModel::step(const Encoded& encoded, const CopySource& source, const DecoderState& state,
                           int prev_output_id, const Dropout& dropout) const {
  DecodeStep ds = decode_step(state, source.embedding_id(prev_output_id), encoded.memory, encoded.embedding, decoder,
                              dropout);
  StepOutput out;
  out.dist = copy_mix(ds.generation, ds.weights, source, ds.state.output(), ds.state.read, ds.prev_embedding, decoder);
  out.state = std::move(ds.state);
  return out;
}

SequenceLoss ReDRModel::sequence_nll(Tape& tape, const ModelInputs& inputs, std::span<const int> targets,
                                     const Dropout& dropout) const {
  if (targets.empty()) throw ShapeError("sequence_nll: empty target");
  const Encoded enc = encode(tape, inputs, dropout);
  DecoderState state = start(enc);
  std::vector<Var> probs;
  SequenceLoss loss;
  int prev = data::Vocabulary::kBos;
  for (const int y : targets) {
    StepOutput so = step(enc, inputs.source, state, prev, dropout);
    const auto& p = so.dist.probs.value();
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < p.rows(); ++i) {
      if (p(i, 0) > p(best, 0)) best = i;
    }
    loss.correct += best == y ? 1 : 0;
    probs.push_back(so.dist.probs);
    state = std::move(so.state);
    prev = y;
  }
  loss.tokens = static_cast<int>(targets.size());
  loss.nll = nll_of_distributions(probs, targets);
  return loss;
}

namespace {

struct NeuralState {
  DecoderState decoder;
  std::vector<double> lambdas;
  std::vector<std::vector<double>> alphas;
};

class NeuralStepModel {
 public:
  NeuralStepModel(const ReDRModel& model, Tape& tape, const ModelInputs& inputs)
      : model_(model), inputs_(inputs), encoded_(model.encode(tape, inputs)) {}

  NeuralState initial() const { return {model_.start(encoded_), {}, {}}; }

  std::pair<NeuralState, Eigen::VectorXd> step(const NeuralState& s, int prev) const {
    StepOutput so = model_.step(encoded_, inputs_.source, s.decoder, prev);
    NeuralState next{std::move(so.state), s.lambdas, s.alphas};
    next.lambdas.push_back(so.dist.lambda.scalar());
    const auto& a = so.dist.alpha.value();
    next.alphas.emplace_back(a.data(), a.data() + a.size());
    Eigen::VectorXd logp = so.dist.probs.value().col(0).array().log();
    return {std::move(next), std::move(logp)};
  }

 private:
  const ReDRModel& model_;
  const ModelInputs& inputs_;
  Encoded encoded_;
};

Generated to_generated(const BeamHypothesis<NeuralState>& h, const data::Vocabulary& vocab, const CopySource& src) {
  Generated g;
  g.log_prob = h.log_prob;
  g.score = h.score();
  g.finished = h.finished;
  g.lambda_trace = h.state.lambdas;
  g.alpha_trace = h.state.alphas;
  for (const int id : h.tokens) {
    if (id == data::Vocabulary::kEos) break;
    g.ids.push_back(id);
    g.tokens.push_back(src.surface(vocab, id));
  }
  return g;
}

}  // namespace

std::vector<Generated> generate_beam(const ReDRModel& model, const data::Vocabulary& vocab, const ModelInputs& inputs,
                                     int beam, int max_len) {
  Tape tape(false);
  NeuralStepModel sm(model, tape, inputs);
  std::vector<Generated> out;
  for (const auto& h : beam_search(sm, beam, data::Vocabulary::kBos, data::Vocabulary::kEos, max_len)) {
    out.push_back(to_generated(h, vocab, inputs.source));
  }
  return out;
}

Generated generate_greedy(const ReDRModel& model, const data::Vocabulary& vocab, const ModelInputs& inputs,
                          int max_len) {
  Tape tape(false);
  NeuralStepModel sm(model, tape, inputs);
  return to_generated(greedy_decode(sm, data::Vocabulary::kBos, data::Vocabulary::kEos, max_len), vocab,
                      inputs.source);
}

// --- checkpoint -------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'R', 'E', 'D', 'R', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_string(std::ostream& os, const std::string& s) {
  put<std::uint64_t>(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename T>
T get(std::istream& is, const std::string& what) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw ParseError("checkpoint truncated while reading " + what);
  return v;
}

std::string get_string(std::istream& is, const std::string& what) {
  const auto n = get<std::uint64_t>(is, what);
  if (n > (1ULL << 32)) throw ParseError("checkpoint: implausible length for " + what);
  std::string s(n, '\0');
  if (!is.read(s.data(), static_cast<std::streamsize>(n))) throw ParseError("checkpoint truncated while reading " + what);
  return s;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ReDRModel& model, const data::Vocabulary& vocab) {
  if (vocab.size() != model.vocab_size()) {
    throw Error("save_checkpoint: vocabulary has " + std::to_string(vocab.size()) + " tokens, model expects " +
                std::to_string(model.vocab_size()));
  }
  const auto params = model.parameters();
  std::set<std::string> names;
  for (const Param* p : params) {
    if (!names.insert(p->name).second) throw Error("save_checkpoint: duplicate tensor name " + p->name);
  }
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot write checkpoint " + tmp);
    os.write(kMagic, sizeof kMagic);
    put(os, kVersion);
    put_string(os, format_config(model.config()));
    put<std::uint64_t>(os, static_cast<std::uint64_t>(vocab.size()));
    for (const auto& tok : vocab.tokens()) put_string(os, tok);
    put<std::uint64_t>(os, params.size());
    for (const Param* p : params) {
      put_string(os, p->name);
      put<std::int64_t>(os, p->value.rows());
      put<std::int64_t>(os, p->value.cols());
      os.write(reinterpret_cast<const char*>(p->value.data()),
               static_cast<std::streamsize>(sizeof(Real) * static_cast<std::size_t>(p->value.size())));
    }
    if (!os) throw Error("failed writing checkpoint " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open checkpoint " + path.string());
  char magic[sizeof kMagic];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw ParseError(path.string() + " is not a checkpoint");
  }
  const auto version = get<std::uint32_t>(is, "version");
  if (version != kVersion) throw ParseError("checkpoint version " + std::to_string(version) + " is not supported");
  const TrainConfig config = parse_config(get_string(is, "config"));
  const auto vocab_n = get<std::uint64_t>(is, "vocabulary size");
  std::vector<std::string> tokens;
  tokens.reserve(vocab_n);
  for (std::uint64_t i = 0; i < vocab_n; ++i) tokens.push_back(get_string(is, "vocabulary"));
  LoadedCheckpoint out{data::Vocabulary::from_tokens(std::move(tokens)),
                       ReDRModel(config, static_cast<int>(vocab_n), 0)};
  std::unordered_map<std::string, Param*> by_name;
  for (Param* p : out.model.parameters()) by_name[p->name] = p;
  const auto count = get<std::uint64_t>(is, "tensor count");
  if (count != by_name.size()) {
    throw ParseError("checkpoint holds " + std::to_string(count) + " tensors, model has " +
                     std::to_string(by_name.size()));
  }
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string name = get_string(is, "tensor name");
    const auto rows = get<std::int64_t>(is, name);
    const auto cols = get<std::int64_t>(is, name);
    auto it = by_name.find(name);
    if (it == by_name.end()) throw ParseError("checkpoint tensor " + name + " is not a model parameter");
    Param& p = *it->second;
    if (rows != p.value.rows() || cols != p.value.cols()) {
      throw ParseError("checkpoint tensor " + name + " is " + ad::shape_string(rows, cols) + ", model expects " +
                       ad::shape_string(p.value.rows(), p.value.cols()));
    }
    if (!is.read(reinterpret_cast<char*>(p.value.data()),
                 static_cast<std::streamsize>(sizeof(Real) * static_cast<std::size_t>(p.value.size())))) {
      throw ParseError("checkpoint truncated in tensor " + name);
    }
    p.zero_grad();
    by_name.erase(it);
  }
  return out;
}

}  // namespace redr::model
