#include "redr/data/cache.hpp"

#include <fstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "redr/error.hpp"

namespace redr::data {

using nlohmann::json;

DatasetCache DatasetCache::from_examples(const Vocabulary& vocab, const std::vector<ConversationExample>& examples) {
  DatasetCache cache;
  cache.vocab = vocab;
  std::unordered_map<std::string, int> extra;
  auto encode = [&](const Tokens& toks) {
    std::vector<int> ids;
    ids.reserve(toks.size());
    for (const auto& t : toks) {
      if (vocab.contains(t)) {
        ids.push_back(vocab.id(t));
        continue;
      }
      auto [it, inserted] = extra.emplace(t, vocab.size() + static_cast<int>(cache.extra_tokens.size()));
      if (inserted) cache.extra_tokens.push_back(t);
      ids.push_back(it->second);
    }
    return ids;
  };
  for (const auto& ex : examples) {
    cache.entries.push_back({ex.id, ex.document_index, ex.turn_index, ex.rationale_sentence,
                             encode(ex.rationale_tokens), encode(ex.history_tokens),
                             encode(ex.target_question_tokens), encode(ex.answer_tokens)});
  }
  return cache;
}

std::vector<ConversationExample> DatasetCache::to_examples() const {
  auto decode = [&](const std::vector<int>& ids) {
    Tokens out;
    out.reserve(ids.size());
    for (int id : ids) {
      if (id < vocab.size()) {
        out.push_back(vocab.token(id));
      } else {
        const auto k = static_cast<std::size_t>(id - vocab.size());
        if (k >= extra_tokens.size()) throw ParseError("dataset cache: token id " + std::to_string(id) + " out of range");
        out.push_back(extra_tokens[k]);
      }
    }
    return out;
  };
  std::vector<ConversationExample> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    ConversationExample ex;
    ex.id = e.id;
    ex.document_index = e.document_index;
    ex.turn_index = e.turn_index;
    ex.rationale_sentence = e.rationale_sentence;
    ex.rationale_tokens = decode(e.rationale);
    ex.history_tokens = decode(e.history);
    ex.target_question_tokens = decode(e.target);
    ex.answer_tokens = decode(e.answer);
    out.push_back(std::move(ex));
  }
  return out;
}

void DatasetCache::save(const std::filesystem::path& path) const {
  json root;
  root["format"] = "redr-dataset-cache";
  root["version"] = 1;
  root["vocab"] = vocab.tokens();
  root["extra_tokens"] = extra_tokens;
  json list = json::array();
  for (const auto& e : entries) {
    list.push_back({{"id", e.id},
                    {"document_index", e.document_index},
                    {"turn_index", e.turn_index},
                    {"rationale_sentence", e.rationale_sentence},
                    {"rationale", e.rationale},
                    {"history", e.history},
                    {"target", e.target},
                    {"answer", e.answer}});
  }
  root["entries"] = std::move(list);
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << root.dump() << '\n';
}

DatasetCache DatasetCache::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  json root;
  try {
    root = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError("dataset cache " + path.string() + ": " + e.what());
  }
  if (root.value("format", "") != "redr-dataset-cache") throw ParseError("dataset cache: unrecognized format");
  DatasetCache cache;
  try {
    cache.vocab = Vocabulary::from_tokens(root.at("vocab").get<std::vector<std::string>>());
    cache.extra_tokens = root.at("extra_tokens").get<std::vector<std::string>>();
    for (const auto& e : root.at("entries")) {
      cache.entries.push_back({e.at("id").get<std::string>(), e.at("document_index").get<std::size_t>(),
                               e.at("turn_index").get<int>(), e.at("rationale_sentence").get<std::size_t>(),
                               e.at("rationale").get<std::vector<int>>(), e.at("history").get<std::vector<int>>(),
                               e.at("target").get<std::vector<int>>(), e.at("answer").get<std::vector<int>>()});
    }
  } catch (const json::exception& e) {
    throw ParseError("dataset cache " + path.string() + ": " + e.what());
  }
  return cache;
}

}  // namespace redr::data
