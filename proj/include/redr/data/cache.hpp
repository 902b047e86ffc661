#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "redr/data/corpus.hpp"
#include "redr/data/vocabulary.hpp"

namespace redr::data {

/// Token-id form of a set of examples. Ids below vocab.size() index the
/// vocabulary; larger ids index `extra_tokens`, which keeps out-of-vocabulary
/// surface forms so the cache round-trips losslessly.
struct DatasetCache {
  Vocabulary vocab;
  std::vector<std::string> extra_tokens;

  struct Entry {
    std::string id;
    std::size_t document_index = 0;
    int turn_index = 1;
    std::size_t rationale_sentence = 0;
    std::vector<int> rationale;
    std::vector<int> history;
    std::vector<int> target;
    std::vector<int> answer;
  };
  std::vector<Entry> entries;

  static DatasetCache from_examples(const Vocabulary& vocab, const std::vector<ConversationExample>& examples);
  std::vector<ConversationExample> to_examples() const;

  void save(const std::filesystem::path& path) const;
  static DatasetCache load(const std::filesystem::path& path);
};

}  // namespace redr::data
