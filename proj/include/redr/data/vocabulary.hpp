#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "redr/data/text.hpp"

namespace redr::data {

/// Token <-> id bijection. Ids 0..6 are reserved and identical in every
/// vocabulary; corpus tokens follow in descending frequency, ties broken
/// lexicographically.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static constexpr int kSepQ = 4;
  static constexpr int kSepA = 5;
  static constexpr int kHistEmpty = 6;
  static constexpr std::array<std::string_view, 7> kReserved = {"<pad>", "<unk>", "<s>",         "</s>",
                                                                "<q>",   "<a>",   "<hist-empty>"};

  Vocabulary();

  /// Keeps tokens whose frequency is at least `min_freq`.
  static Vocabulary build(std::span<const Tokens> corpus, int min_freq);

  /// Restores a vocabulary from its id-ordered token list; the reserved
  /// prefix must match exactly.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  int id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(int id) const;
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<int> encode(std::span<const std::string> tokens) const;
  Tokens decode(std::span<const int> ids) const;

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  void add(std::string token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace redr::data
