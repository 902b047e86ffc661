#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace redr::data {

using Tokens = std::vector<std::string>;

/// Half-open byte range [begin, end) into a source string.
struct CharSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool operator==(const CharSpan&) const = default;
};

struct Token {
  std::string text;
  CharSpan span;
};

/// Lowercases and splits on whitespace and ASCII punctuation. Every
/// punctuation character becomes its own token.
std::vector<Token> tokenize_with_spans(std::string_view text);
Tokens tokenize(std::string_view text);

/// Joins tokens with single spaces, attaching closing punctuation to the
/// preceding token and opening brackets to the following one.
std::string detokenize(std::span<const std::string> tokens);

bool is_punctuation(std::string_view token);

/// Sentence boundaries: a run of [.?!] (plus trailing closing quotes or
/// brackets) followed by whitespace or end of text, unless the word before a
/// '.' is a known abbreviation. Trailing text without a terminator forms the
/// last sentence. Spans are trimmed of surrounding whitespace.
std::vector<CharSpan> split_sentences(std::string_view text);

}  // namespace redr::data
