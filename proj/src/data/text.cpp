#include "redr/data/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace redr::data {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

constexpr std::array<std::string_view, 22> kAbbreviations = {
    "mr", "mrs", "ms", "dr", "prof", "st", "jr", "sr", "vs", "etc", "e.g", "i.e",
    "inc", "ltd", "co", "mt", "no", "gen", "col", "lt", "sgt", "u.s"};

bool is_closing(char c) { return c == '"' || c == '\'' || c == ')' || c == ']'; }

bool is_abbreviation(std::string_view text, std::size_t dot) {
  std::size_t start = dot;
  while (start > 0 && !is_space(text[start - 1]) && text[start - 1] != '(' && text[start - 1] != '"') --start;
  if (start == dot) return false;
  std::string word;
  for (std::size_t i = start; i < dot; ++i) word.push_back(lower(text[i]));
  return std::find(kAbbreviations.begin(), kAbbreviations.end(), word) != kAbbreviations.end();
}

}  // namespace

std::vector<Token> tokenize_with_spans(std::string_view text) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (is_space(c)) {
      ++i;
    } else if (is_punct(c)) {
      out.push_back({std::string(1, c), {i, i + 1}});
      ++i;
    } else {
      const std::size_t start = i;
      std::string word;
      while (i < text.size() && !is_space(text[i]) && !is_punct(text[i])) word.push_back(lower(text[i++]));
      out.push_back({std::move(word), {start, i}});
    }
  }
  return out;
}

Tokens tokenize(std::string_view text) {
  Tokens out;
  for (auto& t : tokenize_with_spans(text)) out.push_back(std::move(t.text));
  return out;
}

bool is_punctuation(std::string_view token) {
  return !token.empty() && std::all_of(token.begin(), token.end(), is_punct);
}

std::string detokenize(std::span<const std::string> tokens) {
  static constexpr std::string_view kAttachLeft = ".,?!;:)]}%";
  static constexpr std::string_view kAttachRight = "([{$";
  std::string out;
  bool glue_next = false;
  for (const auto& tok : tokens) {
    const bool attach_left = tok.size() == 1 && kAttachLeft.find(tok[0]) != std::string_view::npos;
    if (!out.empty() && !attach_left && !glue_next) out.push_back(' ');
    out += tok;
    glue_next = tok.size() == 1 && kAttachRight.find(tok[0]) != std::string_view::npos;
  }
  return out;
}

std::vector<CharSpan> split_sentences(std::string_view text) {
  std::vector<CharSpan> out;
  auto emit = [&](std::size_t begin, std::size_t end) {
    while (begin < end && is_space(text[begin])) ++begin;
    while (end > begin && is_space(text[end - 1])) --end;
    if (begin < end) out.push_back({begin, end});
  };

  std::size_t start = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c != '.' && c != '?' && c != '!') {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && (text[j] == '.' || text[j] == '?' || text[j] == '!')) ++j;
    while (j < text.size() && is_closing(text[j])) ++j;
    const bool at_boundary = j == text.size() || is_space(text[j]);
    const bool abbreviation = c == '.' && j == i + 1 && is_abbreviation(text, i);
    if (at_boundary && !abbreviation) {
      emit(start, j);
      start = j;
    }
    i = j;
  }
  emit(start, text.size());
  return out;
}

}  // namespace redr::data
