#pragma once

// Relevance and diversity metrics over tokenized questions, plus a
// rule-based profile of question types and coreference markers.

#include <array>
#include <map>
#include <span>
#include <string>

#include "redr/data/text.hpp"

namespace redr::eval {

struct BleuDetail {
  std::array<long, 4> matches{};     // clipped n-gram matches
  std::array<long, 4> candidates{};  // hypothesis n-grams
  std::array<double, 4> precisions{};
  long hypothesis_length = 0;
  long reference_length = 0;
  double brevity_penalty = 0.0;
  double score = 0.0;
};

/// Corpus BLEU-4, one reference per hypothesis, uniform weights. Orders with
/// no match use smoothing technique 4: invcnt starts at 1 and for each such
/// order invcnt *= 5 / ln(total hypothesis length), p_n = 1 / (invcnt * count).
/// The logarithm's argument is floored at 2 and a zero count is read as 1, so
/// short or empty hypotheses never divide by zero; an all-empty corpus
/// scores 0.
BleuDetail bleu_detail(std::span<const data::Tokens> hypotheses, std::span<const data::Tokens> references);
double bleu(std::span<const data::Tokens> hypotheses, std::span<const data::Tokens> references);

std::size_t lcs_length(const data::Tokens& a, const data::Tokens& b);

/// LCS F-measure with beta = 1. Empty hypothesis gives 0; the reference must
/// be non-empty.
double rouge_l(const data::Tokens& hypothesis, const data::Tokens& reference);

/// Mean sentence-level ROUGE-L over aligned pairs.
double rouge_l_corpus(std::span<const data::Tokens> hypotheses, std::span<const data::Tokens> references);

using NgramCounts = std::map<data::Tokens, long>;
NgramCounts count_ngrams(std::span<const data::Tokens> questions, int n);

/// Distinct n-grams over all n-grams, pooled across questions. 0 with a
/// warning when there are none.
double dist_n(std::span<const data::Tokens> questions, int n);

/// Natural-log entropy of the pooled n-gram distribution; 0 when empty.
double ent_n(std::span<const data::Tokens> questions, int n = 4);

struct MetricReport {
  double bleu = 0.0;
  double rouge_l = 0.0;
  double dist1 = 0.0;
  double dist2 = 0.0;
  double ent4 = 0.0;
  long unigrams = 0;
  long distinct_unigrams = 0;
  long bigrams = 0;
  long distinct_bigrams = 0;
  long fourgrams = 0;
  long distinct_fourgrams = 0;
  std::size_t count = 0;
};

MetricReport evaluate(std::span<const data::Tokens> hypotheses, std::span<const data::Tokens> references);
std::string to_json(const MetricReport& report);

struct LinguisticProfile {
  std::map<std::string, double> type_fractions;  // what which when where who why yes-no other
  double mean_length = 0.0;
  double explicit_coref = 0.0;
  double implicit_coref = 0.0;
  std::size_t count = 0;
};

/// Question type from the leading token; explicit coreference when a
/// personal pronoun occurs; implicit coreference when the question holds
/// neither a pronoun nor any content word (e.g. "where ?").
LinguisticProfile linguistic_profile(std::span<const data::Tokens> questions);
std::string to_json(const LinguisticProfile& profile);

}  // namespace redr::eval
