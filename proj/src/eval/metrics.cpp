#include "redr/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <unordered_set>
#include <vector>

#include "redr/error.hpp"
#include "redr/log.hpp"
#include "redr/qa/oracle.hpp"

namespace redr::eval {

namespace {

NgramCounts ngrams_of(const data::Tokens& s, int n) {
  NgramCounts out;
  const auto len = static_cast<long>(s.size());
  for (long i = 0; i + n <= len; ++i) ++out[data::Tokens(s.begin() + i, s.begin() + i + n)];
  return out;
}

void require_pairs(std::size_t h, std::size_t r, const char* what) {
  if (h != r) {
    throw Error(std::string(what) + ": " + std::to_string(h) + " hypotheses but " + std::to_string(r) + " references");
  }
}

}  // namespace

BleuDetail bleu_detail(std::span<const data::Tokens> hypotheses, std::span<const data::Tokens> references) {
  require_pairs(hypotheses.size(), references.size(), "bleu");
  BleuDetail d;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    d.hypothesis_length += static_cast<long>(hypotheses[i].size());
    d.reference_length += static_cast<long>(references[i].size());
    for (int n = 1; n <= 4; ++n) {
      const NgramCounts hyp = ngrams_of(hypotheses[i], n);
      const NgramCounts ref = ngrams_of(references[i], n);
      for (const auto& [g, c] : hyp) {
        d.candidates[n - 1] += c;
        auto it = ref.find(g);
        if (it != ref.end()) d.matches[n - 1] += std::min(c, it->second);
      }
    }
  }
  if (d.hypothesis_length == 0) return d;

  const double log_len = std::log(static_cast<double>(std::max<long>(d.hypothesis_length, 2)));
  double invcnt = 1.0;
  double log_sum = 0.0;
  for (int n = 0; n < 4; ++n) {
    const double count = static_cast<double>(std::max<long>(d.candidates[n], 1));
    if (d.matches[n] == 0) {
      invcnt *= 5.0 / log_len;
      d.precisions[n] = 1.0 / (invcnt * count);
    } else {
      d.precisions[n] = static_cast<double>(d.matches[n]) / count;
    }
    log_sum += 0.25 * std::log(d.precisions[n]);
  }
  d.brevity_penalty = d.hypothesis_length > d.reference_length
                          ? 1.0
                          : std::exp(1.0 - static_cast<double>(d.reference_length) /
                                               static_cast<double>(d.hypothesis_length));
  d.score = d.brevity_penalty * std::exp(log_sum);
  return d;
}

double bleu(std::span<const data::Tokens> hypotheses, std::span<const data::Tokens> references) {
  return bleu_detail(hypotheses, references).score;
}

std::size_t lcs_length(const data::Tokens& a, const data::Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(const data::Tokens& hypothesis, const data::Tokens& reference) {
  if (reference.empty()) throw Error("rouge_l: empty reference");
  if (hypothesis.empty()) return 0.0;
  const auto lcs = static_cast<double>(lcs_length(hypothesis, reference));
  if (lcs == 0.0) return 0.0;
  const double p = lcs / static_cast<double>(hypothesis.size());
  const double r = lcs / static_cast<double>(reference.size());
  return 2.0 * p * r / (p + r);
}

double rouge_l_corpus(std::span<const data::Tokens> hypotheses, std::span<const data::Tokens> references) {
  require_pairs(hypotheses.size(), references.size(), "rouge_l");
  if (hypotheses.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) total += rouge_l(hypotheses[i], references[i]);
  return total / static_cast<double>(hypotheses.size());
}

NgramCounts count_ngrams(std::span<const data::Tokens> questions, int n) {
  if (n < 1) throw Error("n-gram order must be >= 1");
  NgramCounts out;
  for (const auto& q : questions) {
    for (auto& [g, c] : ngrams_of(q, n)) out[g] += c;
  }
  return out;
}

double dist_n(std::span<const data::Tokens> questions, int n) {
  const NgramCounts counts = count_ngrams(questions, n);
  long total = 0;
  for (const auto& [g, c] : counts) total += c;
  if (total == 0) {
    log::warn("dist-" + std::to_string(n) + ": no " + std::to_string(n) + "-grams in the question set");
    return 0.0;
  }
  return static_cast<double>(counts.size()) / static_cast<double>(total);
}

double ent_n(std::span<const data::Tokens> questions, int n) {
  const NgramCounts counts = count_ngrams(questions, n);
  long total = 0;
  for (const auto& [g, c] : counts) total += c;
  if (total == 0) return 0.0;
  double h = 0.0;
  for (const auto& [g, c] : counts) {
    const double f = static_cast<double>(c) / static_cast<double>(total);
    h -= f * std::log(f);
  }
  return h;
}

MetricReport evaluate(std::span<const data::Tokens> hypotheses, std::span<const data::Tokens> references) {
  MetricReport r;
  r.count = hypotheses.size();
  r.bleu = bleu(hypotheses, references);
  r.rouge_l = rouge_l_corpus(hypotheses, references);
  r.dist1 = dist_n(hypotheses, 1);
  r.dist2 = dist_n(hypotheses, 2);
  r.ent4 = ent_n(hypotheses, 4);
  auto tally = [&](int n, long& total, long& distinct) {
    const NgramCounts c = count_ngrams(hypotheses, n);
    distinct = static_cast<long>(c.size());
    total = 0;
    for (const auto& [g, k] : c) total += k;
  };
  tally(1, r.unigrams, r.distinct_unigrams);
  tally(2, r.bigrams, r.distinct_bigrams);
  tally(4, r.fourgrams, r.distinct_fourgrams);
  return r;
}

std::string to_json(const MetricReport& r) {
  nlohmann::ordered_json j;
  j["count"] = r.count;
  j["bleu"] = r.bleu;
  j["rouge_l"] = r.rouge_l;
  j["dist1"] = r.dist1;
  j["dist2"] = r.dist2;
  j["ent4"] = r.ent4;
  j["counts"] = {{"unigrams", r.unigrams},   {"distinct_unigrams", r.distinct_unigrams},
                 {"bigrams", r.bigrams},     {"distinct_bigrams", r.distinct_bigrams},
                 {"fourgrams", r.fourgrams}, {"distinct_fourgrams", r.distinct_fourgrams}};
  return j.dump(2);
}

namespace {

const std::unordered_set<std::string_view> kWh = {"what", "which", "when", "where", "who", "why"};
const std::unordered_set<std::string_view> kAux = {"is",    "was",   "are",  "were", "do",    "does", "did",
                                                   "can",   "could", "will", "would", "has",  "have", "had"};
const std::unordered_set<std::string_view> kPronouns = {"he",  "she", "it",   "his",  "her",
                                                        "its", "him", "they", "them", "their"};

}  // namespace

LinguisticProfile linguistic_profile(std::span<const data::Tokens> questions) {
  LinguisticProfile p;
  for (const char* t : {"what", "which", "when", "where", "who", "why", "yes-no", "other"}) p.type_fractions[t] = 0.0;
  p.count = questions.size();
  if (questions.empty()) return p;
  double length = 0.0;
  double explicit_count = 0.0;
  double implicit_count = 0.0;
  for (const auto& q : questions) {
    length += static_cast<double>(q.size());
    std::string type = "other";
    if (!q.empty()) {
      if (kWh.contains(q.front())) {
        type = q.front();
      } else if (kAux.contains(q.front())) {
        type = "yes-no";
      }
    }
    p.type_fractions[type] += 1.0;
    bool pronoun = false;
    bool content = false;
    for (const auto& t : q) {
      if (kPronouns.contains(t)) pronoun = true;
      if (!data::is_punctuation(t) && !qa::is_stopword(t) && !kWh.contains(t) && !kAux.contains(t)) content = true;
    }
    if (pronoun) explicit_count += 1.0;
    if (!pronoun && !content) implicit_count += 1.0;
  }
  const auto n = static_cast<double>(questions.size());
  for (auto& [k, v] : p.type_fractions) v /= n;
  p.mean_length = length / n;
  p.explicit_coref = explicit_count / n;
  p.implicit_coref = implicit_count / n;
  return p;
}

std::string to_json(const LinguisticProfile& p) {
  nlohmann::ordered_json j;
  j["count"] = p.count;
  j["question_types"] = p.type_fractions;
  j["mean_length"] = p.mean_length;
  j["explicit_coref"] = p.explicit_coref;
  j["implicit_coref"] = p.implicit_coref;
  return j.dump(2);
}

}  // namespace redr::eval
